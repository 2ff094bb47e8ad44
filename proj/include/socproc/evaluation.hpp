#pragma once
// Forecast quality metrics: per-sequence negative log likelihood, location
// MSE, orientation MAE, speaking accuracy, aggregate summaries and
// per-timestep curves. All metrics are computed on destandardized values.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "socproc/datasets.hpp"
#include "socproc/process_model.hpp"
#include "socproc/training.hpp"

namespace socproc::eval {

using Mat = Eigen::MatrixXd;

struct SequenceMetrics {
  double nll = 0.0;
  double head_loc_mse = 0.0;  // squared centimeters
  double body_loc_mse = 0.0;
  double head_ori_mae = 0.0;  // degrees, in [0, 180]
  double body_ori_mae = 0.0;
  double speaking_acc = 0.0;  // fraction in [0, 1]
};

// Plain-value forecast for one sequence: per participant, a (t_fut, D)
// matrix of predicted means and one of predicted standard deviations.
struct SequencePrediction {
  std::vector<Mat> mean;
  std::vector<Mat> std;
};

// Gaussian negative log likelihood summed over feature dimensions and
// participants, averaged over future steps. Participant order cannot change
// the result. Throws on non-positive stds or shape mismatches.
double nll(const SequencePrediction& pred, const std::vector<Mat>& truth);

// Undoes training standardization on a forecast: location means are mapped
// back to raw units and location stds are scaled by the same factor;
// quaternion and speaking dimensions pass through.
SequencePrediction destandardize_prediction(const dsets::StandardizationStats& stats,
                                            SequencePrediction pred);

// Location, orientation and speaking errors of the predicted means. A
// predicted quaternion with norm below 1e-9 scores the maximal 180 degrees
// instead of aborting. The nll field of the result is left at zero.
SequenceMetrics mean_errors(const SequencePrediction& pred, const std::vector<Mat>& truth);

// All metrics for one sequence.
SequenceMetrics score_sequence(const SequencePrediction& pred, const std::vector<Mat>& truth);

struct SequenceRecord {
  std::string group_id;
  SequencePrediction prediction;  // destandardized
  std::vector<Mat> truth;         // raw future rows per participant
  SequenceMetrics metrics;
};

struct EvaluationSummary {
  std::vector<SequenceRecord> sequences;
  SequenceMetrics mean;
  SequenceMetrics stddev;  // population standard deviation over sequences
};

// Per-step metric curves averaged over sequences. Sequences of different
// future lengths are grouped by length and reported per group.
struct TimestepReport {
  int t_fut = 0;
  long sequences = 0;
  std::vector<double> nll;
  std::vector<double> head_loc_mse;
  std::vector<double> body_loc_mse;
  std::vector<double> head_ori_mae;
  std::vector<double> body_ori_mae;
  std::vector<double> speaking_acc;
};

std::vector<TimestepReport> per_timestep_report(const std::vector<SequenceRecord>& records);

struct EvaluationConfig {
  train::ContextRegime regime = train::ContextRegime::kRandom;
  double context_fraction = 0.5;
  double initial_fraction = 0.2;
  int batch_size = 128;  // used by callers when building batches
  unsigned long long seed = 0;
};

// Scores a model on pre-split batches: forward passes use the posterior mean
// of q(z | context), predictions are destandardized against the given stats,
// and truths are taken from the raw target windows.
EvaluationSummary evaluate_splits(const pm::ProcessModel& model,
                                  const std::vector<data::SplitBatch>& splits,
                                  const dsets::StandardizationStats* stats);

// Splits every batch with the configured regime and scores the targets. The
// context draws depend only on cfg.seed and the batch order, so two models
// evaluated back to back see identical splits.
EvaluationSummary evaluate(const pm::ProcessModel& model,
                           const std::vector<dsets::SampleBatch>& batches,
                           const dsets::StandardizationStats* stats, const EvaluationConfig& cfg,
                           const std::map<std::string, long>& interaction_frames = {});

// Reporting helpers shared with the command-line front end. The summary
// table prints mean (std) rows and both MSE and RMSE location columns.
std::string format_summary_table(const EvaluationSummary& summary);
void write_sequence_records(std::ostream& os, const EvaluationSummary& summary);
void write_timestep_records(std::ostream& os, const std::vector<TimestepReport>& reports);

}  // namespace socproc::eval
