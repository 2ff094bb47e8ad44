#pragma once
// Training: losses over decoder outputs, context/target splitting, the Adam
// training loop with early stopping and best-checkpoint retention, parameter
// averaging, and group-level cross validation.

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "socproc/ad.hpp"
#include "socproc/datasets.hpp"
#include "socproc/process_model.hpp"

namespace socproc::train {

using ad::Mat;
using ad::Var;

// Negative Gaussian log density of the truth under the predicted per-step
// diagonal Gaussians, summed over features, steps and participants, then
// averaged over the batch. Throws if any predicted std is not positive.
Var gaussian_nll(const std::vector<pm::SeqDecoder::Output>& pred,
                 const std::vector<std::vector<Var>>& truth);

// KL(a || b) for diagonal Gaussians given as (1, d) mean and std rows.
Var kl_divergence(const pm::LatentDistribution& a, const pm::LatentDistribution& b);

struct ElboLoss {
  Var nll;    // reconstruction term
  Var kl;     // KL(q_full || q_context)
  Var total;  // nll + kl, the negative evidence lower bound
};

ElboLoss elbo_loss(const std::vector<pm::SeqDecoder::Output>& pred,
                   const std::vector<std::vector<Var>>& truth,
                   const pm::LatentDistribution& q_full,
                   const pm::LatentDistribution& q_context);

// Deterministic-decoding loss over context forecasts. Per participant and
// step: Euclidean head and body location errors, unit-quaternion residuals
// after normalizing the predicted quaternions, and a binary cross entropy on
// the speaking dimension (predicted mean clamped to [1e-6, 1 - 1e-6]).
// location / quaternion / speaking hold the batch-mean sums of those terms;
// total = location * exp(-log_var_loc) + count * log_var_loc
//       + quaternion * exp(-log_var_quat) + count * log_var_quat + speaking
// where count is participants * steps. A predicted quaternion with norm
// below 1e-9 raises std::domain_error.
struct AuxLossParts {
  Var location;
  Var quaternion;
  Var speaking;
  Var total;
};

AuxLossParts aux_loss(const std::vector<std::vector<Var>>& forecast_means,
                      const std::vector<std::vector<Var>>& truth,
                      const Var& log_var_loc, const Var& log_var_quat);

// Full training objective for one forward pass: negative ELBO plus one
// auxiliary loss per deterministic-decoding head. With no auxiliary heads
// the total is exactly the negative ELBO.
struct StepLoss {
  ElboLoss elbo;
  std::vector<AuxLossParts> aux;
  Var total;
};

StepLoss compose_loss(const pm::ForwardResult& fwd, const pm::PreparedBatch& batch);

enum class ContextRegime { kRandom, kFixedInitial };

struct ContextSampling {
  ContextRegime regime = ContextRegime::kRandom;
  bool training = false;
  // Random regime, training: the context fraction is drawn uniformly from
  // [min_fraction, max_fraction] each call. Evaluation uses eval_fraction.
  double min_fraction = 0.2;
  double max_fraction = 0.8;
  double eval_fraction = 0.5;
  // Fixed-initial regime: samples whose observed window ends within the
  // first initial_fraction of the interaction become context, the rest the
  // target set. interaction_frames must be the recording length in frames.
  double initial_fraction = 0.2;
  long interaction_frames = 0;
};

// Splits one batch into context and target sets. In the random regime the
// target set is the whole batch and the context is a random subset (possibly
// empty); in the fixed-initial regime the two sets are disjoint.
data::SplitBatch sample_context(const dsets::SampleBatch& batch, const ContextSampling& cs,
                                std::mt19937_64& rng);

struct TrainConfig {
  int batch_size = 32;  // recorded for run snapshots; batches arrive prebuilt
  double learning_rate = 3e-5;
  double weight_decay = 5e-4;
  double dropout = 0.25;  // applied via the model config by the run setup
  ContextRegime context_regime = ContextRegime::kRandom;
  double context_min_fraction = 0.2;
  double context_max_fraction = 0.8;
  double context_fraction = 0.5;  // evaluation-split context fraction
  double initial_fraction = 0.2;
  int max_epochs = 100;
  int patience = 10;  // epochs without val improvement before stopping
  bool teacher_forcing = true;
  unsigned long long seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean composed loss over the epoch's batches
  double val_nll = 0.0;     // per-step validation NLL, standardized scale
  double seconds = 0.0;
};

struct BestSnapshot {
  double val_nll = 0.0;
  int epoch = 0;
  std::map<std::string, Mat> parameters;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_nll = 0.0;
  bool early_stopped = false;
  std::vector<BestSnapshot> best;       // ascending val NLL, at most five
  std::map<std::string, Mat> averaged;  // elementwise mean of `best`
};

struct TrainData {
  std::vector<dsets::SampleBatch> train_batches;
  std::vector<dsets::SampleBatch> val_batches;
  const dsets::StandardizationStats* stats = nullptr;
  // Recording length per group id, required by the fixed-initial regime.
  std::map<std::string, long> interaction_frames;
};

// Runs the full loop: shuffled batches, Adam updates, one validation pass
// per epoch with splits that are identical across epochs and across models
// under the same seed. When run_dir is non-empty, writes metrics.jsonl (one
// JSON record per epoch), the five best checkpoints and the averaged one.
// A non-finite loss aborts with the offending group id and batch index.
TrainResult train(pm::ProcessModel& model, const TrainData& data, const TrainConfig& cfg,
                  const std::filesystem::path& run_dir = {});

// Elementwise mean over parameter snapshots. The result is bit-identical
// under any reordering of the snapshots. Mismatched names or shapes throw.
std::map<std::string, Mat> average_parameters(
    const std::vector<std::map<std::string, Mat>>& snapshots);

// Validation NLL of the model on the given batches, using evaluation-style
// context splits drawn from the given seed: per-step, standardized scale,
// averaged over target samples.
double validation_nll(pm::ProcessModel& model, const std::vector<dsets::SampleBatch>& batches,
                      const dsets::StandardizationStats* stats, const TrainConfig& cfg,
                      const std::map<std::string, long>& interaction_frames);

struct CvCandidate {
  std::string tag;
  pm::ModelConfig model;
  TrainConfig train;
};

struct CvOutcome {
  std::size_t best_index = 0;
  std::vector<double> mean_val_nll;                   // one per candidate
  std::vector<std::vector<double>> fold_val_nll;      // [candidate][fold]
  std::vector<std::vector<std::string>> fold_groups;  // fold -> held-out groups
};

// K-fold model selection where folds partition recording groups, never
// individual samples, so no group leaks between train and validation.
// Requires at least `folds` distinct groups.
CvOutcome cross_validate(const std::vector<CvCandidate>& candidates,
                         const std::vector<dsets::SampleBatch>& batches, int folds,
                         const dsets::StandardizationStats* stats = nullptr);

}  // namespace socproc::train
