#include "socproc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "socproc/geometry.hpp"

namespace socproc::eval {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;

void check_pair(const SequencePrediction& pred, const std::vector<Mat>& truth) {
  if (pred.mean.empty() || pred.mean.size() != truth.size())
    throw std::invalid_argument("metrics: prediction/truth participant counts differ");
  for (size_t i = 0; i < pred.mean.size(); ++i) {
    if (pred.mean[i].rows() != truth[i].rows() || pred.mean[i].cols() != truth[i].cols())
      throw std::invalid_argument("metrics: prediction/truth shape mismatch");
    if (pred.mean[i].rows() != pred.mean[0].rows())
      throw std::invalid_argument("metrics: ragged step counts");
  }
}

void check_stds(const SequencePrediction& pred) {
  if (pred.std.size() != pred.mean.size())
    throw std::invalid_argument("metrics: missing predicted standard deviations");
  for (size_t i = 0; i < pred.mean.size(); ++i) {
    if (pred.std[i].rows() != pred.mean[i].rows() || pred.std[i].cols() != pred.mean[i].cols())
      throw std::invalid_argument("metrics: std/mean shape mismatch");
    if (pred.std[i].minCoeff() <= 0.0)
      throw std::invalid_argument("metrics: predicted standard deviation must be positive");
  }
}

// NLL of one future step: feature-dim sums per participant combined with the
// order-canonical reduction, so participant order cannot move the result.
double step_nll(const SequencePrediction& pred, const std::vector<Mat>& truth, Eigen::Index t) {
  std::vector<double> per_participant;
  per_participant.reserve(pred.mean.size());
  for (size_t i = 0; i < pred.mean.size(); ++i) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < pred.mean[i].cols(); ++d) {
      const double mu = pred.mean[i](t, d);
      const double sd = pred.std[i](t, d);
      const double y = truth[i](t, d);
      s += kHalfLog2Pi + std::log(sd) + (y - mu) * (y - mu) / (2.0 * sd * sd);
    }
    per_participant.push_back(s);
  }
  return ad::set_sum(std::move(per_participant));
}

geom::Quaternion quat_at(const Mat& rows, Eigen::Index t, int offset) {
  return {rows(t, offset), rows(t, offset + 1), rows(t, offset + 2), rows(t, offset + 3)};
}

double quat_error_deg(const Mat& pred, const Mat& truth, Eigen::Index t, int offset) {
  const geom::Quaternion p = quat_at(pred, t, offset);
  if (geom::norm(p) < 1e-9) return 180.0;  // degenerate forecast, maximal error
  return geom::geodesic_angle_deg(quat_at(truth, t, offset), p);
}

double sq_loc_dist(const Mat& pred, const Mat& truth, Eigen::Index t, int offset) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double e = truth(t, offset + d) - pred(t, offset + d);
    s += e * e;
  }
  return s;
}

// Mean over an unordered collection of per-(participant, step) terms.
double set_mean(std::vector<double> terms) {
  const double n = static_cast<double>(terms.size());
  return ad::set_sum(std::move(terms)) / n;
}

struct ErrorTerms {
  std::vector<double> head_loc, body_loc, head_ori, body_ori, speak_hits;
};

ErrorTerms error_terms(const SequencePrediction& pred, const std::vector<Mat>& truth,
                       Eigen::Index t_only = -1) {
  ErrorTerms terms;
  for (size_t i = 0; i < pred.mean.size(); ++i) {
    const Mat& p = pred.mean[i];
    const Mat& y = truth[i];
    if (p.cols() != data::kFeatureDim)
      throw std::invalid_argument("metrics: features must be full behavior rows");
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
      if (t_only >= 0 && t != t_only) continue;
      terms.head_loc.push_back(sq_loc_dist(p, y, t, data::kHeadLocOffset));
      terms.body_loc.push_back(sq_loc_dist(p, y, t, data::kBodyLocOffset));
      terms.head_ori.push_back(quat_error_deg(p, y, t, data::kHeadQuatOffset));
      terms.body_ori.push_back(quat_error_deg(p, y, t, data::kBodyQuatOffset));
      const bool said = p(t, data::kSpeakingOffset) >= 0.5;
      const bool truly = y(t, data::kSpeakingOffset) >= 0.5;
      terms.speak_hits.push_back(said == truly ? 1.0 : 0.0);
    }
  }
  return terms;
}

SequenceMetrics metrics_from_terms(ErrorTerms terms) {
  SequenceMetrics m;
  m.head_loc_mse = set_mean(std::move(terms.head_loc));
  m.body_loc_mse = set_mean(std::move(terms.body_loc));
  m.head_ori_mae = set_mean(std::move(terms.head_ori));
  m.body_ori_mae = set_mean(std::move(terms.body_ori));
  m.speaking_acc = set_mean(std::move(terms.speak_hits));
  return m;
}

struct Welford {
  double sum = 0.0, sum_sq = 0.0;
  long n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  double stddev() const {
    if (n == 0) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - m * m));
  }
};

std::vector<const data::GroupSample*> pointers(const std::vector<data::GroupSample>& v) {
  std::vector<const data::GroupSample*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(&s);
  return out;
}

}  // namespace

double nll(const SequencePrediction& pred, const std::vector<Mat>& truth) {
  check_pair(pred, truth);
  check_stds(pred);
  const Eigen::Index steps = pred.mean[0].rows();
  if (steps == 0) throw std::invalid_argument("metrics: empty forecast");
  double total = 0.0;
  for (Eigen::Index t = 0; t < steps; ++t) total += step_nll(pred, truth, t);
  return total / static_cast<double>(steps);
}

SequencePrediction destandardize_prediction(const dsets::StandardizationStats& stats,
                                            SequencePrediction pred) {
  for (const auto& m : pred.mean)
    if (m.cols() != stats.feature_dim)
      throw std::invalid_argument("destandardize: stats cover a different feature layout");
  for (auto& m : pred.mean) dsets::destandardize_rows(stats, m);
  for (auto& s : pred.std) dsets::destandardize_std_rows(stats, s);
  return pred;
}

SequenceMetrics mean_errors(const SequencePrediction& pred, const std::vector<Mat>& truth) {
  check_pair(pred, truth);
  return metrics_from_terms(error_terms(pred, truth));
}

SequenceMetrics score_sequence(const SequencePrediction& pred, const std::vector<Mat>& truth) {
  SequenceMetrics m = mean_errors(pred, truth);
  m.nll = nll(pred, truth);
  return m;
}

std::vector<TimestepReport> per_timestep_report(const std::vector<SequenceRecord>& records) {
  std::map<int, std::vector<const SequenceRecord*>> by_length;
  for (const auto& r : records) {
    if (r.prediction.mean.empty()) throw std::invalid_argument("report: empty prediction");
    by_length[static_cast<int>(r.prediction.mean[0].rows())].push_back(&r);
  }
  std::vector<TimestepReport> out;
  for (const auto& [t_fut, group] : by_length) {
    TimestepReport rep;
    rep.t_fut = t_fut;
    rep.sequences = static_cast<long>(group.size());
    const bool behavior_rows = group[0]->prediction.mean[0].cols() == data::kFeatureDim;
    for (int t = 0; t < t_fut; ++t) {
      Welford w_nll, w_hl, w_bl, w_ho, w_bo, w_sp;
      for (const auto* r : group) {
        w_nll.add(step_nll(r->prediction, r->truth, t));
        if (!behavior_rows) continue;
        const SequenceMetrics m = metrics_from_terms(error_terms(r->prediction, r->truth, t));
        w_hl.add(m.head_loc_mse);
        w_bl.add(m.body_loc_mse);
        w_ho.add(m.head_ori_mae);
        w_bo.add(m.body_ori_mae);
        w_sp.add(m.speaking_acc);
      }
      rep.nll.push_back(w_nll.mean());
      if (!behavior_rows) continue;  // other layouts carry the NLL curve only
      rep.head_loc_mse.push_back(w_hl.mean());
      rep.body_loc_mse.push_back(w_bl.mean());
      rep.head_ori_mae.push_back(w_ho.mean());
      rep.body_ori_mae.push_back(w_bo.mean());
      rep.speaking_acc.push_back(w_sp.mean());
    }
    out.push_back(std::move(rep));
  }
  return out;
}

EvaluationSummary evaluate_splits(const pm::ProcessModel& model,
                                  const std::vector<data::SplitBatch>& splits,
                                  const dsets::StandardizationStats* stats) {
  EvaluationSummary out;
  std::mt19937_64 rng(0);  // evaluation forwards draw nothing from it
  const int t_fut = model.config().t_fut;
  for (const auto& split : splits) {
    if (split.target.empty()) continue;
    auto pb = pm::prepare_batch(pointers(split.context), pointers(split.target), stats);
    auto fwd = model.forward(pb, pm::ForwardOptions{}, rng);
    const long b_count = static_cast<long>(split.target.size());
    for (long b = 0; b < b_count; ++b) {
      SequenceRecord rec;
      rec.group_id = split.group_id;
      for (int i = 0; i < pb.n; ++i) {
        Mat mean(t_fut, model.config().feature_dim);
        Mat std_m(t_fut, model.config().feature_dim);
        for (int t = 0; t < t_fut; ++t) {
          mean.row(t) = fwd.prediction[static_cast<size_t>(i)].mean[static_cast<size_t>(t)]
                            .value()
                            .row(b);
          std_m.row(t) = fwd.prediction[static_cast<size_t>(i)].std[static_cast<size_t>(t)]
                             .value()
                             .row(b);
        }
        rec.prediction.mean.push_back(std::move(mean));
        rec.prediction.std.push_back(std::move(std_m));
        rec.truth.push_back(split.target[static_cast<size_t>(b)].future[static_cast<size_t>(i)].steps);
      }
      if (stats) rec.prediction = destandardize_prediction(*stats, std::move(rec.prediction));
      // Location/orientation/speaking errors only exist for full behavior
      // rows; other layouts (e.g. the scalar toy task) score NLL alone.
      if (model.config().feature_dim == data::kFeatureDim) {
        rec.metrics = score_sequence(rec.prediction, rec.truth);
      } else {
        rec.metrics.nll = nll(rec.prediction, rec.truth);
      }
      out.sequences.push_back(std::move(rec));
    }
  }

  Welford w_nll, w_hl, w_bl, w_ho, w_bo, w_sp;
  for (const auto& r : out.sequences) {
    w_nll.add(r.metrics.nll);
    w_hl.add(r.metrics.head_loc_mse);
    w_bl.add(r.metrics.body_loc_mse);
    w_ho.add(r.metrics.head_ori_mae);
    w_bo.add(r.metrics.body_ori_mae);
    w_sp.add(r.metrics.speaking_acc);
  }
  out.mean = {w_nll.mean(), w_hl.mean(), w_bl.mean(), w_ho.mean(), w_bo.mean(), w_sp.mean()};
  out.stddev = {w_nll.stddev(), w_hl.stddev(), w_bl.stddev(),
                w_ho.stddev(), w_bo.stddev(), w_sp.stddev()};
  return out;
}

EvaluationSummary evaluate(const pm::ProcessModel& model,
                           const std::vector<dsets::SampleBatch>& batches,
                           const dsets::StandardizationStats* stats, const EvaluationConfig& cfg,
                           const std::map<std::string, long>& interaction_frames) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<data::SplitBatch> splits;
  for (const auto& batch : batches) {
    train::ContextSampling cs;
    cs.regime = cfg.regime;
    cs.training = false;
    cs.eval_fraction = cfg.context_fraction;
    cs.initial_fraction = cfg.initial_fraction;
    if (cfg.regime == train::ContextRegime::kFixedInitial) {
      auto it = interaction_frames.find(batch.group_id);
      if (it == interaction_frames.end())
        throw std::invalid_argument("evaluate: no interaction length for group " +
                                    batch.group_id);
      cs.interaction_frames = it->second;
    }
    splits.push_back(train::sample_context(batch, cs, rng));
  }
  return evaluate_splits(model, splits, stats);
}

std::string format_summary_table(const EvaluationSummary& summary) {
  struct Row {
    const char* name;
    double mean, std;
  };
  auto rmse_stats = [&summary](bool head) {
    Welford w;
    for (const auto& r : summary.sequences)
      w.add(std::sqrt(head ? r.metrics.head_loc_mse : r.metrics.body_loc_mse));
    return std::pair<double, double>{w.mean(), w.stddev()};
  };
  const auto [h_rmse, h_rmse_sd] = rmse_stats(true);
  const auto [b_rmse, b_rmse_sd] = rmse_stats(false);
  const Row rows[] = {
      {"nll", summary.mean.nll, summary.stddev.nll},
      {"head_loc_mse", summary.mean.head_loc_mse, summary.stddev.head_loc_mse},
      {"head_loc_rmse", h_rmse, h_rmse_sd},
      {"body_loc_mse", summary.mean.body_loc_mse, summary.stddev.body_loc_mse},
      {"body_loc_rmse", b_rmse, b_rmse_sd},
      {"head_ori_mae_deg", summary.mean.head_ori_mae, summary.stddev.head_ori_mae},
      {"body_ori_mae_deg", summary.mean.body_ori_mae, summary.stddev.body_ori_mae},
      {"speaking_acc", summary.mean.speaking_acc, summary.stddev.speaking_acc},
  };
  std::ostringstream os;
  os << "metric\tmean (std)\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) os << r.name << "\t" << r.mean << " (" << r.std << ")\n";
  os << "sequences\t" << summary.sequences.size() << "\n";
  return os.str();
}

void write_sequence_records(std::ostream& os, const EvaluationSummary& summary) {
  for (const auto& r : summary.sequences) {
    os << nlohmann::json{{"group_id", r.group_id},
                         {"nll", r.metrics.nll},
                         {"head_loc_mse", r.metrics.head_loc_mse},
                         {"body_loc_mse", r.metrics.body_loc_mse},
                         {"head_ori_mae_deg", r.metrics.head_ori_mae},
                         {"body_ori_mae_deg", r.metrics.body_ori_mae},
                         {"speaking_acc", r.metrics.speaking_acc}}
              .dump()
       << "\n";
  }
}

void write_timestep_records(std::ostream& os, const std::vector<TimestepReport>& reports) {
  for (const auto& rep : reports) {
    auto emit = [&](const char* metric, const std::vector<double>& curve) {
      for (size_t t = 0; t < curve.size(); ++t)
        os << nlohmann::json{{"metric", metric},
                             {"t_fut", rep.t_fut},
                             {"step", t},
                             {"value", curve[t]}}
                  .dump()
           << "\n";
    };
    emit("nll", rep.nll);
    emit("head_loc_mse", rep.head_loc_mse);
    emit("body_loc_mse", rep.body_loc_mse);
    emit("head_ori_mae_deg", rep.head_ori_mae);
    emit("body_ori_mae_deg", rep.body_ori_mae);
    emit("speaking_acc", rep.speaking_acc);
  }
}

}  // namespace socproc::eval
