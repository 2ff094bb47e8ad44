#include "socproc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "socproc/checkpoint.hpp"
#include "socproc/nn.hpp"

namespace socproc::train {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;

void check_prediction_shapes(const std::vector<pm::SeqDecoder::Output>& pred,
                             const std::vector<std::vector<Var>>& truth, bool need_std) {
  if (pred.empty() || pred.size() != truth.size())
    throw std::invalid_argument("loss: prediction/truth participant counts differ");
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].mean.empty() || pred[i].mean.size() != truth[i].size())
      throw std::invalid_argument("loss: prediction/truth step counts differ");
    if (need_std && pred[i].std.size() != pred[i].mean.size())
      throw std::invalid_argument("loss: missing predicted standard deviations");
    for (size_t t = 0; t < pred[i].mean.size(); ++t) {
      const Var& mu = pred[i].mean[t];
      const Var& y = truth[i][t];
      if (mu.rows() != y.rows() || mu.cols() != y.cols())
        throw std::invalid_argument("loss: prediction/truth shape mismatch");
      if (need_std && pred[i].std[t].value().minCoeff() <= 0.0)
        throw std::invalid_argument("loss: predicted standard deviation must be positive");
    }
  }
}

std::vector<const data::GroupSample*> pointers(const std::vector<data::GroupSample>& v) {
  std::vector<const data::GroupSample*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(&s);
  return out;
}

long lookup_frames(const std::map<std::string, long>& frames, const std::string& group,
                   ContextRegime regime) {
  if (regime != ContextRegime::kFixedInitial) return 0;
  auto it = frames.find(group);
  if (it == frames.end())
    throw std::invalid_argument("fixed-initial split: no interaction length for group " + group);
  return it->second;
}

ContextSampling sampling_for(const TrainConfig& cfg, bool training, long frames) {
  ContextSampling cs;
  cs.regime = cfg.context_regime;
  cs.training = training;
  cs.min_fraction = cfg.context_min_fraction;
  cs.max_fraction = cfg.context_max_fraction;
  cs.eval_fraction = cfg.context_fraction;
  cs.initial_fraction = cfg.initial_fraction;
  cs.interaction_frames = frames;
  return cs;
}

}  // namespace

Var gaussian_nll(const std::vector<pm::SeqDecoder::Output>& pred,
                 const std::vector<std::vector<Var>>& truth) {
  check_prediction_shapes(pred, truth, /*need_std=*/true);
  Var acc;
  for (size_t i = 0; i < pred.size(); ++i) {
    for (size_t t = 0; t < pred[i].mean.size(); ++t) {
      const Var& mu = pred[i].mean[t];
      const Var& sigma = pred[i].std[t];
      const Var& y = truth[i][t];
      Var quad = ad::div(ad::square(ad::sub(y, mu)), ad::scale(ad::square(sigma), 2.0));
      Var elem = ad::add(ad::add_scalar(ad::log_(sigma), kHalfLog2Pi), quad);
      Var per_sample = ad::rowwise_sum(elem);
      acc = acc.defined() ? ad::add(acc, per_sample) : per_sample;
    }
  }
  return ad::mean_all(acc);
}

Var kl_divergence(const pm::LatentDistribution& a, const pm::LatentDistribution& b) {
  if (!a.mean.defined() || !b.mean.defined())
    throw std::invalid_argument("kl_divergence: undefined distribution");
  if (a.mean.cols() != b.mean.cols() || a.mean.rows() != 1 || b.mean.rows() != 1)
    throw std::invalid_argument("kl_divergence: distributions must be (1, d) rows");
  if (a.std.value().minCoeff() <= 0.0 || b.std.value().minCoeff() <= 0.0)
    throw std::invalid_argument("kl_divergence: standard deviation must be positive");
  Var ratio = ad::sub(ad::log_(b.std), ad::log_(a.std));
  Var num = ad::add(ad::square(a.std), ad::square(ad::sub(a.mean, b.mean)));
  Var frac = ad::div(num, ad::scale(ad::square(b.std), 2.0));
  return ad::sum(ad::add_scalar(ad::add(ratio, frac), -0.5));
}

ElboLoss elbo_loss(const std::vector<pm::SeqDecoder::Output>& pred,
                   const std::vector<std::vector<Var>>& truth,
                   const pm::LatentDistribution& q_full,
                   const pm::LatentDistribution& q_context) {
  ElboLoss out;
  out.nll = gaussian_nll(pred, truth);
  out.kl = kl_divergence(q_full, q_context);
  out.total = ad::add(out.nll, out.kl);
  return out;
}

AuxLossParts aux_loss(const std::vector<std::vector<Var>>& forecast_means,
                      const std::vector<std::vector<Var>>& truth,
                      const Var& log_var_loc, const Var& log_var_quat) {
  if (forecast_means.empty() || forecast_means.size() != truth.size())
    throw std::invalid_argument("aux_loss: forecast/truth participant counts differ");
  if (!log_var_loc.defined() || !log_var_quat.defined() || log_var_loc.value().size() != 1 ||
      log_var_quat.value().size() != 1)
    throw std::invalid_argument("aux_loss: log-variance scalars must be 1x1");

  Var loc_col, quat_col, speak_col;
  long steps = 0;
  for (size_t i = 0; i < forecast_means.size(); ++i) {
    if (forecast_means[i].empty() || forecast_means[i].size() != truth[i].size())
      throw std::invalid_argument("aux_loss: forecast/truth step counts differ");
    if (i == 0) steps = static_cast<long>(forecast_means[i].size());
    if (static_cast<long>(forecast_means[i].size()) != steps)
      throw std::invalid_argument("aux_loss: ragged step counts");
    for (size_t t = 0; t < forecast_means[i].size(); ++t) {
      const Var& pred = forecast_means[i][t];
      const Var& y = truth[i][t];
      if (pred.rows() != y.rows() || pred.cols() != y.cols())
        throw std::invalid_argument("aux_loss: forecast/truth shape mismatch");
      if (pred.cols() != data::kFeatureDim)
        throw std::invalid_argument("aux_loss: features must be full behavior rows");

      Var diff = ad::sub(y, pred);
      Var loc;
      for (int off : {data::kHeadLocOffset, data::kBodyLocOffset}) {
        Var norm = ad::sqrt_(ad::rowwise_sum(ad::square(ad::slice_cols(diff, off, 3))));
        loc = loc.defined() ? ad::add(loc, norm) : norm;
      }
      loc_col = loc_col.defined() ? ad::add(loc_col, loc) : loc;

      Var quat;
      for (int off : {data::kHeadQuatOffset, data::kBodyQuatOffset}) {
        Var qh = ad::slice_cols(pred, off, 4);
        Var qn = ad::sqrt_(ad::rowwise_sum(ad::square(qh)));
        if (qn.value().minCoeff() < 1e-9)
          throw std::domain_error("aux_loss: predicted quaternion has vanishing norm");
        Var unit = ad::div(qh, ad::matmul(qn, Var::constant(Mat::Ones(1, 4))));
        Var res = ad::sqrt_(ad::rowwise_sum(ad::square(ad::sub(ad::slice_cols(y, off, 4), unit))));
        quat = quat.defined() ? ad::add(quat, res) : res;
      }
      quat_col = quat_col.defined() ? ad::add(quat_col, quat) : quat;

      Var p = ad::clamp(ad::slice_cols(pred, data::kSpeakingOffset, 1), 1e-6, 1.0 - 1e-6);
      Var yv = ad::slice_cols(y, data::kSpeakingOffset, 1);
      Var bce = ad::neg(ad::add(ad::mul(yv, ad::log_(p)),
                                ad::mul(ad::add_scalar(ad::neg(yv), 1.0),
                                        ad::log_(ad::add_scalar(ad::neg(p), 1.0)))));
      speak_col = speak_col.defined() ? ad::add(speak_col, bce) : bce;
    }
  }

  AuxLossParts out;
  out.location = ad::mean_all(loc_col);
  out.quaternion = ad::mean_all(quat_col);
  out.speaking = ad::mean_all(speak_col);
  const double count = static_cast<double>(forecast_means.size()) * static_cast<double>(steps);
  Var total = ad::add(ad::mul(out.location, ad::exp_(ad::neg(log_var_loc))),
                      ad::scale(log_var_loc, count));
  total = ad::add(total, ad::mul(out.quaternion, ad::exp_(ad::neg(log_var_quat))));
  total = ad::add(total, ad::scale(log_var_quat, count));
  out.total = ad::add(total, out.speaking);
  return out;
}

StepLoss compose_loss(const pm::ForwardResult& fwd, const pm::PreparedBatch& batch) {
  if (!fwd.q_full.mean.defined())
    throw std::invalid_argument("compose_loss: needs a training-mode forward result");
  StepLoss out;
  out.elbo = elbo_loss(fwd.prediction, batch.tgt_y, fwd.q_full, fwd.q_context);
  out.total = out.elbo.total;
  for (const auto& aux : fwd.aux) {
    out.aux.push_back(aux_loss(aux.forecasts, batch.ctx_y, aux.s_l, aux.s_q));
    out.total = ad::add(out.total, out.aux.back().total);
  }
  return out;
}

data::SplitBatch sample_context(const dsets::SampleBatch& batch, const ContextSampling& cs,
                                std::mt19937_64& rng) {
  const size_t n = batch.samples.size();
  if (n == 0) throw std::invalid_argument("sample_context: empty batch");
  data::SplitBatch out;
  out.group_id = batch.group_id;

  if (cs.regime == ContextRegime::kRandom) {
    if (!(cs.min_fraction >= 0.0 && cs.min_fraction <= cs.max_fraction && cs.max_fraction <= 1.0))
      throw std::invalid_argument("sample_context: bad context fraction bounds");
    double f = cs.eval_fraction;
    if (cs.training) {
      std::uniform_real_distribution<double> uni(cs.min_fraction, cs.max_fraction);
      f = uni(rng);
    }
    if (f < 0.0 || f > 1.0) throw std::invalid_argument("sample_context: bad context fraction");
    size_t k = static_cast<size_t>(std::llround(f * static_cast<double>(n)));
    k = std::min(k, n);
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<long>(k));
    for (size_t i = 0; i < k; ++i) out.context.push_back(batch.samples[idx[i]]);
    out.target = batch.samples;  // the context is a subset of the target set
    return out;
  }

  if (cs.interaction_frames <= 0)
    throw std::invalid_argument("sample_context: fixed-initial split needs interaction_frames");
  const double threshold = cs.initial_fraction * static_cast<double>(cs.interaction_frames);
  for (const auto& s : batch.samples) {
    if (s.observed.empty() || s.observed[0].timestamps.empty())
      throw std::invalid_argument("sample_context: sample has no observed timestamps");
    const double end = static_cast<double>(s.observed[0].timestamps.back());
    if (end < threshold)
      out.context.push_back(s);
    else
      out.target.push_back(s);
  }
  return out;
}

std::map<std::string, Mat> average_parameters(
    const std::vector<std::map<std::string, Mat>>& snapshots) {
  if (snapshots.empty()) throw std::invalid_argument("average_parameters: no snapshots");
  const auto& ref = snapshots.front();
  for (const auto& snap : snapshots) {
    if (snap.size() != ref.size())
      throw std::invalid_argument("average_parameters: parameter sets differ");
    for (const auto& [name, m] : snap) {
      auto it = ref.find(name);
      if (it == ref.end())
        throw std::invalid_argument("average_parameters: unknown parameter " + name);
      if (it->second.rows() != m.rows() || it->second.cols() != m.cols())
        throw std::invalid_argument("average_parameters: shape mismatch for " + name);
    }
  }
  const double inv = 1.0 / static_cast<double>(snapshots.size());
  std::map<std::string, Mat> out;
  std::vector<double> vals(snapshots.size());
  for (const auto& [name, first] : ref) {
    Mat m(first.rows(), first.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (size_t s = 0; s < snapshots.size(); ++s) vals[s] = snapshots[s].at(name)(i, j);
        m(i, j) = ad::set_sum(vals) * inv;
      }
    }
    out.emplace(name, std::move(m));
  }
  return out;
}

double validation_nll(pm::ProcessModel& model, const std::vector<dsets::SampleBatch>& batches,
                      const dsets::StandardizationStats* stats, const TrainConfig& cfg,
                      const std::map<std::string, long>& interaction_frames) {
  if (batches.empty()) throw std::invalid_argument("validation_nll: no batches");
  // A fixed stream per seed keeps the context splits identical across epochs
  // and across models trained with the same seed.
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  double weighted = 0.0;
  long targets = 0;
  for (const auto& batch : batches) {
    const long frames = lookup_frames(interaction_frames, batch.group_id, cfg.context_regime);
    auto split = sample_context(batch, sampling_for(cfg, /*training=*/false, frames), rng);
    if (split.target.empty()) continue;
    auto pb = pm::prepare_batch(pointers(split.context), pointers(split.target), stats);
    auto fwd = model.forward(pb, pm::ForwardOptions{}, rng);
    const double nll = gaussian_nll(fwd.prediction, pb.tgt_y).value()(0, 0);
    const long b = static_cast<long>(split.target.size());
    weighted += nll / static_cast<double>(model.config().t_fut) * static_cast<double>(b);
    targets += b;
  }
  if (targets == 0) throw std::runtime_error("validation_nll: every batch split to empty targets");
  return weighted / static_cast<double>(targets);
}

TrainResult train(pm::ProcessModel& model, const TrainData& data, const TrainConfig& cfg,
                  const std::filesystem::path& run_dir) {
  if (data.train_batches.empty()) throw std::invalid_argument("train: no training batches");
  if (cfg.max_epochs <= 0 || cfg.patience <= 0)
    throw std::invalid_argument("train: max_epochs and patience must be positive");
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be positive");
  // Validation falls back to the training batches when no held-out set exists.
  const auto& val_batches = data.val_batches.empty() ? data.train_batches : data.val_batches;

  std::ofstream metrics;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    metrics.open(run_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw std::runtime_error("train: cannot write metrics in " + run_dir.string());
  }

  nn::Adam adam;
  nn::AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  acfg.weight_decay = cfg.weight_decay;

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.best_val_nll = std::numeric_limits<double>::infinity();
  int stale = 0;

  std::vector<size_t> order(data.train_batches.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long steps = 0;
    for (size_t idx : order) {
      const auto& batch = data.train_batches[idx];
      const long frames = lookup_frames(data.interaction_frames, batch.group_id, cfg.context_regime);
      auto split = sample_context(batch, sampling_for(cfg, /*training=*/true, frames), rng);
      if (split.target.empty()) continue;
      auto pb = pm::prepare_batch(pointers(split.context), pointers(split.target), data.stats);
      pm::ForwardOptions opts;
      opts.training = true;
      opts.sample_z = true;
      opts.teacher_forcing = cfg.teacher_forcing;
      auto fwd = model.forward(pb, opts, rng);
      auto loss = compose_loss(fwd, pb);
      const double v = loss.total.value()(0, 0);
      if (!std::isfinite(v))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " on group " + batch.group_id + " (batch index " +
                                 std::to_string(idx) + ")");
      model.params().zero_grads();
      ad::backward(loss.total);
      adam.step(model.params(), acfg);
      loss_sum += v;
      ++steps;
    }

    const double val =
        validation_nll(model, val_batches, data.stats, cfg, data.interaction_frames);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
    rec.val_nll = val;
    rec.seconds = secs;
    result.history.push_back(rec);
    if (metrics.is_open()) {
      metrics << nlohmann::json{{"epoch", rec.epoch},
                                {"train_loss", rec.train_loss},
                                {"val_nll", rec.val_nll},
                                {"seconds", rec.seconds}}
                     .dump()
              << "\n";
      metrics.flush();
    }

    BestSnapshot snap;
    snap.val_nll = val;
    snap.epoch = epoch;
    snap.parameters = ckpt::extract_parameters(model);
    auto pos = std::upper_bound(result.best.begin(), result.best.end(), snap,
                                [](const BestSnapshot& a, const BestSnapshot& b) {
                                  return a.val_nll < b.val_nll;
                                });
    result.best.insert(pos, std::move(snap));
    if (result.best.size() > 5) result.best.pop_back();

    if (val < result.best_val_nll) {
      result.best_val_nll = val;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }

  std::vector<std::map<std::string, Mat>> maps;
  maps.reserve(result.best.size());
  for (const auto& snap : result.best) maps.push_back(snap.parameters);
  result.averaged = average_parameters(maps);

  if (!run_dir.empty()) {
    ckpt::Checkpoint c;
    c.config = model.config();
    if (data.stats) c.stats = *data.stats;
    for (size_t k = 0; k < result.best.size(); ++k) {
      c.parameters = result.best[k].parameters;
      c.metrics = {{"val_nll", result.best[k].val_nll},
                   {"epoch", static_cast<double>(result.best[k].epoch)}};
      ckpt::save_checkpoint(run_dir / ("ckpt_best_" + std::to_string(k + 1) + ".bin"), c);
    }
    c.parameters = result.averaged;
    c.metrics = {{"val_nll", result.best_val_nll},
                 {"epoch", static_cast<double>(result.best_epoch)}};
    ckpt::save_checkpoint(run_dir / "ckpt_averaged.bin", c);
  }
  return result;
}

CvOutcome cross_validate(const std::vector<CvCandidate>& candidates,
                         const std::vector<dsets::SampleBatch>& batches, int folds,
                         const dsets::StandardizationStats* stats) {
  if (candidates.empty()) throw std::invalid_argument("cross_validate: no candidates");
  if (folds < 2) throw std::invalid_argument("cross_validate: need at least two folds");
  std::set<std::string> group_set;
  for (const auto& b : batches) group_set.insert(b.group_id);
  if (static_cast<int>(group_set.size()) < folds)
    throw std::invalid_argument("cross_validate: fewer groups than folds");

  CvOutcome out;
  out.fold_groups.assign(static_cast<size_t>(folds), {});
  size_t gi = 0;
  for (const auto& g : group_set) out.fold_groups[gi++ % static_cast<size_t>(folds)].push_back(g);

  for (const auto& cand : candidates) {
    std::vector<double> fold_nll;
    for (int f = 0; f < folds; ++f) {
      const auto& held = out.fold_groups[static_cast<size_t>(f)];
      auto in_fold = [&held](const std::string& g) {
        return std::find(held.begin(), held.end(), g) != held.end();
      };
      TrainData data;
      data.stats = stats;
      for (const auto& b : batches)
        (in_fold(b.group_id) ? data.val_batches : data.train_batches).push_back(b);
      pm::ProcessModel model(cand.model, cand.train.seed + static_cast<uint64_t>(f));
      auto result = train(model, data, cand.train);
      fold_nll.push_back(result.best_val_nll);
    }
    const double mean = std::accumulate(fold_nll.begin(), fold_nll.end(), 0.0) /
                        static_cast<double>(fold_nll.size());
    out.fold_val_nll.push_back(std::move(fold_nll));
    out.mean_val_nll.push_back(mean);
  }
  out.best_index = static_cast<size_t>(
      std::min_element(out.mean_val_nll.begin(), out.mean_val_nll.end()) -
      out.mean_val_nll.begin());
  return out;
}

}  // namespace socproc::train
