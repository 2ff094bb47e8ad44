#include "socproc/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace socproc::enc {

Mat offset_encoding(long dt, int d_e) {
  if (d_e <= 0 || d_e % 2 != 0)
    throw std::invalid_argument("offset_encoding: dimension must be even");
  if (dt < 0) throw std::invalid_argument("offset_encoding: negative offset");
  Mat out(1, d_e);
  for (int m = 0; m < d_e / 2; ++m) {
    const double freq =
        std::pow(10000.0, (2.0 * m) / static_cast<double>(d_e));
    const double angle = static_cast<double>(dt) / freq;
    out(0, 2 * m) = std::sin(angle);
    out(0, 2 * m + 1) = std::cos(angle);
  }
  return out;
}

Mat offset_rows(const std::vector<long>& dts, int d_e) {
  Mat out(static_cast<Eigen::Index>(dts.size()), d_e);
  for (size_t b = 0; b < dts.size(); ++b)
    out.row(static_cast<Eigen::Index>(b)) = offset_encoding(dts[b], d_e).row(0);
  return out;
}

Mat batch_relative_cues(const Mat& focal, const Mat& partner) {
  if (focal.cols() != data::kFeatureDim || partner.cols() != data::kFeatureDim ||
      focal.rows() != partner.rows())
    throw std::invalid_argument("batch_relative_cues: expected matching (B, 15)");
  Mat out(focal.rows(), data::kFeatureDim);
  for (Eigen::Index r = 0; r < focal.rows(); ++r) {
    const data::BehaviorVector self = data::unflatten(focal.row(r).transpose());
    const data::BehaviorVector other =
        data::unflatten(partner.row(r).transpose());
    const geom::RelativeCue head =
        geom::relative_cue(self.head, self.speaking, other.head, other.speaking);
    const geom::RelativeCue body =
        geom::relative_cue(self.body, self.speaking, other.body, other.speaking);
    data::BehaviorVector cue;
    cue.head.location = head.l_rel;
    cue.head.orientation = head.q_rel;
    cue.body.location = body.l_rel;
    cue.body.orientation = body.q_rel;
    cue.speaking = static_cast<double>(head.s_rel);
    out.row(r) = data::flatten(cue).transpose();
  }
  return out;
}

SequenceEncoder::SequenceEncoder(nn::ParamSet& ps, const std::string& prefix,
                                 EncoderKind kind, int in_dim, int hidden,
                                 int d_e, int layers, int fixed_steps,
                                 double dropout, bool expose_states,
                                 std::mt19937_64& rng)
    : kind_(kind),
      in_dim_(in_dim),
      hidden_(hidden),
      fixed_steps_(fixed_steps),
      expose_states_(expose_states) {
  if (kind == EncoderKind::kMLP) {
    if (fixed_steps < 1)
      throw std::invalid_argument(prefix + ": MLP encoder needs a step count");
    trunk_ = nn::MLP(ps, prefix + ".trunk", in_dim * fixed_steps, hidden,
                     hidden, layers, rng, dropout);
    if (expose_states)
      step_embed_ = nn::Linear(ps, prefix + ".embed", in_dim, hidden, rng);
  } else {
    if (layers < 1)
      throw std::invalid_argument(prefix + ": recurrent layers < 1");
    for (int l = 0; l < layers; ++l)
      cells_.emplace_back(ps, prefix + ".gru" + std::to_string(l),
                          l == 0 ? in_dim : hidden, hidden, rng);
  }
  proj_ = nn::Linear(ps, prefix + ".proj", hidden, d_e, rng);
}

EncodeResult SequenceEncoder::forward(const std::vector<Var>& steps,
                                      bool training,
                                      std::mt19937_64& rng) const {
  if (steps.empty())
    throw std::invalid_argument("SequenceEncoder: empty sequence");
  EncodeResult out;
  if (kind_ == EncoderKind::kMLP) {
    if (static_cast<int>(steps.size()) != fixed_steps_)
      throw std::invalid_argument("SequenceEncoder: window length " +
                                  std::to_string(steps.size()) +
                                  " does not match the configured " +
                                  std::to_string(fixed_steps_));
    Var feat = ad::relu(trunk_.forward(ad::concat_cols(steps), training, rng));
    out.e = proj_(feat);
    if (expose_states_) {
      out.states.reserve(steps.size());
      for (const Var& x : steps) out.states.push_back(step_embed_(x));
    }
  } else {
    std::vector<Var> h;
    h.reserve(cells_.size());
    for (const auto& cell : cells_)
      h.push_back(cell.zero_state(steps[0].rows()));
    out.states.reserve(steps.size());
    for (const Var& x : steps) {
      Var below = x;
      for (size_t l = 0; l < cells_.size(); ++l) {
        h[l] = cells_[l].step(below, h[l]);
        below = h[l];
      }
      out.states.push_back(h.back());
    }
    out.e = proj_(h.back());
    if (!expose_states_) out.states.clear();
  }
  return out;
}

SocialEncoder::SocialEncoder(nn::ParamSet& ps, const std::string& prefix,
                             const SocialEncoderConfig& cfg,
                             std::mt19937_64& rng)
    : cfg_(cfg) {
  f_self_ = SequenceEncoder(ps, prefix + ".self", cfg.kind, cfg.feature_dim,
                            cfg.hidden, cfg.d_e, cfg.layers, cfg.steps,
                            cfg.dropout, /*expose_states=*/!cfg.no_pool, rng);
  if (!cfg.no_pool) {
    if (cfg.feature_dim != data::kFeatureDim)
      throw std::invalid_argument(
          prefix + ": partner pooling requires the 15-dim pose layout");
    embedder_ = nn::MLP(ps, prefix + ".cue", cfg.feature_dim, cfg.pooler_hidden,
                        cfg.pooler_hidden, cfg.pooler_layers, rng, cfg.dropout);
    pre_pooler_ =
        nn::MLP(ps, prefix + ".pool", cfg.pooler_hidden + cfg.hidden,
                cfg.pooler_hidden, cfg.pooler_out, cfg.pooler_layers, rng,
                cfg.dropout);
    const int partner_steps = cfg.pool_final_only ? 1 : cfg.steps;
    f_partner_ = SequenceEncoder(ps, prefix + ".partner", cfg.kind,
                                 cfg.pooler_out, cfg.hidden, cfg.d_e,
                                 cfg.layers, partner_steps, cfg.dropout,
                                 /*expose_states=*/false, rng);
  }
  const double bound = 1.0 / std::sqrt(2.0 * cfg.d_e);
  W_ = ps.create(prefix + ".W", 2 * cfg.d_e, cfg.d_e, bound, rng);
}

std::vector<Var> SocialEncoder::pool_partners(
    const std::vector<std::vector<Var>>& seqs,
    const std::vector<std::vector<Var>>& states, size_t focal, bool training,
    std::mt19937_64& rng) const {
  const size_t n = seqs.size();
  const size_t T = seqs[focal].size();
  const Eigen::Index B = seqs[focal][0].rows();
  const std::vector<size_t> pooled_steps =
      cfg_.pool_final_only ? std::vector<size_t>{T - 1} : [&] {
        std::vector<size_t> all(T);
        for (size_t t = 0; t < T; ++t) all[t] = t;
        return all;
      }();

  std::vector<Var> out;
  out.reserve(pooled_steps.size());
  for (size_t t : pooled_steps) {
    std::vector<Var> per_partner;
    per_partner.reserve(n - 1);
    for (size_t j = 0; j < n; ++j) {
      if (j == focal) continue;
      Var cue = Var::constant(
          batch_relative_cues(seqs[focal][t].value(), seqs[j][t].value()));
      Var emb = embedder_.forward(cue, training, rng);
      Var cat = ad::concat_cols({emb, states[j][t]});
      per_partner.push_back(pre_pooler_.forward(cat, training, rng));
    }
    if (per_partner.empty()) {
      out.push_back(Var::constant(Mat::Zero(B, cfg_.pooler_out)));
    } else {
      out.push_back(ad::max_elem(per_partner));
    }
  }
  return out;
}

Var SocialEncoder::combine(const Var& e_self, const Var& e_partner) const {
  return ad::matmul(ad::concat_cols({e_self, e_partner}), W_);
}

SocialForward SocialEncoder::forward(
    const std::vector<std::vector<Var>>& seqs, const std::vector<long>& dts,
    bool training, std::mt19937_64& rng) const {
  if (seqs.empty()) throw std::invalid_argument("SocialEncoder: no participants");
  const size_t n = seqs.size();
  const Eigen::Index B = seqs[0][0].rows();
  if (static_cast<Eigen::Index>(dts.size()) != B)
    throw std::invalid_argument("SocialEncoder: one offset per batch row");

  std::vector<Var> e_self(n);
  std::vector<std::vector<Var>> states(n);
  for (size_t i = 0; i < n; ++i) {
    EncodeResult r = f_self_.forward(seqs[i], training, rng);
    e_self[i] = r.e;
    states[i] = std::move(r.states);
  }

  const Var oe = Var::constant(offset_rows(dts, cfg_.d_e));
  SocialForward out;
  out.e.resize(n);
  out.e_self = e_self;
  for (size_t i = 0; i < n; ++i) {
    Var e_partner;
    if (cfg_.no_pool) {
      e_partner = Var::constant(Mat::Zero(B, cfg_.d_e));
    } else {
      std::vector<Var> pooled = pool_partners(seqs, states, i, training, rng);
      e_partner = f_partner_.forward(pooled, training, rng).e;
    }
    out.e[i] = ad::add(combine(e_self[i], e_partner), oe);
  }
  return out;
}

SocialForward SocialEncoder::forward(
    const std::vector<std::vector<Var>>& seqs, long dt, bool training,
    std::mt19937_64& rng) const {
  const Eigen::Index B = seqs.empty() ? 0 : seqs[0][0].rows();
  return forward(seqs, std::vector<long>(static_cast<size_t>(B), dt), training,
                 rng);
}

}  // namespace socproc::enc
