#include "socproc/process_model.hpp"

#include <cmath>
#include <stdexcept>

namespace socproc::pm {

namespace {

Var positive_std(const Var& raw) {
  return ad::add_scalar(ad::softplus(raw), 1e-4);
}

// Participant-major row stacking: block i holds participant i's sample rows.
std::vector<Var> stack_participants(const std::vector<std::vector<Var>>& seqs) {
  const size_t T = seqs[0].size();
  std::vector<Var> out;
  out.reserve(T);
  for (size_t t = 0; t < T; ++t) {
    std::vector<Var> rows;
    rows.reserve(seqs.size());
    for (const auto& participant : seqs) rows.push_back(participant[t]);
    out.push_back(ad::concat_rows(rows));
  }
  return out;
}

std::vector<long> tile_offsets(const std::vector<long>& dts, size_t n) {
  std::vector<long> out;
  out.reserve(dts.size() * n);
  for (size_t i = 0; i < n; ++i) out.insert(out.end(), dts.begin(), dts.end());
  return out;
}

Var mean_over(const std::vector<Var>& xs) {
  Var acc = xs[0];
  for (size_t k = 1; k < xs.size(); ++k) acc = ad::add(acc, xs[k]);
  return xs.size() == 1 ? acc : ad::scale(acc, 1.0 / static_cast<double>(xs.size()));
}

bool is_attentive(Family f) { return f == Family::kANP || f == Family::kASP; }
bool is_social(Family f) { return f == Family::kSP || f == Family::kASP; }

}  // namespace

std::string variant_name(const ModelVariant& v) {
  std::string name;
  switch (v.family) {
    case Family::kNP: name = "np"; break;
    case Family::kANP: name = "anp"; break;
    case Family::kSP: name = "sp"; break;
    case Family::kASP: name = "asp"; break;
  }
  name += v.encoder_kind == EncoderKind::kMLP ? "-mlp-" : "-gru-";
  if (is_attentive(v.family))
    name += v.attention == AttentionKind::kMultihead ? "multihead" : "dot";
  else
    name += v.paths == PathSet::kLatent ? "latent" : "latent+det";
  return name;
}

ModelVariant parse_variant(const std::string& name) {
  const auto p1 = name.find('-');
  const auto p2 = name.find('-', p1 == std::string::npos ? p1 : p1 + 1);
  if (p1 == std::string::npos || p2 == std::string::npos)
    throw std::invalid_argument("unknown model variant: " + name);
  const std::string fam = name.substr(0, p1);
  const std::string kind = name.substr(p1 + 1, p2 - p1 - 1);
  const std::string tail = name.substr(p2 + 1);

  ModelVariant v;
  if (fam == "np") v.family = Family::kNP;
  else if (fam == "anp") v.family = Family::kANP;
  else if (fam == "sp") v.family = Family::kSP;
  else if (fam == "asp") v.family = Family::kASP;
  else throw std::invalid_argument("unknown model family: " + name);

  if (kind == "mlp") v.encoder_kind = EncoderKind::kMLP;
  else if (kind == "gru") v.encoder_kind = EncoderKind::kGRU;
  else throw std::invalid_argument("unknown encoder kind: " + name);

  if (is_attentive(v.family)) {
    v.paths = PathSet::kLatentDet;
    if (tail == "dot") v.attention = AttentionKind::kDot;
    else if (tail == "multihead") v.attention = AttentionKind::kMultihead;
    else throw std::invalid_argument("unknown attention mechanism: " + name);
  } else {
    v.attention = AttentionKind::kNone;
    if (tail == "latent") v.paths = PathSet::kLatent;
    else if (tail == "latent+det") v.paths = PathSet::kLatentDet;
    else throw std::invalid_argument("unknown path set: " + name);
  }
  return v;
}

std::vector<ModelVariant> all_variants() {
  std::vector<ModelVariant> out;
  for (EncoderKind kind : {EncoderKind::kMLP, EncoderKind::kGRU}) {
    for (Family fam : {Family::kNP, Family::kSP}) {
      for (PathSet paths : {PathSet::kLatent, PathSet::kLatentDet}) {
        ModelVariant v;
        v.family = fam;
        v.paths = paths;
        v.attention = AttentionKind::kNone;
        v.encoder_kind = kind;
        out.push_back(v);
      }
    }
    for (Family fam : {Family::kANP, Family::kASP}) {
      for (AttentionKind att : {AttentionKind::kDot, AttentionKind::kMultihead}) {
        ModelVariant v;
        v.family = fam;
        v.paths = PathSet::kLatentDet;
        v.attention = att;
        v.encoder_kind = kind;
        out.push_back(v);
      }
    }
  }
  return out;
}

void validate_config(const ModelConfig& cfg) {
  const ModelVariant& v = cfg.variant;
  if (is_attentive(v.family)) {
    if (v.attention == AttentionKind::kNone)
      throw std::invalid_argument("attentive families need an attention type");
    if (v.paths != PathSet::kLatentDet)
      throw std::invalid_argument(
          "attention is computed on the deterministic path; enable it");
  } else if (v.attention != AttentionKind::kNone) {
    throw std::invalid_argument("attention requires an attentive family");
  }
  if (v.deterministic_decoding && !is_social(v.family))
    throw std::invalid_argument(
        "auxiliary decoding needs per-participant social encodings");
  if ((cfg.no_pool || cfg.pool_final_only) && !is_social(v.family))
    throw std::invalid_argument("pooling flags apply to social families only");
  if (cfg.d_e <= 0 || cfg.d_e % 2 != 0)
    throw std::invalid_argument("representation width must be even");
  if (cfg.feature_dim < 1 || cfg.t_obs < 1 || cfg.t_fut < 1 ||
      cfg.enc_layers < 1 || cfg.enc_hidden < 1 || cfg.z_layers < 1 ||
      cfg.z_hidden < 1)
    throw std::invalid_argument("model dimensions must be positive");
  if (v.attention == AttentionKind::kMultihead &&
      (cfg.attn_heads < 1 || cfg.attn_qk_dim < 1))
    throw std::invalid_argument("multihead attention dimensions must be positive");
}

SeqDecoder::SeqDecoder(nn::ParamSet& ps, const std::string& prefix,
                       EncoderKind kind, int cond_dim, int feature_dim,
                       int hidden, int layers, int t_fut, double dropout,
                       bool with_std, std::mt19937_64& rng)
    : kind_(kind),
      feature_dim_(feature_dim),
      hidden_(hidden),
      t_fut_(t_fut),
      with_std_(with_std) {
  if (kind == EncoderKind::kMLP) {
    trunk_ = nn::MLP(ps, prefix + ".trunk", cond_dim, hidden, hidden, layers,
                     rng, dropout);
    mu_ = nn::Linear(ps, prefix + ".mu", hidden, t_fut * feature_dim, rng);
    if (with_std)
      sigma_ = nn::Linear(ps, prefix + ".sigma", hidden, t_fut * feature_dim, rng);
  } else {
    init_ = nn::Linear(ps, prefix + ".init", cond_dim, layers * hidden, rng);
    for (int l = 0; l < layers; ++l)
      cells_.emplace_back(ps, prefix + ".gru" + std::to_string(l),
                          l == 0 ? feature_dim : hidden, hidden, rng);
    mu_ = nn::Linear(ps, prefix + ".mu", hidden, feature_dim, rng);
    if (with_std)
      sigma_ = nn::Linear(ps, prefix + ".sigma", hidden, feature_dim, rng);
  }
}

SeqDecoder::Output SeqDecoder::decode(const Var& cond, const Var& last_obs,
                                      const std::vector<Var>* teacher,
                                      bool training,
                                      std::mt19937_64& rng) const {
  if (teacher && static_cast<int>(teacher->size()) < t_fut_)
    throw std::invalid_argument("SeqDecoder: teacher sequence too short");
  Output out;
  out.mean.reserve(t_fut_);
  if (with_std_) out.std.reserve(t_fut_);
  if (kind_ == EncoderKind::kMLP) {
    Var feat = ad::relu(trunk_.forward(cond, training, rng));
    Var mu_flat = mu_(feat);
    Var sg_flat = with_std_ ? sigma_(feat) : Var();
    for (int t = 0; t < t_fut_; ++t) {
      out.mean.push_back(ad::slice_cols(mu_flat, t * feature_dim_, feature_dim_));
      if (with_std_)
        out.std.push_back(positive_std(
            ad::slice_cols(sg_flat, t * feature_dim_, feature_dim_)));
    }
  } else {
    Var all_h = init_(cond);
    std::vector<Var> h;
    h.reserve(cells_.size());
    for (size_t l = 0; l < cells_.size(); ++l)
      h.push_back(ad::slice_cols(all_h, static_cast<Eigen::Index>(l) * hidden_,
                                 hidden_));
    Var x = last_obs;
    for (int t = 0; t < t_fut_; ++t) {
      Var below = x;
      for (size_t l = 0; l < cells_.size(); ++l) {
        h[l] = cells_[l].step(below, h[l]);
        below = h[l];
      }
      Var mu_t = mu_(h.back());
      out.mean.push_back(mu_t);
      if (with_std_) out.std.push_back(positive_std(sigma_(h.back())));
      x = teacher ? (*teacher)[t] : mu_t;
    }
  }
  return out;
}

PreparedBatch prepare_batch(
    const std::vector<const data::GroupSample*>& context,
    const std::vector<const data::GroupSample*>& targets,
    const dsets::StandardizationStats* stats) {
  if (targets.empty())
    throw std::invalid_argument("prepare_batch: need at least one target");

  const size_t n = targets[0]->observed.size();
  const Eigen::Index T_o = targets[0]->observed[0].steps.rows();
  const Eigen::Index T_f = targets[0]->future[0].steps.rows();
  const Eigen::Index D = targets[0]->observed[0].steps.cols();
  if (stats && stats->feature_dim != D)
    throw std::invalid_argument("prepare_batch: stats feature dim mismatch");

  auto check = [&](const data::GroupSample* s) {
    if (s->observed.size() != n || s->future.size() != n)
      throw std::invalid_argument("prepare_batch: participant count mismatch");
    if (s->offset_steps < 1)
      throw std::invalid_argument("prepare_batch: offset below one step");
    for (size_t i = 0; i < n; ++i) {
      if (s->observed[i].steps.rows() != T_o ||
          s->future[i].steps.rows() != T_f ||
          s->observed[i].steps.cols() != D || s->future[i].steps.cols() != D)
        throw std::invalid_argument("prepare_batch: window shape mismatch");
    }
  };
  for (const auto* s : context) check(s);
  for (const auto* s : targets) check(s);

  auto build = [&](const std::vector<const data::GroupSample*>& samples,
                   std::vector<std::vector<Var>>& x,
                   std::vector<std::vector<Var>>& y, std::vector<Var>& last,
                   std::vector<long>& dts) {
    const Eigen::Index B = static_cast<Eigen::Index>(samples.size());
    if (B == 0) return;
    dts.reserve(samples.size());
    for (const auto* s : samples) dts.push_back(s->offset_steps);

    x.resize(n);
    y.resize(n);
    last.resize(n);
    for (size_t i = 0; i < n; ++i) {
      std::vector<Mat> obs(samples.size()), fut(samples.size());
      for (size_t b = 0; b < samples.size(); ++b) {
        obs[b] = samples[b]->observed[i].steps;
        fut[b] = samples[b]->future[i].steps;
        if (stats) {
          dsets::standardize_rows(*stats, obs[b]);
          dsets::standardize_rows(*stats, fut[b]);
        }
      }
      for (Eigen::Index t = 0; t < T_o; ++t) {
        Mat m(B, D);
        for (size_t b = 0; b < samples.size(); ++b) m.row(b) = obs[b].row(t);
        x[i].push_back(Var::constant(std::move(m)));
      }
      for (Eigen::Index t = 0; t < T_f; ++t) {
        Mat m(B, D);
        for (size_t b = 0; b < samples.size(); ++b) m.row(b) = fut[b].row(t);
        y[i].push_back(Var::constant(std::move(m)));
      }
      Mat lm(B, D);
      for (size_t b = 0; b < samples.size(); ++b)
        lm.row(b) = obs[b].row(T_o - 1);
      last[i] = Var::constant(std::move(lm));
    }
  };

  PreparedBatch b;
  b.n = static_cast<int>(n);
  build(context, b.ctx_x, b.ctx_y, b.ctx_last_obs, b.ctx_dt);
  build(targets, b.tgt_x, b.tgt_y, b.tgt_last_obs, b.tgt_dt);
  return b;
}

ProcessModel::ProcessModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  validate_config(cfg);
  std::mt19937_64 rng(seed);
  const ModelVariant& v = cfg.variant;
  const int d = cfg.d_e;

  // Construction order fixes the initialization draw order; keep it stable.
  if (social()) {
    enc::SocialEncoderConfig sc;
    sc.kind = v.encoder_kind;
    sc.feature_dim = cfg.feature_dim;
    sc.layers = cfg.enc_layers;
    sc.hidden = cfg.enc_hidden;
    sc.d_e = d;
    sc.pooler_layers = cfg.pooler_layers;
    sc.pooler_hidden = cfg.pooler_hidden;
    sc.pooler_out = cfg.pooler_out;
    sc.dropout = cfg.dropout;
    sc.no_pool = cfg.no_pool;
    sc.pool_final_only = cfg.pool_final_only;
    sc.steps = cfg.t_obs;
    soc_x_ctx_ = enc::SocialEncoder(ps_, "x_ctx", sc, rng);
    if (!v.share_social_encoders)
      soc_x_tgt_ = enc::SocialEncoder(ps_, "x_tgt", sc, rng);
    enc::SocialEncoderConfig sy = sc;
    sy.steps = cfg.t_fut;
    soc_y_ = enc::SocialEncoder(ps_, "y", sy, rng);
  } else {
    seq_x_ctx_ = enc::SequenceEncoder(ps_, "x_ctx", v.encoder_kind,
                                      cfg.feature_dim, cfg.enc_hidden, d,
                                      cfg.enc_layers, cfg.t_obs, cfg.dropout,
                                      /*expose_states=*/false, rng);
    if (!v.share_social_encoders)
      seq_x_tgt_ = enc::SequenceEncoder(ps_, "x_tgt", v.encoder_kind,
                                        cfg.feature_dim, cfg.enc_hidden, d,
                                        cfg.enc_layers, cfg.t_obs, cfg.dropout,
                                        false, rng);
    seq_y_ = enc::SequenceEncoder(ps_, "y", v.encoder_kind, cfg.feature_dim,
                                  cfg.enc_hidden, d, cfg.enc_layers, cfg.t_fut,
                                  cfg.dropout, false, rng);
  }

  lat_pair_ = nn::MLP(ps_, "lat_pair", 2 * d, cfg.z_hidden, d, cfg.z_layers,
                      rng, cfg.dropout);
  z_mu_ = nn::Linear(ps_, "z_mu", d, d, rng);
  z_sigma_ = nn::Linear(ps_, "z_sigma", d, d, rng);
  if (v.paths == PathSet::kLatentDet)
    det_pair_ = nn::MLP(ps_, "det_pair", 2 * d, cfg.z_hidden, d, cfg.z_layers,
                        rng, cfg.dropout);
  if (v.attention == AttentionKind::kMultihead)
    attn_ = nn::MultiheadAttention(ps_, "attn", d, cfg.attn_heads,
                                   cfg.attn_qk_dim, rng);

  const int cond = (v.paths == PathSet::kLatent ? 2 : 3) * d;
  decoder_ = SeqDecoder(ps_, "dec", v.encoder_kind, cond, cfg.feature_dim,
                        cfg.enc_hidden, cfg.enc_layers, cfg.t_fut, cfg.dropout,
                        /*with_std=*/true, rng);
  if (v.deterministic_decoding) {
    aux_lat_ = SeqDecoder(ps_, "aux_lat", v.encoder_kind, 2 * d,
                          cfg.feature_dim, cfg.enc_hidden, cfg.enc_layers,
                          cfg.t_fut, cfg.dropout, /*with_std=*/false, rng);
    aux_lat_sl_ = ps_.create("aux_lat.s_l", 1, 1, 0.0, rng);
    aux_lat_sq_ = ps_.create("aux_lat.s_q", 1, 1, 0.0, rng);
    if (v.paths == PathSet::kLatentDet) {
      aux_det_ = SeqDecoder(ps_, "aux_det", v.encoder_kind, 2 * d,
                            cfg.feature_dim, cfg.enc_hidden, cfg.enc_layers,
                            cfg.t_fut, cfg.dropout, false, rng);
      aux_det_sl_ = ps_.create("aux_det.s_l", 1, 1, 0.0, rng);
      aux_det_sq_ = ps_.create("aux_det.s_q", 1, 1, 0.0, rng);
    }
  }
}

ProcessModel::PairAgg ProcessModel::aggregate_latent(
    const std::vector<Var>& e_x, const std::vector<Var>& e_y, bool training,
    std::mt19937_64& rng) const {
  std::vector<Var> per_participant;
  per_participant.reserve(e_x.size());
  for (size_t k = 0; k < e_x.size(); ++k)
    per_participant.push_back(lat_pair_.forward(
        ad::concat_cols({e_x[k], e_y[k]}), training, rng));
  PairAgg agg;
  agg.pair_vec = mean_over(per_participant);
  agg.s = ad::sorted_colwise_mean(agg.pair_vec);
  return agg;
}

LatentDistribution ProcessModel::latent_from_s(const Var& s) const {
  return {z_mu_(s), positive_std(z_sigma_(s))};
}

ForwardResult ProcessModel::forward(const PreparedBatch& b,
                                    const ForwardOptions& opts,
                                    std::mt19937_64& rng) const {
  if (b.n < 1 || b.tgt_x.empty())
    throw std::invalid_argument("forward: empty target set");
  const ModelVariant& v = cfg_.variant;
  const int d = cfg_.d_e;
  const bool has_ctx = !b.ctx_dt.empty();
  const bool det_path = v.paths == PathSet::kLatentDet;
  const size_t n = static_cast<size_t>(b.n);

  ForwardResult out;

  // Context-side representations. The flattened families stack participants
  // into the row dimension and use a single lane; the social families keep a
  // lane per participant.
  std::vector<Var> ctx_e, ctx_y_e;
  Var ctx_pair_lat;  // (B_ctx, d_e) for the auxiliary decoders
  if (has_ctx) {
    if (social()) {
      ctx_e = soc_x_ctx_.forward(b.ctx_x, b.ctx_dt, opts.training, rng).e;
      ctx_y_e = soc_y_.forward(b.ctx_y, b.ctx_dt, opts.training, rng).e;
    } else {
      Var ex = seq_x_ctx_.forward(stack_participants(b.ctx_x), opts.training,
                                  rng).e;
      Var ey = seq_y_.forward(stack_participants(b.ctx_y), opts.training, rng).e;
      const Var oe = Var::constant(
          enc::offset_rows(tile_offsets(b.ctx_dt, n), d));
      ctx_e = {ad::add(ex, oe)};
      ctx_y_e = {ad::add(ey, oe)};
    }
    PairAgg agg = aggregate_latent(ctx_e, ctx_y_e, opts.training, rng);
    ctx_pair_lat = agg.pair_vec;
    out.q_context = latent_from_s(agg.s);
  } else {
    out.q_context = {Var::constant(Mat::Zero(1, d)),
                     Var::constant(Mat::Ones(1, d))};
  }

  // Deterministic path: per-pair encodings, their mean, and (later) the
  // attended per-query variant.
  Var det_pair_vec;  // (B_ctx, d_e)
  Var r_ctx;         // (1, d_e)
  if (det_path) {
    if (has_ctx) {
      std::vector<Var> per_participant;
      per_participant.reserve(ctx_e.size());
      for (size_t k = 0; k < ctx_e.size(); ++k)
        per_participant.push_back(det_pair_.forward(
            ad::concat_cols({ctx_e[k], ctx_y_e[k]}), opts.training, rng));
      det_pair_vec = mean_over(per_participant);
      r_ctx = ad::sorted_colwise_mean(det_pair_vec);
    } else {
      r_ctx = Var::constant(Mat::Zero(1, d));
    }
  }

  // Full-set latent distribution for training, through the same context-side
  // encoders so identical sets give identical distributions.
  if (opts.training) {
    std::vector<Var> fx, fy;
    if (social()) {
      fx = soc_x_ctx_.forward(b.tgt_x, b.tgt_dt, opts.training, rng).e;
      fy = soc_y_.forward(b.tgt_y, b.tgt_dt, opts.training, rng).e;
    } else {
      Var ex = seq_x_ctx_.forward(stack_participants(b.tgt_x), opts.training,
                                  rng).e;
      Var ey = seq_y_.forward(stack_participants(b.tgt_y), opts.training, rng).e;
      const Var oe = Var::constant(
          enc::offset_rows(tile_offsets(b.tgt_dt, n), d));
      fx = {ad::add(ex, oe)};
      fy = {ad::add(ey, oe)};
    }
    out.q_full = latent_from_s(aggregate_latent(fx, fy, opts.training, rng).s);
  }

  // One z per batch.
  const LatentDistribution& zd = opts.training ? out.q_full : out.q_context;
  if (opts.sample_z) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat eps(1, d);
    for (int j = 0; j < d; ++j) eps(0, j) = gauss(rng);
    out.z = ad::add(zd.mean, ad::mul(zd.std, Var::constant(eps)));
  } else {
    out.z = zd.mean;
  }

  // Target-side representations e*.
  std::vector<Var> tgt_e;
  if (social()) {
    const enc::SocialEncoder& tgt_enc =
        v.share_social_encoders ? soc_x_ctx_ : soc_x_tgt_;
    tgt_e = tgt_enc.forward(b.tgt_x, b.tgt_dt, opts.training, rng).e;
  } else {
    const enc::SequenceEncoder& tgt_enc =
        v.share_social_encoders ? seq_x_ctx_ : seq_x_tgt_;
    Var ex = tgt_enc.forward(stack_participants(b.tgt_x), opts.training, rng).e;
    const Var oe =
        Var::constant(enc::offset_rows(tile_offsets(b.tgt_dt, n), d));
    tgt_e = {ad::add(ex, oe)};
  }

  // Decode each lane.
  const Eigen::Index lane_rows = tgt_e[0].rows();
  const Var z_rep = ad::repeat_rows(out.z, lane_rows);
  std::vector<SeqDecoder::Output> lane_out;
  lane_out.reserve(tgt_e.size());
  Var keys;  // per-pair attention keys, shared across lanes
  if (det_path && has_ctx && v.attention != AttentionKind::kNone)
    keys = mean_over(ctx_e);
  for (size_t k = 0; k < tgt_e.size(); ++k) {
    std::vector<Var> cond_parts = {tgt_e[k]};
    if (det_path) {
      Var r_k;
      if (!has_ctx) {
        r_k = Var::constant(Mat::Zero(lane_rows, d));
      } else if (v.attention == AttentionKind::kNone) {
        r_k = ad::repeat_rows(r_ctx, lane_rows);
      } else if (v.attention == AttentionKind::kDot) {
        r_k = nn::dot_attention(tgt_e[k], keys, det_pair_vec);
      } else {
        r_k = attn_.forward(tgt_e[k], keys, det_pair_vec);
      }
      cond_parts.push_back(r_k);
    }
    cond_parts.push_back(z_rep);
    const Var cond = ad::concat_cols(cond_parts);

    Var last_obs;
    std::vector<Var> teacher_steps;
    const std::vector<Var>* teacher = nullptr;
    if (social()) {
      last_obs = b.tgt_last_obs[k];
      if (opts.teacher_forcing) teacher = &b.tgt_y[k];
    } else {
      last_obs = ad::concat_rows(b.tgt_last_obs);
      if (opts.teacher_forcing) {
        teacher_steps = stack_participants(b.tgt_y);
        teacher = &teacher_steps;
      }
    }
    lane_out.push_back(
        decoder_.decode(cond, last_obs, teacher, opts.training, rng));
  }

  // Outputs are per participant regardless of lane layout.
  if (social()) {
    out.prediction = std::move(lane_out);
  } else {
    const Eigen::Index B = lane_rows / static_cast<Eigen::Index>(n);
    out.prediction.resize(n);
    for (size_t i = 0; i < n; ++i) {
      for (size_t t = 0; t < lane_out[0].mean.size(); ++t) {
        out.prediction[i].mean.push_back(ad::slice_rows(
            lane_out[0].mean[t], static_cast<Eigen::Index>(i) * B, B));
        out.prediction[i].std.push_back(ad::slice_rows(
            lane_out[0].std[t], static_cast<Eigen::Index>(i) * B, B));
      }
    }
  }

  // Auxiliary decoding of context futures, one decoder per path.
  if (opts.training && v.deterministic_decoding && has_ctx) {
    auto run_aux = [&](const SeqDecoder& dec, const Var& pair_vec,
                       const Var& s_l, const Var& s_q) {
      AuxOutputs aux;
      aux.s_l = s_l;
      aux.s_q = s_q;
      aux.forecasts.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const Var cond = ad::concat_cols({pair_vec, ctx_e[i]});
        const std::vector<Var>* teacher =
            opts.teacher_forcing ? &b.ctx_y[i] : nullptr;
        aux.forecasts[i] =
            dec.decode(cond, b.ctx_last_obs[i], teacher, opts.training, rng)
                .mean;
      }
      return aux;
    };
    out.aux.push_back(
        run_aux(aux_lat_, ctx_pair_lat, aux_lat_sl_, aux_lat_sq_));
    if (det_path)
      out.aux.push_back(
          run_aux(aux_det_, det_pair_vec, aux_det_sl_, aux_det_sq_));
  }

  return out;
}

long count_parameters(const ModelConfig& cfg) {
  ProcessModel model(cfg, 0);
  return model.parameter_count();
}

}  // namespace socproc::pm
