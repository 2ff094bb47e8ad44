#pragma once
// Neural-process family models over group interaction windows: a latent
// context path, an optional deterministic path with cross-attention,
// per-participant social encoders or flattened per-individual encoders, and
// stochastic sequence decoders with optional auxiliary context decoding.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "socproc/data_model.hpp"
#include "socproc/datasets.hpp"
#include "socproc/encoders.hpp"
#include "socproc/nn.hpp"

namespace socproc::pm {

using ad::Mat;
using ad::Var;
using dsets::EncoderKind;

enum class Family { kNP, kANP, kSP, kASP };
enum class PathSet { kLatent, kLatentDet };
enum class AttentionKind { kNone, kDot, kMultihead };

struct ModelVariant {
  Family family = Family::kSP;
  PathSet paths = PathSet::kLatent;
  AttentionKind attention = AttentionKind::kNone;
  EncoderKind encoder_kind = EncoderKind::kGRU;
  bool share_social_encoders = false;   // share the X encoder across sides
  bool deterministic_decoding = false;  // auxiliary context-future decoders
};

// Canonical names like "sp-gru-latent", "np-mlp-latent+det", "asp-gru-dot",
// "anp-mlp-multihead". The attentive families imply both paths.
std::string variant_name(const ModelVariant& v);
ModelVariant parse_variant(const std::string& name);
// Every valid (family, paths/attention, encoder kind) combination: 16 total.
std::vector<ModelVariant> all_variants();

struct ModelConfig {
  ModelVariant variant;
  int feature_dim = data::kFeatureDim;
  int t_obs = 60;
  int t_fut = 60;
  int d_e = 64;  // shared width of e, r, s, and z
  int enc_layers = 1;
  int enc_hidden = 320;
  int pooler_layers = 2;
  int pooler_hidden = 64;
  int pooler_out = 32;
  int z_layers = 2;
  int z_hidden = 64;
  int attn_heads = 8;
  int attn_qk_dim = 32;
  double dropout = 0.0;
  bool no_pool = false;          // zero partner path (social families)
  bool pool_final_only = false;  // pool partners at the last timestep only
};

// Throws std::invalid_argument on inconsistent combinations (attention
// without the deterministic path, auxiliary decoding on non-social
// families, pooling flags on flattened families, odd d_e, bad dims).
void validate_config(const ModelConfig& cfg);

struct LatentDistribution {
  Var mean;  // (1, d_z)
  Var std;   // (1, d_z), strictly positive
};

// Decodes a conditioning vector into per-step observation parameters. The
// MLP kind emits every timestep at once from the flattened heads; the GRU
// kind decodes auto-regressively from a learned initial hidden state,
// feeding back its own mean (or the teacher sequence when provided).
class SeqDecoder {
 public:
  struct Output {
    std::vector<Var> mean;  // per future step (B, feature_dim)
    std::vector<Var> std;   // same shape; empty for point decoders
  };

  SeqDecoder() = default;
  SeqDecoder(nn::ParamSet& ps, const std::string& prefix, EncoderKind kind,
             int cond_dim, int feature_dim, int hidden, int layers, int t_fut,
             double dropout, bool with_std, std::mt19937_64& rng);

  Output decode(const Var& cond, const Var& last_obs,
                const std::vector<Var>* teacher, bool training,
                std::mt19937_64& rng) const;

 private:
  EncoderKind kind_ = EncoderKind::kGRU;
  int feature_dim_ = 0;
  int hidden_ = 0;
  int t_fut_ = 0;
  bool with_std_ = true;
  nn::MLP trunk_;                   // MLP kind
  nn::Linear init_;                 // GRU kind: [e; r; z] -> initial hidden
  std::vector<nn::GRUCell> cells_;  // GRU kind
  nn::Linear mu_;
  nn::Linear sigma_;
};

// Model-ready view of one batch: per participant, per step, a (B, D) row
// block over the batch's samples, plus per-sample offsets. Targets carry
// ground-truth futures for training and teacher forcing.
struct PreparedBatch {
  int n = 0;  // participants per sample
  std::vector<std::vector<Var>> ctx_x;  // [n][t_obs] (B_ctx, D)
  std::vector<std::vector<Var>> ctx_y;  // [n][t_fut]
  std::vector<Var> ctx_last_obs;        // [n] (B_ctx, D)
  std::vector<long> ctx_dt;             // per context sample
  std::vector<std::vector<Var>> tgt_x;  // [n][t_obs] (B_tgt, D)
  std::vector<std::vector<Var>> tgt_y;  // [n][t_fut]
  std::vector<Var> tgt_last_obs;        // [n] (B_tgt, D)
  std::vector<long> tgt_dt;
};

// Standardizes (when stats given) and stacks samples into row blocks.
// All samples must agree on participant count and window lengths.
PreparedBatch prepare_batch(
    const std::vector<const data::GroupSample*>& context,
    const std::vector<const data::GroupSample*>& targets,
    const dsets::StandardizationStats* stats);

struct ForwardOptions {
  bool training = false;         // compute q(z|s_D) and auxiliary outputs
  bool sample_z = false;         // sample z instead of using the mean
  bool teacher_forcing = false;  // feed ground truth into the decoder
};

struct AuxOutputs {
  // Per participant, per future step: (B_ctx, D) point forecasts of the
  // context samples' futures.
  std::vector<std::vector<Var>> forecasts;
  Var s_l;  // learned log-variance scalars for the auxiliary loss
  Var s_q;
};

struct ForwardResult {
  std::vector<SeqDecoder::Output> prediction;  // per participant, targets
  LatentDistribution q_context;                // q(z | s_C); prior when C is empty
  LatentDistribution q_full;                   // q(z | s_D); training only
  Var z;                                       // (1, d_z) value used
  std::vector<AuxOutputs> aux;                 // latent path [+ det path]
};

class ProcessModel {
 public:
  ProcessModel(const ModelConfig& cfg, uint64_t seed);

  ForwardResult forward(const PreparedBatch& b, const ForwardOptions& opts,
                        std::mt19937_64& rng) const;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return ps_; }
  const nn::ParamSet& params() const { return ps_; }
  long parameter_count() const { return ps_.total_count(); }

 private:
  bool social() const {
    return cfg_.variant.family == Family::kSP ||
           cfg_.variant.family == Family::kASP;
  }
  // Latent-path context aggregation shared by q(z|s_C) and q(z|s_D).
  struct PairAgg {
    Var pair_vec;  // (B, d_e) per-pair encodings, participant-averaged
    Var s;         // (1, d_e) mean over pairs
  };
  PairAgg aggregate_latent(const std::vector<Var>& e_x,
                           const std::vector<Var>& e_y, bool training,
                           std::mt19937_64& rng) const;
  LatentDistribution latent_from_s(const Var& s) const;

  ModelConfig cfg_;
  nn::ParamSet ps_;

  enc::SocialEncoder soc_x_ctx_, soc_x_tgt_, soc_y_;     // social families
  enc::SequenceEncoder seq_x_ctx_, seq_x_tgt_, seq_y_;   // flattened families
  nn::MLP lat_pair_;
  nn::Linear z_mu_, z_sigma_;
  nn::MLP det_pair_;
  nn::MultiheadAttention attn_;
  SeqDecoder decoder_;
  SeqDecoder aux_lat_, aux_det_;
  Var aux_lat_sl_, aux_lat_sq_, aux_det_sl_, aux_det_sq_;
};

// Total learned-parameter count for a configuration.
long count_parameters(const ModelConfig& cfg);

}  // namespace socproc::pm
