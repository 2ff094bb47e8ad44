#pragma once
// Window encoders: self/partner sequence encoders, relative-cue pooling
// across partners, the linear representation combiner, and sinusoidal
// offset encodings.

#include <random>
#include <string>
#include <vector>

#include "socproc/data_model.hpp"
#include "socproc/datasets.hpp"
#include "socproc/nn.hpp"

namespace socproc::enc {

using ad::Mat;
using ad::Var;
using dsets::EncoderKind;

// Sinusoidal encoding of the prediction offset (in grid steps). Entry 2m is
// sin(dt / 10000^{2m/d_e}), entry 2m+1 the matching cosine. d_e must be even.
Mat offset_encoding(long dt, int d_e);

// One encoding row per entry, for batches that mix offsets.
Mat offset_rows(const std::vector<long>& dts, int d_e);

// Row-wise relative cues between two flattened pose batches (B, 15): head
// and body orientation of the partner expressed against the focal row
// (q_focal * q_partner^-1), location differences, and the speaking-status
// difference. Layout mirrors the behavior vector.
Mat batch_relative_cues(const Mat& focal, const Mat& partner);

struct EncodeResult {
  Var e;                    // (B, d_e) window representation
  std::vector<Var> states;  // per-step states (B, hidden) when exposed
};

// Encodes one window into a d_e vector, optionally exposing per-step states
// for downstream pooling. The MLP kind flattens the whole window, so it is
// built for a fixed step count and gains a separate per-step input embedding
// when states are requested; the GRU kind runs a recurrence whose hidden
// states double as the per-step states.
class SequenceEncoder {
 public:
  SequenceEncoder() = default;
  SequenceEncoder(nn::ParamSet& ps, const std::string& prefix,
                  EncoderKind kind, int in_dim, int hidden, int d_e,
                  int layers, int fixed_steps, double dropout,
                  bool expose_states, std::mt19937_64& rng);

  EncodeResult forward(const std::vector<Var>& steps, bool training,
                       std::mt19937_64& rng) const;

  EncoderKind kind() const { return kind_; }
  int hidden_dim() const { return hidden_; }

 private:
  EncoderKind kind_ = EncoderKind::kGRU;
  int in_dim_ = 0;
  int hidden_ = 0;
  int fixed_steps_ = 0;  // MLP kind only
  bool expose_states_ = false;
  nn::MLP trunk_;               // MLP kind
  nn::Linear step_embed_;       // MLP kind, when states are exposed
  std::vector<nn::GRUCell> cells_;  // GRU kind, stacked
  nn::Linear proj_;
};

struct SocialEncoderConfig {
  EncoderKind kind = EncoderKind::kGRU;
  int feature_dim = data::kFeatureDim;  // per-step input width
  int layers = 1;
  int hidden = 320;
  int d_e = 64;
  int pooler_layers = 2;
  int pooler_hidden = 64;
  int pooler_out = 32;
  double dropout = 0.0;
  int steps = 0;                 // fixed window length; required for MLP kind
  bool no_pool = false;          // ablation: zero partner path, no pooling nets
  bool pool_final_only = false;  // ablation: pool only the last timestep
};

struct SocialForward {
  std::vector<Var> e;       // per participant (B, d_e), offset encoding added
  std::vector<Var> e_self;  // per participant self encodings, pre-combination
};

// Per-participant socially aware window encoder: a self encoder, partner
// pooling over per-timestep relative cues, a partner-stream encoder, and a
// bias-free linear combiner W applied to [e_self; e_partner].
class SocialEncoder {
 public:
  SocialEncoder() = default;
  SocialEncoder(nn::ParamSet& ps, const std::string& prefix,
                const SocialEncoderConfig& cfg, std::mt19937_64& rng);

  // seqs[i][t] is participant i's feature row-batch (B, feature_dim) at
  // step t; all participants share the step grid. dts carries one offset
  // per batch row; the single-offset overload broadcasts.
  SocialForward forward(const std::vector<std::vector<Var>>& seqs,
                        const std::vector<long>& dts, bool training,
                        std::mt19937_64& rng) const;
  SocialForward forward(const std::vector<std::vector<Var>>& seqs, long dt,
                        bool training, std::mt19937_64& rng) const;

  // Pooled partner stream for one focal participant given every
  // participant's per-step self states. Exposed for direct property tests.
  std::vector<Var> pool_partners(const std::vector<std::vector<Var>>& seqs,
                                 const std::vector<std::vector<Var>>& states,
                                 size_t focal, bool training,
                                 std::mt19937_64& rng) const;

  Var combine(const Var& e_self, const Var& e_partner) const;

  const SocialEncoderConfig& config() const { return cfg_; }

 private:
  SocialEncoderConfig cfg_;
  SequenceEncoder f_self_;
  SequenceEncoder f_partner_;
  nn::MLP embedder_;    // relative cue -> pooler_hidden features
  nn::MLP pre_pooler_;  // [cue features; partner state] -> pooler_out
  Var W_;               // (2 d_e, d_e), no bias
};

}  // namespace socproc::enc
