#pragma once
// Parameterized building blocks on top of the autodiff core: a name-keyed
// parameter registry, linear/MLP/GRU layers, attention, and Adam.
//
// All randomness flows through caller-supplied engines; construction order
// defines the initialization draw order, so a fixed seed gives bit-identical
// parameters.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "socproc/ad.hpp"

namespace socproc::nn {

using ad::Mat;
using ad::Var;

class ParamSet {
 public:
  // Initializes uniform in [-bound, bound]; bound 0 gives exact zeros.
  Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
             double bound, std::mt19937_64& rng);
  Var get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  long total_count() const;
  void zero_grads();
  void set_value(const std::string& name, const Mat& value);
  const std::map<std::string, Var>& entries() const { return params_; }

 private:
  std::map<std::string, Var> params_;  // ordered: deterministic iteration
};

struct Linear {
  Var W;  // (in, out); applied as x * W
  Var b;  // (1, out) when biased
  bool has_bias = true;

  Linear() = default;
  Linear(ParamSet& ps, const std::string& prefix, int in, int out,
         std::mt19937_64& rng, bool bias = true);
  Var operator()(const Var& x) const;
};

// `layers` linear maps with ReLU between them; dropout (train mode only)
// follows each hidden activation.
struct MLP {
  std::vector<Linear> linears;
  double dropout = 0.0;

  MLP() = default;
  MLP(ParamSet& ps, const std::string& prefix, int in, int hidden, int out,
      int layers, std::mt19937_64& rng, double dropout = 0.0);
  Var forward(const Var& x, bool training, std::mt19937_64& rng) const;
};

// Gate layout matches the common (reset, update, candidate) convention with
// separate input/hidden biases, so a step can be cross-checked against a
// hand-written recurrence.
struct GRUCell {
  Var W_ih;  // (in, 3H)
  Var W_hh;  // (H, 3H)
  Var b_ih;  // (1, 3H)
  Var b_hh;  // (1, 3H)
  int hidden = 0;

  GRUCell() = default;
  GRUCell(ParamSet& ps, const std::string& prefix, int in, int hidden,
          std::mt19937_64& rng);
  Var step(const Var& x, const Var& h) const;
  Var zero_state(Eigen::Index batch) const;
};

// softmax(q kᵀ / sqrt(d)) v with no learned parameters.
Var dot_attention(const Var& q, const Var& k, const Var& v);

struct MultiheadAttention {
  int heads = 0;
  int qk_dim = 0;
  std::vector<Linear> Wq, Wk, Wv;  // per head, no bias
  Linear Wo;                       // (heads*qk_dim, model), no bias

  MultiheadAttention() = default;
  MultiheadAttention(ParamSet& ps, const std::string& prefix, int model_dim,
                     int heads, int qk_dim, std::mt19937_64& rng);
  Var forward(const Var& q, const Var& k, const Var& v) const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // coupled L2, added to the gradient
};

class Adam {
 public:
  void step(ParamSet& ps, const AdamConfig& cfg);
  void reset() { moments_.clear(); t_ = 0; }

 private:
  std::map<std::string, std::pair<Mat, Mat>> moments_;
  long t_ = 0;
};

}  // namespace socproc::nn
