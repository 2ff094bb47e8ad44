#include "socproc/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace socproc::nn {

Var ParamSet::create(const std::string& name, Eigen::Index rows,
                     Eigen::Index cols, double bound, std::mt19937_64& rng) {
  if (params_.count(name))
    throw std::invalid_argument("ParamSet: duplicate parameter " + name);
  Mat m = Mat::Zero(rows, cols);
  if (bound > 0.0) {
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uni(rng);
  }
  Var v = Var::leaf(std::move(m));
  params_.emplace(name, v);
  return v;
}

Var ParamSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::invalid_argument("ParamSet: unknown parameter " + name);
  return it->second;
}

long ParamSet::total_count() const {
  long n = 0;
  for (const auto& [_, v] : params_) n += v.value().size();
  return n;
}

void ParamSet::zero_grads() {
  for (auto& [_, v] : params_)
    v.node()->grad.setZero(v.rows(), v.cols());
}

void ParamSet::set_value(const std::string& name, const Mat& value) {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::invalid_argument("ParamSet: unknown parameter " + name);
  if (it->second.rows() != value.rows() || it->second.cols() != value.cols())
    throw std::invalid_argument("ParamSet: shape mismatch for " + name);
  it->second.mutable_value() = value;
}

Linear::Linear(ParamSet& ps, const std::string& prefix, int in, int out,
               std::mt19937_64& rng, bool bias)
    : has_bias(bias) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in));
  W = ps.create(prefix + ".W", in, out, k, rng);
  if (bias) b = ps.create(prefix + ".b", 1, out, k, rng);
}

Var Linear::operator()(const Var& x) const {
  Var y = ad::matmul(x, W);
  return has_bias ? ad::add_rowvec(y, b) : y;
}

MLP::MLP(ParamSet& ps, const std::string& prefix, int in, int hidden, int out,
         int layers, std::mt19937_64& rng, double dropout_p)
    : dropout(dropout_p) {
  if (layers < 1) throw std::invalid_argument("MLP: layers < 1");
  for (int l = 0; l < layers; ++l) {
    const int li = l == 0 ? in : hidden;
    const int lo = l == layers - 1 ? out : hidden;
    linears.emplace_back(ps, prefix + ".l" + std::to_string(l), li, lo, rng);
  }
}

Var MLP::forward(const Var& x, bool training, std::mt19937_64& rng) const {
  Var h = x;
  for (size_t l = 0; l < linears.size(); ++l) {
    h = linears[l](h);
    if (l + 1 < linears.size()) {
      h = ad::relu(h);
      if (training && dropout > 0.0) h = ad::dropout(h, dropout, rng);
    }
  }
  return h;
}

GRUCell::GRUCell(ParamSet& ps, const std::string& prefix, int in, int hidden_dim,
                 std::mt19937_64& rng)
    : hidden(hidden_dim) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  W_ih = ps.create(prefix + ".W_ih", in, 3 * hidden_dim, k, rng);
  W_hh = ps.create(prefix + ".W_hh", hidden_dim, 3 * hidden_dim, k, rng);
  b_ih = ps.create(prefix + ".b_ih", 1, 3 * hidden_dim, k, rng);
  b_hh = ps.create(prefix + ".b_hh", 1, 3 * hidden_dim, k, rng);
}

Var GRUCell::step(const Var& x, const Var& h) const {
  const int H = hidden;
  Var gi = ad::add_rowvec(ad::matmul(x, W_ih), b_ih);
  Var gh = ad::add_rowvec(ad::matmul(h, W_hh), b_hh);
  Var r = ad::sigmoid(ad::add(ad::slice_cols(gi, 0, H), ad::slice_cols(gh, 0, H)));
  Var z = ad::sigmoid(ad::add(ad::slice_cols(gi, H, H), ad::slice_cols(gh, H, H)));
  Var n = ad::tanh_(ad::add(ad::slice_cols(gi, 2 * H, H),
                            ad::mul(r, ad::slice_cols(gh, 2 * H, H))));
  // h' = (1 - z) * n + z * h
  return ad::add(ad::sub(n, ad::mul(z, n)), ad::mul(z, h));
}

Var GRUCell::zero_state(Eigen::Index batch) const {
  return Var::constant(Mat::Zero(batch, hidden));
}

Var dot_attention(const Var& q, const Var& k, const Var& v) {
  // The softmax denominator and the weighted sum both reduce over the key
  // set; the order-canonical reductions keep attention exactly invariant to
  // how that set is enumerated.
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), scale);
  return ad::sorted_matmul(ad::softmax_rows_sorted(scores), v);
}

MultiheadAttention::MultiheadAttention(ParamSet& ps, const std::string& prefix,
                                       int model_dim, int n_heads, int qk,
                                       std::mt19937_64& rng)
    : heads(n_heads), qk_dim(qk) {
  for (int h = 0; h < n_heads; ++h) {
    const std::string hp = prefix + ".h" + std::to_string(h);
    Wq.emplace_back(ps, hp + ".Wq", model_dim, qk, rng, false);
    Wk.emplace_back(ps, hp + ".Wk", model_dim, qk, rng, false);
    Wv.emplace_back(ps, hp + ".Wv", model_dim, qk, rng, false);
  }
  Wo = Linear(ps, prefix + ".Wo", n_heads * qk, model_dim, rng, false);
}

Var MultiheadAttention::forward(const Var& q, const Var& k, const Var& v) const {
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h)
    outs.push_back(dot_attention(Wq[h](q), Wk[h](k), Wv[h](v)));
  return Wo(ad::concat_cols(outs));
}

void Adam::step(ParamSet& ps, const AdamConfig& cfg) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (const auto& [name, handle] : ps.entries()) {
    Var p = handle;  // shared handle; mutates the stored parameter
    Mat& value = p.mutable_value();
    const Mat& grad_raw = p.grad();
    Mat grad = grad_raw.size() == 0 ? Mat::Zero(value.rows(), value.cols())
                                    : grad_raw;
    if (cfg.weight_decay != 0.0) grad += cfg.weight_decay * value;
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      it = moments_
               .emplace(name, std::pair<Mat, Mat>{
                                  Mat::Zero(value.rows(), value.cols()),
                                  Mat::Zero(value.rows(), value.cols())})
               .first;
    }
    Mat& m = it->second.first;
    Mat& v = it->second.second;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const Mat m_hat = m / bc1;
    const Mat v_hat = v / bc2;
    value.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
  }
}

}  // namespace socproc::nn
