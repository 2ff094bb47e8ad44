#pragma once
// Reverse-mode automatic differentiation over dense double matrices.
//
// Graph nodes are heap-allocated and linked by shared_ptr from child to
// parent, so a transient forward graph is freed once the loss handle dies
// while leaf parameters survive in their owning container. backward() walks
// a topological order built iteratively; gradients accumulate into
// Node::grad and are only cleared by the owner (see nn::ParamSet).

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <random>
#include <vector>

namespace socproc::ad {

using Mat = Eigen::MatrixXd;

struct Node {
  Mat value;
  Mat grad;  // empty until first touched in a backward pass
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
  }
};

// Value-semantics handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Var constant(Mat v);  // no gradient tracking
  static Var leaf(Mat v);      // tracked leaf (parameter)

  bool defined() const { return node_ != nullptr; }
  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Runs reverse accumulation from a 1x1 loss node.
void backward(const Var& loss);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);          // same shape
Var add_rowvec(const Var& a, const Var& b);   // b is (1,C), broadcast over rows
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);          // elementwise
Var div(const Var& a, const Var& b);          // elementwise
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);

Var tanh_(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var exp_(const Var& a);
Var log_(const Var& a);
Var softplus(const Var& a);
Var sqrt_(const Var& a);
Var square(const Var& a);
Var abs_(const Var& a);
Var clamp(const Var& a, double lo, double hi);

Var sum(const Var& a);           // -> 1x1
Var mean_all(const Var& a);      // -> 1x1
Var rowwise_sum(const Var& a);   // -> (R,1)
Var rowwise_mean(const Var& a);  // -> (R,1)
Var colwise_sum(const Var& a);   // -> (1,C)
Var colwise_mean(const Var& a);  // -> (1,C)

// Set reductions: accumulation runs over a sorted pairwise tree, so the
// result is bit-identical under any permutation of the reduced dimension
// (and under duplicating every element once). Gradients match the plain
// counterparts. Use these wherever the reduced dimension is an unordered
// set, e.g. context aggregation.
Var sorted_colwise_mean(const Var& a);            // (R,C) -> (1,C)
Var sorted_matmul(const Var& a, const Var& b);    // inner dim is the set
Var softmax_rows_sorted(const Var& a);            // set-summed denominator

// The plain-double reduction behind the set ops, for callers that need an
// order-invariant sum outside the graph (e.g. checkpoint averaging).
double set_sum(std::vector<double> values);

Var concat_cols(const std::vector<Var>& xs);
Var concat_rows(const std::vector<Var>& xs);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n);
Var transpose(const Var& a);
Var repeat_rows(const Var& rowvec, Eigen::Index r);  // (1,C) -> (r,C)

// Elementwise max over same-shape inputs; ties route gradient to the
// lowest index so pooling stays deterministic under duplicated partners.
Var max_elem(const std::vector<Var>& xs);

Var softmax_rows(const Var& a);

// Inverted dropout; identity when p == 0.
Var dropout(const Var& a, double p, std::mt19937_64& rng);

}  // namespace socproc::ad
