#include "socproc/ad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace socproc::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Mat value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  n->requires_grad = any;
  if (any) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return n;
}

Var unary(const Var& a, Mat value, std::function<void(Node&)> backward) {
  return Var(make_node(std::move(value), {a.node()}, std::move(backward)));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Canonical-order accumulation: sort, then reduce over a pairwise tree.
// Any permutation of the inputs gives the identical result, and doubling
// every input yields exactly twice the sum (power-of-two scaling commutes
// with rounding), which makes set means duplicate-invariant.
double set_accumulate(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  while (v.size() > 1) {
    std::vector<double> next;
    next.reserve(v.size() / 2 + 1);
    size_t i = 0;
    for (; i + 1 < v.size(); i += 2) next.push_back(v[i] + v[i + 1]);
    if (i < v.size()) next.push_back(v[i]);
    v = std::move(next);
  }
  return v[0];
}

// Column-at-a-time product. Element (i, j) accumulates a(i, k) * b(k, j) in
// ascending k through the identical multiply-then-add sequence for every
// row, so a row's product does not depend on where that row sits in the
// batch. Blocked kernels reassociate per panel and would break that.
Mat uniform_matmul(const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index k = 0; k < a.cols(); ++k)
      out.col(j) += a.col(k) * b(k, j);
  return out;
}

}  // namespace

double set_sum(std::vector<double> values) { return set_accumulate(std::move(values)); }

Var Var::constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = false;
  return Var(n);
}

Var Var::leaf(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return Var(n);
}

void backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1");
  if (!loss.node()->requires_grad) return;

  // Iterative post-order DFS; graphs can be deep (long unrolled sequences).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      for (auto& p : n->parents)
        if (p->requires_grad) p->ensure_grad();
      n->backward(*n);
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_node(uniform_matmul(an->value, bn->value), {an, bn},
                       [an, bn](Node& self) {
    if (an->requires_grad) an->grad.noalias() += self.grad * bn->value.transpose();
    if (bn->requires_grad) bn->grad.noalias() += an->value.transpose() * self.grad;
  }));
}

Var sorted_matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("sorted_matmul: inner dims");
  auto an = a.node();
  auto bn = b.node();
  const Eigen::Index rows = an->value.rows();
  const Eigen::Index inner = an->value.cols();
  const Eigen::Index cols = bn->value.cols();
  Mat v(rows, cols);
  std::vector<double> terms(static_cast<size_t>(inner));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index k = 0; k < inner; ++k)
        terms[static_cast<size_t>(k)] = an->value(i, k) * bn->value(k, j);
      v(i, j) = set_accumulate(terms);
    }
  return Var(make_node(std::move(v), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) an->grad.noalias() += self.grad * bn->value.transpose();
    if (bn->requires_grad) bn->grad.noalias() += an->value.transpose() * self.grad;
  }));
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_node(an->value + bn->value, {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) an->grad += self.grad;
    if (bn->requires_grad) bn->grad += self.grad;
  }));
}

Var add_rowvec(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: bias must be (1, cols)");
  auto an = a.node();
  auto bn = b.node();
  Mat v = an->value.rowwise() + bn->value.row(0);
  return Var(make_node(std::move(v), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) an->grad += self.grad;
    if (bn->requires_grad) bn->grad.row(0) += self.grad.colwise().sum();
  }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_node(an->value - bn->value, {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) an->grad += self.grad;
    if (bn->requires_grad) bn->grad -= self.grad;
  }));
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_node(an->value.cwiseProduct(bn->value), {an, bn},
                       [an, bn](Node& self) {
                         if (an->requires_grad)
                           an->grad += self.grad.cwiseProduct(bn->value);
                         if (bn->requires_grad)
                           bn->grad += self.grad.cwiseProduct(an->value);
                       }));
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_node(an->value.cwiseQuotient(bn->value), {an, bn},
                       [an, bn](Node& self) {
                         if (an->requires_grad)
                           an->grad += self.grad.cwiseQuotient(bn->value);
                         if (bn->requires_grad)
                           bn->grad -= self.grad
                                           .cwiseProduct(an->value)
                                           .cwiseQuotient(bn->value.cwiseProduct(bn->value));
                       }));
}

Var scale(const Var& a, double s) {
  auto an = a.node();
  return unary(a, an->value * s, [an, s](Node& self) {
    an->grad += self.grad * s;
  });
}

Var add_scalar(const Var& a, double s) {
  auto an = a.node();
  return unary(a, an->value.array() + s, [an](Node& self) {
    an->grad += self.grad;
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var tanh_(const Var& a) {
  auto an = a.node();
  // unaryExpr keeps one scalar code path per element; vectorized libm
  // variants round differently between packet bodies and loop tails, which
  // would make values depend on their position in the matrix.
  Mat v = an->value.unaryExpr([](double x) { return std::tanh(x); });
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() +=
        self.grad.array() * (1.0 - self.value.array().square());
  });
}

Var sigmoid(const Var& a) {
  auto an = a.node();
  Mat v = an->value.unaryExpr([](double x) { return stable_sigmoid(x); });
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() +=
        self.grad.array() * self.value.array() * (1.0 - self.value.array());
  });
}

Var relu(const Var& a) {
  auto an = a.node();
  Mat v = an->value.cwiseMax(0.0);
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() +=
        self.grad.array() * (an->value.array() > 0.0).cast<double>();
  });
}

Var exp_(const Var& a) {
  auto an = a.node();
  Mat v = an->value.unaryExpr([](double x) { return std::exp(x); });
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() += self.grad.array() * self.value.array();
  });
}

Var log_(const Var& a) {
  auto an = a.node();
  Mat v = an->value.unaryExpr([](double x) { return std::log(x); });
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() += self.grad.array() / an->value.array();
  });
}

Var softplus(const Var& a) {
  auto an = a.node();
  Mat v = an->value.unaryExpr([](double x) { return stable_softplus(x); });
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() +=
        self.grad.array() *
        an->value.unaryExpr([](double x) { return stable_sigmoid(x); }).array();
  });
}

Var sqrt_(const Var& a) {
  auto an = a.node();
  Mat v = an->value.array().sqrt();
  return unary(a, std::move(v), [an](Node& self) {
    // Guarded so an exact-zero input yields a finite (zero-routed) update.
    an->grad.array() +=
        self.grad.array() * 0.5 / self.value.array().max(1e-300);
  });
}

Var square(const Var& a) {
  auto an = a.node();
  Mat v = an->value.array().square();
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() += self.grad.array() * 2.0 * an->value.array();
  });
}

Var abs_(const Var& a) {
  auto an = a.node();
  Mat v = an->value.array().abs();
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() += self.grad.array() * an->value.array().sign();
  });
}

Var clamp(const Var& a, double lo, double hi) {
  auto an = a.node();
  Mat v = an->value.cwiseMax(lo).cwiseMin(hi);
  return unary(a, std::move(v), [an, lo, hi](Node& self) {
    an->grad.array() += self.grad.array() *
                        ((an->value.array() >= lo) && (an->value.array() <= hi))
                            .cast<double>();
  });
}

Var sum(const Var& a) {
  auto an = a.node();
  Mat v(1, 1);
  v(0, 0) = an->value.sum();
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.array() += self.grad(0, 0);
  });
}

Var mean_all(const Var& a) {
  auto an = a.node();
  const double inv = 1.0 / static_cast<double>(an->value.size());
  Mat v(1, 1);
  v(0, 0) = an->value.mean();
  return unary(a, std::move(v), [an, inv](Node& self) {
    an->grad.array() += self.grad(0, 0) * inv;
  });
}

Var rowwise_sum(const Var& a) {
  auto an = a.node();
  Mat v = an->value.rowwise().sum();
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.colwise() += Eigen::VectorXd(self.grad.col(0));
  });
}

Var rowwise_mean(const Var& a) {
  auto an = a.node();
  const double inv = 1.0 / static_cast<double>(an->value.cols());
  Mat v = an->value.rowwise().mean();
  return unary(a, std::move(v), [an, inv](Node& self) {
    an->grad.colwise() += Eigen::VectorXd(self.grad.col(0) * inv);
  });
}

Var colwise_sum(const Var& a) {
  auto an = a.node();
  Mat v = an->value.colwise().sum();
  return unary(a, std::move(v), [an](Node& self) {
    an->grad.rowwise() += Eigen::RowVectorXd(self.grad.row(0));
  });
}

Var colwise_mean(const Var& a) {
  auto an = a.node();
  const double inv = 1.0 / static_cast<double>(an->value.rows());
  Mat v = an->value.colwise().mean();
  return unary(a, std::move(v), [an, inv](Node& self) {
    an->grad.rowwise() += Eigen::RowVectorXd(self.grad.row(0) * inv);
  });
}

Var sorted_colwise_mean(const Var& a) {
  auto an = a.node();
  const Eigen::Index rows = an->value.rows();
  const Eigen::Index cols = an->value.cols();
  const double inv = 1.0 / static_cast<double>(rows);
  Mat v(1, cols);
  std::vector<double> column(static_cast<size_t>(rows));
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i)
      column[static_cast<size_t>(i)] = an->value(i, j);
    v(0, j) = set_accumulate(column) * inv;
  }
  return unary(a, std::move(v), [an, inv](Node& self) {
    an->grad.rowwise() += Eigen::RowVectorXd(self.grad.row(0) * inv);
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty");
  Eigen::Index rows = xs[0].rows(), cols = 0;
  std::vector<NodePtr> parents;
  for (const auto& x : xs) {
    if (x.rows() != rows) throw std::invalid_argument("concat_cols: rows");
    cols += x.cols();
    parents.push_back(x.node());
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& x : xs) {
    v.middleCols(at, x.cols()) = x.value();
    at += x.cols();
  }
  auto ps = parents;
  return Var(make_node(std::move(v), std::move(parents), [ps](Node& self) {
    Eigen::Index at = 0;
    for (const auto& p : ps) {
      if (p->requires_grad)
        p->grad += self.grad.middleCols(at, p->value.cols());
      at += p->value.cols();
    }
  }));
}

Var concat_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty");
  Eigen::Index cols = xs[0].cols(), rows = 0;
  std::vector<NodePtr> parents;
  for (const auto& x : xs) {
    if (x.cols() != cols) throw std::invalid_argument("concat_rows: cols");
    rows += x.rows();
    parents.push_back(x.node());
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& x : xs) {
    v.middleRows(at, x.rows()) = x.value();
    at += x.rows();
  }
  auto ps = parents;
  return Var(make_node(std::move(v), std::move(parents), [ps](Node& self) {
    Eigen::Index at = 0;
    for (const auto& p : ps) {
      if (p->requires_grad)
        p->grad += self.grad.middleRows(at, p->value.rows());
      at += p->value.rows();
    }
  }));
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.cols())
    throw std::invalid_argument("slice_cols: out of range");
  auto an = a.node();
  Mat v = an->value.middleCols(start, n);
  return unary(a, std::move(v), [an, start, n](Node& self) {
    an->grad.middleCols(start, n) += self.grad;
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.rows())
    throw std::invalid_argument("slice_rows: out of range");
  auto an = a.node();
  Mat v = an->value.middleRows(start, n);
  return unary(a, std::move(v), [an, start, n](Node& self) {
    an->grad.middleRows(start, n) += self.grad;
  });
}

Var transpose(const Var& a) {
  auto an = a.node();
  Mat v = an->value.transpose();
  return unary(a, std::move(v), [an](Node& self) {
    an->grad += self.grad.transpose();
  });
}

Var repeat_rows(const Var& rowvec, Eigen::Index r) {
  if (rowvec.rows() != 1) throw std::invalid_argument("repeat_rows: need (1,C)");
  auto an = rowvec.node();
  Mat v = an->value.replicate(r, 1);
  return unary(rowvec, std::move(v), [an](Node& self) {
    an->grad.row(0) += self.grad.colwise().sum();
  });
}

Var max_elem(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("max_elem: empty");
  const Eigen::Index rows = xs[0].rows(), cols = xs[0].cols();
  std::vector<NodePtr> parents;
  for (const auto& x : xs) {
    if (x.rows() != rows || x.cols() != cols)
      throw std::invalid_argument("max_elem: shape mismatch");
    parents.push_back(x.node());
  }
  Mat v = xs[0].value();
  Eigen::MatrixXi which = Eigen::MatrixXi::Zero(rows, cols);
  for (size_t k = 1; k < xs.size(); ++k) {
    const Mat& xv = xs[k].value();
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i)
        if (xv(i, j) > v(i, j)) {
          v(i, j) = xv(i, j);
          which(i, j) = static_cast<int>(k);
        }
  }
  auto ps = parents;
  return Var(make_node(std::move(v), std::move(parents),
                       [ps, which](Node& self) {
                         for (size_t k = 0; k < ps.size(); ++k) {
                           if (!ps[k]->requires_grad) continue;
                           ps[k]->grad.array() +=
                               self.grad.array() *
                               (which.array() == static_cast<int>(k)).cast<double>();
                         }
                       }));
}

Var softmax_rows(const Var& a) {
  auto an = a.node();
  Mat v = an->value;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::ArrayXd row = v.row(i).array();
    const double shift = row.maxCoeff();
    for (Eigen::Index k = 0; k < row.size(); ++k)
      row(k) = std::exp(row(k) - shift);
    v.row(i) = row / row.sum();
  }
  return unary(a, std::move(v), [an](Node& self) {
    for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
      const Eigen::ArrayXd s = self.value.row(i).array();
      const Eigen::ArrayXd g = self.grad.row(i).array();
      const double dot = (s * g).sum();
      an->grad.row(i).array() += s * (g - dot);
    }
  });
}

Var softmax_rows_sorted(const Var& a) {
  auto an = a.node();
  Mat v = an->value;
  std::vector<double> exps(static_cast<size_t>(v.cols()));
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::ArrayXd row = v.row(i).array();
    const double shift = row.maxCoeff();
    for (Eigen::Index k = 0; k < row.size(); ++k) {
      row(k) = std::exp(row(k) - shift);
      exps[static_cast<size_t>(k)] = row(k);
    }
    v.row(i) = row / set_accumulate(exps);
  }
  return unary(a, std::move(v), [an](Node& self) {
    for (Eigen::Index i = 0; i < self.value.rows(); ++i) {
      const Eigen::ArrayXd s = self.value.row(i).array();
      const Eigen::ArrayXd g = self.grad.row(i).array();
      const double dot = (s * g).sum();
      an->grad.row(i).array() += s * (g - dot);
    }
  });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Mat mask(a.rows(), a.cols());
  const double keep = 1.0 - p;
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      mask(i, j) = uni(rng) < p ? 0.0 : 1.0 / keep;
  return mul(a, Var::constant(std::move(mask)));
}

}  // namespace socproc::ad
