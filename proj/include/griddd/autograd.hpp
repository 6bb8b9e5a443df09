#pragma once

// Reverse-mode differentiation over dense matrices. Edge features of an
// n-node graph are stored as an (n*n) x h matrix with row i*n + j.

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "griddd/error.hpp"
#include "griddd/random.hpp"

namespace griddd::nn {

using Mat = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
};

/// Ordered collection of named tensors. Order is fixed at construction and
/// defines checkpoint layout and optimizer state layout.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, int rows, int cols, double scale, Rng& rng) {
    if (index_.count(name)) throw Error("duplicate parameter " + name);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat v(rows, cols);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = scale * normal(rng);
    index_[name] = params_.size();
    params_.push_back({name, v, Mat::Zero(rows, cols)});
    return params_.back();
  }
  Parameter& add_zero(const std::string& name, int rows, int cols) {
    Rng unused(0);
    Parameter& p = add(name, rows, cols, 0.0, unused);
    p.value.setZero();
    return p;
  }

  Parameter& at(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter " + name);
    return params_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const Parameter& at(const std::string& name) const { return const_cast<ParameterSet*>(this)->at(name); }

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  Eigen::Index num_scalars() const {
    Eigen::Index k = 0;
    for (const auto& p : params_) k += p.value.size();
    return k;
  }
  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }
  bool all_finite() const {
    for (const auto& p : params_)
      if (!p.value.allFinite()) return false;
    return true;
  }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Var {
  int id = -1;
};

class Tape {
 public:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> backward;
    Parameter* param = nullptr;
  };

  Var constant(Mat v) { return push(std::move(v), nullptr); }
  Var param(Parameter& p) {
    const Var out = push(p.value, nullptr);
    nodes_[static_cast<std::size_t>(out.id)].param = &p;
    return out;
  }

  const Mat& value(Var v) const { return node(v).value; }
  Mat& grad(Var v) { return node(v).grad; }
  double scalar(Var v) const { return node(v).value(0, 0); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates into Parameter::grad.
  void backward(Var loss) {
    if (value(loss).size() != 1) throw Error("backward needs a scalar");
    for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    node(loss).grad(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward) n.backward(*this);
      if (n.param) n.param->grad += n.grad;
    }
  }

  Var push(Mat v, std::function<void(Tape&)> bw) {
    nodes_.push_back({std::move(v), Mat(), std::move(bw), nullptr});
    return {static_cast<int>(nodes_.size()) - 1};
  }
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

inline Var matmul(Tape& tp, Var a, Var b) {
  Mat v = tp.value(a) * tp.value(b);
  return tp.push(std::move(v), [a, b, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& g = t.grad({id});
    t.grad(a) += g * t.value(b).transpose();
    t.grad(b) += t.value(a).transpose() * g;
  });
}

inline Var add(Tape& tp, Var a, Var b) {
  if (tp.value(a).rows() != tp.value(b).rows() || tp.value(a).cols() != tp.value(b).cols())
    throw Error("add: shape mismatch");
  Mat v = tp.value(a) + tp.value(b);
  return tp.push(std::move(v), [a, b, id = static_cast<int>(tp.size())](Tape& t) {
    t.grad(a) += t.grad({id});
    t.grad(b) += t.grad({id});
  });
}

/// a (r x h) + row (1 x h) broadcast over rows.
inline Var add_row(Tape& tp, Var a, Var row) {
  if (tp.value(row).rows() != 1 || tp.value(row).cols() != tp.value(a).cols()) throw Error("add_row: shape mismatch");
  Mat v = tp.value(a).rowwise() + tp.value(row).row(0);
  return tp.push(std::move(v), [a, row, id = static_cast<int>(tp.size())](Tape& t) {
    t.grad(a) += t.grad({id});
    t.grad(row) += t.grad({id}).colwise().sum();
  });
}

/// a (r x h) * row (1 x h) broadcast over rows, elementwise.
inline Var mul_row(Tape& tp, Var a, Var row) {
  if (tp.value(row).rows() != 1 || tp.value(row).cols() != tp.value(a).cols()) throw Error("mul_row: shape mismatch");
  Mat v = tp.value(a).array().rowwise() * tp.value(row).row(0).array();
  return tp.push(std::move(v), [a, row, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& g = t.grad({id});
    t.grad(a) += (g.array().rowwise() * t.value(row).row(0).array()).matrix();
    t.grad(row) += (g.array() * t.value(a).array()).colwise().sum().matrix();
  });
}

inline Var mul(Tape& tp, Var a, Var b) {
  Mat v = tp.value(a).cwiseProduct(tp.value(b));
  return tp.push(std::move(v), [a, b, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& g = t.grad({id});
    t.grad(a) += g.cwiseProduct(t.value(b));
    t.grad(b) += g.cwiseProduct(t.value(a));
  });
}

inline Var add_scalar(Tape& tp, Var a, double c) {
  Mat v = tp.value(a).array() + c;
  return tp.push(std::move(v), [a, id = static_cast<int>(tp.size())](Tape& t) { t.grad(a) += t.grad({id}); });
}

inline Var scale(Tape& tp, Var a, double c) {
  Mat v = tp.value(a) * c;
  return tp.push(std::move(v), [a, c, id = static_cast<int>(tp.size())](Tape& t) { t.grad(a) += c * t.grad({id}); });
}

inline Var silu(Tape& tp, Var a) {
  const Mat& x = tp.value(a);
  Mat sig = (1.0 + (-x.array()).exp()).inverse().matrix();
  Mat v = x.cwiseProduct(sig);
  return tp.push(std::move(v), [a, sig = std::move(sig), id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& x = t.value(a);
    const auto d = sig.array() * (1.0 + x.array() * (1.0 - sig.array()));
    t.grad(a) += (t.grad({id}).array() * d).matrix();
  });
}

inline Var tanh(Tape& tp, Var a) {
  Mat v = tp.value(a).array().tanh().matrix();
  return tp.push(std::move(v), [a, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& y = t.value({id});
    t.grad(a) += (t.grad({id}).array() * (1.0 - y.array().square())).matrix();
  });
}

/// Per-row standardization (no affine part).
inline Var layer_norm(Tape& tp, Var a, double eps = 1e-5) {
  const Mat& x = tp.value(a);
  const Eigen::Index h = x.cols();
  Mat y(x.rows(), h);
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv(r) = 1.0 / std::sqrt(var + eps);
    y.row(r) = (x.row(r).array() - mean) * inv(r);
  }
  return tp.push(std::move(y), [a, inv = std::move(inv), id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& y = t.value({id});
    const Mat& g = t.grad({id});
    const double hd = static_cast<double>(y.cols());
    Mat& ga = t.grad(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double gm = g.row(r).sum() / hd;
      const double gy = g.row(r).dot(y.row(r)) / hd;
      ga.row(r) += inv(r) * (g.row(r).array() - gm - y.row(r).array() * gy).matrix();
    }
  });
}

/// Rows i*n + j of the result hold q_i (elementwise) k_j.
inline Var pair_product(Tape& tp, Var q, Var k) {
  const Mat& Q = tp.value(q);
  const Mat& K = tp.value(k);
  const Eigen::Index n = Q.rows();
  Mat v(n * n, Q.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) v.row(i * n + j) = Q.row(i).cwiseProduct(K.row(j));
  return tp.push(std::move(v), [q, k, n, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& g = t.grad({id});
    const Mat& Q = t.value(q);
    const Mat& K = t.value(k);
    Mat gq = Mat::Zero(Q.rows(), Q.cols()), gk = Mat::Zero(K.rows(), K.cols());
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        gq.row(i) += g.row(i * n + j).cwiseProduct(K.row(j));
        gk.row(j) += g.row(i * n + j).cwiseProduct(Q.row(i));
      }
    t.grad(q) += gq;
    t.grad(k) += gk;
  });
}

/// Rows i*n + j of the result hold a_i + b_j.
inline Var pair_sum(Tape& tp, Var a, Var b) {
  const Mat& A = tp.value(a);
  const Mat& B = tp.value(b);
  const Eigen::Index n = A.rows();
  Mat v(n * n, A.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) v.row(i * n + j) = A.row(i) + B.row(j);
  return tp.push(std::move(v), [a, b, n, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& g = t.grad({id});
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        t.grad(a).row(i) += g.row(i * n + j);
        t.grad(b).row(j) += g.row(i * n + j);
      }
  });
}

/// Softmax over j of the rows i*n + j, separately per column.
inline Var neighbor_softmax(Tape& tp, Var y, Eigen::Index n) {
  const Mat& Y = tp.value(y);
  Mat v(Y.rows(), Y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto blk = Y.middleRows(i * n, n);
    const Eigen::RowVectorXd mx = blk.colwise().maxCoeff();
    Mat e = (blk.rowwise() - mx).array().exp().matrix();
    const Eigen::RowVectorXd s = e.colwise().sum();
    v.middleRows(i * n, n) = e.array().rowwise() / s.array();
  }
  return tp.push(std::move(v), [y, n, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& p = t.value({id});
    const Mat& g = t.grad({id});
    Mat& gy = t.grad(y);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto P = p.middleRows(i * n, n);
      const auto G = g.middleRows(i * n, n);
      const Eigen::RowVectorXd dot = P.cwiseProduct(G).colwise().sum();
      gy.middleRows(i * n, n) += (P.array() * (G.rowwise() - dot).array()).matrix();
    }
  });
}

/// out_i = sum_j w_{i*n+j} (elementwise) v_j.
inline Var aggregate(Tape& tp, Var w, Var v) {
  const Mat& W = tp.value(w);
  const Mat& V = tp.value(v);
  const Eigen::Index n = V.rows();
  Mat out = Mat::Zero(n, V.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out.row(i) += W.row(i * n + j).cwiseProduct(V.row(j));
  return tp.push(std::move(out), [w, v, n, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& g = t.grad({id});
    const Mat& W = t.value(w);
    const Mat& V = t.value(v);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        t.grad(w).row(i * n + j) += g.row(i).cwiseProduct(V.row(j));
        t.grad(v).row(j) += g.row(i).cwiseProduct(W.row(i * n + j));
      }
  });
}

/// Column means, 1 x h. An empty input pools to zeros.
inline Var mean_pool(Tape& tp, Var a) {
  const Mat& A = tp.value(a);
  const Eigen::Index r = A.rows();
  Mat v = r > 0 ? Mat(A.colwise().mean()) : Mat::Zero(1, A.cols());
  return tp.push(std::move(v), [a, r, id = static_cast<int>(tp.size())](Tape& t) {
    if (r == 0) return;
    t.grad(a).rowwise() += t.grad({id}).row(0) / static_cast<double>(r);
  });
}

/// (x_{i*n+j} + x_{j*n+i}) / 2.
inline Var symmetrize_pairs(Tape& tp, Var a, Eigen::Index n) {
  const Mat& A = tp.value(a);
  Mat v(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) v.row(i * n + j) = 0.5 * (A.row(i * n + j) + A.row(j * n + i));
  return tp.push(std::move(v), [a, n, id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& g = t.grad({id});
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        t.grad(a).row(i * n + j) += 0.5 * g.row(i * n + j);
        t.grad(a).row(j * n + i) += 0.5 * g.row(i * n + j);
      }
  });
}

/// Horizontal concatenation [a | b].
inline Var concat_cols(Tape& tp, Var a, Var b) {
  const Mat& A = tp.value(a);
  const Mat& B = tp.value(b);
  if (A.rows() != B.rows()) throw Error("concat_cols: row mismatch");
  Mat v(A.rows(), A.cols() + B.cols());
  v << A, B;
  return tp.push(std::move(v), [a, b, ca = A.cols(), id = static_cast<int>(tp.size())](Tape& t) {
    const Mat& g = t.grad({id});
    t.grad(a) += g.leftCols(ca);
    t.grad(b) += g.rightCols(g.cols() - ca);
  });
}

inline Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& logits) {
  const Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

inline Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) p.row(r) = softmax_row(logits.row(r));
  return p;
}

/// Mean over selected rows of -log softmax(logits)[target]. Rows with
/// target < 0 are skipped; with no selected rows the result is 0.
inline Var cross_entropy(Tape& tp, Var logits, const std::vector<int>& targets) {
  const Mat& L = tp.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != L.rows()) throw Error("cross_entropy: target count mismatch");
  Mat p = softmax_rows(L);
  double total = 0.0;
  int count = 0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const int y = targets[static_cast<std::size_t>(r)];
    if (y < 0) continue;
    if (y >= L.cols()) throw Error("cross_entropy: target out of range");
    const double mx = L.row(r).maxCoeff();
    total += -(L(r, y) - mx - std::log((L.row(r).array() - mx).exp().sum()));
    ++count;
  }
  Mat v(1, 1);
  v(0, 0) = count ? total / count : 0.0;
  return tp.push(std::move(v), [logits, targets, count, p = std::move(p), id = static_cast<int>(tp.size())](Tape& t) {
    if (!count) return;
    const double g = t.grad({id})(0, 0) / count;
    Mat& gl = t.grad(logits);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const int y = targets[static_cast<std::size_t>(r)];
      if (y < 0) continue;
      gl.row(r) += g * p.row(r);
      gl(r, y) -= g;
    }
  });
}

}  // namespace griddd::nn
