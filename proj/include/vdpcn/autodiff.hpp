#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation as a node holding its value and a closure
// that pushes the incoming gradient to its inputs. Nodes are only given a
// closure when at least one input requires a gradient, so constant
// subgraphs (frozen teachers, rendered images) cost nothing in backward.

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vdpcn/types.hpp"

namespace vdpcn::ad {

template <typename Scalar> class Tape;

template <typename Scalar> struct Var
{
  Tape<Scalar> *tape = nullptr;
  Index id = -1;

  Matrix<Scalar> const &value() const { return tape->value(id); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape->requires_grad(id); }
};

template <typename Scalar> class Tape
{
public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Mat const &)>;

  Tape() = default;
  Tape(Tape const &) = delete;
  Tape &operator=(Tape const &) = delete;

  Var<Scalar> constant(Mat value)
  {
    Node n;
    n.owned = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<Index>(nodes_.size()) - 1};
  }

  /// Leaf referencing external storage; `value` must outlive the tape.
  Var<Scalar> leaf(Mat const &value, bool requires_grad)
  {
    Node n;
    n.external = &value;
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return {this, static_cast<Index>(nodes_.size()) - 1};
  }

  /// Records an op result. `fn` is kept only if some input needs a gradient.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, Backward fn)
  {
    bool needs = false;
    for (auto const &v : inputs) { needs = needs || requires_grad(v.id); }
    return record_if(std::move(value), needs, std::move(fn));
  }

  Var<Scalar> record_if(Mat value, bool needs, Backward fn)
  {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = needs;
    if (needs) { n.backward = std::move(fn); }
    nodes_.push_back(std::move(n));
    return {this, static_cast<Index>(nodes_.size()) - 1};
  }

  Mat const &value(Index id) const
  {
    Node const &n = nodes_[static_cast<size_t>(id)];
    return n.external ? *n.external : n.owned;
  }
  bool requires_grad(Index id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  /// Gradient of the last backward() root w.r.t. this node; empty if none reached it.
  Mat const &grad(Var<Scalar> v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

  template <typename Derived> void accumulate(Var<Scalar> v, Eigen::MatrixBase<Derived> const &g)
  {
    Node &n = nodes_[static_cast<size_t>(v.id)];
    if (!n.requires_grad) { return; }
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Backpropagates from a 1x1 root. Intermediate gradients are released as they
  /// are consumed; leaf gradients are kept.
  void backward(Var<Scalar> root)
  {
    if (root.rows() != 1 || root.cols() != 1) { throw std::invalid_argument("backward: root must be a scalar"); }
    nodes_[static_cast<size_t>(root.id)].grad = Mat::Ones(1, 1);
    for (Index id = root.id; id >= 0; --id) {
      Node &n = nodes_[static_cast<size_t>(id)];
      if (!n.backward || n.grad.size() == 0) { continue; }
      Mat g = std::move(n.grad);
      n.grad = Mat();
      n.backward(g);
    }
  }

  Index size() const { return static_cast<Index>(nodes_.size()); }

private:
  struct Node
  {
    Mat owned;
    Mat const *external = nullptr;
    Mat grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

namespace detail {
template <typename Scalar> void require_same_tape(Var<Scalar> a, Var<Scalar> b)
{
  if (a.tape != b.tape) { throw std::invalid_argument("autodiff: operands live on different tapes"); }
}
inline void require(bool ok, char const *op, std::string const &msg)
{
  if (!ok) { throw std::invalid_argument(std::string(op) + ": " + msg); }
}
inline std::string dims(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }
} // namespace detail

template <typename Scalar> Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b)
{
  detail::require_same_tape(a, b);
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add", detail::dims(a.rows(), a.cols()) + " vs " + detail::dims(b.rows(), b.cols()));
  auto *t = a.tape;
  return t->record(a.value() + b.value(), {a, b}, [t, a, b](auto const &g) {
    t->accumulate(a, g);
    t->accumulate(b, g);
  });
}

template <typename Scalar> Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b)
{
  detail::require_same_tape(a, b);
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", detail::dims(a.rows(), a.cols()) + " vs " + detail::dims(b.rows(), b.cols()));
  auto *t = a.tape;
  return t->record(a.value() - b.value(), {a, b}, [t, a, b](auto const &g) {
    t->accumulate(a, g);
    t->accumulate(b, -g);
  });
}

template <typename Scalar> Var<Scalar> scale(Var<Scalar> a, Scalar c)
{
  auto *t = a.tape;
  return t->record(a.value() * c, {a}, [t, a, c](auto const &g) { t->accumulate(a, g * c); });
}

/// a * b
template <typename Scalar> Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b)
{
  detail::require_same_tape(a, b);
  detail::require(a.cols() == b.rows(), "matmul", detail::dims(a.rows(), a.cols()) + " * " + detail::dims(b.rows(), b.cols()));
  auto *t = a.tape;
  Matrix<Scalar> v = a.value() * b.value();
  return t->record(std::move(v), {a, b}, [t, a, b](auto const &g) {
    if (a.requires_grad()) { t->accumulate(a, g * b.value().transpose()); }
    if (b.requires_grad()) { t->accumulate(b, a.value().transpose() * g); }
  });
}

/// a * b^T
template <typename Scalar> Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b)
{
  detail::require_same_tape(a, b);
  detail::require(a.cols() == b.cols(), "matmul_nt", detail::dims(a.rows(), a.cols()) + " * (" + detail::dims(b.rows(), b.cols()) + ")^T");
  auto *t = a.tape;
  Matrix<Scalar> v = a.value() * b.value().transpose();
  return t->record(std::move(v), {a, b}, [t, a, b](auto const &g) {
    if (a.requires_grad()) { t->accumulate(a, g * b.value()); }
    if (b.requires_grad()) { t->accumulate(b, g.transpose() * a.value()); }
  });
}

/// x * w + bias, bias broadcast over rows.
template <typename Scalar> Var<Scalar> linear(Var<Scalar> x, Var<Scalar> w, Var<Scalar> bias)
{
  detail::require(x.cols() == w.rows(), "linear", "input " + detail::dims(x.rows(), x.cols()) + " vs weight " + detail::dims(w.rows(), w.cols()));
  detail::require(bias.rows() == 1 && bias.cols() == w.cols(), "linear", "bias must be 1x" + std::to_string(w.cols()));
  auto *t = x.tape;
  Matrix<Scalar> v = x.value() * w.value();
  v.rowwise() += bias.value().row(0);
  return t->record(std::move(v), {x, w, bias}, [t, x, w, bias](auto const &g) {
    if (x.requires_grad()) { t->accumulate(x, g * w.value().transpose()); }
    if (w.requires_grad()) { t->accumulate(w, x.value().transpose() * g); }
    if (bias.requires_grad()) { t->accumulate(bias, g.colwise().sum()); }
  });
}

template <typename Scalar> Var<Scalar> add_bias(Var<Scalar> x, Var<Scalar> bias)
{
  detail::require(bias.rows() == 1 && bias.cols() == x.cols(), "add_bias", "bias must be 1x" + std::to_string(x.cols()));
  auto *t = x.tape;
  Matrix<Scalar> v = x.value();
  v.rowwise() += bias.value().row(0);
  return t->record(std::move(v), {x, bias}, [t, x, bias](auto const &g) {
    t->accumulate(x, g);
    if (bias.requires_grad()) { t->accumulate(bias, g.colwise().sum()); }
  });
}

template <typename Scalar> Var<Scalar> relu(Var<Scalar> x)
{
  auto *t = x.tape;
  Matrix<Scalar> v = x.value().cwiseMax(Scalar(0));
  return t->record(std::move(v), {x}, [t, x](auto const &g) {
    t->accumulate(x, (x.value().array() > Scalar(0)).select(g.array(), Scalar(0)).matrix());
  });
}

/// Per-row normalisation over columns with learnable 1xC gain and shift.
template <typename Scalar> Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta, Scalar eps = Scalar(1e-5))
{
  Index const n = x.rows(), c = x.cols();
  detail::require(gamma.cols() == c && beta.cols() == c && gamma.rows() == 1 && beta.rows() == 1, "layer_norm", "gain/shift width mismatch");
  auto *t = x.tape;
  Matrix<Scalar> xhat(n, c);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(n);
  for (Index i = 0; i < n; ++i) {
    auto const row = x.value().row(i);
    Scalar const mean = row.mean();
    Scalar const var = (row.array() - mean).square().mean();
    inv_std(i) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mean) * inv_std(i);
  }
  Matrix<Scalar> v = xhat.array().rowwise() * gamma.value().row(0).array();
  v.rowwise() += beta.value().row(0);
  return t->record(std::move(v), {x, gamma, beta}, [t, x, gamma, beta, xhat, inv_std, c](auto const &g) {
    if (gamma.requires_grad()) { t->accumulate(gamma, g.cwiseProduct(xhat).colwise().sum()); }
    if (beta.requires_grad()) { t->accumulate(beta, g.colwise().sum()); }
    if (!x.requires_grad()) { return; }
    Matrix<Scalar> dxhat = g.array().rowwise() * gamma.value().row(0).array();
    Matrix<Scalar> dx(dxhat.rows(), c);
    for (Index i = 0; i < dxhat.rows(); ++i) {
      Scalar const m1 = dxhat.row(i).mean();
      Scalar const m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
      dx.row(i) = (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i);
    }
    t->accumulate(x, dx);
  });
}

/// Row-wise softmax of (x * scale_by).
template <typename Scalar> Var<Scalar> softmax_rows(Var<Scalar> x, Scalar scale_by = Scalar(1))
{
  auto *t = x.tape;
  Matrix<Scalar> v = x.value() * scale_by;
  for (Index i = 0; i < v.rows(); ++i) {
    Scalar const m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp();
    v.row(i) /= v.row(i).sum();
  }
  Index const self = t->size(); // id the output node is about to get
  return t->record(std::move(v), {x}, [t, x, self, scale_by](auto const &g) {
    auto const &a = t->value(self);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> const dot = g.cwiseProduct(a).rowwise().sum();
    Matrix<Scalar> ds = a.array() * (g.colwise() - dot).array();
    t->accumulate(x, ds * scale_by);
  });
}

template <typename Scalar> Var<Scalar> concat_cols(std::span<Var<Scalar> const> parts)
{
  detail::require(!parts.empty(), "concat_cols", "no inputs");
  auto *t = parts[0].tape;
  Index const n = parts[0].rows();
  Index total = 0;
  bool needs = false;
  for (auto const &p : parts) {
    detail::require(p.rows() == n, "concat_cols", "row count mismatch");
    total += p.cols();
    needs = needs || p.requires_grad();
  }
  Matrix<Scalar> v(n, total);
  Index off = 0;
  for (auto const &p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return t->record_if(std::move(v), needs, [t, inputs](auto const &g) {
    Index o = 0;
    for (auto const &p : inputs) {
      if (p.requires_grad()) { t->accumulate(p, g.middleCols(o, p.cols())); }
      o += p.cols();
    }
  });
}

template <typename Scalar> Var<Scalar> concat_rows(std::span<Var<Scalar> const> parts)
{
  detail::require(!parts.empty(), "concat_rows", "no inputs");
  auto *t = parts[0].tape;
  Index const c = parts[0].cols();
  Index total = 0;
  bool needs = false;
  for (auto const &p : parts) {
    detail::require(p.cols() == c, "concat_rows", "column count mismatch");
    total += p.rows();
    needs = needs || p.requires_grad();
  }
  Matrix<Scalar> v(total, c);
  Index off = 0;
  for (auto const &p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return t->record_if(std::move(v), needs, [t, inputs](auto const &g) {
    Index o = 0;
    for (auto const &p : inputs) {
      if (p.requires_grad()) { t->accumulate(p, g.middleRows(o, p.rows())); }
      o += p.rows();
    }
  });
}

template <typename Scalar> Var<Scalar> concat_cols(std::initializer_list<Var<Scalar>> parts)
{
  return concat_cols(std::span<Var<Scalar> const>(parts.begin(), parts.size()));
}
template <typename Scalar> Var<Scalar> concat_rows(std::initializer_list<Var<Scalar>> parts)
{
  return concat_rows(std::span<Var<Scalar> const>(parts.begin(), parts.size()));
}

template <typename Scalar> Var<Scalar> slice_rows(Var<Scalar> x, Index start, Index count)
{
  detail::require(start >= 0 && count >= 0 && start + count <= x.rows(), "slice_rows", "range out of bounds");
  auto *t = x.tape;
  Index const n = x.rows(), c = x.cols();
  return t->record(x.value().middleRows(start, count), {x}, [t, x, start, count, n, c](auto const &g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(n, c);
    full.middleRows(start, count) = g;
    t->accumulate(x, full);
  });
}

template <typename Scalar> Var<Scalar> slice_cols(Var<Scalar> x, Index start, Index count)
{
  detail::require(start >= 0 && count >= 0 && start + count <= x.cols(), "slice_cols", "range out of bounds");
  auto *t = x.tape;
  Index const n = x.rows(), c = x.cols();
  return t->record(x.value().middleCols(start, count), {x}, [t, x, start, count, n, c](auto const &g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(n, c);
    full.middleCols(start, count) = g;
    t->accumulate(x, full);
  });
}

/// Each row repeated `times` times consecutively.
template <typename Scalar> Var<Scalar> repeat_rows(Var<Scalar> x, Index times)
{
  detail::require(times >= 1, "repeat_rows", "repeat count must be positive");
  auto *t = x.tape;
  Index const n = x.rows(), c = x.cols();
  Matrix<Scalar> v(n * times, c);
  for (Index i = 0; i < n; ++i) { v.middleRows(i * times, times).rowwise() = x.value().row(i); }
  return t->record(std::move(v), {x}, [t, x, n, c, times](auto const &g) {
    Matrix<Scalar> d(n, c);
    for (Index i = 0; i < n; ++i) { d.row(i) = g.middleRows(i * times, times).colwise().sum(); }
    t->accumulate(x, d);
  });
}

/// 1 x C row broadcast to n rows.
template <typename Scalar> Var<Scalar> broadcast_rows(Var<Scalar> x, Index n)
{
  detail::require(x.rows() == 1, "broadcast_rows", "input must be a single row");
  auto *t = x.tape;
  Matrix<Scalar> v = x.value().replicate(n, 1);
  return t->record(std::move(v), {x}, [t, x](auto const &g) { t->accumulate(x, g.colwise().sum()); });
}

/// Column-wise max over each of `segments` equal row blocks; output segments x C.
/// Ties resolve to the first row attaining the max.
template <typename Scalar> Var<Scalar> segment_max_rows(Var<Scalar> x, Index segments)
{
  detail::require(segments >= 1 && x.rows() % segments == 0 && x.rows() > 0, "segment_max_rows", "rows not divisible into segments");
  auto *t = x.tape;
  Index const len = x.rows() / segments, c = x.cols(), n = x.rows();
  Matrix<Scalar> v(segments, c);
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> arg(segments, c);
  auto const &xv = x.value();
  for (Index s = 0; s < segments; ++s) {
    for (Index j = 0; j < c; ++j) {
      Index best = s * len;
      for (Index i = s * len + 1; i < (s + 1) * len; ++i) {
        if (xv(i, j) > xv(best, j)) { best = i; }
      }
      v(s, j) = xv(best, j);
      arg(s, j) = best;
    }
  }
  return t->record(std::move(v), {x}, [t, x, arg, n, c](auto const &g) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(n, c);
    for (Index s = 0; s < arg.rows(); ++s) {
      for (Index j = 0; j < c; ++j) { d(arg(s, j), j) += g(s, j); }
    }
    t->accumulate(x, d);
  });
}

template <typename Scalar> Var<Scalar> max_rows(Var<Scalar> x) { return segment_max_rows(x, 1); }

/// Reshape with row-major element order (element (i, j) sits at flat index i * cols + j).
template <typename Scalar> Var<Scalar> reshape(Var<Scalar> x, Index rows, Index cols)
{
  detail::require(rows * cols == x.rows() * x.cols(), "reshape", detail::dims(x.rows(), x.cols()) + " -> " + detail::dims(rows, cols));
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  auto *t = x.tape;
  Index const r0 = x.rows(), c0 = x.cols();
  RowMat const src = x.value();
  Matrix<Scalar> v = Eigen::Map<RowMat const>(src.data(), rows, cols);
  return t->record(std::move(v), {x}, [t, x, r0, c0](auto const &g) {
    RowMat const gr = g;
    Matrix<Scalar> d = Eigen::Map<RowMat const>(gr.data(), r0, c0);
    t->accumulate(x, d);
  });
}

template <typename Scalar> Var<Scalar> gather_rows(Var<Scalar> x, std::vector<Index> indices)
{
  auto *t = x.tape;
  Index const n = x.rows(), c = x.cols();
  Matrix<Scalar> v(static_cast<Index>(indices.size()), c);
  for (size_t i = 0; i < indices.size(); ++i) {
    detail::require(indices[i] >= 0 && indices[i] < n, "gather_rows", "index out of range");
    v.row(static_cast<Index>(i)) = x.value().row(indices[i]);
  }
  return t->record(std::move(v), {x}, [t, x, indices = std::move(indices), n, c](auto const &g) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(n, c);
    for (size_t i = 0; i < indices.size(); ++i) { d.row(indices[i]) += g.row(static_cast<Index>(i)); }
    t->accumulate(x, d);
  });
}

/// Output size of a 3x3, padding-1 convolution along one axis.
inline Index conv_out_size(Index size, Index stride) { return (size - 1) / stride + 1; }

/// 3x3 patch extraction with zero padding 1. Input rows are `views` stacked
/// images of height x width pixels (row-major), columns are channels. Output
/// row per output pixel, columns ordered (ky, kx, channel).
template <typename Scalar> Var<Scalar> im2col3x3(Var<Scalar> x, Index views, Index height, Index width, Index stride)
{
  detail::require(x.rows() == views * height * width, "im2col3x3", "rows do not match views x height x width");
  detail::require(stride >= 1, "im2col3x3", "stride must be positive");
  auto *t = x.tape;
  Index const c = x.cols();
  Index const ho = conv_out_size(height, stride), wo = conv_out_size(width, stride);
  auto const &xv = x.value();
  Matrix<Scalar> v = Matrix<Scalar>::Zero(views * ho * wo, 9 * c);
  auto for_each_tap = [=](auto &&fn) {
    for (Index view = 0; view < views; ++view) {
      for (Index oy = 0; oy < ho; ++oy) {
        for (Index ox = 0; ox < wo; ++ox) {
          Index const out_row = (view * ho + oy) * wo + ox;
          for (Index ky = 0; ky < 3; ++ky) {
            Index const iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= height) { continue; }
            for (Index kx = 0; kx < 3; ++kx) {
              Index const ix = ox * stride + kx - 1;
              if (ix < 0 || ix >= width) { continue; }
              fn(out_row, (ky * 3 + kx) * c, (view * height + iy) * width + ix);
            }
          }
        }
      }
    }
  };
  for_each_tap([&](Index out_row, Index col, Index in_row) { v.block(out_row, col, 1, c) = xv.row(in_row); });
  Index const n = x.rows();
  return t->record(std::move(v), {x}, [t, x, n, c, for_each_tap](auto const &g) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(n, c);
    for_each_tap([&](Index out_row, Index col, Index in_row) { d.row(in_row) += g.block(out_row, col, 1, c); });
    t->accumulate(x, d);
  });
}

template <typename Scalar> Var<Scalar> sum(Var<Scalar> x)
{
  auto *t = x.tape;
  Matrix<Scalar> v(1, 1);
  v(0, 0) = x.value().sum();
  Index const r = x.rows(), c = x.cols();
  return t->record(std::move(v), {x}, [t, x, r, c](auto const &g) { t->accumulate(x, Matrix<Scalar>::Constant(r, c, g(0, 0))); });
}

/// Elementwise product with a constant weight matrix, then summed.
template <typename Scalar> Var<Scalar> weighted_sum(Var<Scalar> x, Matrix<Scalar> weights)
{
  detail::require(weights.rows() == x.rows() && weights.cols() == x.cols(), "weighted_sum", "shape mismatch");
  auto *t = x.tape;
  Matrix<Scalar> v(1, 1);
  v(0, 0) = x.value().cwiseProduct(weights).sum();
  return t->record(std::move(v), {x}, [t, x, w = std::move(weights)](auto const &g) { t->accumulate(x, w * g(0, 0)); });
}

/// Sum of (x - target)^2 over all elements; target is treated as constant.
template <typename Scalar> Var<Scalar> squared_error_sum(Var<Scalar> x, Matrix<Scalar> const &target)
{
  detail::require(target.rows() == x.rows() && target.cols() == x.cols(), "squared_error_sum", "shape mismatch");
  auto *t = x.tape;
  Matrix<Scalar> diff = x.value() - target;
  Matrix<Scalar> v(1, 1);
  v(0, 0) = diff.squaredNorm();
  return t->record(std::move(v), {x}, [t, x, diff = std::move(diff)](auto const &g) { t->accumulate(x, diff * (Scalar(2) * g(0, 0))); });
}

/// Sum of |x - target| over all elements; the subgradient at zero is 0.
template <typename Scalar> Var<Scalar> abs_error_sum(Var<Scalar> x, Matrix<Scalar> const &target)
{
  detail::require(target.rows() == x.rows() && target.cols() == x.cols(), "abs_error_sum", "shape mismatch");
  auto *t = x.tape;
  Matrix<Scalar> diff = x.value() - target;
  Matrix<Scalar> v(1, 1);
  v(0, 0) = diff.cwiseAbs().sum();
  Matrix<Scalar> sign = diff.unaryExpr([](Scalar d) { return d > 0 ? Scalar(1) : (d < 0 ? Scalar(-1) : Scalar(0)); });
  return t->record(std::move(v), {x}, [t, x, sign = std::move(sign)](auto const &g) { t->accumulate(x, sign * g(0, 0)); });
}

} // namespace vdpcn::ad
