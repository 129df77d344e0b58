#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emi/rng.hpp"
#include "emi/tape.hpp"
#include "emi/tensor.hpp"

// Differentiable operators. Every op computes its forward value eagerly and,
// when the tape records, pushes a rule that accumulates input gradients from
// the output gradient.

namespace emi {

using Mask = std::vector<bool>;

namespace detail {

inline std::string shape_pair(const Shape& a, const Shape& b) { return to_string(a) + " and " + to_string(b); }

}  // namespace detail

/// Matrix product of a [M x K] (or a rank-1 [K] row) with b [K x N].
template <typename Scalar>
Tensor<Scalar> matmul(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() > 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + detail::shape_pair(a.shape(), b.shape()));
  }
  Matrix<Scalar> value = a.value() * b.value();
  Shape shape = a.rank() == 1 ? Shape{b.shape()[1]} : Shape{a.shape()[0], b.shape()[1]};
  const bool record = tape.should_record(a, b);
  Tensor<Scalar> out(std::move(shape), std::move(value), record);
  if (record) {
    tape.push([a, b, out] {
      if (!out.has_grad()) return;
      if (a.requires_grad()) a.accumulate_grad(out.grad() * b.value().transpose());
      if (b.requires_grad()) b.accumulate_grad(a.value().transpose() * out.grad());
    });
  }
  return out;
}

/// Elementwise a + b for identical shapes.
template <typename Scalar>
Tensor<Scalar> add(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: shapes " + detail::shape_pair(a.shape(), b.shape()));
  const bool record = tape.should_record(a, b);
  Tensor<Scalar> out(a.shape(), a.value() + b.value(), record);
  if (record) {
    tape.push([a, b, out] {
      if (!out.has_grad()) return;
      a.accumulate_grad(out.grad());
      b.accumulate_grad(out.grad());
    });
  }
  return out;
}

/// Adds a rank-1 bias [N] to every row of x [.. x N].
template <typename Scalar>
Tensor<Scalar> add_bias(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw ShapeError("add_bias: bias " + to_string(bias.shape()) + " does not fit " + to_string(x.shape()));
  }
  const bool record = tape.should_record(x, bias);
  Matrix<Scalar> value = x.value().rowwise() + bias.value().row(0);
  Tensor<Scalar> out(x.shape(), std::move(value), record);
  if (record) {
    tape.push([x, bias, out] {
      if (!out.has_grad()) return;
      x.accumulate_grad(out.grad());
      if (bias.requires_grad()) bias.accumulate_grad(out.grad().colwise().sum());
    });
  }
  return out;
}

/// Elementwise product for identical shapes.
template <typename Scalar>
Tensor<Scalar> mul(Tape<Scalar>& tape, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw ShapeError("mul: shapes " + detail::shape_pair(a.shape(), b.shape()));
  const bool record = tape.should_record(a, b);
  Tensor<Scalar> out(a.shape(), a.value().cwiseProduct(b.value()), record);
  if (record) {
    tape.push([a, b, out] {
      if (!out.has_grad()) return;
      if (a.requires_grad()) a.accumulate_grad(out.grad().cwiseProduct(b.value()));
      if (b.requires_grad()) b.accumulate_grad(out.grad().cwiseProduct(a.value()));
    });
  }
  return out;
}

/// Sum of all elements as a scalar.
template <typename Scalar>
Tensor<Scalar> sum(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  const bool record = tape.should_record(x);
  Tensor<Scalar> out = Tensor<Scalar>::scalar(x.value().sum(), record);
  if (record) {
    tape.push([x, out] {
      if (!out.has_grad()) return;
      x.accumulate_grad(Matrix<Scalar>::Constant(x.rows(), x.cols(), out.grad()(0, 0)));
    });
  }
  return out;
}

/// Swaps the two axes of a rank-2 tensor; a rank-1 [N] becomes [N x 1].
template <typename Scalar>
Tensor<Scalar> transpose(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  if (x.rank() > 2 || x.rank() == 0) throw ShapeError("transpose: needs rank 1 or 2, got " + to_string(x.shape()));
  const bool record = tape.should_record(x);
  Shape shape{static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(x.rows())};
  Tensor<Scalar> out(std::move(shape), x.value().transpose(), record);
  if (record) {
    tape.push([x, out] {
      if (!out.has_grad()) return;
      x.accumulate_grad(out.grad().transpose());
    });
  }
  return out;
}

/// Standardizes each row over the last axis with the population variance,
/// then applies gain and bias.
template <typename Scalar>
Tensor<Scalar> layer_norm(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                          const Tensor<Scalar>& bias, double eps) {
  const Eigen::Index d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw ShapeError("layer_norm: affine parameters " + detail::shape_pair(gain.shape(), bias.shape()) +
                     " do not fit input " + to_string(x.shape()));
  }
  if (!(eps > 0)) throw ContractError("layer_norm: eps must be positive");

  const auto& xv = x.value();
  Matrix<Scalar> normalized(xv.rows(), d);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const Scalar mean = xv.row(r).mean();
    const auto centered = (xv.row(r).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(d);
    inv_std(r) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(eps));
    normalized.row(r) = centered * inv_std(r);
  }
  Matrix<Scalar> value =
      (normalized.array().rowwise() * gain.value().row(0).array()).matrix().rowwise() + bias.value().row(0);

  const bool record = tape.should_record(x, gain, bias);
  Tensor<Scalar> out(x.shape(), std::move(value), record);
  if (record) {
    tape.push([x, gain, bias, out, normalized = std::move(normalized), inv_std = std::move(inv_std), d] {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (gain.requires_grad()) gain.accumulate_grad(g.cwiseProduct(normalized).colwise().sum());
      if (bias.requires_grad()) bias.accumulate_grad(g.colwise().sum());
      if (!x.requires_grad()) return;
      const Matrix<Scalar> dnorm = (g.array().rowwise() * gain.value().row(0).array()).matrix();
      Matrix<Scalar> dx(dnorm.rows(), d);
      const Scalar n = static_cast<Scalar>(d);
      for (Eigen::Index r = 0; r < dnorm.rows(); ++r) {
        const Scalar s1 = dnorm.row(r).sum();
        const Scalar s2 = dnorm.row(r).dot(normalized.row(r));
        dx.row(r) = ((dnorm.row(r).array() * n - s1 - normalized.row(r).array() * s2) * (inv_std(r) / n)).matrix();
      }
      x.accumulate_grad(dx);
    });
  }
  return out;
}

/// GELU with the exact Gaussian CDF: x * Phi(x).
template <typename Scalar>
Tensor<Scalar> gelu(Tape<Scalar>& tape, const Tensor<Scalar>& x) {
  const Scalar inv_sqrt2 = static_cast<Scalar>(1.0 / std::numbers::sqrt2);
  Matrix<Scalar> value = x.value().unaryExpr(
      [inv_sqrt2](Scalar v) { return v * Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2)); });
  const bool record = tape.should_record(x);
  Tensor<Scalar> out(x.shape(), std::move(value), record);
  if (record) {
    tape.push([x, out, inv_sqrt2] {
      if (!out.has_grad()) return;
      const Scalar inv_sqrt_2pi = static_cast<Scalar>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
      Matrix<Scalar> slope = x.value().unaryExpr([&](Scalar v) {
        const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(Scalar(-0.5) * v * v);
      });
      x.accumulate_grad(out.grad().cwiseProduct(slope));
    });
  }
  return out;
}

/// Softmax over the last axis restricted to positions where `mask` is true.
/// Masked positions get exactly zero weight and are excluded from the
/// normalizing sum.
template <typename Scalar>
Tensor<Scalar> masked_softmax(Tape<Scalar>& tape, const Tensor<Scalar>& scores, const Mask& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != scores.cols()) {
    throw ShapeError("masked_softmax: mask length " + std::to_string(mask.size()) + " vs scores " +
                     to_string(scores.shape()));
  }
  bool any = false;
  for (bool m : mask) any = any || m;
  if (!any) throw DegenerateMaskError("masked_softmax: every position is masked");

  const auto& s = scores.value();
  Matrix<Scalar> weights = Matrix<Scalar>::Zero(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    Scalar peak = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index t = 0; t < s.cols(); ++t) {
      if (mask[static_cast<std::size_t>(t)]) peak = std::max(peak, s(r, t));
    }
    Scalar total = 0;
    for (Eigen::Index t = 0; t < s.cols(); ++t) {
      if (!mask[static_cast<std::size_t>(t)]) continue;
      weights(r, t) = std::exp(s(r, t) - peak);
      total += weights(r, t);
    }
    weights.row(r) /= total;
  }

  const bool record = tape.should_record(scores);
  Tensor<Scalar> out(scores.shape(), std::move(weights), record);
  if (record) {
    tape.push([scores, out] {
      if (!out.has_grad()) return;
      const auto& y = out.value();
      const auto& g = out.grad();
      Matrix<Scalar> ds(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const Scalar dot = g.row(r).dot(y.row(r));
        ds.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
      scores.accumulate_grad(ds);
    });
  }
  return out;
}

/// Inverted dropout: in training each element is zeroed with probability p
/// and survivors are scaled by 1/(1-p). Outside training, returns `x` itself.
template <typename Scalar>
Tensor<Scalar> dropout(Tape<Scalar>& tape, const Tensor<Scalar>& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - p));
  Matrix<Scalar> keep(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < keep.size(); ++i) {
    keep.data()[i] = unit(rng) < p ? Scalar(0) : keep_scale;
  }
  const bool record = tape.should_record(x);
  Tensor<Scalar> out(x.shape(), x.value().cwiseProduct(keep), record);
  if (record) {
    tape.push([x, out, keep = std::move(keep)] {
      if (!out.has_grad()) return;
      x.accumulate_grad(out.grad().cwiseProduct(keep));
    });
  }
  return out;
}

/// Joins tensors along the last axis, preserving argument order. Inputs must
/// share their leading axes; all-rank-1 inputs give a rank-1 result.
template <typename Scalar>
Tensor<Scalar> concat(Tape<Scalar>& tape, std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index width = 0;
  bool record = false;
  for (const auto& p : parts) {
    if (p.rows() != rows || p.rank() != parts.front().rank()) {
      throw ShapeError("concat: batch-size mismatch between " +
                       detail::shape_pair(parts.front().shape(), p.shape()));
    }
    width += p.cols();
    record = record || p.requires_grad();
  }
  record = record && tape.recording();
  Matrix<Scalar> value(rows, width);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    value.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  Shape shape = parts.front().shape();
  shape.back() = static_cast<std::size_t>(width);
  Tensor<Scalar> out(std::move(shape), std::move(value), record);
  if (record) {
    tape.push([inputs = std::vector<Tensor<Scalar>>(parts.begin(), parts.end()), out] {
      if (!out.has_grad()) return;
      Eigen::Index at = 0;
      for (const auto& p : inputs) {
        if (p.requires_grad()) p.accumulate_grad(out.grad().middleCols(at, p.cols()));
        at += p.cols();
      }
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> concat(Tape<Scalar>& tape, std::initializer_list<Tensor<Scalar>> parts) {
  return concat(tape, std::span<const Tensor<Scalar>>(parts.begin(), parts.size()));
}

/// Stacks rows of equally wide tensors into one [sum(rows) x cols] tensor.
template <typename Scalar>
Tensor<Scalar> vstack(Tape<Scalar>& tape, std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw ContractError("vstack: no inputs");
  const Eigen::Index width = parts.front().cols();
  Eigen::Index rows = 0;
  bool record = false;
  for (const auto& p : parts) {
    if (p.cols() != width) {
      throw ShapeError("vstack: width mismatch between " + detail::shape_pair(parts.front().shape(), p.shape()));
    }
    rows += p.rows();
    record = record || p.requires_grad();
  }
  record = record && tape.recording();
  Matrix<Scalar> value(rows, width);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    value.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  Tensor<Scalar> out(Shape{static_cast<std::size_t>(rows), static_cast<std::size_t>(width)}, std::move(value),
                     record);
  if (record) {
    tape.push([inputs = std::vector<Tensor<Scalar>>(parts.begin(), parts.end()), out] {
      if (!out.has_grad()) return;
      Eigen::Index at = 0;
      for (const auto& p : inputs) {
        if (p.requires_grad()) p.accumulate_grad(out.grad().middleRows(at, p.rows()));
        at += p.rows();
      }
    });
  }
  return out;
}

}  // namespace emi
