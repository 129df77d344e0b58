#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emi/errors.hpp"

namespace emi {

/// Row-major dense matrix; the storage type behind every tensor.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Rows of the 2-D storage view: product of all but the last axis.
inline Eigen::Index storage_rows(const Shape& shape) {
  if (shape.size() < 2) return 1;
  return static_cast<Eigen::Index>(numel(Shape(shape.begin(), shape.end() - 1)));
}

inline Eigen::Index storage_cols(const Shape& shape) {
  return shape.empty() ? 1 : static_cast<Eigen::Index>(shape.back());
}

/// Dense tensor with optional gradient.
///
/// A Tensor is a shared handle: copies alias the same value and gradient.
/// Values are held as a 2-D row-major matrix whose column count is the last
/// axis and whose row count is the product of the leading axes, so a rank-1
/// tensor of length D is stored as 1 x D and a scalar as 1 x 1.
template <typename Scalar>
class Tensor {
 public:
  using MatrixType = Matrix<Scalar>;

  Tensor() = default;

  /// Rank-2 tensor shaped like `value`.
  explicit Tensor(MatrixType value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->shape = shape_of(value);
    init(std::move(value), requires_grad);
  }

  Tensor(Shape shape, MatrixType value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->shape = std::move(shape);
    init(std::move(value), requires_grad);
  }

  static Shape shape_of(const MatrixType& m) {
    return {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    MatrixType value = MatrixType::Zero(storage_rows(shape), storage_cols(shape));
    return Tensor(std::move(shape), std::move(value), requires_grad);
  }

  static Tensor scalar(Scalar v, bool requires_grad = false) {
    MatrixType value(1, 1);
    value(0, 0) = v;
    return Tensor(Shape{}, std::move(value), requires_grad);
  }

  /// Rank-1 tensor holding `values`.
  static Tensor vector(const std::vector<Scalar>& values, bool requires_grad = false) {
    MatrixType value(1, static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) value(0, static_cast<Eigen::Index>(i)) = values[i];
    return Tensor(Shape{values.size()}, std::move(value), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return static_cast<std::size_t>(node_->value.size()); }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

  const MatrixType& value() const { return node_->value; }
  /// Direct write access for optimizers and initializers; never use on a live tape.
  MatrixType& mutable_value() { return node_->value; }

  Scalar item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return node_->value(0, 0);
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return node_->grad.size() != 0; }
  const MatrixType& grad() const { return node_->grad; }
  MatrixType& mutable_grad() { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }

  template <typename Derived>
  void accumulate_grad(const Eigen::MatrixBase<Derived>& g) const {
    if (!node_->requires_grad) return;
    if (node_->grad.size() == 0) {
      node_->grad = g;
    } else {
      node_->grad += g;
    }
  }

  /// Independent deep copy (value, shape and requires_grad; no gradient).
  Tensor clone() const { return Tensor(node_->shape, node_->value, node_->requires_grad); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  void init(MatrixType value, bool requires_grad) {
    const Shape& shape = node_->shape;
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor shape " + to_string(shape) + " has a zero extent");
    }
    if (value.rows() != storage_rows(shape) || value.cols() != storage_cols(shape)) {
      throw ShapeError("tensor shape " + to_string(shape) + " does not match storage " +
                       std::to_string(value.rows()) + "x" + std::to_string(value.cols()));
    }
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  struct Node {
    Shape shape;
    MatrixType value;
    MatrixType grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

}  // namespace emi
