#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "emi/ops.hpp"

namespace emi {

/// Optimizer group a parameter belongs to.
enum class ParamGroup { encoder, head, fusion };

enum class ParamKind { weight, bias, norm_gain, norm_bias };

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Tensor<Scalar> tensor;
  ParamGroup group;
  ParamKind kind;
};

template <typename Scalar>
using ParameterList = std::vector<NamedParameter<Scalar>>;

/// y = x W + b with W stored [in x out].
template <typename Scalar>
struct Linear {
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out)
      : weight(Tensor<Scalar>::zeros({in, out}, true)), bias(Tensor<Scalar>::zeros({out}, true)) {}

  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    return add_bias(tape, matmul(tape, x, weight), bias);
  }

  void collect(const std::string& prefix, ParamGroup group, ParameterList<Scalar>& out) const {
    out.push_back({prefix + ".weight", weight, group, ParamKind::weight});
    out.push_back({prefix + ".bias", bias, group, ParamKind::bias});
  }
};

template <typename Scalar>
struct LayerNorm {
  Tensor<Scalar> gain;
  Tensor<Scalar> bias;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(std::size_t dim, double eps_)
      : gain(Tensor<Scalar>(Shape{dim}, Matrix<Scalar>::Ones(1, static_cast<Eigen::Index>(dim)), true)),
        bias(Tensor<Scalar>::zeros({dim}, true)),
        eps(eps_) {}

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    return layer_norm(tape, x, gain, bias, eps);
  }

  void collect(const std::string& prefix, ParamGroup group, ParameterList<Scalar>& out) const {
    out.push_back({prefix + ".gain", gain, group, ParamKind::norm_gain});
    out.push_back({prefix + ".bias", bias, group, ParamKind::norm_bias});
  }
};

/// Fan-in uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases,
/// unit LayerNorm gains. Each parameter draws from its own stream keyed by
/// (seed, name), so the result does not depend on parameter order.
template <typename Scalar>
void init_parameters(const ParameterList<Scalar>& params, std::uint64_t seed) {
  for (const auto& p : params) {
    Tensor<Scalar> handle = p.tensor;
    auto& value = handle.mutable_value();
    switch (p.kind) {
      case ParamKind::weight: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(p.tensor.shape()[0]));
        Rng rng = make_stream(seed, "init/" + p.name);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<Scalar>(dist(rng));
        break;
      }
      case ParamKind::bias:
      case ParamKind::norm_bias: value.setZero(); break;
      case ParamKind::norm_gain: value.setOnes(); break;
    }
  }
}

}  // namespace emi
