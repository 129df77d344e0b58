#pragma once

#include <string>

#include "emi/layers.hpp"

namespace emi {

/// Sentence-embedding encoder: LayerNorm -> Linear -> GELU -> dropout -> LayerNorm.
template <typename Scalar>
class TextMlpEncoder {
 public:
  TextMlpEncoder(std::size_t input_dim, std::size_t hidden_dim, double dropout, double eps)
      : in_norm_(input_dim, eps), proj_(input_dim, hidden_dim), out_norm_(hidden_dim, eps), dropout_(dropout) {}

  std::size_t input_dim() const { return proj_.in_features(); }
  std::size_t output_dim() const { return proj_.out_features(); }

  /// x: [B x input_dim] of prepared text vectors.
  Tensor<Scalar> forward(Tape<Scalar>& tape, const Tensor<Scalar>& x, bool training, Rng& rng) const {
    Tensor<Scalar> h = gelu(tape, proj_(tape, in_norm_(tape, x)));
    h = dropout(tape, h, dropout_, training, rng);
    return out_norm_(tape, h);
  }

  void collect(const std::string& prefix, ParamGroup group, ParameterList<Scalar>& out) const {
    in_norm_.collect(prefix + ".in_norm", group, out);
    proj_.collect(prefix + ".proj", group, out);
    out_norm_.collect(prefix + ".out_norm", group, out);
  }

 private:
  LayerNorm<Scalar> in_norm_;
  Linear<Scalar> proj_;
  LayerNorm<Scalar> out_norm_;
  double dropout_;
};

/// Sequence encoder: masked attention pooling over time, then
/// LayerNorm -> Linear -> GELU -> dropout on the pooled vector.
///
/// Each timestep is scored by a learned projection D_in -> 1 (no bias; a
/// shared offset cancels in the softmax). The pooled vector is the softmax
/// weighted mean of the unmasked frames.
template <typename Scalar>
class AttentionEncoder {
 public:
  AttentionEncoder(std::size_t input_dim, std::size_t hidden_dim, double dropout, double eps)
      : score_(Tensor<Scalar>::zeros({input_dim, 1}, true)),
        norm_(input_dim, eps),
        proj_(input_dim, hidden_dim),
        dropout_(dropout) {}

  std::size_t input_dim() const { return proj_.in_features(); }
  std::size_t output_dim() const { return proj_.out_features(); }

  /// seq: [T x input_dim]; returns the pooled [1 x input_dim] row.
  Tensor<Scalar> pool(Tape<Scalar>& tape, const Tensor<Scalar>& seq, const Mask& mask) const {
    if (seq.rank() != 2 || seq.cols() != score_.rows()) {
      throw ShapeError("attention pool: sequence " + to_string(seq.shape()) + " for input width " +
                       std::to_string(input_dim()));
    }
    Tensor<Scalar> scores = transpose(tape, matmul(tape, seq, score_));
    Tensor<Scalar> weights = masked_softmax(tape, scores, mask);
    return matmul(tape, weights, seq);
  }

  /// pooled: [B x input_dim] -> [B x hidden_dim].
  Tensor<Scalar> project(Tape<Scalar>& tape, const Tensor<Scalar>& pooled, bool training, Rng& rng) const {
    Tensor<Scalar> h = gelu(tape, proj_(tape, norm_(tape, pooled)));
    return dropout(tape, h, dropout_, training, rng);
  }

  Tensor<Scalar> encode(Tape<Scalar>& tape, const Tensor<Scalar>& seq, const Mask& mask, bool training,
                        Rng& rng) const {
    return project(tape, pool(tape, seq, mask), training, rng);
  }

  void collect(const std::string& prefix, ParamGroup group, ParameterList<Scalar>& out) const {
    out.push_back({prefix + ".score.weight", score_, group, ParamKind::weight});
    norm_.collect(prefix + ".norm", group, out);
    proj_.collect(prefix + ".proj", group, out);
  }

 private:
  Tensor<Scalar> score_;
  LayerNorm<Scalar> norm_;
  Linear<Scalar> proj_;
  double dropout_;
};

/// Fusion head over concatenated modality embeddings:
/// LayerNorm -> Linear -> GELU -> dropout -> Linear(6). Output is unsquashed.
template <typename Scalar>
class FusionRegressor {
 public:
  FusionRegressor(std::size_t input_dim, std::size_t hidden_dim, std::size_t outputs, double dropout, double eps)
      : norm_(input_dim, eps), fc1_(input_dim, hidden_dim), fc2_(hidden_dim, outputs), dropout_(dropout) {}

  std::size_t input_dim() const { return fc1_.in_features(); }

  Tensor<Scalar> forward(Tape<Scalar>& tape, const Tensor<Scalar>& x, bool training, Rng& rng) const {
    if (x.cols() != static_cast<Eigen::Index>(input_dim())) {
      throw ShapeError("fusion input " + to_string(x.shape()) + " but regressor expects width " +
                       std::to_string(input_dim()));
    }
    Tensor<Scalar> h = gelu(tape, fc1_(tape, norm_(tape, x)));
    h = dropout(tape, h, dropout_, training, rng);
    return fc2_(tape, h);
  }

  void collect(const std::string& prefix, ParamGroup group, ParameterList<Scalar>& out) const {
    norm_.collect(prefix + ".norm", group, out);
    fc1_.collect(prefix + ".fc1", group, out);
    fc2_.collect(prefix + ".fc2", group, out);
  }

 private:
  LayerNorm<Scalar> norm_;
  Linear<Scalar> fc1_;
  Linear<Scalar> fc2_;
  double dropout_;
};

}  // namespace emi
