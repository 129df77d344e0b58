#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "emi/dataset.hpp"
#include "emi/encoders.hpp"
#include "emi/modality.hpp"

namespace emi {

struct ModelConfig {
  std::vector<Modality> modalities = {Modality::text, Modality::audio, Modality::vision};
  FeatureDims input;
  std::size_t hidden_dim = 384;         ///< text, audio, vision embeddings
  std::size_t motion_hidden_dim = 128;  ///< motion embedding
  std::size_t fusion_hidden_dim = 384;
  double dropout = 0.45;
  double layer_norm_eps = 1e-5;

  std::size_t hidden_of(Modality m) const { return m == Modality::motion ? motion_hidden_dim : hidden_dim; }

  /// Width of the concatenated fusion input; depends only on `modalities`.
  std::size_t fusion_width() const {
    std::size_t w = 0;
    for (Modality m : modalities) w += hidden_of(m);
    return w;
  }

  bool operator==(const ModelConfig&) const = default;
};

enum class Stage { unimodal, fusion };
std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

/// Encoder for one modality; text uses the MLP, the sequence modalities use
/// attention pooling.
template <typename Scalar>
class ModalityEncoder {
 public:
  ModalityEncoder(Modality modality, const ModelConfig& cfg)
      : modality_(modality), input_dim_(cfg.input.of(modality)), impl_(make_impl(modality, cfg)) {}

  Modality modality() const { return modality_; }
  std::size_t output_dim() const {
    return std::visit([](const auto& e) { return e.output_dim(); }, impl_);
  }

  const TextMlpEncoder<Scalar>* text() const { return std::get_if<TextMlpEncoder<Scalar>>(&impl_); }
  const AttentionEncoder<Scalar>* sequence() const { return std::get_if<AttentionEncoder<Scalar>>(&impl_); }

  /// Embeds a batch into [B x output_dim]. With `allow_missing`, samples that
  /// lack the modality get a placeholder input; callers must zero those rows.
  Tensor<Scalar> embed(Tape<Scalar>& tape, std::span<const Sample* const> batch, bool training, Rng& rng,
                       bool allow_missing = false) const {
    if (batch.empty()) throw ContractError("embed: empty batch");
    const auto rows = static_cast<Eigen::Index>(batch.size());
    if (const auto* text_encoder = text()) {
      Matrix<Scalar> x(rows, static_cast<Eigen::Index>(input_dim_));
      for (Eigen::Index i = 0; i < rows; ++i) {
        x.row(i) = prepare_text(batch[static_cast<std::size_t>(i)]->text, input_dim_).template cast<Scalar>();
      }
      return text_encoder->forward(tape, Tensor<Scalar>(std::move(x)), training, rng);
    }
    const auto& encoder = *sequence();
    std::vector<Tensor<Scalar>> pooled;
    pooled.reserve(batch.size());
    for (const Sample* s : batch) {
      const Matrix<float>* frames = sequence_of(*s);
      if (!frames) {
        if (!allow_missing) {
          throw ContractError("sample " + s->id + " has no " + std::string(to_string(modality_)) + " features");
        }
        pooled.push_back(Tensor<Scalar>::zeros({1, input_dim_}));
        continue;
      }
      Tensor<Scalar> seq(frames->template cast<Scalar>());
      pooled.push_back(encoder.pool(tape, seq, Mask(static_cast<std::size_t>(frames->rows()), true)));
    }
    return encoder.project(tape, vstack(tape, std::span<const Tensor<Scalar>>(pooled)), training, rng);
  }

  void collect(const std::string& prefix, ParamGroup group, ParameterList<Scalar>& out) const {
    std::visit([&](const auto& e) { e.collect(prefix, group, out); }, impl_);
  }

 private:
  const Matrix<float>* sequence_of(const Sample& s) const {
    switch (modality_) {
      case Modality::audio: return s.audio.rows() ? &s.audio : nullptr;
      case Modality::vision: return s.vision.rows() ? &s.vision : nullptr;
      case Modality::motion: return s.motion ? &*s.motion : nullptr;
      case Modality::text: break;
    }
    return nullptr;
  }

  using Impl = std::variant<TextMlpEncoder<Scalar>, AttentionEncoder<Scalar>>;

  static Impl make_impl(Modality m, const ModelConfig& cfg) {
    const std::size_t in = cfg.input.of(m), hidden = cfg.hidden_of(m);
    if (m == Modality::text) return TextMlpEncoder<Scalar>(in, hidden, cfg.dropout, cfg.layer_norm_eps);
    return AttentionEncoder<Scalar>(in, hidden, cfg.dropout, cfg.layer_norm_eps);
  }

  Modality modality_;
  std::size_t input_dim_;
  Impl impl_;
};

/// Every learned component of one training stage.
///
/// Stage 1 holds a single encoder plus its regression head; stage 2 holds
/// one encoder per configured modality plus the fusion regressor. Heads carried
/// over into a fusion bundle are not used.
template <typename Scalar>
struct ModelBundle {
  ModelConfig config;
  Stage stage = Stage::unimodal;
  std::map<Modality, ModalityEncoder<Scalar>> encoders;
  std::map<Modality, Linear<Scalar>> heads;
  std::optional<FusionRegressor<Scalar>> fusion;

  ParameterList<Scalar> parameters() const {
    ParameterList<Scalar> out;
    for (const auto& [m, enc] : encoders) enc.collect(std::string(to_string(m)), ParamGroup::encoder, out);
    for (const auto& [m, head] : heads) head.collect(std::string(to_string(m)) + ".head", ParamGroup::head, out);
    if (fusion) fusion->collect("fusion", ParamGroup::fusion, out);
    return out;
  }
};

template <typename Scalar>
ModelBundle<Scalar> make_unimodal_bundle(const ModelConfig& cfg, Modality modality) {
  ModelBundle<Scalar> b;
  b.config = cfg;
  b.config.modalities = {modality};
  b.stage = Stage::unimodal;
  b.encoders.emplace(modality, ModalityEncoder<Scalar>(modality, cfg));
  b.heads.emplace(modality, Linear<Scalar>(cfg.hidden_of(modality), kNumEmotions));
  return b;
}

template <typename Scalar>
ModelBundle<Scalar> make_fusion_bundle(const ModelConfig& cfg) {
  if (cfg.modalities.empty()) throw ConfigError("fusion needs at least one modality");
  ModelBundle<Scalar> b;
  b.config = cfg;
  b.stage = Stage::fusion;
  for (Modality m : cfg.modalities) b.encoders.emplace(m, ModalityEncoder<Scalar>(m, cfg));
  b.fusion.emplace(cfg.fusion_width(), cfg.fusion_hidden_dim, kNumEmotions, cfg.dropout, cfg.layer_norm_eps);
  return b;
}

template <typename Scalar>
void init_parameters(const ModelBundle<Scalar>& bundle, std::uint64_t seed) {
  init_parameters(bundle.parameters(), seed);
}

/// Copies parameter values from `src` into same-named parameters of `dst`.
/// Every parameter of `dst` whose name appears in `src` must match its shape.
template <typename Scalar>
std::size_t copy_parameters(const ParameterList<Scalar>& src, const ParameterList<Scalar>& dst) {
  std::map<std::string, const Tensor<Scalar>*> by_name;
  for (const auto& p : src) by_name[p.name] = &p.tensor;
  std::size_t copied = 0;
  for (const auto& p : dst) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) continue;
    if (it->second->shape() != p.tensor.shape()) {
      throw ShapeError("parameter " + p.name + ": shape " + to_string(it->second->shape()) + " vs " +
                       to_string(p.tensor.shape()));
    }
    Tensor<Scalar> handle = p.tensor;
    handle.mutable_value() = it->second->value();
    ++copied;
  }
  return copied;
}

/// Deep copy with independent parameter storage.
template <typename Scalar>
ModelBundle<Scalar> clone(const ModelBundle<Scalar>& bundle) {
  ModelBundle<Scalar> out;
  out.config = bundle.config;
  out.stage = bundle.stage;
  for (const auto& [m, enc] : bundle.encoders) out.encoders.emplace(m, ModalityEncoder<Scalar>(m, bundle.config));
  for (const auto& [m, head] : bundle.heads) {
    out.heads.emplace(m, Linear<Scalar>(head.in_features(), head.out_features()));
  }
  if (bundle.fusion) {
    out.fusion.emplace(bundle.config.fusion_width(), bundle.config.fusion_hidden_dim, kNumEmotions,
                       bundle.config.dropout, bundle.config.layer_norm_eps);
  }
  copy_parameters(bundle.parameters(), out.parameters());
  return out;
}

/// Encoder plus head: [B x 6] predictions for one modality.
template <typename Scalar>
Tensor<Scalar> forward_unimodal(Tape<Scalar>& tape, const ModelBundle<Scalar>& bundle, Modality modality,
                                std::span<const Sample* const> batch, bool training, Rng& rng) {
  auto enc = bundle.encoders.find(modality);
  auto head = bundle.heads.find(modality);
  if (enc == bundle.encoders.end() || head == bundle.heads.end()) {
    throw ContractError("bundle has no " + std::string(to_string(modality)) + " encoder and head");
  }
  return head->second(tape, enc->second.embed(tape, batch, training, rng));
}

/// Fusion forward pass. `dropped[i][j]` drops modality `config.modalities[j]`
/// for sample i (an empty `dropped` keeps everything). Dropped or absent
/// modalities contribute zeros in their fixed slot.
template <typename Scalar>
Tensor<Scalar> forward_fusion(Tape<Scalar>& tape, const ModelBundle<Scalar>& bundle, std::span<const Sample* const> batch,
                              const std::vector<Mask>& dropped, bool training, Rng& rng) {
  if (!bundle.fusion) throw ContractError("bundle has no fusion regressor");
  const auto& mods = bundle.config.modalities;
  if (!dropped.empty() && dropped.size() != batch.size()) {
    throw ShapeError("forward_fusion: " + std::to_string(dropped.size()) + " drop masks for batch of " +
                     std::to_string(batch.size()));
  }
  const auto rows = static_cast<Eigen::Index>(batch.size());
  for (std::size_t i = 0; i < dropped.size(); ++i) {
    if (dropped[i].size() != mods.size()) throw ShapeError("forward_fusion: drop mask width mismatch");
    bool any_kept = false;
    for (bool d : dropped[i]) any_kept = any_kept || !d;
    if (!any_kept) throw ContractError("forward_fusion: every modality dropped for sample " + batch[i]->id);
  }

  std::vector<Tensor<Scalar>> slots;
  for (std::size_t j = 0; j < mods.size(); ++j) {
    const Modality m = mods[j];
    const auto width = bundle.config.hidden_of(m);
    Matrix<Scalar> keep = Matrix<Scalar>::Ones(rows, static_cast<Eigen::Index>(width));
    bool any_kept = false, any_zeroed = false;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto k = static_cast<std::size_t>(i);
      // Missing text is encoded as the zero-vector input, not zeroed out.
      const bool off = (!dropped.empty() && dropped[k][j]) || (m != Modality::text && !batch[k]->has(m));
      if (off) keep.row(i).setZero();
      any_kept = any_kept || !off;
      any_zeroed = any_zeroed || off;
    }
    if (!any_kept) {
      slots.push_back(Tensor<Scalar>::zeros({static_cast<std::size_t>(rows), width}));
      continue;
    }
    Tensor<Scalar> emb = bundle.encoders.at(m).embed(tape, batch, training, rng, true);
    if (any_zeroed) emb = mul(tape, emb, Tensor<Scalar>(std::move(keep)));
    slots.push_back(emb);
  }
  Tensor<Scalar> joined = concat(tape, std::span<const Tensor<Scalar>>(slots));
  return bundle.fusion->forward(tape, joined, training, rng);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 1, static_cast<int>(kNumEmotions)> predict_unimodal(const ModalityEncoder<Scalar>& encoder,
                                                                          const Linear<Scalar>& head, const Sample& sample,
                                                                          bool training, Rng& rng) {
  Tape<Scalar> tape(Tape<Scalar>::Mode::inference);
  const Sample* batch[] = {&sample};
  return head(tape, encoder.embed(tape, batch, training, rng)).value();
}

template <typename Scalar>
Eigen::Matrix<Scalar, 1, static_cast<int>(kNumEmotions)> predict_fusion(const ModelBundle<Scalar>& bundle,
                                                                        const Sample& sample, const Mask& dropped,
                                                                        bool training, Rng& rng) {
  Tape<Scalar> tape(Tape<Scalar>::Mode::inference);
  const Sample* batch[] = {&sample};
  std::vector<Mask> masks;
  if (!dropped.empty()) masks.push_back(dropped);
  return forward_fusion(tape, bundle, batch, masks, training, rng).value();
}

}  // namespace emi
