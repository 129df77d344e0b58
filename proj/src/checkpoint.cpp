#include "emi/checkpoint.hpp"

#include <cstring>
#include <map>

#include <json.hpp>

#include "emi/feature_io.hpp"

namespace emi {

namespace {

using nlohmann::ordered_json;

std::string_view group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::head: return "head";
    case ParamGroup::fusion: return "fusion";
  }
  return "?";
}

ordered_json config_json(const ModelConfig& c) {
  ordered_json j;
  j["modalities"] = join_modalities(c.modalities);
  j["input"] = {{"text", c.input.text}, {"audio", c.input.audio}, {"vision", c.input.vision}, {"motion", c.input.motion}};
  j["hidden_dim"] = c.hidden_dim;
  j["motion_hidden_dim"] = c.motion_hidden_dim;
  j["fusion_hidden_dim"] = c.fusion_hidden_dim;
  j["dropout"] = c.dropout;
  j["layer_norm_eps"] = c.layer_norm_eps;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.modalities = parse_modality_list(j.at("modalities").get<std::string>());
  const auto& in = j.at("input");
  c.input.text = in.at("text").get<std::size_t>();
  c.input.audio = in.at("audio").get<std::size_t>();
  c.input.vision = in.at("vision").get<std::size_t>();
  c.input.motion = in.at("motion").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.motion_hidden_dim = j.at("motion_hidden_dim").get<std::size_t>();
  c.fusion_hidden_dim = j.at("fusion_hidden_dim").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  return c;
}

template <typename T>
void put(std::vector<char>& out, T value) {
  const auto* p = reinterpret_cast<const char*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<char>& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

}  // namespace

std::vector<char> encode_checkpoint(const Model& model, const CheckpointMeta& meta) {
  std::vector<char> blobs;
  ordered_json tensors = ordered_json::array();
  for (const auto& p : model.parameters()) {
    const auto blob = encode_feature(p.tensor);
    tensors.push_back({{"name", p.name},
                       {"offset", blobs.size()},
                       {"length", blob.size()},
                       {"group", group_name(p.group)},
                       {"discardable", p.group == ParamGroup::head}});
    blobs.insert(blobs.end(), blob.begin(), blob.end());
  }
  ordered_json index;
  index["stage"] = to_string(model.stage);
  index["model"] = config_json(model.config);
  index["config_hash"] = meta.config_hash;
  index["rng_state"] = meta.rng_state;
  index["best_epoch"] = meta.best_epoch;
  index["best_valid"] = meta.best_valid;
  index["tensors"] = std::move(tensors);
  const std::string text = index.dump();

  std::vector<char> out(emic::kMagic, emic::kMagic + 4);
  put(out, emic::kVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), blobs.begin(), blobs.end());
  return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& origin) {
  constexpr std::size_t kPrefix = 4 + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < kPrefix) throw FormatError(origin + ": truncated checkpoint header");
  if (std::memcmp(bytes.data(), emic::kMagic, 4) != 0) throw FormatError(origin + ": bad magic, not a checkpoint");
  const auto version = take<std::uint32_t>(bytes, 4);
  if (version != emic::kVersion) {
    throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto index_len = take<std::uint64_t>(bytes, 8);
  if (index_len > bytes.size() - kPrefix) throw FormatError(origin + ": index length exceeds file size");
  const std::size_t blob_start = kPrefix + static_cast<std::size_t>(index_len);

  Checkpoint out;
  try {
    const auto index = nlohmann::json::parse(bytes.begin() + kPrefix, bytes.begin() + static_cast<std::ptrdiff_t>(blob_start));
    const Stage stage = parse_stage(index.at("stage").get<std::string>());
    const ModelConfig cfg = config_from_json(index.at("model"));
    out.model = stage == Stage::unimodal ? make_unimodal_bundle<float>(cfg, cfg.modalities.front())
                                         : make_fusion_bundle<float>(cfg);
    out.meta.config_hash = index.at("config_hash").get<std::string>();
    out.meta.rng_state = index.at("rng_state").get<std::string>();
    out.meta.best_epoch = index.at("best_epoch").get<std::size_t>();
    out.meta.best_valid = index.at("best_valid").get<double>();

    std::map<std::string, Tensor<float>> stored;
    for (const auto& t : index.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto length = t.at("length").get<std::size_t>();
      if (offset > bytes.size() - blob_start || length > bytes.size() - blob_start - offset) {
        throw FormatError(origin + ": tensor " + name + " lies outside the file");
      }
      stored.emplace(name, decode_feature(bytes.data() + blob_start + offset, length, origin + ":" + name));
    }
    for (const auto& p : out.model.parameters()) {
      auto it = stored.find(p.name);
      if (it == stored.end()) throw FormatError(origin + ": missing tensor " + p.name);
      if (it->second.shape() != p.tensor.shape()) {
        throw FormatError(origin + ": tensor " + p.name + " has shape " + to_string(it->second.shape()) +
                          ", model expects " + to_string(p.tensor.shape()));
      }
      Tensor<float> handle = p.tensor;
      handle.mutable_value() = it->second.value();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": bad checkpoint index: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(origin + ": bad checkpoint index: " + e.what());
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointMeta& meta) {
  write_binary(path, encode_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_binary(path), path.string()); }

}  // namespace emi
