#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emi/kv_config.hpp"
#include "emi/trainer.hpp"

namespace emi {

struct DataConfig {
  std::string manifest;
  std::string split = "2:1";  ///< "2:1" follows the manifest tags, "4:1" expands training
  std::uint64_t split_seed = 42;
  std::size_t target_train = 0;  ///< 4:1 training size; 0 = four fifths of the labeled set
  std::string output_dir = "runs";
};

/// Everything a run needs. Defaults reproduce the reference configuration, so
/// an empty file is a complete config.
///
///   [data]      manifest, modalities, split, split_seed, target_train, output_dir
///   [model]     *_dim, hidden_dim, motion_hidden_dim, fusion_hidden_dim, dropout, layer_norm_eps
///   [training]  batch_size, learning_rate, weight_decay, clip_norm, beta1, beta2, adam_eps,
///               epochs, motion_epochs, fusion_epochs, early_stop_patience,
///               scheduler_factor, scheduler_patience, min_lr, loss_alpha, ccc_epsilon,
///               modality_dropout, encoder_lr_multiplier, seed, clamp
struct RunConfig {
  DataConfig data;
  ModelConfig model;  ///< `model.modalities` is the configured modality set
  TrainConfig training;

  static RunConfig from_document(const KvDocument& doc);
  static RunConfig load(const std::filesystem::path& path);
  KvDocument to_document() const;
  std::string serialize() const { return to_document().serialize(); }

  /// FNV-1a of the canonical serialization, as 16 hex digits.
  std::string hash() const;
  void validate() const;

  bool operator==(const RunConfig& other) const { return to_document() == other.to_document(); }
};

}  // namespace emi
