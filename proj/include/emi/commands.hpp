#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "emi/run_config.hpp"

namespace emi {

/// Command-line values; set fields override the config file.
struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> manifest;
  std::optional<std::string> modalities;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::string stage = "all";
  std::string split;
  bool clamp = false;
  bool resume = false;
};

RunConfig resolve_config(const CommandOptions& options);

/// Train/validation samples under the configured split plan.
struct SplitRefs {
  SampleRefs train, valid;
};
SplitRefs resolve_split(const Dataset& dataset, const DataConfig& data);

void cmd_eda(const CommandOptions& options, std::ostream& out);
void cmd_synth(const CommandOptions& options, std::ostream& out);
void cmd_train(const CommandOptions& options, std::ostream& out);
MetricsReport cmd_evaluate(const CommandOptions& options, std::ostream& out);
void cmd_predict(const CommandOptions& options, std::ostream& out);

std::filesystem::path stage1_checkpoint_path(const std::filesystem::path& out_dir, Modality m);
std::filesystem::path fusion_checkpoint_path(const std::filesystem::path& out_dir);

}  // namespace emi
