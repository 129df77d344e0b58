#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emi/dataset.hpp"

namespace emi {

/// Train/validation assignment of the labeled population.
struct SplitPlan {
  std::vector<std::string> train_ids;
  std::vector<std::string> valid_ids;
  std::uint64_t seed = 0;
  std::string ratio_label = "2:1";

  bool operator==(const SplitPlan&) const = default;
};

/// Plan that follows the manifest's own train/valid tags.
SplitPlan plan_from_manifest(const DatasetManifest& manifest);

/// Moves a seeded uniform subset of validation ids into training until the
/// training side holds `target_train` ids. Both lists keep their relative
/// input order, moved ids are appended to training in validation order.
SplitPlan expand_split(const SplitPlan& plan, std::size_t target_train, std::uint64_t seed);

/// round(4/5 of the labeled population), the training size of a 4:1 split.
std::size_t four_to_one_target(const SplitPlan& plan);

}  // namespace emi
