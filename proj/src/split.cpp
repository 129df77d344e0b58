#include "emi/split.hpp"

#include <algorithm>
#include <numeric>

#include "emi/errors.hpp"
#include "emi/rng.hpp"

namespace emi {

SplitPlan plan_from_manifest(const DatasetManifest& manifest) {
  SplitPlan plan;
  plan.train_ids = manifest.ids(SplitTag::train);
  plan.valid_ids = manifest.ids(SplitTag::valid);
  return plan;
}

SplitPlan expand_split(const SplitPlan& plan, std::size_t target_train, std::uint64_t seed) {
  const std::size_t train = plan.train_ids.size();
  const std::size_t valid = plan.valid_ids.size();
  if (target_train < train) {
    throw ContractError("expand_split: target " + std::to_string(target_train) + " below current train size " +
                        std::to_string(train));
  }
  const std::size_t deficit = target_train - train;
  if (deficit > valid) {
    throw ContractError("expand_split: need " + std::to_string(deficit) + " validation ids, only " +
                        std::to_string(valid) + " available");
  }

  std::vector<std::size_t> order(valid);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, "expand_split");
  // Partial Fisher-Yates: the first `deficit` slots become a uniform subset.
  for (std::size_t i = 0; i < deficit; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, valid - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<bool> moved(valid, false);
  for (std::size_t i = 0; i < deficit; ++i) moved[order[i]] = true;

  SplitPlan out;
  out.seed = seed;
  out.ratio_label = "4:1";
  out.train_ids = plan.train_ids;
  out.train_ids.reserve(target_train);
  out.valid_ids.reserve(valid - deficit);
  for (std::size_t i = 0; i < valid; ++i) {
    (moved[i] ? out.train_ids : out.valid_ids).push_back(plan.valid_ids[i]);
  }
  return out;
}

std::size_t four_to_one_target(const SplitPlan& plan) {
  const std::size_t total = plan.train_ids.size() + plan.valid_ids.size();
  return (total * 4 + 2) / 5;
}

}  // namespace emi
