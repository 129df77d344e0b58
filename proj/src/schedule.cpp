#include "emi/schedule.hpp"

#include <algorithm>
#include <string>

#include "emi/errors.hpp"

namespace emi {

PlateauScheduler::PlateauScheduler(double factor, std::size_t patience, double min_lr)
    : factor_(factor), patience_(patience), min_lr_(min_lr) {
  if (!(factor > 0 && factor < 1)) throw ConfigError("scheduler factor must lie in (0, 1)");
  if (!(min_lr >= 0)) throw ConfigError("scheduler min_lr must be non-negative");
}

bool PlateauScheduler::step(double metric, std::span<double> lrs) {
  if (metric > best_) {
    best_ = metric;
    bad_ = 0;
    return false;
  }
  if (++bad_ < patience_ || patience_ == 0) return false;
  bad_ = 0;
  bool reduced = false;
  for (double& lr : lrs) {
    const double next = std::max(lr * factor_, min_lr_);
    if (next < lr) {
      lr = next;
      reduced = true;
    }
  }
  return reduced;
}

bool EarlyStopping::update(double metric) {
  ++epoch_;
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = epoch_;
    bad_ = 0;
    return true;
  }
  ++bad_;
  return false;
}

std::vector<bool> modality_drop_mask(std::size_t count, double p, Rng& rng) {
  if (count == 0) throw ContractError("modality_drop_mask: no modalities configured");
  if (!(p >= 0 && p < 1)) throw ConfigError("modality dropout must lie in [0, 1), got " + std::to_string(p));
  std::vector<bool> mask(count, false);
  if (p == 0) return mask;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (;;) {
    bool any_kept = false;
    for (std::size_t i = 0; i < count; ++i) {
      mask[i] = uniform(rng) < p;
      any_kept = any_kept || !mask[i];
    }
    if (any_kept) return mask;
  }
}

}  // namespace emi
