#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "emi/rng.hpp"

namespace emi {

/// Halves (by `factor`) every learning rate after `patience` consecutive
/// epochs without a strict improvement of a higher-is-better metric.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor = 0.5, std::size_t patience = 5, double min_lr = 1e-7);

  /// Observes one epoch's metric and rescales `lrs` in place.
  /// Returns true when a reduction happened.
  bool step(double metric, std::span<double> lrs);

  double best() const { return best_; }
  std::size_t bad_epochs() const { return bad_; }

 private:
  double factor_;
  std::size_t patience_;
  double min_lr_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
};

/// Stops after `patience` consecutive epochs without strict improvement.
/// Patience 0 never stops.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience = 10) : patience_(patience) {}

  /// Returns true when `metric` is a new best.
  bool update(double metric);
  bool should_stop() const { return patience_ > 0 && bad_ >= patience_; }

  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t epochs_since_improvement() const { return bad_; }

 private:
  std::size_t patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t epoch_ = 0, best_epoch_ = 0, bad_ = 0;
};

/// Drops each of `count` modalities with probability p, redrawing the whole
/// mask until at least one modality survives. true = dropped.
std::vector<bool> modality_drop_mask(std::size_t count, double p, Rng& rng);

}  // namespace emi
