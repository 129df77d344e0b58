#pragma once

#include <array>
#include <span>

#include <Eigen/Dense>

#include "emi/dataset.hpp"

namespace emi {

/// Pearson correlation with population moments: cov / (std_p * std_t + eps).
/// Returns 0 when either side has zero variance.
double pearson(std::span<const double> pred, std::span<const double> target, double eps = 0.0);

/// Concordance correlation: 2 cov / (var_p + var_t + (mean_p - mean_t)^2 + eps).
/// Returns 0 when either side has zero variance.
double ccc(std::span<const double> pred, std::span<const double> target, double eps = 1e-8);

struct MetricsReport {
  std::array<double, kNumEmotions> pearson{};
  double mean_pearson = 0;  ///< (r_1 + ... + r_6) / 6, summed in dimension order
  std::array<double, kNumEmotions> ccc{};
  double mse = 0;
  std::size_t count = 0;
};

/// Full-set per-dimension metrics over [N x 6] predictions and targets.
MetricsReport average_pearson(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets);

}  // namespace emi
