#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "emi/dataset.hpp"

namespace emi {

/// Per-split dataset statistics. Frame counts are vision sequence lengths;
/// standard deviations use the n-1 denominator; a label counts as zero only
/// when it is exactly 0.0.
struct SplitSummary {
  std::string name;
  std::size_t sample_count = 0;
  double frames_mean = 0, frames_std = 0, frames_median = 0;
  std::size_t frames_min = 0, frames_max = 0;
  std::array<double, kNumEmotions> label_mean{}, label_std{}, zero_fraction{};
  double missing_text_fraction = 0;
  double tail_fraction = 0;  ///< clips longer than kTailFrames
};

inline constexpr std::size_t kTailFrames = 120;

SplitSummary summarize_split(std::span<const Sample* const> samples, std::string name = {});

struct KsResult {
  double statistic = 0;  ///< sup |ECDF_a - ECDF_b|
  double p_value = 1;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size n*m/(n+m).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

struct ShiftRow {
  std::string_view label;
  double train_mean = 0, train_std = 0;
  double valid_mean = 0, valid_std = 0;
  double delta_mean = 0;  ///< train - valid
  double zero_train = 0, zero_valid = 0;
  KsResult ks;
};

struct ShiftReport {
  std::array<ShiftRow, kNumEmotions> rows;
};

ShiftReport shift_report(std::span<const Sample* const> train, std::span<const Sample* const> valid);

std::string summary_table(const std::vector<SplitSummary>& splits);
std::string summary_csv(const std::vector<SplitSummary>& splits);
std::string shift_table(const ShiftReport& report);
std::string shift_csv(const ShiftReport& report);

}  // namespace emi
