#include "emi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "emi/errors.hpp"

namespace emi {

namespace {

struct PairMoments {
  double mean_p = 0, mean_t = 0, var_p = 0, var_t = 0, cov = 0;
};

PairMoments pair_moments(std::span<const double> p, std::span<const double> t, const char* what) {
  if (p.size() != t.size()) {
    throw ShapeError(std::string(what) + ": length mismatch " + std::to_string(p.size()) + " vs " +
                     std::to_string(t.size()));
  }
  if (p.size() < 2) throw ContractError(std::string(what) + ": needs at least 2 values");
  const double n = static_cast<double>(p.size());
  PairMoments m;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.mean_p += p[i];
    m.mean_t += t[i];
  }
  m.mean_p /= n;
  m.mean_t /= n;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - m.mean_p, dt = t[i] - m.mean_t;
    m.var_p += dp * dp;
    m.var_t += dt * dt;
    m.cov += dp * dt;
  }
  m.var_p /= n;
  m.var_t /= n;
  m.cov /= n;
  return m;
}

}  // namespace

double pearson(std::span<const double> pred, std::span<const double> target, double eps) {
  const PairMoments m = pair_moments(pred, target, "pearson");
  if (m.var_p == 0.0 || m.var_t == 0.0) return 0.0;
  const double r = m.cov / (std::sqrt(m.var_p) * std::sqrt(m.var_t) + eps);
  return std::clamp(r, -1.0, 1.0);
}

double ccc(std::span<const double> pred, std::span<const double> target, double eps) {
  const PairMoments m = pair_moments(pred, target, "ccc");
  const double gap = m.mean_p - m.mean_t;
  const double den = m.var_p + m.var_t + gap * gap + eps;
  if (den == 0.0) return 0.0;
  if (m.var_p == 0.0 || m.var_t == 0.0) return 0.0;
  return 2.0 * m.cov / den;
}

MetricsReport average_pearson(const Eigen::MatrixXd& preds, const Eigen::MatrixXd& targets) {
  if (preds.rows() != targets.rows() || preds.cols() != targets.cols()) {
    throw ShapeError("average_pearson: predictions " + std::to_string(preds.rows()) + "x" +
                     std::to_string(preds.cols()) + " vs targets " + std::to_string(targets.rows()) + "x" +
                     std::to_string(targets.cols()));
  }
  if (preds.cols() != static_cast<Eigen::Index>(kNumEmotions)) {
    throw ShapeError("average_pearson: expected " + std::to_string(kNumEmotions) + " columns");
  }
  if (preds.rows() < 2) throw ContractError("average_pearson: needs at least 2 samples");
  MetricsReport out;
  out.count = static_cast<std::size_t>(preds.rows());
  std::vector<double> p(out.count), t(out.count);
  double total = 0;
  for (std::size_t d = 0; d < kNumEmotions; ++d) {
    for (std::size_t i = 0; i < out.count; ++i) {
      p[i] = preds(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
      t[i] = targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
    }
    out.pearson[d] = pearson(p, t);
    out.ccc[d] = ccc(p, t);
    total += out.pearson[d];
  }
  out.mean_pearson = total / static_cast<double>(kNumEmotions);
  out.mse = (preds - targets).squaredNorm() / static_cast<double>(preds.size());
  return out;
}

}  // namespace emi
