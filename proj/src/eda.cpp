#include "emi/eda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "emi/errors.hpp"

namespace emi {

namespace {

struct Moments {
  double mean = 0;
  double std = 0;  // n-1 denominator, 0 for a single value
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

double zero_fraction(const std::vector<double>& v) {
  const auto zeros = std::count(v.begin(), v.end(), 0.0);
  return static_cast<double>(zeros) / static_cast<double>(v.size());
}

std::vector<double> label_column(std::span<const Sample* const> samples, std::size_t d, const char* split) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const Sample* s : samples) {
    if (!s->labels) throw DataError("split '" + std::string(split) + "': sample " + s->id + " has no labels");
    out.push_back(static_cast<double>((*s->labels)(static_cast<Eigen::Index>(d))));
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::string p_text(double p) { return p < 0.001 ? "<.001" : fmt("%.3f", p); }

}  // namespace

SplitSummary summarize_split(std::span<const Sample* const> samples, std::string name) {
  if (samples.empty()) throw DataError("summarize_split: split '" + name + "' is empty");
  SplitSummary out;
  out.name = std::move(name);
  out.sample_count = samples.size();

  std::vector<double> frames;
  frames.reserve(samples.size());
  std::size_t missing = 0, tail = 0;
  for (const Sample* s : samples) {
    frames.push_back(static_cast<double>(s->frame_count()));
    if (!s->text) ++missing;
    if (s->frame_count() > kTailFrames) ++tail;
  }
  const Moments fm = moments(frames);
  out.frames_mean = fm.mean;
  out.frames_std = fm.std;
  std::vector<double> sorted = frames;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  out.frames_median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  out.frames_min = static_cast<std::size_t>(sorted.front());
  out.frames_max = static_cast<std::size_t>(sorted.back());
  out.missing_text_fraction = static_cast<double>(missing) / static_cast<double>(n);
  out.tail_fraction = static_cast<double>(tail) / static_cast<double>(n);

  for (std::size_t d = 0; d < kNumEmotions; ++d) {
    const auto column = label_column(samples, d, out.name.c_str());
    const Moments lm = moments(column);
    out.label_mean[d] = lm.mean;
    out.label_std[d] = lm.std;
    out.zero_fraction[d] = zero_fraction(column);
  }
  return out;
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta form, fast for small arguments.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ContractError("ks_two_sample: both samples must be nonempty");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double n = static_cast<double>(sa.size()), m = static_cast<double>(sb.size());

  double d = 0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() || j < sb.size()) {
    // Next support point; both ECDFs are evaluated after consuming all ties.
    double x;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
      x = sa[i];
    } else {
      x = sb[j];
    }
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult out;
  out.statistic = d;
  out.p_value = kolmogorov_survival(std::sqrt(n * m / (n + m)) * d);
  return out;
}

ShiftReport shift_report(std::span<const Sample* const> train, std::span<const Sample* const> valid) {
  if (train.empty() || valid.empty()) throw DataError("shift_report: train and valid splits must be nonempty");
  ShiftReport report;
  for (std::size_t d = 0; d < kNumEmotions; ++d) {
    const auto a = label_column(train, d, "train");
    const auto b = label_column(valid, d, "valid");
    const Moments ma = moments(a), mb = moments(b);
    ShiftRow& row = report.rows[d];
    row.label = kEmotionNames[d];
    row.train_mean = ma.mean;
    row.train_std = ma.std;
    row.valid_mean = mb.mean;
    row.valid_std = mb.std;
    row.delta_mean = ma.mean - mb.mean;
    row.zero_train = zero_fraction(a);
    row.zero_valid = zero_fraction(b);
    row.ks = ks_two_sample(a, b);
  }
  return report;
}

std::string summary_table(const std::vector<SplitSummary>& splits) {
  std::string out = pad("Split", 6) + pad("Samples", 9) + pad("Frames (Mean +- Std)", 22) + pad("Median", 8) +
                    pad("Min", 7) + pad("Max", 8);
  for (auto name : kEmotionNames) out += pad(std::string(name.substr(0, 8)), 10);
  out += pad("NoText%", 9) + pad(">120f%", 8) + "\n";
  for (const auto& s : splits) {
    out += pad(s.name, 6) + pad(std::to_string(s.sample_count), 9) +
           pad(fmt("%.2f", s.frames_mean) + " +- " + fmt("%.2f", s.frames_std), 22) + pad(fmt("%g", s.frames_median), 8) +
           pad(std::to_string(s.frames_min), 7) + pad(std::to_string(s.frames_max), 8);
    for (double m : s.label_mean) out += pad(fmt("%.4f", m), 10);
    out += pad(fmt("%.2f", 100 * s.missing_text_fraction), 9) + pad(fmt("%.2f", 100 * s.tail_fraction), 8) + "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<SplitSummary>& splits) {
  std::string out = "split,samples,frames_mean,frames_std,frames_median,frames_min,frames_max";
  for (auto name : kEmotionNames) out += ",mean_" + std::string(name);
  for (auto name : kEmotionNames) out += ",std_" + std::string(name);
  for (auto name : kEmotionNames) out += ",zero_" + std::string(name);
  out += ",missing_text_fraction,tail_fraction\n";
  for (const auto& s : splits) {
    out += s.name + "," + std::to_string(s.sample_count) + "," + fmt("%.17g", s.frames_mean) + "," +
           fmt("%.17g", s.frames_std) + "," + fmt("%.17g", s.frames_median) + "," + std::to_string(s.frames_min) +
           "," + std::to_string(s.frames_max);
    for (double v : s.label_mean) out += "," + fmt("%.17g", v);
    for (double v : s.label_std) out += "," + fmt("%.17g", v);
    for (double v : s.zero_fraction) out += "," + fmt("%.17g", v);
    out += "," + fmt("%.17g", s.missing_text_fraction) + "," + fmt("%.17g", s.tail_fraction) + "\n";
  }
  return out;
}

std::string shift_table(const ShiftReport& report) {
  std::string out = pad("Label", 13) + pad("Train", 16) + pad("Valid", 16) + pad("dMu", 9) + pad("Zero %", 14) +
                    pad("KS", 8) + pad("p", 8) + "\n";
  for (const auto& r : report.rows) {
    out += pad(std::string(r.label), 13) + pad(fmt("%.3f", r.train_mean) + " +- " + fmt("%.3f", r.train_std), 16) +
           pad(fmt("%.3f", r.valid_mean) + " +- " + fmt("%.3f", r.valid_std), 16) + pad(fmt("%.3f", r.delta_mean), 9) +
           pad(fmt("%.1f", 100 * r.zero_train) + " / " + fmt("%.1f", 100 * r.zero_valid), 14) +
           pad(fmt("%.3f", r.ks.statistic), 8) + pad(p_text(r.ks.p_value), 8) + "\n";
  }
  return out;
}

std::string shift_csv(const ShiftReport& report) {
  std::string out =
      "label,train_mean,train_std,valid_mean,valid_std,delta_mean,zero_train,zero_valid,ks_statistic,p_value\n";
  for (const auto& r : report.rows) {
    out += std::string(r.label);
    for (double v : {r.train_mean, r.train_std, r.valid_mean, r.valid_std, r.delta_mean, r.zero_train, r.zero_valid,
                     r.ks.statistic, r.ks.p_value}) {
      out += "," + fmt("%.17g", v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace emi
