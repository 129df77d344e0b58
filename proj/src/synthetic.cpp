#include "emi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "emi/dataset.hpp"
#include "emi/errors.hpp"
#include "emi/feature_io.hpp"
#include "emi/rng.hpp"

namespace emi {

namespace {

std::vector<std::size_t> parse_factor_list(const std::string& text, std::size_t factors, bool& all) {
  all = text == "all";
  std::vector<std::size_t> out;
  if (all || text == "none") return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(start, end - start);
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v >= factors) {
      throw ConfigError("bad latent factor index '" + item + "' (have " + std::to_string(factors) + " factors)");
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

std::string factor_list_text(const ModalityPlant& p) {
  if (p.observe_all) return "all";
  if (p.factors.empty()) return "none";
  std::string out;
  for (std::size_t f : p.factors) out += (out.empty() ? "" : ",") + std::to_string(f);
  return out;
}

Tensor<float> as_tensor(const Matrix<float>& m) { return Tensor<float>(m); }

}  // namespace

SyntheticSpec SyntheticSpec::from_document(const KvDocument& doc) {
  std::vector<std::string_view> known = {"samples",       "valid_fraction",   "test_samples",  "factors",
                                         "seq_median",    "seq_sigma",        "seq_max",       "label_offset",
                                         "label_scale",   "valid_label_scale", "missing_text_fraction",
                                         "motion",        "carrier_scale",    "text_dim",      "audio_dim",
                                         "vision_dim",    "motion_dim",       "text_snr",      "audio_snr",
                                         "vision_snr",    "motion_snr",       "text_factors",  "audio_factors",
                                         "vision_factors", "motion_factors"};
  doc.expect_keys("synth", known);
  SyntheticSpec s;
  const char* sec = "synth";
  auto count = [&](const char* key, std::size_t fallback) {
    const long long v = doc.get_int(sec, key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string("[synth] ") + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  s.samples = count("samples", s.samples);
  s.valid_fraction = doc.get_double(sec, "valid_fraction", s.valid_fraction);
  s.test_samples = count("test_samples", s.test_samples);
  s.factors = count("factors", s.factors);
  s.seq_median = doc.get_double(sec, "seq_median", s.seq_median);
  s.seq_sigma = doc.get_double(sec, "seq_sigma", s.seq_sigma);
  s.seq_max = count("seq_max", s.seq_max);
  s.label_offset = doc.get_double(sec, "label_offset", s.label_offset);
  s.label_scale = doc.get_double(sec, "label_scale", s.label_scale);
  s.valid_label_scale = doc.get_double(sec, "valid_label_scale", s.valid_label_scale);
  s.missing_text_fraction = doc.get_double(sec, "missing_text_fraction", s.missing_text_fraction);
  s.with_motion = doc.get_bool(sec, "motion", s.with_motion);
  s.carrier_scale = doc.get_double(sec, "carrier_scale", s.carrier_scale);
  s.dims.text = count("text_dim", s.dims.text);
  s.dims.audio = count("audio_dim", s.dims.audio);
  s.dims.vision = count("vision_dim", s.dims.vision);
  s.dims.motion = count("motion_dim", s.dims.motion);
  for (Modality m : kAllModalities) {
    const std::string name(to_string(m));
    auto& p = s.plant(m);
    p.snr = doc.get_double(sec, name + "_snr", p.snr);
    p.factors = parse_factor_list(doc.get_string(sec, name + "_factors", "all"), s.factors, p.observe_all);
  }

  if (s.samples < 2) throw ConfigError("[synth] samples must be at least 2");
  if (s.factors == 0) throw ConfigError("[synth] factors must be positive");
  if (!(s.valid_fraction > 0.0 && s.valid_fraction < 1.0)) throw ConfigError("[synth] valid_fraction must be in (0,1)");
  if (!(s.seq_median >= 1.0) || !(s.seq_sigma >= 0.0) || s.seq_max < 1) {
    throw ConfigError("[synth] sequence-length parameters out of range");
  }
  if (!(s.missing_text_fraction >= 0.0 && s.missing_text_fraction <= 1.0)) {
    throw ConfigError("[synth] missing_text_fraction must be in [0,1]");
  }
  for (Modality m : kAllModalities) {
    if (!(s.plant(m).snr > 0.0)) throw ConfigError("[synth] " + std::string(to_string(m)) + "_snr must be positive");
    if (s.dims.of(m) == 0) throw ConfigError("[synth] feature dimensions must be positive");
  }
  return s;
}

KvDocument SyntheticSpec::to_document() const {
  KvDocument doc;
  const std::string sec = "synth";
  doc.set(sec, "samples", std::to_string(samples));
  doc.set(sec, "valid_fraction", format_double(valid_fraction));
  doc.set(sec, "test_samples", std::to_string(test_samples));
  doc.set(sec, "factors", std::to_string(factors));
  doc.set(sec, "seq_median", format_double(seq_median));
  doc.set(sec, "seq_sigma", format_double(seq_sigma));
  doc.set(sec, "seq_max", std::to_string(seq_max));
  doc.set(sec, "label_offset", format_double(label_offset));
  doc.set(sec, "label_scale", format_double(label_scale));
  doc.set(sec, "valid_label_scale", format_double(valid_label_scale));
  doc.set(sec, "missing_text_fraction", format_double(missing_text_fraction));
  doc.set(sec, "motion", with_motion ? "true" : "false");
  doc.set(sec, "carrier_scale", format_double(carrier_scale));
  doc.set(sec, "text_dim", std::to_string(dims.text));
  doc.set(sec, "audio_dim", std::to_string(dims.audio));
  doc.set(sec, "vision_dim", std::to_string(dims.vision));
  doc.set(sec, "motion_dim", std::to_string(dims.motion));
  for (Modality m : kAllModalities) {
    const std::string name(to_string(m));
    doc.set(sec, name + "_snr", format_double(plant(m).snr));
    doc.set(sec, name + "_factors", factor_list_text(plant(m)));
  }
  return doc;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed,
                                          const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  try {
    fs::create_directories(out_dir / "features");
    fs::create_directories(out_dir / "labels");
    fs::create_directories(out_dir / "plant");
  } catch (const fs::filesystem_error& e) {
    throw DataError("cannot create corpus directory " + out_dir.string() + ": " + e.what());
  }

  const std::size_t k = spec.factors;
  const std::size_t labeled = spec.samples;
  const std::size_t total = labeled + spec.test_samples;
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Modality> modalities = {Modality::text, Modality::audio, Modality::vision};
  if (spec.with_motion) modalities.push_back(Modality::motion);

  // Planted map: projection and carrier per modality.
  Rng plant_rng = make_stream(seed, "synthetic/plant");
  std::array<Matrix<double>, 4> projection;
  std::array<Eigen::RowVectorXd, 4> carrier;
  for (Modality m : modalities) {
    const auto idx = static_cast<std::size_t>(m);
    const auto d = static_cast<Eigen::Index>(spec.dims.of(m));
    projection[idx] = Matrix<double>(d, static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < projection[idx].size(); ++i) {
      projection[idx].data()[i] = normal(plant_rng) / std::sqrt(static_cast<double>(k));
    }
    const auto& plant = spec.plant(m);
    if (!plant.observe_all) {
      for (std::size_t f = 0; f < k; ++f) {
        if (std::find(plant.factors.begin(), plant.factors.end(), f) == plant.factors.end()) {
          projection[idx].col(static_cast<Eigen::Index>(f)).setZero();
        }
      }
    }
    carrier[idx] = Eigen::RowVectorXd(d);
    for (Eigen::Index i = 0; i < d; ++i) carrier[idx](i) = normal(plant_rng) * spec.carrier_scale;
  }
  Matrix<double> label_map = Matrix<double>::Zero(static_cast<Eigen::Index>(kNumEmotions), static_cast<Eigen::Index>(k));
  for (std::size_t d = 0; d < kNumEmotions; ++d) label_map(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d % k)) = 1.0;

  // Split and missing-text assignment.
  const auto n_valid = static_cast<std::size_t>(std::llround(spec.valid_fraction * static_cast<double>(labeled)));
  std::vector<SplitTag> tags(total, SplitTag::train);
  {
    std::vector<std::size_t> order(labeled);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng = make_stream(seed, "synthetic/split");
    std::shuffle(order.begin(), order.end(), split_rng);
    for (std::size_t i = 0; i < n_valid; ++i) tags[order[i]] = SplitTag::valid;
    for (std::size_t i = labeled; i < total; ++i) tags[i] = SplitTag::test;
  }
  std::vector<bool> text_missing(total, false);
  const auto n_missing = static_cast<std::size_t>(std::llround(spec.missing_text_fraction * static_cast<double>(total)));
  {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng miss_rng = make_stream(seed, "synthetic/missing_text");
    std::shuffle(order.begin(), order.end(), miss_rng);
    for (std::size_t i = 0; i < n_missing; ++i) text_missing[order[i]] = true;
  }

  Rng sample_rng = make_stream(seed, "synthetic/samples");
  auto draw_length = [&] {
    const double raw = std::exp(std::log(spec.seq_median) + spec.seq_sigma * normal(sample_rng));
    return static_cast<Eigen::Index>(std::clamp<double>(std::round(raw), 1.0, static_cast<double>(spec.seq_max)));
  };
  auto frames = [&](Modality m, const Eigen::VectorXd& z, Eigen::Index length) {
    const auto idx = static_cast<std::size_t>(m);
    const Eigen::RowVectorXd clean = carrier[idx] + (projection[idx] * z).transpose();
    const double noise = std::isinf(spec.plant(m).snr) ? 0.0 : 1.0 / spec.plant(m).snr;
    Matrix<float> out(length, clean.size());
    for (Eigen::Index t = 0; t < length; ++t) {
      for (Eigen::Index c = 0; c < clean.size(); ++c) {
        const double eps = noise > 0.0 ? noise * normal(sample_rng) : 0.0;
        out(t, c) = static_cast<float>(clean(c) + eps);
      }
    }
    return out;
  };

  DatasetManifest manifest;
  manifest.root = out_dir;
  Matrix<float> latents(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(k));
  std::vector<std::string> train_ids, valid_ids;
  std::vector<EmotionVector> train_labels, valid_labels;
  SyntheticCorpus summary;
  summary.manifest = out_dir / "manifest.jsonl";
  summary.missing_text = n_missing;

  char name[32];
  for (std::size_t i = 0; i < total; ++i) {
    std::snprintf(name, sizeof name, "syn_%05zu", i);
    const std::string id = name;
    Eigen::VectorXd z(static_cast<Eigen::Index>(k));
    for (Eigen::Index f = 0; f < z.size(); ++f) z(f) = normal(sample_rng);
    latents.row(static_cast<Eigen::Index>(i)) = z.transpose().cast<float>();

    ManifestEntry entry;
    entry.id = id;
    entry.split = tags[i];
    const Eigen::Index video_len = draw_length();
    const Eigen::Index audio_len = draw_length();
    for (Modality m : modalities) {
      const Eigen::Index len = m == Modality::text ? 1 : (m == Modality::audio ? audio_len : video_len);
      Matrix<float> feats = frames(m, z, len);
      if (m == Modality::text && text_missing[i]) continue;
      const std::string rel = "features/" + id + "_" + std::string(to_string(m)) + ".emif";
      if (m == Modality::text) {
        write_feature_file(out_dir / rel, Tensor<float>(Shape{spec.dims.text}, feats));
      } else {
        write_feature_file(out_dir / rel, as_tensor(feats));
      }
      switch (m) {
        case Modality::text: entry.text = rel; break;
        case Modality::audio: entry.audio = rel; break;
        case Modality::vision: entry.vision = rel; break;
        case Modality::motion: entry.motion = rel; break;
      }
    }

    if (tags[i] != SplitTag::test) {
      Eigen::VectorXd y = (label_map * z).array() * spec.label_scale + spec.label_offset;
      y = y.cwiseMax(0.0).cwiseMin(1.0);
      if (tags[i] == SplitTag::valid) y = (y * spec.valid_label_scale).cwiseMax(0.0).cwiseMin(1.0);
      const EmotionVector labels = y.transpose().cast<float>();
      if (tags[i] == SplitTag::train) {
        entry.labels = "labels/train.csv";
        train_ids.push_back(id);
        train_labels.push_back(labels);
        ++summary.train;
      } else {
        entry.labels = "labels/valid.csv";
        valid_ids.push_back(id);
        valid_labels.push_back(labels);
        ++summary.valid;
      }
    } else {
      ++summary.test;
    }
    manifest.entries.push_back(std::move(entry));
  }

  write_labels_csv(out_dir / "labels/train.csv", train_ids, train_labels);
  write_labels_csv(out_dir / "labels/valid.csv", valid_ids, valid_labels);
  write_manifest(summary.manifest, manifest);

  nlohmann::ordered_json plant;
  plant["seed"] = seed;
  plant["factors"] = k;
  plant["label_offset"] = spec.label_offset;
  plant["label_scale"] = spec.label_scale;
  plant["valid_label_scale"] = spec.valid_label_scale;
  plant["label_map"] = nlohmann::ordered_json::array();
  for (Eigen::Index d = 0; d < label_map.rows(); ++d) {
    std::vector<double> row(label_map.row(d).data(), label_map.row(d).data() + label_map.cols());
    plant["label_map"].push_back(row);
  }
  plant["latents"] = "plant/latents.emif";
  write_feature_file(out_dir / "plant/latents.emif", as_tensor(latents));
  for (Modality m : modalities) {
    const auto idx = static_cast<std::size_t>(m);
    const std::string mod(to_string(m));
    nlohmann::ordered_json entry;
    entry["snr"] = std::isinf(spec.plant(m).snr) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(spec.plant(m).snr);
    entry["factors"] = factor_list_text(spec.plant(m));
    entry["projection"] = "plant/" + mod + "_projection.emif";
    entry["carrier"] = "plant/" + mod + "_carrier.emif";
    write_feature_file(out_dir / ("plant/" + mod + "_projection.emif"), as_tensor(projection[idx].cast<float>()));
    write_feature_file(out_dir / ("plant/" + mod + "_carrier.emif"),
                       Tensor<float>(Shape{spec.dims.of(m)}, Matrix<float>(carrier[idx].cast<float>())));
    plant["modalities"][mod] = entry;
  }
  std::ofstream(out_dir / "plant.json", std::ios::trunc) << plant.dump(2) << '\n';
  return summary;
}

}  // namespace emi
