#include "emi/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "emi/errors.hpp"
#include "emi/feature_io.hpp"

namespace emi {

namespace {

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  if (!obj.at(key).is_string()) {
    throw DataError("manifest line " + std::to_string(line) + ": field '" + key + "' must be a string or null");
  }
  return obj.at(key).get<std::string>();
}

bool all_finite(const float* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(data[i])) return false;
  }
  return true;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  return s;
}

}  // namespace

bool Sample::has(Modality m) const {
  switch (m) {
    case Modality::text: return text.has_value();
    case Modality::audio: return audio.rows() > 0;
    case Modality::vision: return vision.rows() > 0;
    case Modality::motion: return motion.has_value();
  }
  return false;
}

Eigen::RowVectorXf prepare_text(const std::optional<Eigen::RowVectorXf>& raw, std::size_t dim) {
  Eigen::RowVectorXf out = Eigen::RowVectorXf::Zero(static_cast<Eigen::Index>(dim));
  if (!raw) return out;
  if (raw->size() != static_cast<Eigen::Index>(dim)) {
    throw ShapeError("prepare_text: expected " + std::to_string(dim) + " values, got " + std::to_string(raw->size()));
  }
  const double norm = raw->cast<double>().norm();
  if (norm <= 1e-12) return out;
  return (raw->cast<double>() / norm).cast<float>();
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::valid: return "valid";
    case SplitTag::test: return "test";
  }
  return "?";
}

SplitTag parse_split_tag(std::string_view name) {
  if (name == "train") return SplitTag::train;
  if (name == "valid") return SplitTag::valid;
  if (name == "test") return SplitTag::test;
  throw DataError("unknown split tag '" + std::string(name) + "'");
}

const std::optional<std::string>& ManifestEntry::path(Modality m) const {
  switch (m) {
    case Modality::text: return text;
    case Modality::audio: return audio;
    case Modality::vision: return vision;
    case Modality::motion: return motion;
  }
  return text;
}

std::vector<std::string> DatasetManifest::ids(SplitTag tag) const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.split == tag) out.push_back(e.id);
  }
  return out;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.root = path.parent_path();
  std::set<std::string> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest line " + std::to_string(number) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() || !obj.contains("split") ||
        !obj["split"].is_string()) {
      throw DataError("manifest line " + std::to_string(number) + ": needs string fields 'id' and 'split'");
    }
    ManifestEntry entry;
    entry.id = obj["id"].get<std::string>();
    entry.split = parse_split_tag(obj["split"].get<std::string>());
    entry.text = optional_string(obj, "text", number);
    entry.audio = optional_string(obj, "audio", number);
    entry.vision = optional_string(obj, "vision", number);
    entry.motion = optional_string(obj, "motion", number);
    entry.labels = optional_string(obj, "labels", number);
    if (!seen.insert(entry.id).second) throw DataError("manifest: duplicate id '" + entry.id + "'");
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  auto field = [](const std::optional<std::string>& v) { return v ? nlohmann::ordered_json(*v) : nullptr; };
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json obj;
    obj["id"] = e.id;
    obj["split"] = std::string(to_string(e.split));
    obj["text"] = field(e.text);
    obj["audio"] = field(e.audio);
    obj["vision"] = field(e.vision);
    obj["motion"] = field(e.motion);
    obj["labels"] = field(e.labels);
    out << obj.dump() << '\n';
  }
}

std::map<std::string, EmotionVector> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty labels file");
  std::string expected = "id";
  for (auto name : kEmotionNames) expected += "," + std::string(name);
  if (trim(line) != expected) throw DataError(path.string() + ": header must be '" + expected + "'");

  std::map<std::string, EmotionVector> out;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != kNumEmotions + 1) {
      throw DataError(path.string() + ":" + std::to_string(number) + ": expected 7 columns");
    }
    EmotionVector v;
    for (std::size_t d = 0; d < kNumEmotions; ++d) {
      try {
        std::size_t used = 0;
        v(static_cast<Eigen::Index>(d)) = std::stof(cells[d + 1], &used);
        if (used != cells[d + 1].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(number) + ": bad value '" + cells[d + 1] + "'");
      }
    }
    if (!out.emplace(cells[0], v).second) {
      throw DataError(path.string() + ": duplicate id '" + cells[0] + "'");
    }
  }
  return out;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const std::vector<EmotionVector>& labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "id";
  for (auto name : kEmotionNames) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (std::size_t d = 0; d < kNumEmotions; ++d) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(labels[i](static_cast<Eigen::Index>(d))));
      out << ',' << buf;
    }
    out << '\n';
  }
}

const Sample& Dataset::at(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown sample id '" + std::string(id) + "'");
  return samples[it->second];
}

std::vector<const Sample*> Dataset::select(const std::vector<std::string>& ids) const {
  std::vector<const Sample*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&at(id));
  return out;
}

std::vector<const Sample*> Dataset::split(SplitTag tag) const { return select(manifest.ids(tag)); }

double Dataset::missing_text_fraction() const {
  return samples.empty() ? 0.0 : static_cast<double>(missing_text) / static_cast<double>(samples.size());
}

std::vector<std::string> validate_sample(const Sample& s, SplitTag split, const FeatureDims& dims) {
  std::vector<std::string> problems;
  auto check_sequence = [&](const Matrix<float>& m, const char* name, std::size_t width) {
    if (m.rows() < 1) problems.push_back(std::string(name) + " has no frames (T >= 1 required)");
    if (m.rows() > 0 && m.cols() != static_cast<Eigen::Index>(width)) {
      problems.push_back(std::string(name) + " width " + std::to_string(m.cols()) + ", expected " +
                         std::to_string(width));
    }
    if (!all_finite(m.data(), m.size())) problems.push_back(std::string(name) + " contains non-finite values");
  };
  check_sequence(s.audio, "audio", dims.audio);
  check_sequence(s.vision, "vision", dims.vision);
  if (s.motion) check_sequence(*s.motion, "motion", dims.motion);
  if (s.text) {
    if (s.text->size() != static_cast<Eigen::Index>(dims.text)) {
      problems.push_back("text has " + std::to_string(s.text->size()) + " values, expected " +
                         std::to_string(dims.text));
    }
    if (!all_finite(s.text->data(), s.text->size())) problems.push_back("text contains non-finite values");
  }
  if (split != SplitTag::test && !s.labels) {
    problems.push_back("no labels for a sample in split '" + std::string(to_string(split)) + "'");
  }
  if (s.labels) {
    for (Eigen::Index d = 0; d < s.labels->size(); ++d) {
      const float v = (*s.labels)(d);
      if (!(v >= 0.0f && v <= 1.0f)) {
        problems.push_back("label " + std::string(kEmotionNames[static_cast<std::size_t>(d)]) + " = " +
                           std::to_string(v) + " outside [0, 1]");
      }
    }
  }
  return problems;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const FeatureDims& dims) {
  Dataset ds;
  ds.manifest = read_manifest(manifest_path);
  const auto& root = ds.manifest.root;
  std::map<std::string, std::map<std::string, EmotionVector>> label_files;
  std::vector<std::string> report;

  for (const auto& entry : ds.manifest.entries) {
    Sample s;
    s.id = entry.id;
    std::vector<std::string> problems;
    auto load = [&](const std::optional<std::string>& rel, const char* name) -> std::optional<Tensor<float>> {
      if (!rel) return std::nullopt;
      const auto path = root / *rel;
      if (!std::filesystem::exists(path)) {
        problems.push_back(std::string(name) + " file missing: " + path.string());
        return std::nullopt;
      }
      try {
        return read_feature_file(path);
      } catch (const DataError& e) {
        problems.push_back(e.what());
        return std::nullopt;
      }
    };
    auto as_sequence = [&](std::optional<Tensor<float>> t, const char* name) -> Matrix<float> {
      if (!t) return {};
      if (t->rank() != 2) {
        problems.push_back(std::string(name) + " must be rank 2, got shape " + to_string(t->shape()));
        return {};
      }
      return t->value();
    };

    if (auto t = load(entry.text, "text")) {
      if (t->rows() != 1) {
        problems.push_back("text must be a single vector, got shape " + to_string(t->shape()));
      } else {
        s.text = t->value().row(0);
      }
    }
    if (!entry.audio) problems.push_back("audio path is null");
    if (!entry.vision) problems.push_back("vision path is null");
    s.audio = as_sequence(load(entry.audio, "audio"), "audio");
    s.vision = as_sequence(load(entry.vision, "vision"), "vision");
    if (entry.motion) {
      auto m = as_sequence(load(entry.motion, "motion"), "motion");
      if (m.size() > 0 || problems.empty()) s.motion = std::move(m);
    }
    if (entry.labels) {
      auto it = label_files.find(*entry.labels);
      if (it == label_files.end()) {
        it = label_files.emplace(*entry.labels, read_labels_csv(root / *entry.labels)).first;
      }
      auto row = it->second.find(entry.id);
      if (row == it->second.end()) {
        problems.push_back("no row in " + *entry.labels);
      } else {
        s.labels = row->second;
      }
    }
    if (problems.empty()) problems = validate_sample(s, entry.split, dims);
    for (const auto& p : problems) report.push_back(entry.id + " [" + std::string(to_string(entry.split)) + "]: " + p);
    if (!s.text) ++ds.missing_text;
    ds.index_.emplace(s.id, ds.samples.size());
    ds.samples.push_back(std::move(s));
  }

  if (!report.empty()) {
    std::string message = "dataset validation failed (" + std::to_string(report.size()) + " problem(s)):";
    const std::size_t shown = std::min<std::size_t>(report.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) message += "\n  " + report[i];
    if (shown < report.size()) message += "\n  ...";
    throw DataError(message);
  }
  return ds;
}

}  // namespace emi
