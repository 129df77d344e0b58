#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "emi/modality.hpp"
#include "emi/tensor.hpp"

namespace emi {

inline constexpr std::size_t kNumEmotions = 6;

/// Label-file column order; every 6-vector in the project uses it.
inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "Admiration", "Amusement", "Determination", "EmpathicPain", "Excitement", "Joy"};

using EmotionVector = Eigen::Matrix<float, 1, static_cast<int>(kNumEmotions)>;

/// One clip: pre-extracted features plus optional ground truth.
struct Sample {
  std::string id;
  std::optional<Eigen::RowVectorXf> text;  ///< raw sentence embedding; absent when no transcript
  Matrix<float> audio;                     ///< T_a x D_a
  Matrix<float> vision;                    ///< T_v x D_v
  std::optional<Matrix<float>> motion;     ///< T_m x 23
  std::optional<EmotionVector> labels;

  /// Clip length in frames (vision sequence length).
  std::size_t frame_count() const { return static_cast<std::size_t>(vision.rows()); }
  bool has(Modality m) const;
};

/// L2-normalized text input; zero vector when absent or of (near) zero norm.
Eigen::RowVectorXf prepare_text(const std::optional<Eigen::RowVectorXf>& raw, std::size_t dim);

enum class SplitTag { train, valid, test };
std::string_view to_string(SplitTag tag);
SplitTag parse_split_tag(std::string_view name);

struct ManifestEntry {
  std::string id;
  SplitTag split = SplitTag::train;
  std::optional<std::string> text, audio, vision, motion;
  std::optional<std::string> labels;  ///< labels CSV holding this id's row

  const std::optional<std::string>& path(Modality m) const;
};

/// JSON-lines index of a corpus; paths are relative to `root`.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::vector<std::string> ids(SplitTag tag) const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Labels CSV: header `id,Admiration,...,Joy`, one row per sample.
std::map<std::string, EmotionVector> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const std::vector<EmotionVector>& labels);

struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> samples;  ///< manifest order
  std::size_t missing_text = 0;

  const Sample& at(std::string_view id) const;
  std::vector<const Sample*> select(const std::vector<std::string>& ids) const;
  std::vector<const Sample*> split(SplitTag tag) const;
  double missing_text_fraction() const;

 private:
  friend Dataset load_dataset(const std::filesystem::path&, const FeatureDims&);
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Loads and validates every sample. Validation failures are collected and
/// reported together in one DataError.
Dataset load_dataset(const std::filesystem::path& manifest_path, const FeatureDims& dims = {});

/// Checks one sample against the feature contracts; returns the problems found.
std::vector<std::string> validate_sample(const Sample& sample, SplitTag split, const FeatureDims& dims);

}  // namespace emi
