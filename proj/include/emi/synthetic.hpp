#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "emi/kv_config.hpp"
#include "emi/modality.hpp"

namespace emi {

/// How one modality observes the latent factors.
struct ModalityPlant {
  double snr = std::numeric_limits<double>::infinity();  ///< signal-to-noise per frame; inf = noiseless
  std::vector<std::size_t> factors;                      ///< observed latent factors; empty = noise only
  bool observe_all = true;                               ///< overrides `factors`
};

/// Generator settings for a desk-scale corpus with a planted label map.
///
/// Each clip draws latent factors z ~ N(0, I_K). Every frame of modality m is
///   carrier_m + P_m * mask_m(z) + noise / snr_m
/// with a fixed random projection P_m and carrier vector. Labels are
///   clip(offset + scale * W z, 0, 1),  W[d][d mod K] = 1,
/// and validation labels are further multiplied by `valid_label_scale`.
struct SyntheticSpec {
  std::size_t samples = 512;  ///< labeled samples
  double valid_fraction = 1.0 / 3.0;
  std::size_t test_samples = 0;
  std::size_t factors = 6;
  double seq_median = 65.0;  ///< lognormal sequence lengths
  double seq_sigma = 0.5;
  std::size_t seq_max = 2048;
  double label_offset = 0.5;
  double label_scale = 0.15;
  double valid_label_scale = 1.0;
  double missing_text_fraction = 0.0;
  bool with_motion = true;
  double carrier_scale = 2.0;
  FeatureDims dims;
  std::array<ModalityPlant, 4> plants;  ///< indexed by Modality

  ModalityPlant& plant(Modality m) { return plants[static_cast<std::size_t>(m)]; }
  const ModalityPlant& plant(Modality m) const { return plants[static_cast<std::size_t>(m)]; }

  /// Reads the [synth] section.
  static SyntheticSpec from_document(const KvDocument& doc);
  KvDocument to_document() const;
};

struct SyntheticCorpus {
  std::filesystem::path manifest;
  std::size_t train = 0, valid = 0, test = 0;
  std::size_t missing_text = 0;
};

/// Writes manifest.jsonl, features/, labels/ and the planted map (plant/)
/// under `out_dir`. Byte-identical for identical (spec, seed).
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed,
                                          const std::filesystem::path& out_dir);

}  // namespace emi
