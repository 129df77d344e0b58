#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace emi {

enum class Modality { text, audio, vision, motion };

inline constexpr std::array<Modality, 4> kAllModalities = {Modality::text, Modality::audio, Modality::vision,
                                                           Modality::motion};

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);

/// Parses "text,audio,vision" into canonical order; rejects duplicates and empties.
std::vector<Modality> parse_modality_list(std::string_view csv);
std::string join_modalities(const std::vector<Modality>& modalities);

/// Input widths of the pre-extracted features.
struct FeatureDims {
  std::size_t text = 768;
  std::size_t audio = 1024;
  std::size_t vision = 768;
  std::size_t motion = 23;

  std::size_t of(Modality m) const;
  bool operator==(const FeatureDims&) const = default;
};

}  // namespace emi
