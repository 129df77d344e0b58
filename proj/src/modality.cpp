#include "emi/modality.hpp"

#include <algorithm>

#include "emi/errors.hpp"

namespace emi {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::text: return "text";
    case Modality::audio: return "audio";
    case Modality::vision: return "vision";
    case Modality::motion: return "motion";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  for (Modality m : kAllModalities) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown modality '" + std::string(name) + "' (expected text, audio, vision or motion)");
}

std::vector<Modality> parse_modality_list(std::string_view csv) {
  std::vector<Modality> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view item = csv.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      const Modality m = parse_modality(item);
      if (std::find(out.begin(), out.end(), m) != out.end()) {
        throw ConfigError("modality '" + std::string(item) + "' listed twice");
      }
      out.push_back(m);
    }
    start = end + 1;
  }
  if (out.empty()) throw ConfigError("modality list is empty");
  std::sort(out.begin(), out.end());
  return out;
}

std::string join_modalities(const std::vector<Modality>& modalities) {
  std::string out;
  for (Modality m : modalities) {
    if (!out.empty()) out += ",";
    out += to_string(m);
  }
  return out;
}

std::size_t FeatureDims::of(Modality m) const {
  switch (m) {
    case Modality::text: return text;
    case Modality::audio: return audio;
    case Modality::vision: return vision;
    case Modality::motion: return motion;
  }
  return 0;
}

}  // namespace emi
