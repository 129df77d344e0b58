#include "emi/model.hpp"

namespace emi {

std::string_view to_string(Stage stage) { return stage == Stage::unimodal ? "unimodal" : "fusion"; }

Stage parse_stage(std::string_view name) {
  if (name == "unimodal") return Stage::unimodal;
  if (name == "fusion") return Stage::fusion;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

}  // namespace emi
