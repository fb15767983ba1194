#pragma once

#include <string>
#include <string_view>

#include "medsim/core/error.hpp"

namespace medsim {

enum class Modality { text, voice };

inline std::string to_string(Modality m) { return m == Modality::voice ? "voice" : "text"; }

inline Modality parse_modality(std::string_view s) {
  if (s == "text") return Modality::text;
  if (s == "voice") return Modality::voice;
  throw Error("invalid_modality", "modality must be text or voice, got '" + std::string(s) + "'");
}

}  // namespace medsim
