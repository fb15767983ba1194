#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace medsim {

// 64-bit FNV-1a. Stable across runs and platforms; used for transcript
// integrity hashes and deterministic mock behaviour, never for security.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  std::uint64_t value() const { return state_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view bytes) { return Fnv1a{}.update(bytes).value(); }

}  // namespace medsim
