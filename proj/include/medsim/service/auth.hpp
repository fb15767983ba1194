#pragma once

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "medsim/core/error.hpp"

namespace medsim::service {

enum class Role { admin, instructor, learner };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::admin: return "admin";
    case Role::instructor: return "instructor";
    case Role::learner: return "learner";
  }
  return "learner";
}

inline Role parse_role(const std::string& s) {
  if (s == "admin") return Role::admin;
  if (s == "instructor") return Role::instructor;
  if (s == "learner") return Role::learner;
  throw Error("invalid_request", "unknown role '" + s + "'");
}

struct Principal {
  Role role = Role::learner;
  std::string subject;  // learner id for learners, free label otherwise
  bool operator==(const Principal&) const = default;
};

inline std::string hex(const unsigned char* p, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out += digits[p[i] >> 4];
    out += digits[p[i] & 0xF];
  }
  return out;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("internal", "sha256 failed");
  return hex(md, len);
}

inline std::string random_token() {
  unsigned char buf[24];
  if (RAND_bytes(buf, sizeof buf) != 1) throw Error("internal", "no randomness available");
  return "mst_" + hex(buf, sizeof buf);
}

// Bearer tokens are kept only as SHA-256 digests.
class TokenRegistry {
 public:
  void add_hashed(const std::string& digest, Principal p) {
    std::lock_guard lock(mu_);
    tokens_[digest] = std::move(p);
  }

  std::optional<Principal> lookup(const std::string& token) const {
    if (token.empty()) return std::nullopt;
    const auto digest = sha256_hex(token);
    std::lock_guard lock(mu_);
    auto it = tokens_.find(digest);
    if (it == tokens_.end()) return std::nullopt;
    return it->second;
  }

  std::map<std::string, Principal> all() const {
    std::lock_guard lock(mu_);
    return tokens_;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, Principal> tokens_;
};

}  // namespace medsim::service
