#pragma once

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <ostream>
#include <string>

#include "medsim/core/csv.hpp"
#include "medsim/service/platform.hpp"

namespace medsim::service {

// Stable pseudonym: keyed HMAC-SHA256 of the identifier, truncated to 16 hex
// characters. The same salt maps an id to the same pseudonym across exports.
inline std::string pseudonym(const std::string& id, const std::string& salt) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), salt.data(), static_cast<int>(salt.size()),
            reinterpret_cast<const unsigned char*>(id.data()), id.size(), md, &len))
    throw Error("internal", "hmac failed");
  return "p_" + hex(md, len).substr(0, 16);
}

struct ExportOptions {
  bool pseudonymize = false;
  std::string salt;
};

namespace detail {
inline std::string learner_key(const std::string& id, const ExportOptions& o) {
  return o.pseudonymize ? pseudonym(id, o.salt) : id;
}
}  // namespace detail

// JSON lines, one report per line, learner id attached.
inline void export_reports(std::ostream& out, const Platform& p, const ExportOptions& o = {}) {
  for (const auto& r : p.reports().all()) {
    auto j = assessment::to_json(*r);
    j["learner_id"] = detail::learner_key(p.sessions().get(r->session_id).learner_id, o);
    out << j.dump() << '\n';
  }
}

inline void export_telemetry(std::ostream& out, const Platform& p, const ExportOptions& o = {}) {
  auto rows = p.telemetry();
  for (auto& r : rows) r.learner_id = detail::learner_key(r.learner_id, o);
  analytics::write_telemetry(out, rows);
}

inline void export_reflections(std::ostream& out, const Platform& p, const ExportOptions& o = {}) {
  if (!o.pseudonymize) {
    p.hub().export_reflections(out);
    return;
  }
  // same layout as the hub export, learner ids replaced
  std::ostringstream raw;
  p.hub().export_reflections(raw);
  std::istringstream in(raw.str());
  auto table = csv::read(in);
  const auto col = table.column("learner_id");
  csv::write_row(out, table.header);
  for (auto row : table.rows) {
    row[col] = pseudonym(row[col], o.salt);
    csv::write_row(out, row);
  }
}

}  // namespace medsim::service
