#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medsim/core/error.hpp"
#include "medsim/core/time.hpp"

namespace medsim::service {

using json = nlohmann::json;

struct EventRecord {
  long event_id = 0;
  std::string kind;
  json payload;
  TimePoint occurred_at{};
  bool operator==(const EventRecord&) const = default;
};

inline json to_json(const EventRecord& e) {
  return {{"event_id", e.event_id}, {"kind", e.kind}, {"occurred_at", format_rfc3339(e.occurred_at)},
          {"payload", e.payload}};
}

inline EventRecord event_from_json(const json& j) {
  return {j.at("event_id").get<long>(), j.at("kind").get<std::string>(), j.at("payload"),
          parse_rfc3339(j.at("occurred_at").get<std::string>())};
}

// Append-only JSON-lines log plus an optional snapshot, both in one directory.
// A single writer appends; each record is flushed (and fsynced when durable)
// before append() returns. A torn final line left by a crash is dropped on
// load; damage anywhere else is an error.
class EventLog {
 public:
  struct Loaded {
    std::optional<json> snapshot;
    long snapshot_event_id = 0;
    std::vector<EventRecord> events;  // strictly after the snapshot
    bool dropped_torn_tail = false;
  };

  explicit EventLog(std::filesystem::path dir, bool durable = true) : dir_(std::move(dir)), durable_(durable) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error("io_error", "cannot create data directory " + dir_.string() + ": " + ec.message());
  }

  ~EventLog() {
    if (fd_ >= 0) ::close(fd_);
  }
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  std::filesystem::path events_path() const { return dir_ / "events.jsonl"; }
  std::filesystem::path snapshot_path() const { return dir_ / "snapshot.json"; }

  // With repair=false the files are only read; a torn tail is skipped but
  // left in place.
  Loaded load(bool repair = true) {
    std::lock_guard lock(mu_);
    Loaded out;
    if (std::filesystem::exists(snapshot_path())) {
      std::ifstream in(snapshot_path());
      try {
        auto j = json::parse(in);
        out.snapshot_event_id = j.at("last_event_id").get<long>();
        out.snapshot = j.at("state");
      } catch (const std::exception& e) {
        throw Error("corrupt_log", "snapshot unreadable: " + std::string(e.what()));
      }
    }
    std::string data;
    if (std::filesystem::exists(events_path())) {
      std::ifstream in(events_path(), std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      data = ss.str();
    }
    std::size_t pos = 0, good_end = 0, line_no = 0;
    while (pos < data.size()) {
      auto nl = data.find('\n', pos);
      const bool last = nl == std::string::npos;
      std::string line = data.substr(pos, last ? std::string::npos : nl - pos);
      ++line_no;
      try {
        auto rec = event_from_json(json::parse(line));
        if (last) throw std::runtime_error("no line terminator");
        if (rec.event_id <= last_id_) throw Error("corrupt_log", "event ids not increasing");
        last_id_ = rec.event_id;
        if (rec.event_id > out.snapshot_event_id) out.events.push_back(std::move(rec));
        good_end = nl + 1;
      } catch (const std::exception& e) {
        bool tail = last || data.find_first_not_of("\n", nl + 1) == std::string::npos;
        if (!tail) throw Error("corrupt_log", "events.jsonl line " + std::to_string(line_no) + ": " + e.what());
        out.dropped_torn_tail = true;
        break;
      }
      pos = nl + 1;
    }
    last_id_ = std::max(last_id_, out.snapshot_event_id);
    if (repair) open_for_append(good_end, data.size());
    return out;
  }

  EventRecord append(const std::string& kind, json payload, TimePoint at) {
    std::lock_guard lock(mu_);
    if (fd_ < 0) open_for_append(std::nullopt, 0);
    EventRecord rec{last_id_ + 1, kind, std::move(payload), at};
    std::string line = to_json(rec).dump() + "\n";
    write_all(fd_, line);
    if (durable_ && ::fsync(fd_) != 0) throw Error("io_error", std::string("fsync failed: ") + std::strerror(errno));
    last_id_ = rec.event_id;
    ++since_snapshot_;
    return rec;
  }

  // Atomic replace: write a temp file, sync it, rename over the old one.
  void write_snapshot(const json& state, long last_event_id) {
    std::lock_guard lock(mu_);
    auto tmp = dir_ / "snapshot.json.tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw Error("io_error", "cannot write snapshot: " + std::string(std::strerror(errno)));
    try {
      write_all(fd, json{{"last_event_id", last_event_id}, {"state", state}}.dump());
      if (durable_) ::fsync(fd);
    } catch (...) {
      ::close(fd);
      throw;
    }
    ::close(fd);
    std::filesystem::rename(tmp, snapshot_path());
    since_snapshot_ = 0;
  }

  long last_id() const {
    std::lock_guard lock(mu_);
    return last_id_;
  }
  long since_snapshot() const {
    std::lock_guard lock(mu_);
    return since_snapshot_;
  }

 private:
  static void write_all(int fd, const std::string& s) {
    std::size_t done = 0;
    while (done < s.size()) {
      auto n = ::write(fd, s.data() + done, s.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error("io_error", std::string("write failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  // Lock held. Cuts off a torn tail before appending after it.
  void open_for_append(std::optional<std::size_t> good_end, std::size_t size) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = ::open(events_path().c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw Error("io_error", "cannot open event log: " + std::string(std::strerror(errno)));
    if (good_end && *good_end < size && ::ftruncate(fd_, static_cast<off_t>(*good_end)) != 0)
      throw Error("io_error", "cannot truncate torn event log tail");
  }

  std::filesystem::path dir_;
  bool durable_;
  mutable std::mutex mu_;
  int fd_ = -1;
  long last_id_ = 0;
  long since_snapshot_ = 0;
};

}  // namespace medsim::service
