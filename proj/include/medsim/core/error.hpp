#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace medsim {

// Every fault raised by the library carries a stable, machine-readable code.
// The HTTP layer and the CLI surface `code()` verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace medsim
