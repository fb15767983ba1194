#pragma once

#include <optional>
#include <string>

namespace medsim::analytics {

struct TestResult {
  double statistic = 0.0;     // t, H or z depending on `method`
  std::optional<double> df;   // real-valued for Welch
  double p_value = 1.0;       // always in [0, 1]
  std::string method;
  std::string note;           // degenerate-input flags, empty otherwise
};

}  // namespace medsim::analytics
