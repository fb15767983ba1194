#pragma once

#include <string>

#include "medsim/case/io.hpp"
#include "medsim/case/rubric.hpp"

namespace medsim::testing {

inline std::string data_path(const std::string& rel) { return std::string(MEDSIM_DATA_DIR) + "/" + rel; }

inline cases::CaseDefinition sample_case() { return cases::load_case_file(data_path("cases/chest_pain.yaml")); }

inline cases::RubricDefinition mirs() {
  return cases::load_rubric(data_path("rubrics/mirs.yaml"), data_path("rubrics/mirs_kalamazoo.yaml"));
}

}  // namespace medsim::testing
