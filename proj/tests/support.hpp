#pragma once

#include "advm/model.hpp"

#include <string>

namespace advm::test {

inline std::string diagram_path(const std::string& name) { return std::string(ADVM_DIAGRAM_DIR) + "/" + name; }

inline ModelSet load_diagram(const std::string& name) { return parse_activity_file(diagram_path(name)); }

}  // namespace advm::test
