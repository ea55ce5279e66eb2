#pragma once

#include <string>
#include <vector>

#include "affsls/harness.hpp"

namespace affsls {

// Static SVG with one panel per state and input channel stacked vertically
// and one curve per log. Panel titles come from `labels` (n + m entries) or
// default to x1..xn, u1..um.
std::string render_svg(const std::vector<ClosedLoopLog>& logs,
                       const std::vector<std::string>& labels = {});

}  // namespace affsls
