#pragma once

#include <string>

#include "ilseg/likelihood.hpp"

namespace ilseg {

// Dual-axis SVG: intensity histogram bars (left axis, counts) overlaid with
// the rescaled likelihood curve (right axis, 0..1) and its maximum annotated.
// Written directly as SVG markup; no plotting dependency.
std::string likelihood_svg(const LikelihoodModel& m);

void write_likelihood_svg(const LikelihoodModel& m, const std::string& path);

}  // namespace ilseg
