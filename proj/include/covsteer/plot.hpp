#pragma once

#include <string>

#include "covsteer/environment.hpp"
#include "covsteer/result_io.hpp"

namespace covsteer {

/// Deterministic SVG rendering of a scenario and (optionally) a solved
/// result. Output bytes are identical across runs and platforms for the same
/// inputs: all coordinates are formatted with fixed precision. Shows the
/// domain, obstacles (filled), regions (outlined), the mean trajectory, and
/// 3-sigma position covariance ellipses, with the view framed on the domain
/// plus 5% padding. Requires exactly two position dimensions.
std::string render_svg(const Scenario& scenario, const ResultDocument* result);

void save_svg(const std::string& svg, const std::string& path);

}  // namespace covsteer
