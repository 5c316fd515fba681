#pragma once

#include <span>
#include <string>

#include "netscan/networks.hpp"

namespace netscan::cli {

// Area-proportional circles for two or three sets; exclusive region counts
// are listed beside the figure.
std::string venn_svg(const OverlapReport& report);

// k x k pairwise intersection counts.
std::string heatmap_svg(const OverlapReport& report);

// Observed series (blue) with the fitted block waveform (red).
std::string series_svg(std::span<const float> values, std::span<const double> fitted,
                       const std::string& title);

}  // namespace netscan::cli
