#pragma once

#include "ssmimpute/imputers.hpp"

#include <string>
#include <vector>

namespace ssmimpute {

/// Minimal SVG boxplot: one box per labeled sample, optional reference line.
struct BoxplotGroup {
    std::string label;
    std::vector<double> values;
};
void write_boxplot_svg(const std::string& path, const std::string& title,
                       const std::vector<BoxplotGroup>& groups, const double* reference = nullptr);

/// Coefficient paths with 90% bands, one panel per coefficient.
void write_paths_svg(const std::string& path, const ImputationResult& res);

}  // namespace ssmimpute
