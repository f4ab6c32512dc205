#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mgsim::svg {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

enum class Style { lines, markers };

/// Minimal self-contained SVG plot. Data only; no computation beyond axis ranges.
void plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
          const std::string& y_label, const std::vector<Series>& series, Style style = Style::lines);

}  // namespace mgsim::svg
