#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "metagen/report_io.hpp"

namespace metagen {

// Static SVG: bound values and |gap| against m, one panel per (n, trainer).
std::string render_svg(const std::vector<CsvRow>& rows);
void write_svg(const std::vector<CsvRow>& rows, const std::filesystem::path& path);

}  // namespace metagen
