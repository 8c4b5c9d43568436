#include "metagen/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

namespace metagen {
namespace {

constexpr double kPanelW = 420.0;
constexpr double kPanelH = 300.0;
constexpr double kMarginL = 60.0;
constexpr double kMarginR = 20.0;
constexpr double kMarginT = 40.0;
constexpr double kMarginB = 45.0;
constexpr double kLegendW = 210.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

using Series = std::map<std::size_t, double>;  // m -> value

}  // namespace

std::string render_svg(const std::vector<CsvRow>& rows) {
  // panel key -> series name -> points
  std::map<std::pair<std::size_t, std::string>, std::map<std::string, Series>> panels;
  std::vector<std::string> names;
  for (const auto& r : rows) {
    auto& panel = panels[{r.n, r.trainer}];
    panel[r.bound][r.m] = r.value;
    panel["|gap|"][r.m] = std::abs(r.gap);
    if (std::find(names.begin(), names.end(), r.bound) == names.end()) names.push_back(r.bound);
  }
  names.push_back("|gap|");

  const double width = kLegendW + kPanelW * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                    "\" height=\"" + num(kPanelH) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  std::size_t p = 0;
  for (const auto& [key, series] : panels) {
    const double x0 = kPanelW * static_cast<double>(p++);
    std::set<std::size_t> ms;
    double ymax = 0.0;
    for (const auto& [name, pts] : series) {
      for (const auto& [m, v] : pts) {
        ms.insert(m);
        if (std::isfinite(v)) ymax = std::max(ymax, v);
      }
    }
    if (ymax <= 0.0) ymax = 1.0;
    ymax *= 1.05;
    // log-scaled m axis
    const double lmin = std::log(static_cast<double>(*ms.begin()));
    const double lmax = std::log(static_cast<double>(*ms.rbegin()));
    const double pw = kPanelW - kMarginL - kMarginR;
    const double ph = kPanelH - kMarginT - kMarginB;
    auto px = [&](std::size_t m) {
      const double f = lmax > lmin ? (std::log(static_cast<double>(m)) - lmin) / (lmax - lmin) : 0.5;
      return x0 + kMarginL + f * pw;
    };
    auto py = [&](double v) { return kMarginT + ph * (1.0 - v / ymax); };

    svg += "<text x=\"" + num(x0 + kPanelW / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">n = " +
           std::to_string(key.first) + ", " + escape(key.second) + "</text>\n";
    svg += "<rect x=\"" + num(x0 + kMarginL) + "\" y=\"" + num(kMarginT) + "\" width=\"" + num(pw) +
           "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (std::size_t m : ms) {
      svg += "<text x=\"" + num(px(m)) + "\" y=\"" + num(kMarginT + ph + 15) +
             "\" text-anchor=\"middle\">" + std::to_string(m) + "</text>\n";
    }
    svg += "<text x=\"" + num(x0 + kMarginL + pw / 2) + "\" y=\"" + num(kPanelH - 8) +
           "\" text-anchor=\"middle\">m</text>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = ymax * k / 4.0;
      svg += "<text x=\"" + num(x0 + kMarginL - 5) + "\" y=\"" + num(py(v) + 4) +
             "\" text-anchor=\"end\">" + num(v) + "</text>\n";
    }
    for (std::size_t s = 0; s < names.size(); ++s) {
      const auto it = series.find(names[s]);
      if (it == series.end()) continue;
      const char* colour = kPalette[s % std::size(kPalette)];
      std::string path;
      for (const auto& [m, v] : it->second) {
        if (!std::isfinite(v)) continue;
        path += (path.empty() ? "" : " ") + num(px(m)) + "," + num(py(v));
        svg += "<circle cx=\"" + num(px(m)) + "\" cy=\"" + num(py(v)) + "\" r=\"2.5\" fill=\"" +
               colour + "\"/>\n";
      }
      const bool dashed = names[s] == "|gap|";
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.5\"" +
             (dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + path + "\"/>\n";
    }
  }

  const double lx = width - kLegendW + 10;
  for (std::size_t s = 0; s < names.size(); ++s) {
    const double y = kMarginT + 16.0 * static_cast<double>(s);
    svg += "<line x1=\"" + num(lx) + "\" y1=\"" + num(y) + "\" x2=\"" + num(lx + 20) + "\" y2=\"" +
           num(y) + "\" stroke=\"" + kPalette[s % std::size(kPalette)] + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(lx + 26) + "\" y=\"" + num(y + 4) + "\">" + escape(names[s]) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void write_svg(const std::vector<CsvRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << render_svg(rows);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace metagen
