#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "stargraph/harness.hpp"

namespace stargraph {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

int plot_csv(const std::string& csv_path, const std::string& spec_path,
             const std::string& out_svg_path) {
  std::ifstream spec_in(spec_path);
  if (!spec_in) throw ConfigError("cannot open plot spec: " + spec_path);
  const auto spec = nlohmann::ordered_json::parse(spec_in);
  const std::string xcol = spec.at("x").get<std::string>();
  const std::string ycol = spec.at("y").get<std::string>();
  const bool logx = spec.value("logx", false);
  const bool logy = spec.value("logy", false);
  const bool want_fit = spec.value("fit", false);
  const std::string title = spec.value("title", ycol + " vs " + xcol);

  // optional row filter: {"where": {"column": "value", ...}}
  std::vector<std::pair<std::string, std::string>> where;
  if (spec.contains("where")) {
    for (const auto& [k, v] : spec.at("where").items()) where.emplace_back(k, v.get<std::string>());
  }

  const auto rows = read_csv(csv_path);
  std::vector<double> xs, ys;
  for (const auto& row : rows) {
    const auto xi = row.find(xcol);
    const auto yi = row.find(ycol);
    if (xi == row.end() || yi == row.end())
      throw ConfigError("plot: column missing in CSV (" + xcol + " or " + ycol + ")");
    bool selected = true;
    for (const auto& [k, v] : where) {
      const auto it = row.find(k);
      if (it == row.end()) throw ConfigError("plot: filter column missing in CSV (" + k + ")");
      selected = selected && it->second == v;
    }
    if (!selected || xi->second.empty() || yi->second.empty()) continue;
    xs.push_back(std::stod(xi->second));
    ys.push_back(std::stod(yi->second));
  }
  if (xs.empty()) throw ConfigError("plot: no data rows");

  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if ((logx && xs[i] <= 0.0) || (logy && ys[i] <= 0.0))
      throw ConfigError("plot: log scale requires positive data");
  }

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xmin = std::min(xmin, tx(xs[i]));
    xmax = std::max(xmax, tx(xs[i]));
    ymin = std::min(ymin, ty(ys[i]));
    ymax = std::max(ymax, ty(ys[i]));
  }
  if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }

  const double W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  auto px = [&](double v) { return ml + (tx(v) - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (ty(v) - ymin) / (ymax - ymin) * (H - mt - mb); };

  const bool fit = want_fit && xs.size() >= 2;
  if (want_fit && !fit)
    std::cerr << "plot: warning: a single data row cannot be fitted, plotting points only\n";

  double slope = 0.0, intercept = 0.0;
  if (fit) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += tx(xs[i]); sy += ty(ys[i]);
      sxx += tx(xs[i]) * tx(xs[i]);
      sxy += tx(xs[i]) * ty(ys[i]);
    }
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    intercept = (sy - slope * sx) / n;
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" font-family=\"monospace\" font-size=\"14\" "
         "text-anchor=\"middle\">" << title << "</text>\n";
  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  // ticks
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    const double sx = ml + (W - ml - mr) * i / 4.0;
    const double sy = H - mb - (H - mt - mb) * i / 4.0;
    const double xv = logx ? std::pow(10.0, fx) : fx;
    const double yv = logy ? std::pow(10.0, fy) : fy;
    svg << "<line x1=\"" << sx << "\" y1=\"" << H - mb << "\" x2=\"" << sx << "\" y2=\""
        << H - mb + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << sx << "\" y=\"" << H - mb + 18
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv)
        << "</text>\n";
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy << "\" x2=\"" << ml << "\" y2=\"" << sy
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << sy + 4
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv)
        << "</text>\n";
  }
  svg << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">" << xcol
      << (logx ? " (log)" : "") << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
      << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 16 " << (mt + H - mb) / 2 << ")\">" << ycol
      << (logy ? " (log)" : "") << "</text>\n";

  // data polyline + points, sorted by x for the line
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  if (xs.size() > 1) {
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i : order) svg << fmt(px(xs[i])) << "," << fmt(py(ys[i])) << " ";
    svg << "\"/>\n";
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    svg << "<circle cx=\"" << fmt(px(xs[i])) << "\" cy=\"" << fmt(py(ys[i]))
        << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }

  if (fit) {
    auto fit_y = [&](double lx) { return slope * lx + intercept; };
    const double y0 = fit_y(xmin), y1 = fit_y(xmax);
    auto spy = [&](double lyv) { return H - mb - (lyv - ymin) / (ymax - ymin) * (H - mt - mb); };
    svg << "<line x1=\"" << ml << "\" y1=\"" << fmt(spy(y0)) << "\" x2=\"" << W - mr
        << "\" y2=\"" << fmt(spy(y1))
        << "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\" stroke-width=\"1.2\"/>\n";
    svg << "<text x=\"" << W - mr - 6 << "\" y=\"" << mt + 14
        << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\" fill=\"#d62728\">"
        << "fit slope = " << fmt(slope) << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(out_svg_path);
  if (!out) throw ConfigError("cannot write SVG: " + out_svg_path);
  out << svg.str();
  return static_cast<int>(xs.size());
}

}  // namespace stargraph
