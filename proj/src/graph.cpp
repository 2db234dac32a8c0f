#include "stargraph/graph.hpp"

#include <cmath>

#include <json.hpp>

#include "stargraph/quad.hpp"

namespace stargraph {

using ordered_json = nlohmann::ordered_json;

Graph Graph::from_model(const Model& model) {
  Graph g;
  for (int k = 0; k < model.well_count(); ++k) {
    g.edges.push_back({k, model.edge_minimum(k)});
  }
  return g;
}

double EdgeCoefficientTable::interp(const std::vector<double>& col, double hh) const {
  const double d = dh();
  if (d <= 0.0 || col.empty()) throw QuadratureError("interp on empty table");
  if (hh <= h.front()) return col.front();
  if (hh >= h.back()) return col.back();
  const double s = (hh - h.front()) / d;
  const std::size_t j = std::min(static_cast<std::size_t>(s), col.size() - 2);
  const double w = s - static_cast<double>(j);
  return col[j] * (1.0 - w) + col[j + 1] * w;
}

const EdgeCoefficientTable& EdgeCoefficients::edge(int k) const {
  for (const auto& e : edges) {
    if (e.k == k) return e;
  }
  throw QuadratureError("no coefficient table for edge " + std::to_string(k));
}

double EdgeCoefficients::edge_forcing_integral(int k) const {
  const auto& e = edge(k);
  std::vector<double> y(e.h.size());
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = e.fbar[j] * e.M[j];
  const auto cum = cumulative_parabolic_sqrt_left(y, e.dh());
  return cum.back();
}

double EdgeCoefficients::compatibility_defect() const {
  double total = vol_ergodic * fbar_root;
  for (const auto& e : edges) total += edge_forcing_integral(e.k);
  return total;
}

std::string EdgeCoefficients::to_json() const {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["vol_ergodic"] = vol_ergodic;
  j["fbar_root"] = fbar_root;
  j["vol_ergodic_se"] = vol_ergodic_se;
  j["fbar_root_se"] = fbar_root_se;
  j["edges"] = ordered_json::array();
  for (const auto& e : edges) {
    ordered_json je;
    je["k"] = e.k;
    je["m"] = e.m;
    je["p"] = e.p;
    je["h"] = e.h;
    je["M"] = e.M;
    je["abar"] = e.abar;
    je["fbar"] = e.fbar;
    j["edges"].push_back(je);
  }
  return j.dump(2);
}

EdgeCoefficients EdgeCoefficients::from_json(const std::string& text) {
  const auto j = ordered_json::parse(text);
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw QuadratureError("coefficient file has unsupported schema version");
  EdgeCoefficients c;
  c.vol_ergodic = j.at("vol_ergodic").get<double>();
  c.fbar_root = j.at("fbar_root").get<double>();
  c.vol_ergodic_se = j.value("vol_ergodic_se", 0.0);
  c.fbar_root_se = j.value("fbar_root_se", 0.0);
  for (const auto& je : j.at("edges")) {
    EdgeCoefficientTable e;
    e.k = je.at("k").get<int>();
    e.m = je.at("m").get<double>();
    e.p = je.at("p").get<double>();
    e.h = je.at("h").get<std::vector<double>>();
    e.M = je.at("M").get<std::vector<double>>();
    e.abar = je.at("abar").get<std::vector<double>>();
    e.fbar = je.at("fbar").get<std::vector<double>>();
    c.edges.push_back(std::move(e));
  }
  return c;
}

GraphPoint identify(const Model& model, Vec2 x) {
  if (!model.inside_closure(x)) throw ModelError("identify: point lies outside the domain");
  const int k = model.well_index(x);
  if (k < 0) return GraphPoint::root();
  return GraphPoint::edge(k, model.first_integral(x));
}

namespace {

struct LevelCurve {
  std::vector<Vec2> points;      // traced at equally spaced ray angles
  std::vector<double> arc_factor;  // |P'(theta)| at each node
  double dtheta = 0.0;
};

LevelCurve trace_level_curve(const Model& model, int k, double h, int nodes) {
  const double m = model.edge_minimum(k);
  if (!(h > m && h <= 0.0))
    throw QuadratureError("level_set_integral: level " + std::to_string(h) +
                          " outside (" + std::to_string(m) + ", 0]");
  const Vec2 center = model.minimum_point(k);
  LevelCurve curve;
  curve.dtheta = 2.0 * M_PI / nodes;
  curve.points.resize(static_cast<std::size_t>(nodes));
  std::vector<double> rho(static_cast<std::size_t>(nodes));

  const double cap = 2.0 * model.domain_diameter();
  for (int j = 0; j < nodes; ++j) {
    const double theta = curve.dtheta * j;
    const Vec2 dir{std::cos(theta), std::sin(theta)};
    double lo = 0.0, hi = 1e-3;
    while (model.well_function(k, center + dir * hi) < h) {
      hi *= 2.0;
      if (hi > cap)
        throw QuadratureError("level_set_integral: level curve not found along ray angle " +
                              std::to_string(theta));
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (model.well_function(k, center + dir * mid) < h) lo = mid; else hi = mid;
      if (hi - lo <= 1e-16 * (1.0 + hi)) break;
    }
    rho[static_cast<std::size_t>(j)] = 0.5 * (lo + hi);
    curve.points[static_cast<std::size_t>(j)] = center + dir * rho[static_cast<std::size_t>(j)];
  }

  // |P'(theta)|^2 = rho^2 + rho'^2 with rho' from a 4th-order periodic stencil.
  curve.arc_factor.resize(static_cast<std::size_t>(nodes));
  const auto at = [&](int j) { return rho[static_cast<std::size_t>(((j % nodes) + nodes) % nodes)]; };
  for (int j = 0; j < nodes; ++j) {
    const double drho =
        (-at(j + 2) + 8.0 * at(j + 1) - 8.0 * at(j - 1) + at(j - 2)) / (12.0 * curve.dtheta);
    curve.arc_factor[static_cast<std::size_t>(j)] =
        std::sqrt(at(j) * at(j) + drho * drho);
  }
  return curve;
}

double integrate_over_curve(const LevelCurve& curve, const std::function<double(Vec2)>& g) {
  double total = 0.0;
  for (std::size_t j = 0; j < curve.points.size(); ++j) {
    const double val = g(curve.points[j]) * curve.arc_factor[j];
    if (!std::isfinite(val)) throw QuadratureError("level_set_integral: non-finite integrand value");
    total += val;
  }
  return total * curve.dtheta;
}

}  // namespace

double level_set_integral(const Model& model, int k, double h,
                          const std::function<double(Vec2)>& integrand, int nodes) {
  const LevelCurve curve = trace_level_curve(model, k, h, nodes);
  return integrate_over_curve(curve, integrand);
}

EdgeCoefficients compute_coefficients(const Model& model, const CoefficientGridSpec& spec) {
  if (spec.cells_per_edge < 8) throw QuadratureError("compute_coefficients: grid too coarse");
  EdgeCoefficients out;

  for (int k = 0; k < model.well_count(); ++k) {
    EdgeCoefficientTable table;
    table.k = k;
    table.m = model.edge_minimum(k);
    const int n = spec.cells_per_edge;
    const double dh = -table.m / n;

    table.h.resize(static_cast<std::size_t>(n + 1));
    table.M.resize(static_cast<std::size_t>(n + 1));
    table.abar.resize(static_cast<std::size_t>(n + 1));
    table.fbar.resize(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) table.h[static_cast<std::size_t>(i)] = table.m + dh * i;
    table.h[static_cast<std::size_t>(n)] = 0.0;

    const auto inv_grad = [&](Vec2 x) {
      return 1.0 / model.well_function_gradient(k, x).norm();
    };
    const auto slow_flux = [&](Vec2 x) {
      const Vec2 g = model.well_function_gradient(k, x);
      return g.dot(model.a1(x).apply(g)) / g.norm();
    };
    const auto forcing_weighted = [&](Vec2 x) {
      const Vec2 g = model.well_function_gradient(k, x);
      return model.forcing(x) / g.norm();
    };

    for (int i = 1; i <= n; ++i) {
      const double h = table.h[static_cast<std::size_t>(i)];
      const LevelCurve curve = trace_level_curve(model, k, h, spec.level_nodes);
      const double M = integrate_over_curve(curve, inv_grad);
      const double num_a = integrate_over_curve(curve, slow_flux);
      const double num_f = integrate_over_curve(curve, forcing_weighted);
      if (!(M > 0.0))
        throw QuadratureError("compute_coefficients: nonpositive normalizing factor at h = " +
                              std::to_string(h));
      table.M[static_cast<std::size_t>(i)] = M;
      table.abar[static_cast<std::size_t>(i)] = num_a / M;
      table.fbar[static_cast<std::size_t>(i)] = num_f / M;
    }

    // h = m_k: the level set degenerates to the minimum point. M stays finite,
    // abar vanishes (linearly), fbar tends to f at the minimum.
    table.M[0] = 2.0 * table.M[1] - table.M[2];
    table.abar[0] = std::max(0.0, 2.0 * table.abar[1] - table.abar[2]);
    table.fbar[0] = model.forcing(model.minimum_point(k));

    const LevelCurve top = trace_level_curve(model, k, 0.0, spec.level_nodes);
    table.p = integrate_over_curve(top, slow_flux);

    // Refinement check at a few probe levels.
    for (const double frac : {0.25, 0.7, 1.0}) {
      const double hp = table.m * (1.0 - frac);
      const double coarse = level_set_integral(model, k, hp, inv_grad, spec.level_nodes);
      const double fine = level_set_integral(model, k, hp, inv_grad, 2 * spec.level_nodes);
      const double rel = std::fabs(fine - coarse) / std::max(1e-300, std::fabs(fine));
      if (rel > spec.convergence_tol)
        throw QuadratureError(
            "compute_coefficients: level quadrature did not converge at h = " +
            std::to_string(hp) + " (relative change " + std::to_string(rel) + ")");
    }

    out.edges.push_back(std::move(table));
  }

  const IntegralEstimate vol = model.ergodic_integral([](Vec2) { return 1.0; });
  const IntegralEstimate ff = model.ergodic_integral([&](Vec2 x) { return model.forcing(x); });
  if (!(vol.value > 0.0))
    throw QuadratureError("compute_coefficients: nonpositive ergodic-region volume");
  out.vol_ergodic = vol.value;
  out.vol_ergodic_se = vol.standard_error;
  out.fbar_root = ff.value / vol.value;
  out.fbar_root_se = ff.standard_error / vol.value;
  return out;
}

}  // namespace stargraph
