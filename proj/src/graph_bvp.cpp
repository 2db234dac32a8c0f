#include "stargraph/graph_bvp.hpp"

#include <cmath>

#include "stargraph/quad.hpp"

namespace stargraph {

const GraphSolution::Edge& GraphSolution::edge(int k) const {
  for (const auto& e : edges) {
    if (e.k == k) return e;
  }
  throw BvpError("no solution table for edge " + std::to_string(k));
}

GraphSolution solve_bvp(const EdgeCoefficients& coeffs, GraphPoint x_O_point,
                        const BvpOptions& options) {
  if (coeffs.edges.empty()) throw BvpError("solve_bvp: no edges");

  // Forcing scale for relative tolerances.
  double fscale = std::fabs(coeffs.vol_ergodic * coeffs.fbar_root);
  for (const auto& e : coeffs.edges) {
    double fmax = 0.0;
    for (std::size_t j = 0; j < e.h.size(); ++j) fmax = std::max(fmax, std::fabs(e.fbar[j] * e.M[j]));
    fscale = std::max(fscale, fmax * -e.m);
  }
  fscale = std::max(fscale, 1e-300);

  const double defect = coeffs.compatibility_defect();
  const double mc_slack = 4.0 * (coeffs.vol_ergodic_se * std::fabs(coeffs.fbar_root) +
                                 coeffs.fbar_root_se * coeffs.vol_ergodic);
  if (std::fabs(defect) > options.compatibility_tol * fscale + mc_slack)
    throw BvpError("solve_bvp: zero-mean compatibility violated (defect " +
                   std::to_string(defect) + "); no bounded solution exists");

  GraphSolution sol;
  sol.normalization = x_O_point;

  for (const auto& table : coeffs.edges) {
    const std::size_t n = table.h.size();
    if (n < 4) throw BvpError("solve_bvp: edge grid too coarse");
    const double dh = table.dh();

    GraphSolution::Edge edge;
    edge.k = table.k;
    edge.h = table.h;

    // Flux from the zero-flux end: M abar v' (h) = 2 * integral_m^h fbar M.
    std::vector<double> src(n);
    for (std::size_t j = 0; j < n; ++j) src[j] = table.fbar[j] * table.M[j];
    const std::vector<double> cum = cumulative_parabolic_sqrt_left(src, dh);
    edge.flux.resize(n);
    for (std::size_t j = 0; j < n; ++j) edge.flux[j] = 2.0 * cum[j];

    // v' with the removable singularity at the well bottom: flux and M abar
    // both vanish linearly there, so the ratio is extended by its limit.
    std::vector<double> dv(n);
    for (std::size_t j = 1; j < n; ++j) {
      const double denom = table.M[j] * table.abar[j];
      if (denom < options.coefficient_floor)
        throw BvpError("solve_bvp: M abar below floor at interior level h = " +
                       std::to_string(table.h[j]));
      dv[j] = edge.flux[j] / denom;
    }
    {
      const double slope = (table.M[1] * table.abar[1] - table.M[0] * table.abar[0]) / dh;
      dv[0] = slope > options.coefficient_floor
                  ? 2.0 * table.fbar[0] * table.M[0] / slope
                  : 2.0 * dv[1] - dv[2];
    }

    // Second integration; values are pinned to the (provisional) root value 0.
    const std::vector<double> vint = cumulative_parabolic_sqrt_left(dv, dh);
    edge.v.resize(n);
    for (std::size_t j = 0; j < n; ++j) edge.v[j] = vint[j] - vint[n - 1];

    sol.edges.push_back(std::move(edge));
  }
  sol.v_root = 0.0;

  // Check the gluing balance at the root (implied, not imposed).
  double flux_term = 0.0;
  double scale = std::fabs(coeffs.vol_ergodic * coeffs.fbar_root);
  for (std::size_t i = 0; i < sol.edges.size(); ++i) {
    const auto& table = coeffs.edges[i];
    const auto& edge = sol.edges[i];
    const std::size_t n = edge.h.size();
    const double dv_end = edge.flux[n - 1] / (table.M[n - 1] * table.abar[n - 1]);
    flux_term += 0.5 * table.p * dv_end;
    scale = std::max(scale, std::fabs(0.5 * table.p * dv_end));
  }
  sol.gluing_scale = std::max(scale, 1e-300);
  sol.gluing_residual = coeffs.vol_ergodic * coeffs.fbar_root + flux_term;
  const double gluing_slack = 4.0 * (coeffs.vol_ergodic_se * std::fabs(coeffs.fbar_root) +
                                     coeffs.fbar_root_se * coeffs.vol_ergodic);
  if (std::fabs(sol.gluing_residual) > options.gluing_tol * sol.gluing_scale + gluing_slack)
    throw BvpError("solve_bvp: gluing residual " + std::to_string(sol.gluing_residual) +
                   " exceeds tolerance");

  // Normalize: v must vanish at the image of x_O.
  const double shift = evaluate(sol, x_O_point);
  for (auto& e : sol.edges) {
    for (auto& val : e.v) val -= shift;
  }
  sol.v_root -= shift;
  return sol;
}

double evaluate(const GraphSolution& sol, GraphPoint y) {
  if (y.is_root()) return sol.v_root;
  const auto& e = sol.edge(y.k);
  const std::size_t n = e.h.size();
  const double m = e.h.front();
  if (y.h < m - 1e-12 || y.h > 1e-12)
    throw BvpError("evaluate: level " + std::to_string(y.h) + " outside edge range");
  const double dh = e.h[1] - e.h[0];
  const double s = (y.h - m) / dh;
  std::size_t j = std::min(static_cast<std::size_t>(std::max(0.0, s)), n - 2);

  // 4-point Lagrange cubic, clamped at the ends; exact at grid nodes.
  std::size_t j0 = j == 0 ? 0 : (j >= n - 2 ? n - 4 : j - 1);
  const double t = (y.h - e.h[j0]) / dh;
  double result = 0.0;
  for (int a = 0; a < 4; ++a) {
    double basis = 1.0;
    for (int b = 0; b < 4; ++b) {
      if (a == b) continue;
      basis *= (t - b) / (a - b);
    }
    result += basis * e.v[j0 + static_cast<std::size_t>(a)];
  }
  return result;
}

}  // namespace stargraph
