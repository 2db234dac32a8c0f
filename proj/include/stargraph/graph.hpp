#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stargraph/model.hpp"

namespace stargraph {

class QuadratureError : public std::runtime_error {
 public:
  explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

// A point of the star graph: the root O or an edge point (k, h), m_k <= h <= 0.
// Edge(k, 0) is identified with the root.
struct GraphPoint {
  int k = -1;
  double h = 0.0;

  static GraphPoint root() { return {-1, 0.0}; }
  static GraphPoint edge(int k, double h) { return {k, h}; }
  bool is_root() const { return k < 0 || h == 0.0; }
};

inline bool same_point(GraphPoint a, GraphPoint b, double tol = 1e-12) {
  if (a.is_root() && b.is_root()) return true;
  return a.k == b.k && std::fabs(a.h - b.h) <= tol;
}

struct Graph {
  struct Edge {
    int k;
    double m;  // edge is the interval [m, 0], vertex V_k at h = m
  };
  std::vector<Edge> edges;

  static Graph from_model(const Model& model);
};

// Tabulated averaged coefficients on one edge: uniform grid h_0 = m_k up to
// h_n = 0 with node values of the normalizing factor M_k, the averaged slow
// diffusion abar and the averaged forcing fbar.
struct EdgeCoefficientTable {
  int k = 0;
  double m = 0.0;
  std::vector<double> h;
  std::vector<double> M;
  std::vector<double> abar;
  std::vector<double> fbar;
  double p = 0.0;  // boundary flux weight at h = 0

  double dh() const { return h.size() > 1 ? h[1] - h[0] : 0.0; }
  // Linear interpolation of a tabulated column at level hh.
  double interp(const std::vector<double>& col, double hh) const;
};

struct EdgeCoefficients {
  static constexpr int kSchemaVersion = 1;

  std::vector<EdgeCoefficientTable> edges;
  double vol_ergodic = 0.0;
  double fbar_root = 0.0;
  double vol_ergodic_se = 0.0;  // nonzero when Monte Carlo quadrature was used
  double fbar_root_se = 0.0;

  const EdgeCoefficientTable& edge(int k) const;

  // integral over the edge of fbar * M dh (parabolic rule, sqrt-aware at m_k)
  double edge_forcing_integral(int k) const;
  // vol_ergodic * fbar_root + sum_k edge_forcing_integral == integral of f over G
  double compatibility_defect() const;

  std::string to_json() const;
  static EdgeCoefficients from_json(const std::string& text);
};

struct CoefficientGridSpec {
  int cells_per_edge = 512;   // grid nodes = cells + 1
  int level_nodes = 512;      // quadrature nodes per level curve
  double convergence_tol = 1e-7;  // relative disagreement allowed on refinement
};

// Projection of a domain point onto the graph.
GraphPoint identify(const Model& model, Vec2 x);

// Surface integral of `integrand` over the level curve C_k(h) = {H_k = h},
// m_k < h <= 0. The curve is traced by bisection along rays from the well
// minimum and integrated with the periodic trapezoid rule in the ray angle.
double level_set_integral(const Model& model, int k, double h,
                          const std::function<double(Vec2)>& integrand,
                          int nodes = 512);

// Tabulates M_k, abar, fbar on each edge, the flux weights p_k and the
// ergodic-region data (volume and the averaged forcing at the root).
EdgeCoefficients compute_coefficients(const Model& model,
                                      const CoefficientGridSpec& spec = {});

}  // namespace stargraph
