#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "stargraph/graph.hpp"

namespace stargraph {

class BvpError : public std::runtime_error {
 public:
  explicit BvpError(const std::string& what) : std::runtime_error(what) {}
};

// Solution of the limit boundary-value problem on the star graph:
// per edge, grid values v(k, h_i) and the flux M abar v', plus the root value.
struct GraphSolution {
  struct Edge {
    int k = 0;
    std::vector<double> h;
    std::vector<double> v;
    std::vector<double> flux;  // M abar v' at the grid nodes
  };
  std::vector<Edge> edges;
  double v_root = 0.0;
  GraphPoint normalization;  // where v was pinned to zero
  double gluing_residual = 0.0;
  double gluing_scale = 1.0;

  const Edge& edge(int k) const;
};

struct BvpOptions {
  double compatibility_tol = 1e-6;   // relative to the forcing scale
  double gluing_tol = 1e-8;          // relative residual allowed at the root
  double coefficient_floor = 1e-14;  // guards divisions by M abar
};

// Integrates the edge equations with zero flux at the well-bottom ends,
// matches values at the root and shifts so that v vanishes at x_O's image.
// The gluing balance at the root is implied by the zero-mean forcing and is
// checked, not imposed.
GraphSolution solve_bvp(const EdgeCoefficients& coeffs, GraphPoint x_O_point,
                        const BvpOptions& options = {});

// Piecewise-cubic interpolation of the solution; exact at grid nodes.
double evaluate(const GraphSolution& sol, GraphPoint y);

}  // namespace stargraph
