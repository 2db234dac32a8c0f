#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stargraph/graph.hpp"

namespace stargraph {

class GeneratorError : public std::runtime_error {
 public:
  explicit GeneratorError(const std::string& what) : std::runtime_error(what) {}
};

// Conservative finite-volume generator of the limit diffusion on the graph.
// Cell 0 is the root cell carrying the ergodic-region volume; each edge
// contributes cells covering [m_k, 0], listed from the well bottom upward.
struct GeneratorMatrix {
  struct Transition {
    int to;
    double rate;
  };
  struct EdgeBlock {
    int k = 0;
    int first_cell = 0;  // cell index of the bottom cell
    int cells = 0;
    double m = 0.0;
    double dh = 0.0;
  };

  std::vector<double> volume;                      // per cell
  std::vector<std::vector<Transition>> neighbors;  // off-diagonal rates
  std::vector<double> exit_rate;                   // = -diagonal
  std::vector<EdgeBlock> blocks;

  int cell_count() const { return static_cast<int>(volume.size()); }
  int root_cell() const { return 0; }
  int cell_of(GraphPoint y) const;
  GraphPoint point_of(int cell) const;

  // Stationary law (proportional to cell volumes by detailed balance).
  std::vector<double> stationary() const;
  // Largest row-sum defect |sum_j q_ij| over cells.
  double conservativity_defect() const;
  // Largest detailed-balance defect |vol_i q_ij - vol_j q_ji|.
  double detailed_balance_defect() const;
  // Action of the generator on cell values.
  std::vector<double> apply(const std::vector<double>& f) const;

  std::string to_json() const;
};

// Builds the generator from tabulated coefficients with n_cells cells per
// edge. Fluxes use the tabulated M abar at interior faces and the boundary
// weight p_k at the root face; no row is added at the exterior vertices since
// the flux vanishes at the well bottoms.
GeneratorMatrix build_generator(const EdgeCoefficients& coeffs, int n_cells);

// Distribution at time t from a point initial condition, by uniformization.
std::vector<double> marginal_at(const GeneratorMatrix& gen, GraphPoint initial, double t);
std::vector<double> marginal_at(const GeneratorMatrix& gen, const std::vector<double>& initial,
                                double t);

struct CtmcPaths {
  std::vector<int> final_cell;         // per path
  std::vector<double> root_occupancy;  // fraction of [0,T] spent in the root cell
  std::uint64_t seed = 0;

  std::vector<double> empirical_distribution(int cell_count) const;
};

// Exact jump-chain simulation of the CTMC.
CtmcPaths simulate_ctmc(const GeneratorMatrix& gen, GraphPoint initial, double T, int n_paths,
                        std::uint64_t seed, int workers = 1);

}  // namespace stargraph
