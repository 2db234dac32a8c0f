#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stargraph/graph.hpp"
#include "stargraph/graph_process.hpp"
#include "stargraph/model.hpp"
#include "stargraph/rng.hpp"

namespace stargraph {

// Time-stepping scheme for the reflected two-scale diffusion.
//
// EulerMaruyama is the plain scheme: divergence-form drift plus the raw
// diffusion increments. Its weak error near the degenerate wells scales like
// dt * (tangential diffusion)^2 / eps^2 per unit time: the chord of the fast
// tangential motion leaks variance into the conserved level coordinate, so
// resolving small eps needs dt = O(eps^2).
//
// FoliationSplit replaces the fast tangential chord by a move along the level
// set (chord + projection back onto the level curve) and treats the fast
// normal component as a one-dimensional diffusion in the level coordinate.
// The level coordinate is then exactly conserved by the tangential motion, as
// in the continuum, and the weak error stays O(dt/eps) uniformly in eps.
enum class Scheme { EulerMaruyama, FoliationSplit };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct SimConfig {
  double eps = 0.1;
  double dt = 0.0;  // defaults to 0.01 * eps when <= 0
  double horizon = 1.0;
  int n_paths = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  Scheme scheme = Scheme::FoliationSplit;
  bool common_random_numbers = true;

  static SimConfig standard(double eps, double horizon, int n_paths, std::uint64_t seed);
  double step_size() const { return dt > 0.0 ? dt : 0.01 * eps; }
  void validate() const;  // dt <= 0.05 eps, n_paths >= 1, eps > 0
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, Vec2 last_state)
      : std::runtime_error(what), last_state(last_state) {}
  Vec2 last_state;
};

class Stepper {
 public:
  Stepper(const Model& model, const SimConfig& config);

  // Advances the batch by one shared time step with one draw of the noise;
  // if any raw proposal exceeds the displacement cap the step is redone at
  // half the step size (fresh draws). Returns the time actually advanced.
  double step_batch(Vec2* xs, int count, Rng& rng, double dt_cap = 0.0) const;
  double step(Vec2& x, Rng& rng, double dt_cap = 0.0) const {
    return step_batch(&x, 1, rng, dt_cap);
  }

  // Mirror pullback along the co-normal through the nearest boundary point;
  // the identity component of a step, exposed for direct checking.
  Vec2 reflect_proposal(Vec2 y) const { return reflect(y); }

  const SimConfig& config() const { return config_; }

 private:
  Vec2 advance(Vec2 x, double dt, const double z[4]) const;
  Vec2 advance_euler(Vec2 x, double dt, const double z[4]) const;
  Vec2 advance_foliation(Vec2 x, double dt, const double z[4]) const;
  Vec2 reflect(Vec2 y) const;
  Vec2 move_to_level(int k, Vec2 y, double target) const;

  const Model& model_;
  SimConfig config_;
  double cap_;  // displacement cap, 0.1 * diam(G)
};

// ------------------------------------------------------------------ results

struct OccupationResult {
  double fraction = 0.0;
  double standard_error = 0.0;
  std::vector<double> per_path;
};

// Fraction of time spent in the ergodic region over [0, horizon].
OccupationResult simulate_occupation(const Model& model, const SimConfig& config, Vec2 x0);

struct StartSpec {
  enum class Kind { Point, LevelSet };
  Kind kind = Kind::Point;
  Vec2 point;
  int k = 0;
  double level = 0.0;

  static StartSpec at(Vec2 p) { return {Kind::Point, p, 0, 0.0}; }
  // Uniform ray angle on the level set {extended level == c} of well k.
  static StartSpec on_level(int k, double c) { return {Kind::LevelSet, {}, k, c}; }
};

struct LevelTarget {
  double level = 0.0;  // extended level value
};

struct ExitTimeStats {
  double mean = 0.0;
  double standard_error = 0.0;
  int hit_count = 0;
  int n_paths = 0;
  std::vector<double> hit_fraction;  // per target, over hit paths; sums to 1
  double censored_fraction = 0.0;
  double cap = 0.0;
  std::vector<double> per_path_time;  // capped at `cap` for censored paths
  std::vector<int> per_path_target;   // -1 for censored paths
};

// First hitting time of any of the targets (level sets of the extended level
// coordinate). Paths that have not hit by 100 * horizon are censored and
// reported, never dropped silently.
ExitTimeStats estimate_exit_time(const Model& model, const SimConfig& config,
                                 const StartSpec& start, const std::vector<LevelTarget>& targets);

struct FeynmanKacResult {
  double value = 0.0;
  double standard_error = 0.0;
  int n_paths = 0;
  double t_max = 0.0;
  bool tail_decayed = true;
  double tail_mean = 0.0;   // mean forcing over the last window (start point)
  double tail_scale = 0.0;  // largest window magnitude, for context
};

// Estimator of the solution of the stationary problem via the time-integral
// representation: -int_0^tmax f(X^x) + int_0^tmax f(X^{x_O}), averaged over
// paths; with common random numbers the two paths share the noise stream.
FeynmanKacResult feynman_kac_u(const Model& model, const SimConfig& config, Vec2 x,
                               double t_max);

// Same estimator for several probe points sharing the reference path and the
// noise (one stream per replicate).
std::vector<FeynmanKacResult> feynman_kac_batch(const Model& model, const SimConfig& config,
                                                const std::vector<Vec2>& probes, double t_max);

struct MarginalHistogram {
  double t = 0.0;
  int n_paths = 0;
  double root_mass = 0.0;
  struct EdgeBins {
    int k = 0;
    double m = 0.0;
    std::vector<double> mass;  // uniform bins on [m, 0]
  };
  std::vector<EdgeBins> edges;
};

// Law of the projection of X_t onto the graph: atom at the root plus binned
// masses on each edge.
MarginalHistogram empirical_marginal(const Model& model, const SimConfig& config, Vec2 x0,
                                     double t, int bins);

// Total-variation distance between the empirical histogram and a CTMC
// marginal, with generator cells aggregated into the histogram bins.
double tv_distance(const MarginalHistogram& hist, const GeneratorMatrix& gen,
                   const std::vector<double>& ctmc_marginal);

}  // namespace stargraph
