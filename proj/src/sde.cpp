#include "stargraph/sde.hpp"

#include <cassert>
#include <cmath>

#include "stargraph/parallel.hpp"

namespace stargraph {

std::string scheme_name(Scheme s) {
  return s == Scheme::EulerMaruyama ? "euler-maruyama" : "foliation-split";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "euler-maruyama" || name == "euler") return Scheme::EulerMaruyama;
  if (name == "foliation-split" || name == "foliation" || name.empty())
    return Scheme::FoliationSplit;
  throw SimulationError("unknown scheme: " + name, {});
}

SimConfig SimConfig::standard(double eps, double horizon, int n_paths, std::uint64_t seed) {
  SimConfig c;
  c.eps = eps;
  c.horizon = horizon;
  c.n_paths = n_paths;
  c.seed = seed;
  c.workers = default_workers();
  return c;
}

void SimConfig::validate() const {
  if (!(eps > 0.0)) throw SimulationError("config: eps must be > 0", {});
  if (!(horizon > 0.0)) throw SimulationError("config: horizon must be > 0", {});
  if (n_paths < 1) throw SimulationError("config: n_paths must be >= 1", {});
  if (step_size() > 0.05 * eps + 1e-18)
    throw SimulationError("config: dt must be <= 0.05 * eps", {});
}

// -------------------------------------------------------------------- Stepper

Stepper::Stepper(const Model& model, const SimConfig& config) : model_(model), config_(config) {
  config_.validate();
  cap_ = 0.1 * model.domain_diameter();
}

Vec2 Stepper::advance_euler(Vec2 x, double dt, const double z[4]) const {
  const double eps = config_.eps;
  const Vec2 drift = model_.div_a0(x) * (0.5 / eps) + model_.div_a1(x) * 0.5;
  const Vec2 w0{z[0], z[1]}, w1{z[2], z[3]};
  const Vec2 noise = model_.sigma0(x).apply(w0) * std::sqrt(dt / eps) +
                     model_.sigma1(x).apply(w1) * std::sqrt(dt);
  return x + drift * dt + noise;
}

Vec2 Stepper::move_to_level(int k, Vec2 y, double target) const {
  for (int it = 0; it < 12; ++it) {
    const double err = model_.extended_level(k, y) - target;
    if (std::fabs(err) <= 1e-13 * (1.0 + std::fabs(target))) break;
    const Vec2 g = model_.extended_level_gradient(k, y);
    const double g2 = g.norm2();
    if (g2 < 1e-20) break;
    y -= g * (err / g2);
  }
  return y;
}

Vec2 Stepper::advance_foliation(Vec2 x, double dt, const double z[4]) const {
  const double eps = config_.eps;
  int k = model_.well_index(x);
  if (k < 0) {
    // use the foliation of the nearest well
    double best = 1e300;
    for (int j = 0; j < model_.well_count(); ++j) {
      const double d = (x - model_.minimum_point(j)).norm2();
      if (d < best) {
        best = d;
        k = j;
      }
    }
  }

  Vec2 y = x;
  const Vec2 g = model_.extended_level_gradient(k, x);
  const double gn = g.norm();
  if (gn > 1e-12) {
    const double level0 = model_.extended_level(k, x);
    // Fast tangential: chord along the level curve, then projection back.
    const double alpha = std::max(0.0, model_.tangential_diffusion(k, x));
    if (alpha > 0.0) {
      const Vec2 tangent = g.perp() / gn;
      const double s = std::sqrt(alpha * dt / eps) * z[0] +
                       model_.tangential_drift(k, x) * (0.5 * dt / eps);
      y = move_to_level(k, x + tangent * s, level0);
    }
    // Fast normal: one-dimensional Euler step of the level coordinate.
    const double lam = std::max(0.0, model_.normal_diffusion(k, x));
    const double gdrift = model_.normal_drift_field(k, x);
    const double dh = (0.5 * gdrift / eps) * dt + std::sqrt(lam * dt / eps) * z[1];
    if (dh != 0.0) {
      const Vec2 gy = model_.extended_level_gradient(k, y);
      const double gyn = gy.norm();
      if (gyn > 1e-12) {
        y = move_to_level(k, y + gy * (dh / (gyn * gyn)), level0 + dh);
      }
    }
  }

  // Slow part: plain Euler.
  const Vec2 w1{z[2], z[3]};
  y += model_.div_a1(y) * (0.5 * dt) + model_.sigma1(y).apply(w1) * std::sqrt(dt);
  return y;
}

Vec2 Stepper::advance(Vec2 x, double dt, const double z[4]) const {
  return config_.scheme == Scheme::EulerMaruyama ? advance_euler(x, dt, z)
                                                 : advance_foliation(x, dt, z);
}

Vec2 Stepper::reflect(Vec2 y) const {
  for (int it = 0; it < 8; ++it) {
    if (model_.inside_closure(y)) return y;
    const BoundaryProjection bp = model_.boundary_project(y);
    const double depth = -bp.signed_distance;  // > 0 outside
    const Vec2 dir = conormal(model_, bp.point, config_.eps, 1e-3);
    const double along = dir.dot(bp.inward_normal);
    if (along <= 1e-12) break;
    y += dir * (2.0 * depth / along);
  }
  if (!model_.inside_closure(y)) {
    // Strongly curved overshoot: clamp just inside the nearest boundary point.
    const BoundaryProjection bp = model_.boundary_project(y);
    y = bp.point + bp.inward_normal * (1e-12 * model_.domain_diameter());
  }
  return y;
}

double Stepper::step_batch(Vec2* xs, int count, Rng& rng, double dt_cap) const {
  double dt = config_.step_size();
  if (dt_cap > 0.0) dt = std::min(dt, dt_cap);

  for (int attempt = 0; attempt < 14; ++attempt) {
    const double z[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    bool ok = true;
    Vec2 scratch[16];
    std::vector<Vec2> heap;
    Vec2* out = scratch;
    if (count > 16) {
      heap.resize(static_cast<std::size_t>(count));
      out = heap.data();
    }
    for (int i = 0; i < count && ok; ++i) {
      const Vec2 prop = advance(xs[i], dt, z);
      if (!prop.finite())
        throw SimulationError("non-finite state during step", xs[i]);
      if ((prop - xs[i]).norm() > cap_) {
        ok = false;
        break;
      }
      out[i] = prop;
    }
    if (!ok) {
      dt *= 0.5;
      continue;
    }
    for (int i = 0; i < count; ++i) {
      xs[i] = reflect(out[i]);
      assert(model_.inside_closure(xs[i]));
    }
    return dt;
  }
  throw SimulationError("displacement cap could not be satisfied after halving", xs[0]);
}

// ------------------------------------------------------------------ occupation

OccupationResult simulate_occupation(const Model& model, const SimConfig& config, Vec2 x0) {
  config.validate();
  if (!model.inside_closure(x0)) throw SimulationError("start point outside domain", x0);
  const Stepper stepper(model, config);
  OccupationResult result;
  result.per_path.assign(static_cast<std::size_t>(config.n_paths), 0.0);

  parallel_for(static_cast<std::size_t>(config.n_paths), config.workers, [&](std::size_t p) {
    Rng rng(config.seed, p);
    Vec2 x = x0;
    double t = 0.0, inside = 0.0;
    while (t < config.horizon) {
      const double adv = stepper.step(x, rng, config.horizon - t);
      if (model.well_index(x) < 0) inside += adv;
      t += adv;
    }
    result.per_path[p] = inside / config.horizon;
  });

  const double n = static_cast<double>(config.n_paths);
  result.fraction = pairwise_sum(result.per_path) / n;
  double ss = 0.0;
  for (double v : result.per_path) ss += (v - result.fraction) * (v - result.fraction);
  result.standard_error = config.n_paths > 1 ? std::sqrt(ss / (n * (n - 1.0))) : 0.0;
  return result;
}

// ------------------------------------------------------------------ exit times

ExitTimeStats estimate_exit_time(const Model& model, const SimConfig& config,
                                 const StartSpec& start, const std::vector<LevelTarget>& targets) {
  config.validate();
  if (targets.empty()) throw SimulationError("estimate_exit_time: no targets", {});
  const Stepper stepper(model, config);
  const double cap = 100.0 * config.horizon;
  const int k = start.kind == StartSpec::Kind::LevelSet
                    ? start.k
                    : std::max(0, model.well_index(start.point));

  struct PathOut {
    double time = 0.0;
    int target = -1;  // -1 censored
  };
  std::vector<PathOut> outs(static_cast<std::size_t>(config.n_paths));

  parallel_for(static_cast<std::size_t>(config.n_paths), config.workers, [&](std::size_t p) {
    Rng rng(config.seed, p);
    Vec2 x = start.kind == StartSpec::Kind::Point
                 ? start.point
                 : model.point_on_level(start.k, start.level, rng.uniform(0.0, 2.0 * M_PI));
    double level = model.extended_level(k, x);

    // Immediate hits (target set containing the start level).
    for (std::size_t j = 0; j < targets.size(); ++j) {
      if (std::fabs(level - targets[j].level) <= 1e-12) {
        outs[p] = {0.0, static_cast<int>(j)};
        return;
      }
    }

    double t = 0.0;
    while (t < cap) {
      const double adv = stepper.step(x, rng);
      const double next_level = model.extended_level(k, x);
      int best = -1;
      double best_frac = 2.0;
      for (std::size_t j = 0; j < targets.size(); ++j) {
        const double c = targets[j].level;
        const bool crossed = (level < c) != (next_level < c) || next_level == c;
        if (!crossed) continue;
        const double denom = next_level - level;
        const double frac = denom != 0.0 ? (c - level) / denom : 0.0;
        if (frac < best_frac) {
          best_frac = frac;
          best = static_cast<int>(j);
        }
      }
      if (best >= 0) {
        outs[p] = {t + std::min(1.0, std::max(0.0, best_frac)) * adv, best};
        return;
      }
      level = next_level;
      t += adv;
    }
    outs[p] = {cap, -1};
  });

  ExitTimeStats stats;
  stats.n_paths = config.n_paths;
  stats.cap = cap;
  stats.hit_fraction.assign(targets.size(), 0.0);
  stats.per_path_time.reserve(outs.size());
  stats.per_path_target.reserve(outs.size());
  std::vector<double> hit_times;
  hit_times.reserve(outs.size());
  for (const auto& o : outs) {
    stats.per_path_time.push_back(o.time);
    stats.per_path_target.push_back(o.target);
    if (o.target < 0) continue;
    hit_times.push_back(o.time);
    stats.hit_fraction[static_cast<std::size_t>(o.target)] += 1.0;
  }
  stats.hit_count = static_cast<int>(hit_times.size());
  stats.censored_fraction =
      1.0 - static_cast<double>(stats.hit_count) / static_cast<double>(config.n_paths);
  if (stats.hit_count > 0) {
    const double n = static_cast<double>(stats.hit_count);
    stats.mean = pairwise_sum(hit_times) / n;
    double ss = 0.0;
    for (double v : hit_times) ss += (v - stats.mean) * (v - stats.mean);
    stats.standard_error = stats.hit_count > 1 ? std::sqrt(ss / (n * (n - 1.0))) : 0.0;
    for (double& f : stats.hit_fraction) f /= n;
  }
  return stats;
}

// ------------------------------------------------------------------ Feynman-Kac

std::vector<FeynmanKacResult> feynman_kac_batch(const Model& model, const SimConfig& config,
                                                const std::vector<Vec2>& probes, double t_max) {
  config.validate();
  if (!(t_max > 0.0)) throw SimulationError("feynman_kac: t_max must be > 0", {});
  const Stepper stepper(model, config);
  const Vec2 x_o = model.normalization_point();
  const std::size_t np = probes.size();
  const std::size_t n = static_cast<std::size_t>(config.n_paths);

  constexpr int kWindows = 8;
  // Per replicate: difference estimate per probe, plus forcing-window sums of
  // the first probe path for the truncation diagnostic.
  std::vector<std::vector<double>> diff(np, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> windows(kWindows, std::vector<double>(n, 0.0));

  parallel_for(n, config.workers, [&](std::size_t rep) {
    Rng rng(config.seed, rep);
    std::vector<Vec2> states(np + 1);
    for (std::size_t i = 0; i < np; ++i) states[i] = probes[i];
    states[np] = x_o;
    std::vector<double> integral(np + 1, 0.0);

    if (config.common_random_numbers) {
      std::vector<double> fvals(np + 1);
      double t = 0.0;
      while (t < t_max) {
        for (std::size_t i = 0; i <= np; ++i) fvals[i] = model.forcing(states[i]);
        const double adv = stepper.step_batch(states.data(), static_cast<int>(np + 1), rng,
                                              t_max - t);
        for (std::size_t i = 0; i <= np; ++i) integral[i] += fvals[i] * adv;
        const int w = std::min(kWindows - 1, static_cast<int>(t / t_max * kWindows));
        windows[static_cast<std::size_t>(w)][rep] += fvals[0] * adv;
        t += adv;
      }
    } else {
      for (std::size_t i = 0; i <= np; ++i) {
        Rng own(config.seed ^ (0x517CC1B727220A95ULL * (i + 1)), rep);
        double t = 0.0;
        while (t < t_max) {
          const double f = model.forcing(states[i]);
          const double adv = stepper.step(states[i], own, t_max - t);
          integral[i] += f * adv;
          if (i == 0) {
            const int w = std::min(kWindows - 1, static_cast<int>(t / t_max * kWindows));
            windows[static_cast<std::size_t>(w)][rep] += model.forcing(states[0]) * adv;
          }
          t += adv;
        }
      }
    }
    for (std::size_t i = 0; i < np; ++i) diff[i][rep] = integral[np] - integral[i];
  });

  // Truncation diagnostic from the windowed forcing averages of probe 0.
  const double wlen = t_max / kWindows;
  double tail_mean = 0.0, tail_scale = 0.0, tail_se = 0.0;
  for (int w = 0; w < kWindows; ++w) {
    const double mean = pairwise_sum(windows[static_cast<std::size_t>(w)]) /
                        (static_cast<double>(n) * wlen);
    tail_scale = std::max(tail_scale, std::fabs(mean));
    if (w == kWindows - 1) {
      tail_mean = mean;
      double ss = 0.0;
      for (double v : windows[static_cast<std::size_t>(w)]) {
        const double d = v / wlen - mean;
        ss += d * d;
      }
      tail_se = n > 1 ? std::sqrt(ss / (static_cast<double>(n) * (static_cast<double>(n) - 1.0)))
                      : 0.0;
    }
  }
  const bool decayed = std::fabs(tail_mean) <= std::max(0.05 * tail_scale, 4.0 * tail_se);

  std::vector<FeynmanKacResult> results(np);
  for (std::size_t i = 0; i < np; ++i) {
    FeynmanKacResult& r = results[i];
    r.n_paths = config.n_paths;
    r.t_max = t_max;
    r.value = pairwise_sum(diff[i]) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : diff[i]) ss += (v - r.value) * (v - r.value);
    r.standard_error =
        n > 1 ? std::sqrt(ss / (static_cast<double>(n) * (static_cast<double>(n) - 1.0))) : 0.0;
    r.tail_decayed = decayed;
    r.tail_mean = tail_mean;
    r.tail_scale = tail_scale;
  }
  return results;
}

FeynmanKacResult feynman_kac_u(const Model& model, const SimConfig& config, Vec2 x,
                               double t_max) {
  return feynman_kac_batch(model, config, {x}, t_max).front();
}

// ------------------------------------------------------------------ marginals

MarginalHistogram empirical_marginal(const Model& model, const SimConfig& config, Vec2 x0,
                                     double t, int bins) {
  config.validate();
  if (t < 0.0) throw SimulationError("empirical_marginal: negative time", {});
  if (bins < 1) throw SimulationError("empirical_marginal: need at least one bin", {});
  const Stepper stepper(model, config);

  MarginalHistogram hist;
  hist.t = t;
  hist.n_paths = config.n_paths;
  for (int k = 0; k < model.well_count(); ++k) {
    hist.edges.push_back({k, model.edge_minimum(k),
                          std::vector<double>(static_cast<std::size_t>(bins), 0.0)});
  }

  std::vector<GraphPoint> finals(static_cast<std::size_t>(config.n_paths));
  parallel_for(static_cast<std::size_t>(config.n_paths), config.workers, [&](std::size_t p) {
    Rng rng(config.seed, p);
    Vec2 x = x0;
    double elapsed = 0.0;
    while (elapsed < t) {
      elapsed += stepper.step(x, rng, t - elapsed);
    }
    finals[p] = identify(model, x);
  });

  const double w = 1.0 / static_cast<double>(config.n_paths);
  for (const auto& y : finals) {
    if (y.is_root()) {
      hist.root_mass += w;
      continue;
    }
    auto& edge = hist.edges[static_cast<std::size_t>(y.k)];
    const double width = -edge.m / bins;
    int b = static_cast<int>((y.h - edge.m) / width);
    b = std::max(0, std::min(bins - 1, b));
    edge.mass[static_cast<std::size_t>(b)] += w;
  }
  return hist;
}

double tv_distance(const MarginalHistogram& hist, const GeneratorMatrix& gen,
                   const std::vector<double>& ctmc_marginal) {
  if (ctmc_marginal.size() != gen.volume.size())
    throw SimulationError("tv_distance: marginal size mismatch", {});
  double tv = std::fabs(hist.root_mass - ctmc_marginal[static_cast<std::size_t>(gen.root_cell())]);
  for (const auto& edge : hist.edges) {
    const int bins = static_cast<int>(edge.mass.size());
    std::vector<double> ctmc_bins(static_cast<std::size_t>(bins), 0.0);
    for (const auto& block : gen.blocks) {
      if (block.k != edge.k) continue;
      const double width = -edge.m / bins;
      for (int i = 0; i < block.cells; ++i) {
        const double center = block.m + (i + 0.5) * block.dh;
        int b = static_cast<int>((center - edge.m) / width);
        b = std::max(0, std::min(bins - 1, b));
        ctmc_bins[static_cast<std::size_t>(b)] +=
            ctmc_marginal[static_cast<std::size_t>(block.first_cell + i)];
      }
    }
    for (int b = 0; b < bins; ++b) {
      tv += std::fabs(edge.mass[static_cast<std::size_t>(b)] - ctmc_bins[static_cast<std::size_t>(b)]);
    }
  }
  return 0.5 * tv;
}

}  // namespace stargraph
