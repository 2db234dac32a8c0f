#include "stargraph/graph_process.hpp"

#include <cmath>

#include <json.hpp>

#include "stargraph/parallel.hpp"
#include "stargraph/rng.hpp"

namespace stargraph {

using ordered_json = nlohmann::ordered_json;

int GeneratorMatrix::cell_of(GraphPoint y) const {
  if (y.is_root()) return root_cell();
  for (const auto& b : blocks) {
    if (b.k != y.k) continue;
    const double s = (y.h - b.m) / b.dh;
    int i = static_cast<int>(s);
    i = std::max(0, std::min(b.cells - 1, i));
    return b.first_cell + i;
  }
  throw GeneratorError("cell_of: no edge block for edge " + std::to_string(y.k));
}

GraphPoint GeneratorMatrix::point_of(int cell) const {
  if (cell == root_cell()) return GraphPoint::root();
  for (const auto& b : blocks) {
    if (cell >= b.first_cell && cell < b.first_cell + b.cells) {
      const int i = cell - b.first_cell;
      return GraphPoint::edge(b.k, b.m + (i + 0.5) * b.dh);
    }
  }
  throw GeneratorError("point_of: cell index out of range");
}

std::vector<double> GeneratorMatrix::stationary() const {
  double total = 0.0;
  for (double v : volume) total += v;
  std::vector<double> pi(volume.size());
  for (std::size_t i = 0; i < pi.size(); ++i) pi[i] = volume[i] / total;
  return pi;
}

double GeneratorMatrix::conservativity_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    double row = -exit_rate[i];
    for (const auto& tr : neighbors[i]) row += tr.rate;
    worst = std::max(worst, std::fabs(row));
  }
  return worst;
}

double GeneratorMatrix::detailed_balance_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    for (const auto& tr : neighbors[i]) {
      double reverse = 0.0;
      for (const auto& back : neighbors[static_cast<std::size_t>(tr.to)]) {
        if (back.to == static_cast<int>(i)) reverse = back.rate;
      }
      worst = std::max(worst,
                       std::fabs(volume[i] * tr.rate - volume[static_cast<std::size_t>(tr.to)] * reverse));
    }
  }
  return worst;
}

std::vector<double> GeneratorMatrix::apply(const std::vector<double>& f) const {
  if (f.size() != volume.size()) throw GeneratorError("apply: size mismatch");
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    double acc = -exit_rate[i] * f[i];
    for (const auto& tr : neighbors[i]) acc += tr.rate * f[static_cast<std::size_t>(tr.to)];
    out[i] = acc;
  }
  return out;
}

std::string GeneratorMatrix::to_json() const {
  ordered_json j;
  j["cells"] = cell_count();
  j["volumes"] = volume;
  ordered_json blocks_json = ordered_json::array();
  for (const auto& b : blocks) {
    blocks_json.push_back({{"k", b.k}, {"first_cell", b.first_cell}, {"cells", b.cells},
                           {"m", b.m}, {"dh", b.dh}});
  }
  j["edge_blocks"] = blocks_json;
  ordered_json triplets = ordered_json::array();
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    triplets.push_back({{"from", i}, {"to", i}, {"rate", -exit_rate[i]}});
    for (const auto& tr : neighbors[i]) {
      triplets.push_back({{"from", i}, {"to", tr.to}, {"rate", tr.rate}});
    }
  }
  j["rates"] = triplets;
  return j.dump(2);
}

GeneratorMatrix build_generator(const EdgeCoefficients& coeffs, int n_cells) {
  if (n_cells < 2) throw GeneratorError("build_generator: need at least 2 cells per edge");
  if (!(coeffs.vol_ergodic > 0.0)) throw GeneratorError("build_generator: nonpositive root volume");

  GeneratorMatrix gen;
  int next = 1;
  gen.volume.push_back(coeffs.vol_ergodic);

  struct Face {
    int a, b;
    double conductance;
  };
  std::vector<Face> faces;

  for (const auto& table : coeffs.edges) {
    GeneratorMatrix::EdgeBlock block;
    block.k = table.k;
    block.first_cell = next;
    block.cells = n_cells;
    block.m = table.m;
    block.dh = -table.m / n_cells;
    const double dh = block.dh;

    for (int i = 0; i < n_cells; ++i) {
      const double center = table.m + (i + 0.5) * dh;
      const double vol = table.interp(table.M, center) * dh;
      if (!(vol > 0.0))
        throw GeneratorError("build_generator: nonpositive cell volume at h = " +
                             std::to_string(center));
      gen.volume.push_back(vol);
    }
    // Interior faces at h = m + i dh carry (1/2) M abar / dh.
    for (int i = 1; i < n_cells; ++i) {
      const double hf = table.m + i * dh;
      const double coef = table.interp(table.M, hf) * table.interp(table.abar, hf);
      if (coef < 0.0) throw GeneratorError("build_generator: negative face coefficient");
      faces.push_back({block.first_cell + i - 1, block.first_cell + i, 0.5 * coef / dh});
    }
    // Root face: the last cell center sits dh/2 away from the vertex, so the
    // two-point flux uses p_k over that half spacing.
    if (!(table.p > 0.0)) throw GeneratorError("build_generator: nonpositive boundary weight p");
    faces.push_back({block.first_cell + n_cells - 1, 0, table.p / dh});

    gen.blocks.push_back(block);
    next += n_cells;
  }

  gen.neighbors.assign(gen.volume.size(), {});
  gen.exit_rate.assign(gen.volume.size(), 0.0);
  for (const auto& f : faces) {
    const double rate_ab = f.conductance / gen.volume[static_cast<std::size_t>(f.a)];
    const double rate_ba = f.conductance / gen.volume[static_cast<std::size_t>(f.b)];
    gen.neighbors[static_cast<std::size_t>(f.a)].push_back({f.b, rate_ab});
    gen.neighbors[static_cast<std::size_t>(f.b)].push_back({f.a, rate_ba});
    gen.exit_rate[static_cast<std::size_t>(f.a)] += rate_ab;
    gen.exit_rate[static_cast<std::size_t>(f.b)] += rate_ba;
  }
  return gen;
}

std::vector<double> marginal_at(const GeneratorMatrix& gen, GraphPoint initial, double t) {
  std::vector<double> p0(gen.volume.size(), 0.0);
  p0[static_cast<std::size_t>(gen.cell_of(initial))] = 1.0;
  return marginal_at(gen, p0, t);
}

std::vector<double> marginal_at(const GeneratorMatrix& gen, const std::vector<double>& initial,
                                double t) {
  if (t < 0.0) throw GeneratorError("marginal_at: negative time");
  if (initial.size() != gen.volume.size()) throw GeneratorError("marginal_at: size mismatch");
  std::vector<double> p = initial;
  if (t == 0.0) return p;

  double max_rate = 0.0;
  for (double r : gen.exit_rate) max_rate = std::max(max_rate, r);
  const double big_lambda = 1.05 * max_rate + 1e-12;

  // Uniformization in substeps sized so each Poisson expansion stays short.
  const double target = 256.0;
  const int substeps = std::max(1, static_cast<int>(std::ceil(big_lambda * t / target)));
  const double tau = t / substeps;
  const double lt = big_lambda * tau;

  std::vector<double> term(p.size()), accum(p.size()), qterm(p.size());
  for (int s = 0; s < substeps; ++s) {
    term = p;
    double log_weight = -lt;  // log Poisson(0)
    std::fill(accum.begin(), accum.end(), 0.0);
    double covered = 0.0;
    for (int j = 0;; ++j) {
      const double w = std::exp(log_weight);
      for (std::size_t i = 0; i < p.size(); ++i) accum[i] += w * term[i];
      covered += w;
      if (covered >= 1.0 - 1e-15 && j > lt) break;
      if (j > 4 * (lt + 40.0)) break;
      // term <- P^T term with P = I + Q/Lambda acting on distributions.
      qterm.assign(p.size(), 0.0);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double mass = term[i];
        if (mass == 0.0) continue;
        qterm[i] += mass * (1.0 - gen.exit_rate[i] / big_lambda);
        for (const auto& tr : gen.neighbors[i]) {
          qterm[static_cast<std::size_t>(tr.to)] += mass * (tr.rate / big_lambda);
        }
      }
      term.swap(qterm);
      log_weight += std::log(lt) - std::log(static_cast<double>(j + 1));
    }
    p.swap(accum);
    // Renormalize the truncation remainder; the defect is checked below.
    double mass = 0.0;
    for (double v : p) mass += v;
    if (std::fabs(mass - 1.0) > 1e-12)
      throw GeneratorError("marginal_at: mass conservation defect " + std::to_string(mass - 1.0));
    for (double& v : p) v /= mass;
  }
  return p;
}

std::vector<double> CtmcPaths::empirical_distribution(int cell_count) const {
  std::vector<double> dist(static_cast<std::size_t>(cell_count), 0.0);
  for (int c : final_cell) dist[static_cast<std::size_t>(c)] += 1.0;
  const double n = static_cast<double>(final_cell.size());
  for (double& d : dist) d /= n;
  return dist;
}

CtmcPaths simulate_ctmc(const GeneratorMatrix& gen, GraphPoint initial, double T, int n_paths,
                        std::uint64_t seed, int workers) {
  for (double r : gen.exit_rate) {
    if (!std::isfinite(r)) throw GeneratorError("simulate_ctmc: non-finite rate");
  }
  const int start = gen.cell_of(initial);
  CtmcPaths out;
  out.seed = seed;
  out.final_cell.assign(static_cast<std::size_t>(n_paths), 0);
  out.root_occupancy.assign(static_cast<std::size_t>(n_paths), 0.0);

  parallel_for(static_cast<std::size_t>(n_paths), workers, [&](std::size_t path) {
    Rng rng(seed, path);
    int cell = start;
    double t = 0.0, in_root = 0.0;
    while (true) {
      const double rate = gen.exit_rate[static_cast<std::size_t>(cell)];
      double hold = rate > 0.0 ? rng.exponential(rate) : T - t + 1.0;
      const double stay = std::min(hold, T - t);
      if (cell == gen.root_cell()) in_root += stay;
      t += hold;
      if (t >= T) break;
      // Jump proportional to outgoing rates.
      double u = rng.uniform() * rate;
      const auto& nb = gen.neighbors[static_cast<std::size_t>(cell)];
      int to = nb.back().to;
      for (const auto& tr : nb) {
        if (u < tr.rate) {
          to = tr.to;
          break;
        }
        u -= tr.rate;
      }
      cell = to;
    }
    out.final_cell[path] = cell;
    out.root_occupancy[path] = in_root / T;
  });
  return out;
}

}  // namespace stargraph
