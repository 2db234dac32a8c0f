#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stargraph/graph_process.hpp"

using namespace stargraph;

namespace {

const EdgeCoefficients& annulus_coefficients() {
  static const EdgeCoefficients coeffs = [] {
    AnnulusModel model;
    return compute_coefficients(model);
  }();
  return coeffs;
}

// Synthetic single-edge tables for degenerate-reduction tests.
EdgeCoefficients unit_tables(int nodes, double vol_root) {
  EdgeCoefficients c;
  EdgeCoefficientTable t;
  t.k = 0;
  t.m = -1.0;
  for (int i = 0; i <= nodes; ++i) {
    t.h.push_back(-1.0 + static_cast<double>(i) / nodes);
    t.M.push_back(1.0);
    t.abar.push_back(1.0);
    t.fbar.push_back(0.0);
  }
  t.p = 1.0;
  c.edges.push_back(t);
  c.vol_ergodic = vol_root;
  c.fbar_root = 0.0;
  return c;
}

}  // namespace

TEST_CASE("generator is conservative and in detailed balance") {
  const GeneratorMatrix gen = build_generator(annulus_coefficients(), 256);
  CHECK(gen.cell_count() == 257);
  CHECK(gen.conservativity_defect() <= 1e-12 * 1e6);  // rates are O(1e5)
  CHECK(gen.detailed_balance_defect() <= 1e-9);
  for (const auto& nb : gen.neighbors) {
    for (const auto& tr : nb) CHECK(tr.rate >= 0.0);
  }
}

TEST_CASE("generator applied to h reproduces the edge operator") {
  // For the annulus abar = 2h+1 and M constant, so L h = abar'/2 = 1.
  const GeneratorMatrix gen = build_generator(annulus_coefficients(), 256);
  std::vector<double> f(static_cast<std::size_t>(gen.cell_count()), 0.0);
  for (int c = 0; c < gen.cell_count(); ++c) {
    const GraphPoint y = gen.point_of(c);
    f[static_cast<std::size_t>(c)] = y.is_root() ? 0.0 : y.h;
  }
  const std::vector<double> lf = gen.apply(f);
  const auto& block = gen.blocks[0];
  for (int i = 2; i < block.cells - 2; ++i) {
    CHECK(lf[static_cast<std::size_t>(block.first_cell + i)] ==
          doctest::Approx(1.0).epsilon(2e-3));
  }
}

TEST_CASE("degenerate reduction: unit coefficients give the Laplacian chain") {
  const EdgeCoefficients c = unit_tables(64, 1e-9);
  const GeneratorMatrix gen = build_generator(c, 64);
  const double dh = 1.0 / 64;
  const auto& block = gen.blocks[0];
  for (int i = 1; i < block.cells - 1; ++i) {
    const auto& nb = gen.neighbors[static_cast<std::size_t>(block.first_cell + i)];
    REQUIRE(nb.size() == 2);
    for (const auto& tr : nb) CHECK(tr.rate == doctest::Approx(0.5 / (dh * dh)).epsilon(1e-12));
  }
}

TEST_CASE("stationary law is the volume law: root carries 3/4") {
  const GeneratorMatrix gen = build_generator(annulus_coefficients(), 256);
  const std::vector<double> pi = gen.stationary();
  CHECK(pi[0] == doctest::Approx(0.75).epsilon(1e-10));
}

TEST_CASE("gluing balance emerges from the root row at first order") {
  // For g with g(O)=0, g(h)=h near the root: (Q g)(O) -> -(1/(2 vol)) sum p g'.
  auto root_residual = [](int cells) {
    const GeneratorMatrix gen = build_generator(annulus_coefficients(), cells);
    std::vector<double> g(static_cast<std::size_t>(gen.cell_count()), 0.0);
    for (int c = 1; c < gen.cell_count(); ++c) {
      const GraphPoint y = gen.point_of(c);
      g[static_cast<std::size_t>(c)] = y.h + y.h * y.h;  // g'(0) = 1
    }
    const double want = -annulus_coefficients().edges[0].p /
                        (2.0 * annulus_coefficients().vol_ergodic);
    return std::fabs(gen.apply(g)[0] - want);
  };
  const double coarse = root_residual(64);
  const double fine = root_residual(128);
  CHECK(fine < coarse);
  CHECK(coarse / fine == doctest::Approx(2.0).epsilon(0.25));  // first order in dh
  CHECK(root_residual(512) <= 2e-3);
}

TEST_CASE("marginal at time zero is the initial point mass") {
  const GeneratorMatrix gen = build_generator(annulus_coefficients(), 64);
  const GraphPoint y0 = GraphPoint::edge(0, -0.25);
  const std::vector<double> p = marginal_at(gen, y0, 0.0);
  CHECK(p[static_cast<std::size_t>(gen.cell_of(y0))] == doctest::Approx(1.0));
  CHECK_THROWS_AS(marginal_at(gen, y0, -1.0), GeneratorError);
}

TEST_CASE("marginal converges to the stationary law") {
  const GeneratorMatrix gen = build_generator(annulus_coefficients(), 64);
  const std::vector<double> p = marginal_at(gen, GraphPoint::edge(0, -0.375), 40.0);
  const std::vector<double> pi = gen.stationary();
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::fabs(p[i] - pi[i]);
  CHECK(0.5 * tv <= 1e-8);
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("marginal mass is conserved") {
  const GeneratorMatrix gen = build_generator(annulus_coefficients(), 128);
  const std::vector<double> p = marginal_at(gen, GraphPoint::root(), 1.0);
  double mass = 0.0;
  for (double v : p) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("grid refinement changes the marginal little") {
  const GraphPoint y0 = GraphPoint::edge(0, -0.375);
  const GeneratorMatrix g256 = build_generator(annulus_coefficients(), 256);
  const GeneratorMatrix g512 = build_generator(annulus_coefficients(), 512);
  const std::vector<double> p256 = marginal_at(g256, y0, 1.0);
  const std::vector<double> p512 = marginal_at(g512, y0, 1.0);
  // aggregate the 512-cell marginal onto the 256-cell grid (aligned 2:1)
  double tv = std::fabs(p256[0] - p512[0]);
  for (int i = 0; i < 256; ++i) {
    const double a = p256[static_cast<std::size_t>(1 + i)];
    const double b = p512[static_cast<std::size_t>(1 + 2 * i)] +
                     p512[static_cast<std::size_t>(1 + 2 * i + 1)];
    tv += std::fabs(a - b);
  }
  CHECK(0.5 * tv <= 1e-3);
}

TEST_CASE("jump-chain simulation is deterministic and matches the marginal") {
  const GeneratorMatrix gen = build_generator(annulus_coefficients(), 48);
  const GraphPoint y0 = GraphPoint::edge(0, -0.375);

  const CtmcPaths a = simulate_ctmc(gen, y0, 1.0, 400, 99, 2);
  const CtmcPaths b = simulate_ctmc(gen, y0, 1.0, 400, 99, 1);
  CHECK(a.final_cell == b.final_cell);  // worker count must not matter

  const std::vector<double> exact = marginal_at(gen, y0, 1.0);
  const std::vector<double> emp = a.empirical_distribution(gen.cell_count());
  // crude TV bound: 3 Monte Carlo standard errors across the histogram
  double tv = 0.0;
  for (std::size_t i = 0; i < emp.size(); ++i) tv += std::fabs(emp[i] - exact[i]);
  tv *= 0.5;
  const double se_budget = 3.0 * std::sqrt(static_cast<double>(gen.cell_count())) /
                           (2.0 * std::sqrt(400.0));
  CHECK(tv <= se_budget);
}

TEST_CASE("absorbing single cell stays put") {
  EdgeCoefficients c = unit_tables(4, 1.0);
  GeneratorMatrix gen = build_generator(c, 4);
  for (auto& nb : gen.neighbors) nb.clear();
  std::fill(gen.exit_rate.begin(), gen.exit_rate.end(), 0.0);
  const CtmcPaths paths = simulate_ctmc(gen, GraphPoint::root(), 5.0, 8, 7, 1);
  for (const int cell : paths.final_cell) CHECK(cell == gen.root_cell());
  for (const double occ : paths.root_occupancy) CHECK(occ == doctest::Approx(1.0));
}

TEST_CASE("long-run root occupancy approaches the volume fraction") {
  const GeneratorMatrix gen = build_generator(annulus_coefficients(), 32);
  const CtmcPaths paths = simulate_ctmc(gen, GraphPoint::root(), 400.0, 24, 123, 2);
  double mean = 0.0;
  for (const double occ : paths.root_occupancy) mean += occ;
  mean /= static_cast<double>(paths.root_occupancy.size());
  CHECK(mean == doctest::Approx(0.75).epsilon(0.05));
}

TEST_CASE("builder rejects bad inputs") {
  EdgeCoefficients c = unit_tables(8, 1.0);
  CHECK_THROWS_AS(build_generator(c, 1), GeneratorError);
  c.vol_ergodic = 0.0;
  CHECK_THROWS_AS(build_generator(c, 8), GeneratorError);
  c = unit_tables(8, 1.0);
  c.edges[0].p = 0.0;
  CHECK_THROWS_AS(build_generator(c, 8), GeneratorError);
}

TEST_CASE("generator exports sparse JSON") {
  const GeneratorMatrix gen = build_generator(unit_tables(4, 1.0), 4);
  const std::string text = gen.to_json();
  CHECK(text.find("\"cells\": 5") != std::string::npos);
  CHECK(text.find("\"rates\"") != std::string::npos);
}
