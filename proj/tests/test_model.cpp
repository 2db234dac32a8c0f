#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stargraph/model.hpp"
#include "stargraph/quad.hpp"

using namespace stargraph;

TEST_CASE("annulus passes structural validation") {
  AnnulusModel model;
  const ValidationReport report = validate(model, 10000);
  CHECK(report.pass);
  const auto* fi = report.find("first_integral_annihilated");
  REQUIRE(fi != nullptr);
  CHECK(fi->max_violation <= 1e-10);
  const auto* s0 = report.find("sigma0_reconstruction");
  REQUIRE(s0 != nullptr);
  CHECK(s0->max_violation <= 1e-12);
}

TEST_CASE("validation flags a degenerate slow coefficient") {
  struct Broken final : AnnulusModel {
    Mat2 a1(Vec2) const override { return Mat2::zero(); }
    Mat2 sigma1(Vec2) const override { return Mat2::zero(); }
  } model;
  const ValidationReport report = validate(model, 200);
  CHECK(!report.pass);
  const auto* pd = report.find("a1_positive_definite");
  REQUIRE(pd != nullptr);
  CHECK(!pd->pass);
}

TEST_CASE("validation flags nonzero-mean forcing with residual 4 pi") {
  AnnulusModel model(AnnulusModel::Forcing::ConstantOne);
  const ValidationReport report = validate(model, 200);
  CHECK(!report.pass);
  const auto* zm = report.find("forcing_zero_mean");
  REQUIRE(zm != nullptr);
  CHECK(!zm->pass);
  CHECK(zm->max_violation == doctest::Approx(4.0 * oracle::kPi).epsilon(1e-9));
}

TEST_CASE("validate rejects tiny sample counts") {
  AnnulusModel model;
  CHECK_THROWS_AS(validate(model, 10), ModelError);
}

TEST_CASE("eigenstructure of the fast coefficient matches the radial form") {
  AnnulusModel model;
  // a0 er = lambda er and a0 et = r et at sampled points.
  for (const double r : {0.3, 0.9, 1.0, 1.3, 1.9}) {
    for (const double th : {0.1, 1.7, 3.9}) {
      const Vec2 x{r * std::cos(th), r * std::sin(th)};
      const Vec2 er = x / r, et = er.perp();
      const Mat2 A = model.a0(x);
      const Vec2 want_r = er * AnnulusModel::lambda(r);
      const Vec2 want_t = et * r;
      CHECK((A.apply(er) - want_r).norm() <= 1e-13);
      CHECK((A.apply(et) - want_t).norm() <= 1e-13);
    }
  }
}

TEST_CASE("tangential non-degeneracy bound holds on the well") {
  AnnulusModel model;
  std::size_t idx = 0;
  int taken = 0;
  while (taken < 2000) {
    const Vec2 p{-2.0 + 4.0 * halton(idx, 2), -2.0 + 4.0 * halton(idx, 3)};
    ++idx;
    if (model.well_index(p) != 0) continue;
    ++taken;
    const double r = p.norm();
    if (r < 1e-6) continue;
    const Vec2 e = (p / r).perp();  // unit, orthogonal to grad H
    CHECK(e.dot(model.a0(p).apply(e)) >= r - 1e-12);
  }
}

TEST_CASE("degeneracy order near the well boundary is squared distance") {
  AnnulusModel model;
  for (double r = 1.001; r < 1.2; r += 0.013) {
    const Vec2 x{r, 0.0};
    const Vec2 er{1.0, 0.0};
    const double radial = er.dot(model.a0(x).apply(er));
    const double dist = r - 1.0;
    CHECK(radial == doctest::Approx(dist * dist).epsilon(1e-12));
  }
}

TEST_CASE("conormal direction is radial for the annulus") {
  AnnulusModel model;
  SUBCASE("at (2,0)") {
    const Vec2 g = conormal(model, {2.0, 0.0}, 0.37);
    CHECK(g.x == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(g.y == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("at (0,2), eps = 0.1") {
    const Vec2 g = conormal(model, {0.0, 2.0}, 0.1);
    CHECK(g.x == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(g.y == doctest::Approx(-1.0).epsilon(1e-14));
  }
  SUBCASE("identity coefficients give the inward normal") {
    struct Iso final : AnnulusModel {
      Mat2 a0(Vec2) const override { return Mat2::identity(); }
    } iso;
    const Vec2 g = conormal(iso, {std::sqrt(2.0), std::sqrt(2.0)}, 1.0);
    CHECK(g.x == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-12));
    CHECK(g.y == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-12));
  }
  SUBCASE("interior point is rejected") {
    CHECK_THROWS_AS(conormal(model, {1.0, 0.0}, 0.1), ModelError);
  }
}

TEST_CASE("divergence of the fast coefficient matches finite differences") {
  AnnulusModel model;
  for (const Vec2 x : {Vec2{0.4, 0.2}, Vec2{-0.6, 0.5}, Vec2{1.2, -0.4}, Vec2{0.0, 1.7}}) {
    const Vec2 analytic = model.div_a0(x);
    const Vec2 numeric = model.Model::div_a0(x);
    CHECK((analytic - numeric).norm() <= 1e-7);
  }
}

TEST_CASE("foliation fields match the radial structure") {
  AnnulusModel model;
  const Vec2 inwell{0.3, 0.4};  // r = 0.5
  CHECK(model.tangential_diffusion(0, inwell) == doctest::Approx(0.5));
  CHECK(model.normal_diffusion(0, inwell) == doctest::Approx(0.0));
  CHECK(model.normal_drift_field(0, inwell) == doctest::Approx(0.0));
  CHECK(model.tangential_drift(0, inwell) == doctest::Approx(0.0));

  const Vec2 outer{0.9, 1.2};  // r = 1.5
  CHECK(model.tangential_diffusion(0, outer) == doctest::Approx(1.5));
  CHECK(model.normal_diffusion(0, outer) == doctest::Approx(0.25));
  CHECK(model.normal_drift_field(0, outer) == doctest::Approx(1.0 + 0.25 / 1.5));
  // generic finite-difference fallbacks agree with the closed forms
  CHECK(model.Model::tangential_diffusion(0, outer) == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(model.Model::normal_diffusion(0, outer) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(model.Model::normal_drift_field(0, outer) ==
        doctest::Approx(1.0 + 0.25 / 1.5).epsilon(1e-6));
}

TEST_CASE("boundary projection and point_on_level") {
  AnnulusModel model;
  const BoundaryProjection bp = model.boundary_project({3.0, 0.0});
  CHECK(bp.point.x == doctest::Approx(2.0));
  CHECK(bp.signed_distance == doctest::Approx(-1.0));

  const Vec2 a = model.point_on_level(0, 0.1, 1.0);
  CHECK(a.norm() == doctest::Approx(1.1).epsilon(1e-12));
  const Vec2 b = model.point_on_level(0, -0.375, 2.0);
  CHECK(b.norm() == doctest::Approx(0.5).epsilon(1e-12));
  // generic bisection fallback agrees
  const Vec2 c = model.Model::point_on_level(0, -0.375, 2.0);
  CHECK(c.norm() == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("region classification") {
  AnnulusModel model;
  CHECK(model.region({0.5, 0.0}) == Region::Well);
  CHECK(model.region({1.5, 0.0}) == Region::Ergodic);
  CHECK(model.region({2.0 - 1e-9, 0.0}) == Region::BoundaryBand);
}

TEST_CASE("model factory: forcing and normalization overrides") {
  const auto base = make_model("annulus");
  CHECK(base->normalization_point().x == doctest::Approx(1.5));
  ModelOptions options;
  options.has_x_o = true;
  options.x_o = {0.5, 0.0};
  const auto moved = make_model("annulus", options);
  CHECK(moved->normalization_point().x == doctest::Approx(0.5));
  options.x_o = {3.0, 0.0};
  CHECK_THROWS_AS(make_model("annulus", options), ModelError);
  CHECK_THROWS_AS(make_model("annulus", "nonsense"), ModelError);
  CHECK_THROWS_AS(make_model("nonsense"), ModelError);
}

TEST_CASE("deterministic quadrature over the ergodic region") {
  AnnulusModel model;
  const auto vol = model.ergodic_integral([](Vec2) { return 1.0; });
  CHECK(vol.value == doctest::Approx(3.0 * oracle::kPi).epsilon(1e-12));
  const auto f = model.ergodic_integral([&](Vec2 x) { return model.forcing(x); });
  CHECK(f.value / vol.value == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  const auto whole = model.domain_integral([&](Vec2 x) { return model.forcing(x); });
  CHECK(whole.value == doctest::Approx(0.0).epsilon(1e-12));
}
