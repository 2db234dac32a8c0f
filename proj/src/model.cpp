#include "stargraph/model.hpp"

#include <cmath>

#include "stargraph/quad.hpp"
#include "stargraph/rng.hpp"

namespace stargraph {

// ---------------------------------------------------------------- Model base

Vec2 Model::div_a0(Vec2 x) const {
  const double h = kFdStep;
  const Mat2 axp = a0({x.x + h, x.y}), axm = a0({x.x - h, x.y});
  const Mat2 ayp = a0({x.x, x.y + h}), aym = a0({x.x, x.y - h});
  return {(axp.a11 - axm.a11 + ayp.a12 - aym.a12) / (2.0 * h),
          (axp.a21 - axm.a21 + ayp.a22 - aym.a22) / (2.0 * h)};
}

Vec2 Model::div_a1(Vec2 x) const {
  const double h = kFdStep;
  const Mat2 axp = a1({x.x + h, x.y}), axm = a1({x.x - h, x.y});
  const Mat2 ayp = a1({x.x, x.y + h}), aym = a1({x.x, x.y - h});
  return {(axp.a11 - axm.a11 + ayp.a12 - aym.a12) / (2.0 * h),
          (axp.a21 - axm.a21 + ayp.a22 - aym.a22) / (2.0 * h)};
}

Vec2 Model::point_on_level(int k, double c, double angle) const {
  const Vec2 center = minimum_point(k);
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  // Bracket by doubling, then bisection on the extended level along the ray.
  double lo = 0.0, hi = 1e-3;
  const double cap = 2.0 * domain_diameter();
  while (extended_level(k, center + dir * hi) < c) {
    hi *= 2.0;
    if (hi > cap) throw ModelError("point_on_level: level " + std::to_string(c) + " not reached along ray");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (extended_level(k, center + dir * mid) < c) lo = mid; else hi = mid;
    if (hi - lo < 1e-15 * (1.0 + hi)) break;
  }
  return center + dir * (0.5 * (lo + hi));
}

IntegralEstimate Model::ergodic_integral(const std::function<double(Vec2)>& g) const {
  Vec2 lo, hi;
  bounding_box(lo, hi);
  const double box_area = (hi.x - lo.x) * (hi.y - lo.y);
  const std::size_t n = 10'000'000;
  Rng rng(0x9E3779B9ULL, 7);
  double sum = 0.0, sumsq = 0.0;
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y)};
    double val = 0.0;
    if (inside(p) && well_index(p) < 0) {
      val = g(p);
      ++accepted;
    }
    sum += val;
    sumsq += val * val;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sumsq / static_cast<double>(n) - mean * mean;
  (void)accepted;
  return {box_area * mean, box_area * std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
}

IntegralEstimate Model::domain_integral(const std::function<double(Vec2)>& g) const {
  Vec2 lo, hi;
  bounding_box(lo, hi);
  const double box_area = (hi.x - lo.x) * (hi.y - lo.y);
  const std::size_t n = 10'000'000;
  Rng rng(0x51ED5EEDULL, 11);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y)};
    const double val = inside(p) ? g(p) : 0.0;
    sum += val;
    sumsq += val * val;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sumsq / static_cast<double>(n) - mean * mean;
  return {box_area * mean, box_area * std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
}

double Model::tangential_diffusion(int k, Vec2 x) const {
  const Vec2 g = extended_level_gradient(k, x);
  const double gn = g.norm();
  if (gn < 1e-13) return 0.0;
  const Vec2 t = g.perp() / gn;
  return t.dot(a0(x).apply(t));
}

double Model::normal_diffusion(int k, Vec2 x) const {
  const Vec2 g = extended_level_gradient(k, x);
  const double gn = g.norm();
  if (gn < 1e-13) return 0.0;
  const Vec2 n = g / gn;
  return n.dot(a0(x).apply(n));
}

double Model::tangential_drift(int k, Vec2 x) const {
  const Vec2 g = extended_level_gradient(k, x);
  const double gn = g.norm();
  if (gn < 1e-13) return 0.0;
  const Vec2 t = g.perp() / gn;
  const double fd = kFdStep;
  const Vec2 xp = x + t * fd, xm = x - t * fd;
  const double da = (tangential_diffusion(k, xp) - tangential_diffusion(k, xm)) / (2.0 * fd);
  const double gp = extended_level_gradient(k, xp).norm();
  const double gm = extended_level_gradient(k, xm).norm();
  const double dlogw = gp > 0.0 && gm > 0.0 ? -(std::log(gp) - std::log(gm)) / (2.0 * fd) : 0.0;
  return da + tangential_diffusion(k, x) * dlogw;
}

double Model::normal_drift_field(int k, Vec2 x) const {
  // div(a0 grad Hext) by central differences of the flux field.
  const double h = kFdStep;
  auto flux = [&](Vec2 p) { return a0(p).apply(extended_level_gradient(k, p)); };
  const Vec2 fxp = flux({x.x + h, x.y}), fxm = flux({x.x - h, x.y});
  const Vec2 fyp = flux({x.x, x.y + h}), fym = flux({x.x, x.y - h});
  return (fxp.x - fxm.x) / (2.0 * h) + (fyp.y - fym.y) / (2.0 * h);
}

// -------------------------------------------------------------- AnnulusModel

BoundaryProjection AnnulusModel::boundary_project(Vec2 x) const {
  const double r = x.norm();
  Vec2 er = r > 1e-14 ? x / r : Vec2{1.0, 0.0};
  return {er * 2.0, er * -1.0, 2.0 - r};
}

Region AnnulusModel::region(Vec2 x) const {
  const double r = x.norm();
  if (2.0 - r <= boundary_band_width()) return Region::BoundaryBand;
  if (r <= 1.0) return Region::Well;
  return Region::Ergodic;
}

Mat2 AnnulusModel::a0(Vec2 x) const {
  const double r2 = x.norm2();
  if (r2 < 1e-28) return Mat2::zero();
  const double r = std::sqrt(r2);
  const double lam = lambda(r);
  // lam * er er^T + r * et et^T, assembled in Cartesian coordinates.
  const double c = x.x / r, s = x.y / r;
  return {lam * c * c + r * s * s, (lam - r) * s * c,
          (lam - r) * s * c, lam * s * s + r * c * c};
}

Mat2 AnnulusModel::sigma0(Vec2 x) const {
  const double r2 = x.norm2();
  if (r2 < 1e-28) return Mat2::zero();
  const double r = std::sqrt(r2);
  const double sl = std::sqrt(lambda(r));
  const double sr = std::sqrt(r);
  const double c = x.x / r, s = x.y / r;
  return {sl * c * c + sr * s * s, (sl - sr) * s * c,
          (sl - sr) * s * c, sl * s * s + sr * c * c};
}

Vec2 AnnulusModel::div_a0(Vec2 x) const {
  const double r = x.norm();
  if (r < 1e-14) return {0.0, 0.0};
  const Vec2 er = x / r;
  if (r < 1.0) return er * -1.0;  // d=2: div(r * et et^T) = -er
  return er * (lambda_prime(r) + lambda(r) / r - 1.0);
}

Vec2 AnnulusModel::point_on_level(int, double c, double angle) const {
  const double r = c >= 0.0 ? 1.0 + c : std::sqrt(2.0 * c + 1.0);
  return {r * std::cos(angle), r * std::sin(angle)};
}

double AnnulusModel::forcing(Vec2 x) const {
  switch (forcing_) {
    case Forcing::RadialShifted: return x.norm() - 4.0 / 3.0;
    case Forcing::Zero: return 0.0;
    case Forcing::ConstantOne: return 1.0;
  }
  return 0.0;
}

namespace {

IntegralEstimate polar_integral(const std::function<double(Vec2)>& g, double r0, double r1) {
  std::vector<double> gn, gw;
  gauss_legendre(64, gn, gw);
  const int ntheta = 256;
  double total = 0.0;
  for (int j = 0; j < ntheta; ++j) {
    const double theta = 2.0 * M_PI * j / ntheta;
    const double ct = std::cos(theta), st = std::sin(theta);
    double radial = 0.0;
    for (std::size_t i = 0; i < gn.size(); ++i) {
      const double r = 0.5 * (r1 - r0) * gn[i] + 0.5 * (r1 + r0);
      radial += gw[i] * g({r * ct, r * st}) * r;
    }
    total += radial * 0.5 * (r1 - r0);
  }
  return {total * 2.0 * M_PI / ntheta, 0.0};
}

}  // namespace

IntegralEstimate AnnulusModel::ergodic_integral(const std::function<double(Vec2)>& g) const {
  return polar_integral(g, 1.0, 2.0);
}

IntegralEstimate AnnulusModel::domain_integral(const std::function<double(Vec2)>& g) const {
  // Split at the well boundary; integrands may have kinks there.
  const IntegralEstimate inner = polar_integral(g, 0.0, 1.0);
  const IntegralEstimate outer = polar_integral(g, 1.0, 2.0);
  return {inner.value + outer.value, 0.0};
}

std::shared_ptr<Model> make_model(const std::string& name, const std::string& forcing) {
  ModelOptions options;
  options.forcing = forcing;
  return make_model(name, options);
}

std::shared_ptr<Model> make_model(const std::string& name, const ModelOptions& options) {
  if (name == "annulus") {
    AnnulusModel::Forcing f = AnnulusModel::Forcing::RadialShifted;
    if (options.forcing == "zero") f = AnnulusModel::Forcing::Zero;
    else if (options.forcing == "one") f = AnnulusModel::Forcing::ConstantOne;
    else if (!options.forcing.empty() && options.forcing != "radial-shifted")
      throw ModelError("unknown forcing choice: " + options.forcing);
    const Vec2 x_o = options.has_x_o ? options.x_o : Vec2{1.5, 0.0};
    auto model = std::make_shared<AnnulusModel>(f, x_o);
    if (!model->inside_closure(x_o))
      throw ModelError("normalization point lies outside the domain");
    return model;
  }
  throw ModelError("unknown model: " + name);
}

// ------------------------------------------------------------------ validate

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ValidationReport validate(const Model& model, int sample_count) {
  if (sample_count < 100) throw ModelError("validate: sample_count must be >= 100");
  ValidationReport report;
  report.sample_count = sample_count;

  ValidationCheck sym{"symmetry", 0.0, 1e-12, true, {}};
  ValidationCheck a1_pd{"a1_positive_definite", 0.0, 0.0, true, {}};
  ValidationCheck a0_psd{"a0_positive_semidefinite", 0.0, 1e-12, true, {}};
  ValidationCheck s0{"sigma0_reconstruction", 0.0, 1e-12, true, {}};
  ValidationCheck s1{"sigma1_reconstruction", 0.0, 1e-12, true, {}};
  ValidationCheck fi{"first_integral_annihilated", 0.0, 1e-10, true, {}};

  Vec2 lo, hi;
  model.bounding_box(lo, hi);
  int taken = 0;
  std::size_t idx = 0;
  bool nonfinite = false;
  Vec2 nonfinite_at;
  while (taken < sample_count && idx < static_cast<std::size_t>(sample_count) * 1000) {
    const Vec2 p{lo.x + (hi.x - lo.x) * halton(idx, 2), lo.y + (hi.y - lo.y) * halton(idx, 3)};
    ++idx;
    if (!model.inside(p)) continue;
    ++taken;

    const Mat2 A0 = model.a0(p), A1 = model.a1(p);
    const Mat2 S0 = model.sigma0(p), S1 = model.sigma1(p);
    const double fval = model.forcing(p);
    if (!std::isfinite(A0.max_abs()) || !std::isfinite(A1.max_abs()) ||
        !std::isfinite(S0.max_abs()) || !std::isfinite(S1.max_abs()) || !std::isfinite(fval)) {
      nonfinite = true;
      nonfinite_at = p;
      break;
    }

    auto track = [&](ValidationCheck& c, double violation) {
      if (violation > c.max_violation) {
        c.max_violation = violation;
        c.worst_point = p;
      }
    };
    track(sym, std::max(A0.sym_defect(), A1.sym_defect()));

    double lo1, hi1;
    A1.sym_eigenvalues(lo1, hi1);
    track(a1_pd, lo1 <= 0.0 ? -lo1 + 1e-300 : 0.0);
    if (lo1 <= 0.0) a1_pd.pass = false;

    double lo0, hi0;
    A0.sym_eigenvalues(lo0, hi0);
    track(a0_psd, std::max(0.0, -lo0));

    const Mat2 r0 = S0.matmul(S0.transpose());
    const Mat2 r1 = S1.matmul(S1.transpose());
    track(s0, (r0 + A0 * -1.0).max_abs());
    track(s1, (r1 + A1 * -1.0).max_abs());

    const int k = model.well_index(p);
    if (k >= 0) {
      const Vec2 gH = model.grad_first_integral(p);
      track(fi, A0.apply(gH).norm());
    }
  }

  if (nonfinite) {
    report.pass = false;
    report.failure_note = "non-finite coefficient value at (" + std::to_string(nonfinite_at.x) +
                          ", " + std::to_string(nonfinite_at.y) + ")";
    return report;
  }

  // Zero-mean forcing over G.
  ValidationCheck zm{"forcing_zero_mean", 0.0, 1e-8, true, {}};
  const IntegralEstimate fint = model.domain_integral([&](Vec2 p) { return model.forcing(p); });
  zm.max_violation = std::fabs(fint.value);
  zm.threshold = 1e-8 + 4.0 * fint.standard_error;

  for (ValidationCheck* c : {&sym, &a1_pd, &a0_psd, &s0, &s1, &fi, &zm}) {
    if (c->threshold > 0.0) c->pass = c->max_violation <= c->threshold;
    report.checks.push_back(*c);
    report.pass = report.pass && c->pass;
  }
  return report;
}

Vec2 conormal(const Model& model, Vec2 x, double eps, double tolerance) {
  if (eps <= 0.0) throw ModelError("conormal: eps must be > 0");
  const BoundaryProjection bp = model.boundary_project(x);
  if (std::fabs(bp.signed_distance) > tolerance * model.domain_diameter())
    throw ModelError("conormal: point is not near the boundary");
  const Vec2 b = bp.point;
  const Vec2 dir = (model.a0(b) * (1.0 / eps) + model.a1(b)).apply(bp.inward_normal);
  const double n = dir.norm();
  if (n <= 0.0 || dir.dot(bp.inward_normal) <= 0.0)
    throw ModelError("conormal: degenerate co-normal direction");
  return dir / n;
}

}  // namespace stargraph
