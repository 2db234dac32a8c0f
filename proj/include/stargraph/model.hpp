#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "stargraph/geometry.hpp"

namespace stargraph {

enum class Region { Ergodic, Well, BoundaryBand };

struct BoundaryProjection {
  Vec2 point;          // nearest point on the domain boundary
  Vec2 inward_normal;  // unit, pointing into the domain
  double signed_distance = 0.0;  // > 0 inside, < 0 outside
};

struct IntegralEstimate {
  double value = 0.0;
  double standard_error = 0.0;  // 0 for deterministic quadrature
};

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Coefficient fields and geometry of the two-scale Neumann problem:
// a slow strictly elliptic part a1 perturbing a fast degenerate part a0
// whose null direction in each well U_k is spanned by grad H_k.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual int dimension() const { return 2; }
  virtual int well_count() const = 0;

  // Domain G.
  virtual bool inside(Vec2 x) const = 0;            // open domain
  virtual bool inside_closure(Vec2 x) const = 0;    // G together with its boundary
  virtual BoundaryProjection boundary_project(Vec2 x) const = 0;
  virtual double domain_diameter() const = 0;
  virtual void bounding_box(Vec2& lo, Vec2& hi) const = 0;
  virtual double boundary_band_width() const { return 1e-7; }
  virtual Region region(Vec2 x) const = 0;

  // Coefficients.
  virtual Mat2 a0(Vec2 x) const = 0;
  virtual Mat2 a1(Vec2 x) const = 0;
  virtual Mat2 sigma0(Vec2 x) const = 0;
  virtual Mat2 sigma1(Vec2 x) const = 0;

  // Row divergences (div A)_i = sum_j d_j A_ij; defaults use central
  // differences with step 1e-5, concrete models may override with closed forms.
  virtual Vec2 div_a0(Vec2 x) const;
  virtual Vec2 div_a1(Vec2 x) const;

  // First-integral structure.
  // well_index: k in [0, well_count) when x lies in [U_k], -1 otherwise.
  virtual int well_index(Vec2 x) const = 0;
  // H(x): equals H_k on U_k, 0 on the ergodic region.
  virtual double first_integral(Vec2 x) const = 0;
  virtual Vec2 grad_first_integral(Vec2 x) const = 0;  // U_k-side limit on the well boundary
  // H_k as a formula, valid on [U_k] and slightly beyond (used for level tracing).
  virtual double well_function(int k, Vec2 x) const = 0;
  virtual Vec2 well_function_gradient(int k, Vec2 x) const = 0;
  virtual double edge_minimum(int k) const = 0;   // m_k < 0
  virtual Vec2 minimum_point(int k) const = 0;    // x_k(m_k)

  // Extended level coordinate for stopping-time geometry: equals H_k inside
  // U_k and continues positively into the ergodic region along the direction
  // in which a0 degenerates (unit-speed), so level sets C_k(c) make sense for
  // small c > 0 as well.
  virtual double extended_level(int k, Vec2 x) const = 0;
  virtual Vec2 extended_level_gradient(int k, Vec2 x) const = 0;
  // A point with extended_level == c on the ray at the given angle from x_k(m_k).
  virtual Vec2 point_on_level(int k, double c, double angle) const;

  // Forcing.
  virtual double forcing(Vec2 x) const = 0;
  virtual Vec2 normalization_point() const = 0;  // x_O

  // Integrals over the ergodic region and over all of G. Defaults use
  // rejection-sampled Monte Carlo (1e7 points) and report the standard error;
  // models with special structure override with deterministic quadrature.
  virtual IntegralEstimate ergodic_integral(const std::function<double(Vec2)>& g) const;
  virtual IntegralEstimate domain_integral(const std::function<double(Vec2)>& g) const;

  // Fast-motion eigenstructure along the foliation (defaults derived from a0
  // and the extended level gradient):
  //   tangential_diffusion = t.a0(x)t for unit t orthogonal to the level gradient
  //   normal_diffusion     = n.a0(x)n for the unit level-gradient direction
  //   normal_drift_field   = div(a0 grad Hext) evaluated at x
  virtual double tangential_diffusion(int k, Vec2 x) const;
  virtual double normal_diffusion(int k, Vec2 x) const;
  virtual double normal_drift_field(int k, Vec2 x) const;
  // In-curve drift bracket d/ds(alpha) + alpha d/ds(log 1/|grad Hext|) along
  // the level curve; zero for rotation-invariant wells.
  virtual double tangential_drift(int k, Vec2 x) const;

 protected:
  static constexpr double kFdStep = 1e-5;
};

// The built-in example: G a disk of radius 2, a single well U_1 (unit disk)
// with H_1 = (r^2-1)/2, fast coefficient degenerating like (r-1)^2 across the
// well boundary, identity slow coefficient, forcing f = r - 4/3 (zero mean).
class AnnulusModel : public Model {
 public:
  enum class Forcing { RadialShifted, Zero, ConstantOne };

  explicit AnnulusModel(Forcing forcing = Forcing::RadialShifted,
                        Vec2 normalization = {1.5, 0.0})
      : forcing_(forcing), x_o_(normalization) {}

  std::string name() const override { return "annulus"; }
  int well_count() const override { return 1; }

  bool inside(Vec2 x) const override { return x.norm2() < 4.0; }
  bool inside_closure(Vec2 x) const override { return x.norm2() <= 4.0 * (1.0 + 1e-14); }
  BoundaryProjection boundary_project(Vec2 x) const override;
  double domain_diameter() const override { return 4.0; }
  void bounding_box(Vec2& lo, Vec2& hi) const override {
    lo = {-2.0, -2.0};
    hi = {2.0, 2.0};
  }
  Region region(Vec2 x) const override;

  Mat2 a0(Vec2 x) const override;
  Mat2 a1(Vec2) const override { return Mat2::identity(); }
  Mat2 sigma0(Vec2 x) const override;
  Mat2 sigma1(Vec2) const override { return Mat2::identity(); }
  Vec2 div_a0(Vec2 x) const override;
  Vec2 div_a1(Vec2) const override { return {0.0, 0.0}; }

  int well_index(Vec2 x) const override { return x.norm2() <= 1.0 ? 0 : -1; }
  double first_integral(Vec2 x) const override {
    const double r2 = x.norm2();
    return r2 < 1.0 ? 0.5 * (r2 - 1.0) : 0.0;
  }
  Vec2 grad_first_integral(Vec2 x) const override {
    return x.norm2() <= 1.0 + 1e-9 ? x : Vec2{0.0, 0.0};
  }
  double well_function(int, Vec2 x) const override { return 0.5 * (x.norm2() - 1.0); }
  Vec2 well_function_gradient(int, Vec2 x) const override { return x; }
  double edge_minimum(int) const override { return -0.5; }
  Vec2 minimum_point(int) const override { return {0.0, 0.0}; }

  double extended_level(int, Vec2 x) const override {
    const double r = x.norm();
    return r < 1.0 ? 0.5 * (r * r - 1.0) : r - 1.0;
  }
  Vec2 extended_level_gradient(int, Vec2 x) const override {
    const double r = x.norm();
    if (r < 1e-14) return {0.0, 0.0};
    return r < 1.0 ? x : x / r;
  }
  Vec2 point_on_level(int, double c, double angle) const override;

  double forcing(Vec2 x) const override;
  Vec2 normalization_point() const override { return x_o_; }

  IntegralEstimate ergodic_integral(const std::function<double(Vec2)>& g) const override;
  IntegralEstimate domain_integral(const std::function<double(Vec2)>& g) const override;

  double tangential_diffusion(int, Vec2 x) const override { return x.norm(); }
  double tangential_drift(int, Vec2) const override { return 0.0; }
  double normal_diffusion(int, Vec2 x) const override { return lambda(x.norm()); }
  double normal_drift_field(int, Vec2 x) const override {
    const double r = x.norm();
    if (r <= 1.0) return 0.0;
    return lambda_prime(r) + lambda(r) / r;
  }

  static double lambda(double r) { return r >= 1.0 ? (r - 1.0) * (r - 1.0) : 0.0; }
  static double lambda_prime(double r) { return r >= 1.0 ? 2.0 * (r - 1.0) : 0.0; }

 private:
  Forcing forcing_;
  Vec2 x_o_;
};

struct ModelOptions {
  std::string forcing;       // model-specific named forcing choice
  bool has_x_o = false;      // when set, overrides the model's normalization point
  Vec2 x_o;
};

std::shared_ptr<Model> make_model(const std::string& name, const std::string& forcing = "");
std::shared_ptr<Model> make_model(const std::string& name, const ModelOptions& options);

// Structural validation -------------------------------------------------------

struct ValidationCheck {
  std::string name;
  double max_violation = 0.0;
  double threshold = 0.0;
  bool pass = true;
  Vec2 worst_point;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  int sample_count = 0;
  bool pass = true;
  std::string failure_note;  // set e.g. on non-finite values

  const ValidationCheck* find(const std::string& name) const;
};

// Evaluates the structural assumptions at quasi-random sample points in G:
// symmetry, definiteness, sigma sigma^T reconstruction, the first-integral
// identity a0 grad H = 0 on wells, and the zero-mean condition on f.
ValidationReport validate(const Model& model, int sample_count);

// Inward co-normal direction of the combined operator at a boundary point.
Vec2 conormal(const Model& model, Vec2 x, double eps,
              double tolerance = 1e-6);

}  // namespace stargraph
