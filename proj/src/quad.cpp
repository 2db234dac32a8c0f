#include "stargraph/quad.hpp"

#include <cmath>
#include <stdexcept>

namespace stargraph {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev initial guess.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
}

namespace {

// Integral over [x_j, x_{j+1}] of the parabola through (j-1, j, j+1).
double para_right(double ym, double y0, double yp, double dx) {
  return dx / 12.0 * (-ym + 8.0 * y0 + 5.0 * yp);
}
// Integral over [x_j, x_{j+1}] of the parabola through (j, j+1, j+2).
double para_left(double y0, double yp, double ypp, double dx) {
  return dx / 12.0 * (5.0 * y0 + 8.0 * yp - ypp);
}

}  // namespace

std::vector<double> cumulative_parabolic(const std::vector<double>& y, double dx) {
  const std::size_t n = y.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  if (n == 2) {
    out[1] = 0.5 * dx * (y[0] + y[1]);
    return out;
  }
  out[1] = out[0] + para_left(y[0], y[1], y[2], dx);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    out[j + 1] = out[j] + para_right(y[j - 1], y[j], y[j + 1], dx);
  }
  return out;
}

std::vector<double> cumulative_parabolic_sqrt_left(const std::vector<double>& y, double dx) {
  const std::size_t n = y.size();
  if (n < 4) return cumulative_parabolic(y, dx);

  // Fit y(t) = y0 + beta sqrt(t) + gamma t through nodes 1 and 2, subtract it
  // everywhere, integrate the smooth remainder with the parabolic rule and add
  // the fitted part back analytically. The remainder vanishes identically when
  // the data has exactly this form, and is O(t^{3/2}) at the endpoint in
  // general, which the parabolic rule handles without accuracy loss.
  const double t1 = dx, t2 = 2.0 * dx;
  const double r1 = y[1] - y[0], r2 = y[2] - y[0];
  const double s1 = std::sqrt(t1), s2 = std::sqrt(t2);
  const double det = s1 * t2 - s2 * t1;
  const double beta = (r1 * t2 - r2 * t1) / det;
  const double gamma = (s1 * r2 - s2 * r1) / det;

  std::vector<double> remainder(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = dx * static_cast<double>(j);
    remainder[j] = y[j] - (y[0] + beta * std::sqrt(t) + gamma * t);
  }
  std::vector<double> out = cumulative_parabolic(remainder, dx);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = dx * static_cast<double>(j);
    out[j] += y[0] * t + (2.0 / 3.0) * beta * t * std::sqrt(t) + 0.5 * gamma * t * t;
  }
  return out;
}

}  // namespace stargraph
