#pragma once

#include <cstddef>
#include <vector>

namespace stargraph {

// Halton low-discrepancy sequence (bases 2 and 3), used for deterministic
// structural sampling of coefficient fields.
inline double halton(std::size_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  std::size_t i = index + 1;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Cumulative integral of samples y on a uniform grid with spacing dx:
// out[j] = integral from x0 to x_j. Piecewise-parabolic (Simpson-quality).
std::vector<double> cumulative_parabolic(const std::vector<double>& y, double dx);

// Same, but the first intervals use a fitted y ~ y0 + beta*sqrt(t) + gamma*t
// model (t measured from the left endpoint). Intended for integrands whose
// derivative has a square-root singularity at the left endpoint, which is the
// generic behaviour of level-set averages at a non-degenerate well bottom.
std::vector<double> cumulative_parabolic_sqrt_left(const std::vector<double>& y, double dx);

}  // namespace stargraph
