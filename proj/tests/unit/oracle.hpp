#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace oracle {

// Brute-force minimizer of a scalar function on [lo, hi] with `steps` grid
// intervals followed by a golden-section polish of the best bracket.
inline double argmin_1d(const std::function<double(double)> &f, double lo, double hi,
                        int steps = 200000)
{
  double best_x = lo;
  double best_f = f(lo);
  const double h = (hi - lo) / steps;
  for (int k = 1; k <= steps; ++k) {
    const double x = lo + k * h;
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - h);
  double b = std::min(hi, best_x + h);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    if (f(c) < f(d))
      b = d;
    else
      a = c;
  }
  const double polished = 0.5 * (a + b);
  return f(polished) < best_f ? polished : best_x;
}

} // namespace oracle
