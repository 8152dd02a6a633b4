#ifndef IMLMM_OPTIMIZE_HPP
#define IMLMM_OPTIMIZE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace imlmm {

struct ScalarMax {
  double x = 0.0;
  double value = 0.0;
};

// Golden-section maximization of f on [lo, hi]; f is assumed unimodal there.
template <class F>
ScalarMax golden_section_max(F&& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? ScalarMax{c, fc} : ScalarMax{d, fd};
}

// Global maximization over [lo, hi]: a uniform scan locates the best cell,
// golden section refines inside the neighbouring bracket, and both endpoints
// are always compared. Handles functions with a few stationary points.
template <class F>
ScalarMax scan_then_refine_max(F&& f, double lo, double hi, std::size_t scan_points,
                               double tol) {
  scan_points = std::max<std::size_t>(scan_points, 3);
  const double step = (hi - lo) / static_cast<double>(scan_points - 1);
  std::size_t best = 0;
  double best_value = f(lo);
  for (std::size_t i = 1; i < scan_points; ++i) {
    const double x = i + 1 == scan_points ? hi : lo + step * static_cast<double>(i);
    const double v = f(x);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  ScalarMax out{best + 1 == scan_points ? hi : lo + step * static_cast<double>(best),
                best_value};
  const double a = best == 0 ? lo : lo + step * static_cast<double>(best - 1);
  const double b = best + 1 >= scan_points ? hi : lo + step * static_cast<double>(best + 1);
  if (b > a) {
    const ScalarMax refined = golden_section_max(f, a, b, tol);
    if (refined.value > out.value) out = refined;
  }
  return out;
}

}  // namespace imlmm

#endif
