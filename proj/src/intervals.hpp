#ifndef IMLMM_INTERVALS_HPP
#define IMLMM_INTERVALS_HPP

#include "report.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace imlmm {

/// A plausibility contour in theta with a hint for where its mass lies.
struct Contour {
  std::function<double(double)> evaluate;
  double center = 0.0;
  double scale = 1.0;
};

/// (theta, plausibility) on `points` equally spaced values in [lo, hi].
std::vector<std::pair<double, double>> tabulate(const Contour& contour, double lo, double hi,
                                                std::size_t points);

enum class CutMode { Nominal, JointAdjusted };

/// {theta : pi(theta) >= alpha} (2 alpha for JointAdjusted). The report's
/// method field is left empty for the caller to fill.
IntervalReport alpha_cut(const Contour& contour, double alpha, CutMode mode = CutMode::Nominal);

/// Pool-adjacent-violators fit of a non-increasing sequence.
std::vector<double> isotonic_decreasing(const std::vector<double>& values);

}  // namespace imlmm

#endif
