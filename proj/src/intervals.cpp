#include "intervals.hpp"

#include "errors.hpp"

#include <algorithm>
#include <cmath>

namespace imlmm {

namespace {

constexpr int kMaxDoublings = 200;
constexpr int kMonotoneProbes = 16;
constexpr int kFallbackGrid = 400;

struct SideResult {
  double endpoint = 0.0;
  bool smoothed = false;
};

// Far endpoint of the cut on one side of the center.
SideResult cut_side(const Contour& c, double level, double direction) {
  double step = c.scale;
  double inner = 0.0;  // offsets from the center along `direction`
  double outer = step;
  int doublings = 0;
  while (c.evaluate(c.center + direction * outer) >= level) {
    inner = outer;
    step *= 2.0;
    outer = inner + step;
    if (++doublings > kMaxDoublings)
      fail(ErrorCode::Bracket, "contour does not fall below the cut level");
  }

  // Non-increasing check between the center and the bracket edge.
  bool monotone = true;
  double previous = c.evaluate(c.center);
  for (int k = 1; k <= kMonotoneProbes; ++k) {
    const double value = c.evaluate(c.center + direction * outer * k / kMonotoneProbes);
    if (value > previous) {
      monotone = false;
      break;
    }
    previous = value;
  }

  if (monotone) {
    // Runs to machine precision; far below the required 1e-8 * scale.
    for (int it = 0; it < 2000; ++it) {
      const double mid = 0.5 * (inner + outer);
      if (mid <= inner || mid >= outer) break;
      if (c.evaluate(c.center + direction * mid) >= level)
        inner = mid;
      else
        outer = mid;
    }
    return {c.center + direction * inner, false};
  }

  std::vector<double> offsets(kFallbackGrid + 1), values(kFallbackGrid + 1);
  for (int k = 0; k <= kFallbackGrid; ++k) {
    offsets[k] = outer * k / kFallbackGrid;
    values[k] = c.evaluate(c.center + direction * offsets[k]);
  }
  const std::vector<double> fitted = isotonic_decreasing(values);
  int last = 0;
  while (last + 1 <= kFallbackGrid && fitted[last + 1] >= level) ++last;
  double off = offsets[last];
  if (last < kFallbackGrid && fitted[last] > fitted[last + 1]) {
    const double w = (fitted[last] - level) / (fitted[last] - fitted[last + 1]);
    off += w * (offsets[last + 1] - offsets[last]);
  }
  return {c.center + direction * off, true};
}

}  // namespace

std::vector<double> isotonic_decreasing(const std::vector<double>& values) {
  // Blocks of (mean, weight); merge while a later block exceeds an earlier one.
  std::vector<double> mean;
  std::vector<std::size_t> weight;
  for (double v : values) {
    mean.push_back(v);
    weight.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] < mean.back()) {
      const std::size_t w = weight[weight.size() - 2] + weight.back();
      const double m = (mean[mean.size() - 2] * weight[weight.size() - 2] +
                        mean.back() * weight.back()) /
                       static_cast<double>(w);
      mean.pop_back();
      weight.pop_back();
      mean.back() = m;
      weight.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t b = 0; b < mean.size(); ++b) out.insert(out.end(), weight[b], mean[b]);
  return out;
}

std::vector<std::pair<double, double>> tabulate(const Contour& contour, double lo, double hi,
                                                std::size_t points) {
  if (points < 2 || !(hi > lo)) fail(ErrorCode::Domain, "grid needs two or more points and lo < hi");
  std::vector<std::pair<double, double>> out(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double theta = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    out[k] = {theta, contour.evaluate(theta)};
  }
  return out;
}

IntervalReport alpha_cut(const Contour& contour, double alpha, CutMode mode) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::Domain, "alpha must lie in (0, 1)");
  if (!(contour.scale > 0.0) || !std::isfinite(contour.scale))
    fail(ErrorCode::Domain, "contour scale must be positive and finite");
  const double level = mode == CutMode::JointAdjusted ? 2.0 * alpha : alpha;
  if (level >= 1.0) fail(ErrorCode::Domain, "adjusted cut level 2 alpha must be below 1");

  const double peak = contour.evaluate(contour.center);
  if (peak < level)
    fail(ErrorCode::EmptyCut, "plausibility at the center is below the cut level; increase the "
                              "number of Monte Carlo draws");

  const SideResult lo = cut_side(contour, level, -1.0);
  const SideResult hi = cut_side(contour, level, 1.0);
  IntervalReport r;
  r.lower = lo.endpoint;
  r.upper = hi.endpoint;
  r.level = 1.0 - alpha;
  r.diagnostics["cut_level"] = level;
  r.diagnostics["peak_plausibility"] = peak;
  if (lo.smoothed || hi.smoothed) {
    r.diagnostics["isotonic_fallback"] = 1.0;
    r.warnings.push_back("BracketError: non-monotone contour; used isotonic grid fallback");
  }
  return r;
}

}  // namespace imlmm
