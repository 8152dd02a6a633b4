#include "generalized_im.hpp"

#include "distributions.hpp"
#include "errors.hpp"
#include "optimize.hpp"

#include <cmath>
#include <limits>

namespace imlmm {

double GenAssociation::denom(double eta) const {
  if (std::isinf(eta)) return denom_u(1.0);
  if (eta < 0.0) fail(ErrorCode::Domain, "eta must be non-negative");
  double total = 0.0;
  for (std::size_t l = 0; l < S.size(); ++l)
    total += S[l] * (c1 * eta + c2) / (lambdas[l] * eta + 1.0);
  return total;
}

double GenAssociation::denom_u(double u) const {
  double total = 0.0;
  for (std::size_t l = 0; l < S.size(); ++l)
    total += S[l] * (c1 * u + c2 * (1.0 - u)) / (lambdas[l] * u + (1.0 - u));
  return total;
}

GenAssociation make_gen_association(const SuffStats& stats, const PredictionConstants& consts,
                                    double center) {
  const int L = stats.L();
  if (L < 2) fail(ErrorCode::DegenerateSpectrum, "need at least two distinct eigenvalues");
  GenAssociation a;
  a.center = center;
  a.c1 = consts.c1;
  a.c2 = consts.c2;
  for (int l = 0; l < L - 1; ++l) {
    a.S.push_back(stats.S[l]);
    a.lambdas.push_back(stats.lambda(l));
    a.nu += stats.mult(l);
  }
  return a;
}

double t_tail_contour(double t, double nu) {
  if (!(nu > 0.0)) fail(ErrorCode::Domain, "degrees of freedom must be positive");
  if (std::isnan(t)) fail(ErrorCode::Domain, "t is NaN");
  return std::min(1.0, 2.0 * dist::t_upper(std::abs(t), nu));
}

DenominatorChoice sup_denominator(const GenAssociation& assoc) {
  for (double lambda : assoc.lambdas)
    if (!(lambda > 0.0))
      fail(ErrorCode::UnboundedDenominator,
           "a retained eigenvalue is zero; the denominator grows without bound");
  auto f = [&](double u) { return assoc.denom_u(u); };
  ScalarMax best = scan_then_refine_max(f, 0.0, 1.0, 2001, 1e-10);
  const double at_zero = f(0.0), at_one = f(1.0);
  // Ties within roundoff go to eta = 0, then to the infinite limit.
  const double tie = 1e-12 * std::abs(best.value);
  if (at_one >= best.value - tie) best = {1.0, std::max(at_one, best.value)};
  if (at_zero >= best.value - tie) best = {0.0, std::max(at_zero, best.value)};
  DenominatorChoice out;
  out.value = best.value;
  if (best.x >= 1.0) {
    out.at_infinity = true;
    out.eta = std::numeric_limits<double>::infinity();
  } else {
    out.eta = best.x / (1.0 - best.x);
  }
  return out;
}

DenominatorChoice resolve_denominator(const GenAssociation& assoc, const GenSpec& spec) {
  switch (spec.mode) {
    case GenMode::Sup:
      return sup_denominator(assoc);
    case GenMode::PlugIn:
      if (!(spec.eta >= 0.0)) fail(ErrorCode::Domain, "plug-in eta must be non-negative");
      return {spec.eta, std::isinf(spec.eta), assoc.denom(spec.eta)};
    case GenMode::Adjusted: {
      if (!(spec.eta >= 0.0) || !(spec.delta >= 0.0))
        fail(ErrorCode::Domain, "adjusted eta and delta must be non-negative");
      const double up = spec.eta + spec.delta;
      const double down = spec.eta - spec.delta;
      const double v_up = assoc.denom(up);
      // A negative candidate is not a variance ratio; only eta + delta remains.
      if (down >= 0.0) {
        const double v_down = assoc.denom(down);
        if (v_down > v_up) return {down, false, v_down};
      }
      return {up, std::isinf(up), v_up};
    }
  }
  fail(ErrorCode::Internal, "unknown generalized IM mode");
}

double gen_plausibility(double theta, const GenAssociation& assoc, const GenSpec& spec) {
  return GenContour(assoc, spec).plausibility(theta);
}

GenContour::GenContour(const GenAssociation& assoc, const GenSpec& spec)
    : center_(assoc.center), nu_(assoc.nu), denom_(resolve_denominator(assoc, spec)) {
  if (!(nu_ >= 1.0)) fail(ErrorCode::Domain, "generalized IM needs nu >= 1");
  if (!(denom_.value > 0.0)) fail(ErrorCode::DegenerateData, "denominator is not positive");
  scale_ = std::sqrt(denom_.value / nu_);
}

double GenContour::half_width(double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::Domain, "alpha must lie in (0, 1)");
  return dist::t_quantile(1.0 - alpha / 2.0, nu_) * scale_;
}

}  // namespace imlmm
