#ifndef IMLMM_GENERALIZED_IM_HPP
#define IMLMM_GENERALIZED_IM_HPP

#include "model.hpp"

#include <vector>

namespace imlmm {

enum class GenMode { Sup, PlugIn, Adjusted };

/// Which value of eta enters the denominator. `eta` is eta* for PlugIn and the
/// REML estimate for Adjusted; `delta` is the Adjusted offset.
struct GenSpec {
  GenMode mode = GenMode::Sup;
  double eta = 0.0;
  double delta = 0.0;
};

/// Student-t association for theta, built from the first L-1 statistics.
struct GenAssociation {
  double center = 0.0;
  double nu = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::vector<double> S;
  std::vector<double> lambdas;

  /// sum_l S_l (c1 eta + c2) / (lambda_l eta + 1); eta = +inf gives the limit.
  double denom(double eta) const;
  /// Same sum in u = eta / (1 + eta), continuous on [0, 1].
  double denom_u(double u) const;
};

GenAssociation make_gen_association(const SuffStats& stats, const PredictionConstants& consts,
                                    double center);

/// 2 (1 - F_nu(|t|)).
double t_tail_contour(double t, double nu);

struct DenominatorChoice {
  double eta = 0.0;
  bool at_infinity = false;
  double value = 0.0;
};

/// Global supremum over eta in [0, inf]. Throws UnboundedDenominator when a
/// retained lambda is zero.
DenominatorChoice sup_denominator(const GenAssociation& assoc);

DenominatorChoice resolve_denominator(const GenAssociation& assoc, const GenSpec& spec);

double gen_plausibility(double theta, const GenAssociation& assoc, const GenSpec& spec);

/// Contour with the denominator resolved once.
class GenContour {
 public:
  GenContour(const GenAssociation& assoc, const GenSpec& spec);

  double center() const { return center_; }
  double nu() const { return nu_; }
  const DenominatorChoice& denominator() const { return denom_; }
  /// sqrt(denom / nu): theta distance per unit of t'.
  double scale() const { return scale_; }
  double t_prime(double theta) const { return (theta - center_) / scale_; }
  double plausibility(double theta) const { return t_tail_contour(t_prime(theta), nu_); }
  /// Closed-form half-width of the alpha-cut.
  double half_width(double alpha) const;

 private:
  double center_;
  double nu_;
  DenominatorChoice denom_;
  double scale_;
};

}  // namespace imlmm

#endif
