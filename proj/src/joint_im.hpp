#ifndef IMLMM_JOINT_IM_HPP
#define IMLMM_JOINT_IM_HPP

#include "model.hpp"
#include "random.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace imlmm {

/// Local-conditional reduction of the rho-only equations at a fixed rho0.
///
/// The auxiliary log-ratio vector q (length L-1, r-scaled) is split into a
/// free coordinate u = q_1 and the conditioning statistic tau = q^T M0. Given
/// tau = h_obs, q is affine in u: q = slope * u + offset.
struct LocalConditioner {
  double rho0 = 0.5;
  MatrixXd M0;            // (L-1) x (L-2), orthonormal columns, g(rho0)^T M0 = 0
  MatrixXd M0_prime_inv;  // inverse of [e1 | M0]
  VectorXd h_obs;         // q_obs^T M0
  VectorXd q_obs;         // observed centred log ratios at rho0
  VectorXd slope;
  VectorXd offset;
  double condition_number = 1.0;

  double u_obs() const { return q_obs(0); }
};

/// g_l(rho) = d/d rho of the l-th variance ratio, l = 1..L-1.
VectorXd ratio_gradient(const std::vector<double>& lambdas, double rho);

LocalConditioner build_conditioner(double rho0, const SuffStats& stats);

/// Conditional log-density of (u, v) up to an additive constant, where v is
/// the t-scaled auxiliary W / sqrt(V_L / r_L).
double log_density_uv(double u, double v, const LocalConditioner& cond, const Spectrum& spectrum);

struct AuxSample {
  double u = 0.0;
  double v = 0.0;
};

struct SamplerOptions {
  std::size_t burn_in = 1000;
  double target_acceptance = 0.3;
  bool estimate_ess = true;
};

struct AuxDraws {
  std::vector<AuxSample> draws;
  std::vector<double> log_density;  // density at each draw, same constant as log_density_uv
  double acceptance_rate = 0.0;
  double ess_u = 0.0;
  double ess_v = 0.0;
  bool tuning_failure = false;
  std::string warning;
};

/// Adaptive random-walk Metropolis draws from the conditional density.
AuxDraws sample_aux(const LocalConditioner& cond, const Spectrum& spectrum, std::size_t m,
                    Engine& rng, const SamplerOptions& options = {});

/// Observed v for a candidate theta at rho0.
double observed_v(double theta, double rho0, const SuffStats& stats,
                  const PredictionConstants& consts, double center);

struct JointPlausibility {
  double plausibility = 0.0;
  bool tuning_failure = false;
};

JointPlausibility joint_plausibility(double theta, double rho0, const SuffStats& stats,
                                     const PredictionConstants& consts, double center,
                                     std::size_t m, Engine& rng,
                                     const SamplerOptions& options = {});

std::vector<double> default_rho_grid(std::size_t count = 100, double lo = 0.001,
                                     double hi = 0.999);

struct JointOptions {
  std::vector<double> rho_grid = default_rho_grid();
  std::size_t m = 5000;
  SamplerOptions sampler;
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

/// Per-rho ingredients of the Monte Carlo joint plausibility.
struct RhoSlice {
  double rho = 0.0;
  double v_scale = 0.0;   // v_obs = (theta - center) * v_scale
  double f_linear = 0.0;  // 1/2 sum r_l q_l at the observed q
  double log_d0 = 0.0;    // log(1/2 + sum r_l e^{q_l} / (2 r_L))
  std::vector<double> sorted_log_density;
  double acceptance_rate = 0.0;
  double ess = 0.0;
  bool tuning_failure = false;
};

/// Marginal joint-IM contour: the maximum over the rho grid of the per-rho
/// Monte Carlo plausibilities. Draws for each rho are reused for every theta.
class JointContour {
 public:
  struct Point {
    double plausibility = 0.0;
    double argmax_rho = 0.0;
  };

  JointContour(double center, double scale, double exponent, double two_r_last,
               std::vector<RhoSlice> slices);

  double center() const { return center_; }
  double scale() const { return scale_; }
  Point evaluate(double theta) const;
  double plausibility(double theta) const { return evaluate(theta).plausibility; }
  double slice_plausibility(double theta, std::size_t j) const;
  const std::vector<RhoSlice>& slices() const { return slices_; }
  bool any_tuning_failure() const;

 private:
  double center_;
  double scale_;
  double exponent_;
  double log_two_r_last_;
  std::vector<RhoSlice> slices_;
};

/// `center` is x^T B y for the prediction target.
JointContour marginal_contour(const SuffStats& stats, const PredictionConstants& consts,
                              double center, const JointOptions& options);

}  // namespace imlmm

#endif
