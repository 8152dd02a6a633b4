#ifndef IMLMM_BASELINES_HPP
#define IMLMM_BASELINES_HPP

#include "model.hpp"
#include "random.hpp"
#include "report.hpp"

#include <optional>
#include <string>
#include <vector>

namespace imlmm {

struct VarianceEstimate {
  double sigma_alpha2 = 0.0;
  double sigma_eps2 = 0.0;
  double eta_hat = 0.0;
  double rho_hat = 0.0;
  bool converged = false;
  bool boundary = false;
  double objective = 0.0;  // profiled restricted log-likelihood, constants dropped
};

struct VariancePair {
  double sigma_alpha2 = 0.0;
  double sigma_eps2 = 0.0;
};

/// Restricted log-likelihood -1/2 sum_l [r_l log v_l + S_l / v_l], v_l = lambda_l sa + se.
double reml_loglik(const SuffStats& stats, const VariancePair& v);

/// Profile over u = eta / (1 + eta) in [0, 1].
double reml_profile_u(const std::vector<double>& S, const std::vector<double>& lambdas,
                      const std::vector<int>& mults, double u);

VarianceEstimate reml_fit(const std::vector<double>& S, const std::vector<double>& lambdas,
                          const std::vector<int>& mults, std::size_t scan_points = 2001);
VarianceEstimate reml_fit(const SuffStats& stats);

enum class ClosedForm { Oracle, StudentT, Satterthwaite, GenSatterthwaite };

/// Degrees of freedom sum(r v)^2 / sum(r v^2) over all L strata.
double satterthwaite_df(const SuffStats& stats, const VarianceEstimate& fit);
/// 2 (c1 sa + c2 se)^2 / Var-hat, Var-hat from the inverse REML information.
double gen_satterthwaite_df(const SuffStats& stats, const PredictionConstants& consts,
                            const VarianceEstimate& fit, bool* used_expected = nullptr);

/// Oracle needs `truth`; the other methods use `fit` or refit when null.
IntervalReport closed_form_interval(ClosedForm method, const PredictionProblem& problem,
                                    double alpha,
                                    const std::optional<VariancePair>& truth = std::nullopt,
                                    const VarianceEstimate* fit = nullptr);

/// Bootstrap distribution of the prediction target, sorted.
struct BootDraws {
  std::vector<double> values;
  std::size_t failures = 0;
  std::vector<std::string> warnings;
};

/// theta_b = x^T B y_b + z_b sqrt(c1 sa_b + c2 se_b) with y_b simulated from
/// the REML fit and (sa_b, se_b) refitted on y_b.
BootDraws parametric_bootstrap_draws(const PredictionProblem& problem,
                                     const VarianceEstimate& fit, std::size_t B, Engine& rng);

/// Stratified resampling within groups. Group-mean targets pool resampled group
/// means; new-observation targets pool resampled observations.
BootDraws nonparametric_bootstrap_draws(const PredictionProblem& problem, std::size_t B,
                                        Engine& rng);

/// Linear-interpolation quantile of sorted data.
double sorted_quantile(const std::vector<double>& sorted, double prob);

IntervalReport percentile_interval(const BootDraws& draws, double alpha, const std::string& method,
                                   TargetKind kind);

IntervalReport parametric_bootstrap_interval(const PredictionProblem& problem,
                                             const VarianceEstimate& fit, std::size_t B,
                                             double alpha, Engine& rng);
IntervalReport nonparametric_bootstrap_interval(const PredictionProblem& problem, std::size_t B,
                                                double alpha, Engine& rng);

struct EtaStandardError {
  double se = 0.0;
  double boundary_fraction = 0.0;
  std::size_t failures = 0;
  std::vector<std::string> warnings;
};

/// Standard deviation of the REML eta over B parametric resamples of S.
EtaStandardError bootstrap_se_eta(const SuffStats& stats, const VarianceEstimate& fit,
                                  std::size_t B, Engine& rng);

/// ybar +- t_{n-1} sqrt(s^2 (1 + 1/n)).
IntervalReport iid_normal_interval(const VectorXd& y, double alpha);

}  // namespace imlmm

#endif
