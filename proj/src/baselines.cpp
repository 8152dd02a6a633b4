#include "baselines.hpp"

#include "distributions.hpp"
#include "errors.hpp"
#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace imlmm {

namespace {

std::vector<double> lambdas_of(const SuffStats& stats) { return stats.spectrum->lambdas; }
std::vector<int> mults_of(const SuffStats& stats) { return stats.spectrum->mults; }

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::Domain, "alpha must lie in (0, 1)");
}

IntervalReport symmetric(double center, double half, double alpha, const char* method,
                         TargetKind kind) {
  IntervalReport r;
  r.lower = center - half;
  r.upper = center + half;
  r.level = 1.0 - alpha;
  r.method = method;
  r.kind = kind;
  return r;
}

}  // namespace

double reml_loglik(const SuffStats& stats, const VariancePair& v) {
  double total = 0.0;
  for (int l = 0; l < stats.L(); ++l) {
    const double var = stats.lambda(l) * v.sigma_alpha2 + v.sigma_eps2;
    total += stats.mult(l) * std::log(var) + stats.S[l] / var;
  }
  return -0.5 * total;
}

double reml_profile_u(const std::vector<double>& S, const std::vector<double>& lambdas,
                      const std::vector<int>& mults, double u) {
  double weighted = 0.0, logdet = 0.0, dof = 0.0;
  for (std::size_t l = 0; l < S.size(); ++l) {
    const double d = lambdas[l] * u + (1.0 - u);
    weighted += S[l] / d;
    logdet += mults[l] * std::log(d);
    dof += mults[l];
  }
  return -0.5 * (dof * std::log(weighted) + logdet);
}

namespace {

// d/du of reml_profile_u.
double reml_profile_slope(const std::vector<double>& S, const std::vector<double>& lambdas,
                          const std::vector<int>& mults, double u) {
  double weighted = 0.0, weighted_slope = 0.0, log_slope = 0.0, dof = 0.0;
  for (std::size_t l = 0; l < S.size(); ++l) {
    const double d = lambdas[l] * u + (1.0 - u);
    const double dd = lambdas[l] - 1.0;
    weighted += S[l] / d;
    weighted_slope -= S[l] * dd / (d * d);
    log_slope += mults[l] * dd / d;
    dof += mults[l];
  }
  return -0.5 * (dof * weighted_slope / weighted + log_slope);
}

// Golden section only pins a flat maximum to about sqrt(eps); bisect the slope.
double polish_root(const std::vector<double>& S, const std::vector<double>& lambdas,
                   const std::vector<int>& mults, double x, double width) {
  double lo = std::max(0.0, x - width), hi = std::min(1.0, x + width);
  auto slope = [&](double u) { return reml_profile_slope(S, lambdas, mults, u); };
  if (!(slope(lo) > 0.0 && slope(hi) < 0.0)) return x;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (slope(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

VarianceEstimate reml_fit(const std::vector<double>& S, const std::vector<double>& lambdas,
                          const std::vector<int>& mults, std::size_t scan_points) {
  const double total_s = std::accumulate(S.begin(), S.end(), 0.0);
  if (!(total_s > 0.0)) fail(ErrorCode::DegenerateData, "all residual statistics are zero");
  const double dof = std::accumulate(mults.begin(), mults.end(), 0.0);

  auto f = [&](double u) { return reml_profile_u(S, lambdas, mults, u); };
  ScalarMax best = scan_then_refine_max(f, 0.0, 1.0, scan_points, 1e-12);
  const double at_zero = f(0.0);
  if (at_zero >= best.value || best.x < 1e-12) best = {0.0, at_zero};
  if (!std::isfinite(best.value))
    fail(ErrorCode::Estimation, "restricted likelihood is not finite");
  if (best.x >= 1.0 - 1e-9)
    fail(ErrorCode::Estimation, "restricted likelihood maximized as eta grows without bound");

  double u = best.x;
  if (u > 0.0) {
    // The objective is flat to roundoff here, so compare slopes rather than values.
    u = polish_root(S, lambdas, mults, u, 4.0 / static_cast<double>(scan_points));
    best.value = f(u);
  }
  const double eta = u / (1.0 - u);
  double weighted = 0.0;
  for (std::size_t l = 0; l < S.size(); ++l) weighted += S[l] / (lambdas[l] * eta + 1.0);

  VarianceEstimate e;
  e.sigma_eps2 = weighted / dof;
  e.sigma_alpha2 = eta * e.sigma_eps2;
  e.eta_hat = eta;
  e.rho_hat = eta / (1.0 + eta);
  e.boundary = u == 0.0;
  e.converged = true;
  e.objective = best.value;
  return e;
}

VarianceEstimate reml_fit(const SuffStats& stats) {
  return reml_fit(stats.S, lambdas_of(stats), mults_of(stats));
}

double satterthwaite_df(const SuffStats& stats, const VarianceEstimate& fit) {
  double num = 0.0, den = 0.0;
  for (int l = 0; l < stats.L(); ++l) {
    const double v = stats.lambda(l) * fit.sigma_alpha2 + fit.sigma_eps2;
    num += stats.mult(l) * v;
    den += stats.mult(l) * v * v;
  }
  return num * num / den;
}

double gen_satterthwaite_df(const SuffStats& stats, const PredictionConstants& consts,
                            const VarianceEstimate& fit, bool* used_expected) {
  Eigen::Matrix2d observed = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d expected = Eigen::Matrix2d::Zero();
  for (int l = 0; l < stats.L(); ++l) {
    const double v = stats.lambda(l) * fit.sigma_alpha2 + fit.sigma_eps2;
    const Eigen::Vector2d d(stats.lambda(l), 1.0);
    const double r = stats.mult(l);
    observed += 0.5 * (2.0 * stats.S[l] / (v * v * v) - r / (v * v)) * d * d.transpose();
    expected += 0.5 * (r / (v * v)) * d * d.transpose();
  }
  const Eigen::Vector2d g(consts.c1, consts.c2);
  const double q = consts.c1 * fit.sigma_alpha2 + consts.c2 * fit.sigma_eps2;
  if (fit.boundary) {
    // sigma_alpha^2 is pinned at 0; only sigma_eps^2 varies.
    double info = observed(1, 1);
    bool fallback = false;
    if (!(info > 0.0)) {
      fallback = true;
      info = expected(1, 1);
    }
    if (used_expected) *used_expected = fallback;
    return 2.0 * q * q * info / (consts.c2 * consts.c2);
  }
  bool fallback = false;
  Eigen::LLT<Eigen::Matrix2d> llt(observed);
  if (llt.info() != Eigen::Success || observed.determinant() <= 0.0) {
    fallback = true;
    llt.compute(expected);
    if (llt.info() != Eigen::Success)
      fail(ErrorCode::Estimation, "REML information matrix is singular");
  }
  if (used_expected) *used_expected = fallback;
  const double var = g.dot(llt.solve(g));
  return 2.0 * q * q / var;
}

IntervalReport closed_form_interval(ClosedForm method, const PredictionProblem& problem,
                                    double alpha, const std::optional<VariancePair>& truth,
                                    const VarianceEstimate* fit) {
  check_alpha(alpha);
  const auto& c = problem.consts;
  const TargetKind kind = problem.target.kind;
  if (method == ClosedForm::Oracle) {
    if (!truth) fail(ErrorCode::Usage, "oracle interval needs the true variance components");
    const double sd = std::sqrt(c.c1 * truth->sigma_alpha2 + c.c2 * truth->sigma_eps2);
    auto r = symmetric(problem.center, dist::normal_quantile(1.0 - alpha / 2.0) * sd, alpha,
                       "oracle", kind);
    return r;
  }

  VarianceEstimate own;
  if (!fit) {
    own = reml_fit(problem.stats);
    fit = &own;
  }
  const double q = c.c1 * fit->sigma_alpha2 + c.c2 * fit->sigma_eps2;
  IntervalReport r;
  switch (method) {
    case ClosedForm::StudentT: {
      const double df = problem.data.num_groups() - 2.0;
      if (df < 1.0) fail(ErrorCode::Domain, "Student-t interval needs at least three groups");
      r = symmetric(problem.center, dist::t_quantile(1.0 - alpha / 2.0, df) * std::sqrt(q), alpha,
                    "student-t", kind);
      r.diagnostics["df"] = df;
      break;
    }
    case ClosedForm::Satterthwaite: {
      const double df = satterthwaite_df(problem.stats, *fit);
      double total_s = 0.0, expected_s = 0.0;
      for (int l = 0; l < problem.stats.L(); ++l) {
        total_s += problem.stats.S[l];
        expected_s += problem.stats.mult(l) *
                      (problem.stats.lambda(l) * fit->sigma_alpha2 + fit->sigma_eps2);
      }
      const double half =
          dist::t_quantile(1.0 - alpha / 2.0, df) * std::sqrt(q) * std::sqrt(total_s / expected_s);
      r = symmetric(problem.center, half, alpha, "satterthwaite", kind);
      r.diagnostics["df"] = df;
      break;
    }
    case ClosedForm::GenSatterthwaite: {
      bool expected = false;
      const double df = gen_satterthwaite_df(problem.stats, c, *fit, &expected);
      r = symmetric(problem.center, dist::t_quantile(1.0 - alpha / 2.0, df) * std::sqrt(q), alpha,
                    "gen-satterthwaite", kind);
      r.diagnostics["df"] = df;
      if (expected) r.warnings.push_back("observed information not positive definite; used expected");
      break;
    }
    case ClosedForm::Oracle:
      break;
  }
  r.diagnostics["sigma_alpha2"] = fit->sigma_alpha2;
  r.diagnostics["sigma_eps2"] = fit->sigma_eps2;
  r.diagnostics["reml_boundary"] = fit->boundary ? 1.0 : 0.0;
  if (fit->boundary) r.warnings.push_back("REML estimate of sigma_alpha^2 is on the boundary (0)");
  return r;
}

BootDraws parametric_bootstrap_draws(const PredictionProblem& problem,
                                     const VarianceEstimate& fit, std::size_t B, Engine& rng) {
  if (B < 1) fail(ErrorCode::Usage, "bootstrap needs at least one resample");
  const Dataset& d = problem.data;
  const Spectrum& sp = *problem.stats.spectrum;
  const Eigen::Index n = d.n();

  // Projections onto each stratum, stacked: S_l is the squared norm of a slice.
  MatrixXd W(n, sp.K.cols());
  std::vector<Eigen::Index> offsets{0};
  for (const auto& block : sp.blocks) {
    W.middleCols(offsets.back(), block.cols()) = sp.K * block;
    offsets.push_back(offsets.back() + block.cols());
  }
  const VectorXd bt = d.X * (sp.XtX_inv * problem.target.x);  // B^T x
  const VectorXd fitted = d.X * problem.stats.By;
  const Eigen::LLT<MatrixXd> a_chol(d.A);
  const MatrixXd LA = a_chol.matrixL();
  const double sd_alpha = std::sqrt(fit.sigma_alpha2), sd_eps = std::sqrt(fit.sigma_eps2);
  const auto& lambdas = sp.lambdas;
  const auto& mults = sp.mults;
  const auto& c = problem.consts;

  std::normal_distribution<double> normal(0.0, 1.0);
  BootDraws out;
  out.values.reserve(B);
  VectorXd y(n), z(d.a());
  std::vector<VectorXd> effects(d.num_groups(), VectorXd(d.a()));
  std::vector<double> S(sp.L());
  for (std::size_t b = 0; b < B; ++b) {
    for (auto& e : effects) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
      e = sd_alpha * (LA * z);
    }
    for (Eigen::Index j = 0; j < n; ++j)
      y(j) = fitted(j) + d.Z.row(j).dot(effects[d.group[j]]) + sd_eps * normal(rng);
    const double zb = normal(rng);
    const VectorXd proj = W.transpose() * y;
    for (int l = 0; l < sp.L(); ++l)
      S[l] = proj.segment(offsets[l], offsets[l + 1] - offsets[l]).squaredNorm();
    try {
      const VarianceEstimate refit = reml_fit(S, lambdas, mults, 257);
      out.values.push_back(bt.dot(y) +
                           zb * std::sqrt(c.c1 * refit.sigma_alpha2 + c.c2 * refit.sigma_eps2));
    } catch (const Error&) {
      ++out.failures;
    }
  }
  if (out.failures * 10 > B)
    fail(ErrorCode::Estimation, "more than 10% of bootstrap refits failed");
  if (out.failures > 0)
    out.warnings.push_back(std::to_string(out.failures) + " bootstrap refits failed");
  std::sort(out.values.begin(), out.values.end());
  return out;
}

BootDraws nonparametric_bootstrap_draws(const PredictionProblem& problem, std::size_t B,
                                        Engine& rng) {
  const Dataset& d = problem.data;
  if (!d.is_random_intercept() || !d.is_intercept_only())
    fail(ErrorCode::Usage, "nonparametric bootstrap needs intercept-only random-intercept data");
  if (B < 1) fail(ErrorCode::Usage, "bootstrap needs at least one resample");
  std::vector<std::vector<double>> members(d.num_groups());
  for (Eigen::Index j = 0; j < d.n(); ++j) members[d.group[j]].push_back(d.y(j));
  // Row order within a group must not change the resamples drawn for a seed.
  for (auto& g : members) std::sort(g.begin(), g.end());

  const bool means = problem.target.kind == TargetKind::GroupMean;
  BootDraws out;
  out.values.reserve(means ? B * members.size() : B * static_cast<std::size_t>(d.n()));
  for (const auto& g : members)
    if (g.size() == 1) {
      out.warnings.push_back("groups of size one resample a single point");
      break;
    }
  for (std::size_t b = 0; b < B; ++b) {
    for (const auto& g : members) {
      std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
      double sum = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double v = g[pick(rng)];
        if (means)
          sum += v;
        else
          out.values.push_back(v);
      }
      if (means) out.values.push_back(sum / static_cast<double>(g.size()));
    }
  }
  std::sort(out.values.begin(), out.values.end());
  return out;
}

double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) fail(ErrorCode::Estimation, "no bootstrap values");
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

IntervalReport percentile_interval(const BootDraws& draws, double alpha, const std::string& method,
                                   TargetKind kind) {
  check_alpha(alpha);
  IntervalReport r;
  r.lower = sorted_quantile(draws.values, alpha / 2.0);
  r.upper = sorted_quantile(draws.values, 1.0 - alpha / 2.0);
  r.level = 1.0 - alpha;
  r.method = method;
  r.kind = kind;
  r.diagnostics["bootstrap_values"] = static_cast<double>(draws.values.size());
  r.diagnostics["bootstrap_failures"] = static_cast<double>(draws.failures);
  r.warnings = draws.warnings;
  return r;
}

IntervalReport parametric_bootstrap_interval(const PredictionProblem& problem,
                                             const VarianceEstimate& fit, std::size_t B,
                                             double alpha, Engine& rng) {
  auto r = percentile_interval(parametric_bootstrap_draws(problem, fit, B, rng), alpha,
                               "param-boot", problem.target.kind);
  r.diagnostics["B"] = static_cast<double>(B);
  r.diagnostics["reml_boundary"] = fit.boundary ? 1.0 : 0.0;
  return r;
}

IntervalReport nonparametric_bootstrap_interval(const PredictionProblem& problem, std::size_t B,
                                                double alpha, Engine& rng) {
  auto r = percentile_interval(nonparametric_bootstrap_draws(problem, B, rng), alpha,
                               "nonparam-boot", problem.target.kind);
  r.diagnostics["B"] = static_cast<double>(B);
  return r;
}

EtaStandardError bootstrap_se_eta(const SuffStats& stats, const VarianceEstimate& fit,
                                  std::size_t B, Engine& rng) {
  if (B < 2) fail(ErrorCode::Usage, "standard error needs at least two resamples");
  const auto lambdas = lambdas_of(stats);
  const auto mults = mults_of(stats);
  std::vector<std::chi_squared_distribution<double>> chi;
  for (int r : mults) chi.emplace_back(static_cast<double>(r));
  std::vector<double> S(lambdas.size()), etas;
  etas.reserve(B);
  EtaStandardError out;
  std::size_t boundary = 0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t l = 0; l < S.size(); ++l)
      S[l] = (lambdas[l] * fit.sigma_alpha2 + fit.sigma_eps2) * chi[l](rng);
    try {
      const VarianceEstimate e = reml_fit(S, lambdas, mults, 257);
      etas.push_back(e.eta_hat);
      if (e.boundary) ++boundary;
    } catch (const Error&) {
      ++out.failures;
    }
  }
  if (etas.size() < 2) fail(ErrorCode::Estimation, "too few successful bootstrap refits");
  out.boundary_fraction = static_cast<double>(boundary) / static_cast<double>(etas.size());
  if (boundary == etas.size()) {
    out.warnings.push_back("every bootstrap refit is on the boundary; standard error is 0");
    return out;
  }
  const double mean = std::accumulate(etas.begin(), etas.end(), 0.0) / etas.size();
  double ss = 0.0;
  for (double e : etas) ss += (e - mean) * (e - mean);
  out.se = std::sqrt(ss / static_cast<double>(etas.size() - 1));
  return out;
}

IntervalReport iid_normal_interval(const VectorXd& y, double alpha) {
  check_alpha(alpha);
  const Eigen::Index n = y.size();
  if (n < 2) fail(ErrorCode::Usage, "iid-normal interval needs at least two observations");
  const double mean = y.mean();
  const double s2 = (y.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double half = dist::t_quantile(1.0 - alpha / 2.0, static_cast<double>(n - 1)) *
                      std::sqrt(s2 * (1.0 + 1.0 / static_cast<double>(n)));
  auto r = symmetric(mean, half, alpha, "iid-normal", TargetKind::NewObservation);
  r.diagnostics["df"] = static_cast<double>(n - 1);
  return r;
}

}  // namespace imlmm
