#include "joint_im.hpp"

#include "errors.hpp"
#include "optimize.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>

namespace imlmm {

namespace {

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double variance_ratio(double lambda_l, double lambda_last, double rho) {
  return (rho * (lambda_l - 1.0) + 1.0) / (rho * (lambda_last - 1.0) + 1.0);
}

// Hot-path evaluator of the conditional log-density with all constants cached.
class DensityKernel {
 public:
  DensityKernel(const LocalConditioner& cond, const Spectrum& spectrum)
      : slope_(cond.slope), offset_(cond.offset) {
    const int L = spectrum.L();
    if (cond.slope.size() != L - 1)
      fail(ErrorCode::DimensionMismatch, "conditioner does not match the spectrum");
    const double r_last = spectrum.mults[L - 1];
    half_r_.resize(L - 1);
    log_w_.resize(L - 1);
    double total = 0.0;
    for (int l = 0; l < L; ++l) total += spectrum.mults[l];
    for (int l = 0; l < L - 1; ++l) {
      half_r_(l) = 0.5 * spectrum.mults[l];
      log_w_(l) = std::log(spectrum.mults[l] / (2.0 * r_last));
    }
    exponent_ = 0.5 * (1.0 + total);
    inv_two_r_last_ = 1.0 / (2.0 * r_last);
  }

  double operator()(double u, double v) const {
    const Eigen::Index n = slope_.size();
    double linear = 0.0;
    double top = std::log(0.5 + v * v * inv_two_r_last_);
    // Two passes: max, then sum, so exp never overflows.
    double terms[64];
    double* t = n <= 63 ? terms : nullptr;
    std::vector<double> heap;
    if (!t) {
      heap.resize(n + 1);
      t = heap.data();
    }
    t[0] = top;
    for (Eigen::Index l = 0; l < n; ++l) {
      const double q = slope_(l) * u + offset_(l);
      linear += half_r_(l) * q;
      t[l + 1] = log_w_(l) + q;
      top = std::max(top, t[l + 1]);
    }
    double sum = 0.0;
    for (Eigen::Index l = 0; l <= n; ++l) sum += std::exp(t[l] - top);
    return linear - exponent_ * (top + std::log(sum));
  }

  double exponent() const { return exponent_; }
  double inv_two_r_last() const { return inv_two_r_last_; }

 private:
  VectorXd slope_, offset_, half_r_, log_w_;
  double exponent_ = 0.0;
  double inv_two_r_last_ = 0.0;
};

double batch_means_ess(const std::vector<AuxSample>& draws, bool use_u) {
  const std::size_t m = draws.size();
  if (m < 16) return static_cast<double>(m);
  const std::size_t b = static_cast<std::size_t>(std::sqrt(static_cast<double>(m)));
  const std::size_t a = m / b;
  auto value = [&](std::size_t i) { return use_u ? draws[i].u : draws[i].v; };
  double mean = 0.0;
  for (std::size_t i = 0; i < a * b; ++i) mean += value(i);
  mean /= static_cast<double>(a * b);
  double var = 0.0;
  for (std::size_t i = 0; i < a * b; ++i) var += (value(i) - mean) * (value(i) - mean);
  var /= static_cast<double>(a * b - 1);
  double var_batch = 0.0;
  for (std::size_t k = 0; k < a; ++k) {
    double bm = 0.0;
    for (std::size_t i = 0; i < b; ++i) bm += value(k * b + i);
    bm /= static_cast<double>(b);
    var_batch += (bm - mean) * (bm - mean);
  }
  var_batch *= static_cast<double>(b) / static_cast<double>(a - 1);
  if (!(var_batch > 0.0)) return static_cast<double>(m);
  return std::min(static_cast<double>(m), static_cast<double>(m) * var / var_batch);
}

}  // namespace

VectorXd ratio_gradient(const std::vector<double>& lambdas, double rho) {
  const int L = static_cast<int>(lambdas.size());
  const double lambda_last = lambdas[L - 1];
  const double denom = 1.0 + rho * (lambda_last - 1.0);
  VectorXd g(L - 1);
  for (int l = 0; l < L - 1; ++l) g(l) = (lambdas[l] - lambda_last) / (denom * denom);
  return g;
}

LocalConditioner build_conditioner(double rho0, const SuffStats& stats) {
  if (!(rho0 > 0.0 && rho0 < 1.0)) fail(ErrorCode::Domain, "rho0 must lie in (0, 1)");
  const int L = stats.L();
  if (L < 2) fail(ErrorCode::DegenerateSpectrum, "need at least two distinct eigenvalues");
  const auto& lambdas = stats.spectrum->lambdas;
  const double lambda_last = lambdas[L - 1];
  const double s_last = stats.S[L - 1];
  const double r_last = stats.mult(L - 1);

  LocalConditioner c;
  c.rho0 = rho0;
  c.q_obs.resize(L - 1);
  for (int l = 0; l < L - 1; ++l) {
    c.q_obs(l) = std::log(stats.S[l] / s_last * (r_last / stats.mult(l))) -
                 std::log(variance_ratio(lambdas[l], lambda_last, rho0));
  }

  if (L == 2) {
    c.M0 = MatrixXd(1, 0);
    c.M0_prime_inv = MatrixXd::Ones(1, 1);
    c.h_obs = VectorXd(0);
    c.slope = VectorXd::Ones(1);
    c.offset = VectorXd::Zero(1);
    c.condition_number = 1.0;
    return c;
  }

  const VectorXd g = ratio_gradient(lambdas, rho0);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  const MatrixXd Q = qr.householderQ();
  c.M0 = Q.rightCols(L - 2);

  MatrixXd prime(L - 1, L - 1);
  prime.col(0) = VectorXd::Unit(L - 1, 0);
  prime.rightCols(L - 2) = c.M0;
  Eigen::FullPivLU<MatrixXd> lu(prime);
  if (!lu.isInvertible())
    fail(ErrorCode::Internal, "conditioning matrix [e1 | M0] is singular");
  c.M0_prime_inv = lu.inverse();
  Eigen::JacobiSVD<MatrixXd> svd(prime);
  const auto& sv = svd.singularValues();
  c.condition_number = sv(0) / sv(sv.size() - 1);

  c.h_obs = c.M0.transpose() * c.q_obs;
  c.slope = c.M0_prime_inv.row(0).transpose();
  c.offset = c.M0_prime_inv.bottomRows(L - 2).transpose() * c.h_obs;
  return c;
}

double log_density_uv(double u, double v, const LocalConditioner& cond, const Spectrum& spectrum) {
  return DensityKernel(cond, spectrum)(u, v);
}

AuxDraws sample_aux(const LocalConditioner& cond, const Spectrum& spectrum, std::size_t m,
                    Engine& rng, const SamplerOptions& options) {
  if (m < 1000) fail(ErrorCode::Usage, "at least 1000 auxiliary draws are required");
  const DensityKernel f(cond, spectrum);

  // Start at the conditional mode (v = 0 maximizes over v; f is concave in u).
  auto fu = [&](double u) { return f(u, 0.0); };
  double lo = cond.u_obs() - 10.0, hi = cond.u_obs() + 10.0;
  ScalarMax mode = scan_then_refine_max(fu, lo, hi, 81, 1e-10);
  for (int expand = 0; expand < 20 && (mode.x <= lo || mode.x >= hi); ++expand) {
    const double width = hi - lo;
    lo = mode.x - width;
    hi = mode.x + width;
    mode = scan_then_refine_max(fu, lo, hi, 81, 1e-10);
  }

  const double h = 1e-3;
  const double curv_u = (fu(mode.x + h) - 2.0 * mode.value + fu(mode.x - h)) / (h * h);
  const double sd_u = curv_u < 0.0 ? 1.0 / std::sqrt(-curv_u) : 1.0;
  const double curv_v = (f(mode.x, h) - 2.0 * mode.value + f(mode.x, -h)) / (h * h);
  const double sd_v = curv_v < 0.0 ? 1.0 / std::sqrt(-curv_v) : 1.0;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double base_scale = 2.38 * 2.38 / 2.0;

  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  cov(0, 0) = base_scale * sd_u * sd_u;
  cov(1, 1) = base_scale * sd_v * sd_v;
  Eigen::Matrix2d chol = cov.llt().matrixL();
  double log_lambda = 0.0;

  double u = mode.x, v = 0.0, fx = mode.value;
  auto step = [&](double scale, const Eigen::Matrix2d& L_chol, double& accept_prob) {
    const Eigen::Vector2d z(normal(rng), normal(rng));
    const Eigen::Vector2d d = scale * (L_chol * z);
    const double un = u + d(0), vn = v + d(1);
    const double fn = f(un, vn);
    const double log_ratio = fn - fx;
    accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    if (unif(rng) < accept_prob) {
      u = un;
      v = vn;
      fx = fn;
      return true;
    }
    return false;
  };

  // Burn-in: Robbins-Monro on the global scale, empirical covariance from
  // the second quarter onwards.
  const std::size_t burn = options.burn_in;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d m2 = Eigen::Matrix2d::Zero();
  std::size_t count = 0;
  for (std::size_t t = 0; t < burn; ++t) {
    double a = 0.0;
    step(std::exp(0.5 * log_lambda), chol, a);
    log_lambda += (a - options.target_acceptance) / std::pow(static_cast<double>(t) + 1.0, 0.6);
    log_lambda = std::clamp(log_lambda, -20.0, 20.0);
    if (t >= burn / 4) {
      ++count;
      const Eigen::Vector2d x(u, v);
      const Eigen::Vector2d delta = x - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta * (x - mean).transpose();
    }
    if (t + 1 == burn / 2 && count > 10) {
      Eigen::Matrix2d emp = m2 / static_cast<double>(count - 1);
      emp += 1e-10 * Eigen::Matrix2d::Identity();
      Eigen::LLT<Eigen::Matrix2d> llt(base_scale * emp);
      if (llt.info() == Eigen::Success && emp(0, 0) > 0.0 && emp(1, 1) > 0.0) {
        chol = llt.matrixL();
        log_lambda = 0.0;
      }
    }
  }
  const double final_scale = std::exp(0.5 * log_lambda);

  AuxDraws out;
  out.draws.resize(m);
  out.log_density.resize(m);
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double a = 0.0;
    if (step(final_scale, chol, a)) ++accepted;
    out.draws[i] = {u, v};
    out.log_density[i] = fx;
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(m);
  if (options.estimate_ess) {
    out.ess_u = batch_means_ess(out.draws, true);
    out.ess_v = batch_means_ess(out.draws, false);
  }
  if (out.acceptance_rate < 0.1 || out.acceptance_rate > 0.6) {
    out.tuning_failure = true;
    out.warning = "TuningFailure: acceptance rate " + std::to_string(out.acceptance_rate) +
                  " outside [0.1, 0.6]";
  }
  return out;
}

double observed_v(double theta, double rho0, const SuffStats& stats,
                  const PredictionConstants& consts, double center) {
  const int L = stats.L();
  const double lambda_last = stats.lambda(L - 1);
  const double r_last = stats.mult(L - 1);
  const double num = r_last * (rho0 * (lambda_last - 1.0) + 1.0);
  const double den = stats.S[L - 1] * (rho0 * (consts.c1 - consts.c2) + consts.c2);
  return (theta - center) * std::sqrt(num / den);
}

namespace {

RhoSlice make_slice(const SuffStats& stats, const PredictionConstants& consts, double rho,
                    std::size_t m, Engine& rng, const SamplerOptions& options) {
  const LocalConditioner cond = build_conditioner(rho, stats);
  const Spectrum& spectrum = *stats.spectrum;
  AuxDraws draws = sample_aux(cond, spectrum, m, rng, options);

  const int L = stats.L();
  const double r_last = stats.mult(L - 1);
  RhoSlice s;
  s.rho = rho;
  s.v_scale = observed_v(1.0, rho, stats, consts, 0.0);
  double linear = 0.0;
  double log_d0 = std::log(0.5);
  for (int l = 0; l < L - 1; ++l) {
    linear += 0.5 * stats.mult(l) * cond.q_obs(l);
    log_d0 = log_add_exp(log_d0, std::log(stats.mult(l) / (2.0 * r_last)) + cond.q_obs(l));
  }
  s.f_linear = linear;
  s.log_d0 = log_d0;
  s.sorted_log_density = std::move(draws.log_density);
  std::sort(s.sorted_log_density.begin(), s.sorted_log_density.end());
  s.acceptance_rate = draws.acceptance_rate;
  s.ess = std::min(draws.ess_u, draws.ess_v);
  s.tuning_failure = draws.tuning_failure;
  return s;
}

}  // namespace

JointPlausibility joint_plausibility(double theta, double rho0, const SuffStats& stats,
                                     const PredictionConstants& consts, double center,
                                     std::size_t m, Engine& rng, const SamplerOptions& options) {
  const RhoSlice slice = make_slice(stats, consts, rho0, m, rng, options);
  double total = 0.0;
  for (int l = 0; l < stats.L(); ++l) total += stats.mult(l);
  const JointContour contour(center, 1.0, 0.5 * (1.0 + total), 2.0 * stats.mult(stats.L() - 1),
                             {slice});
  return {contour.slice_plausibility(theta, 0), slice.tuning_failure};
}

std::vector<double> default_rho_grid(std::size_t count, double lo, double hi) {
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = 0.5 * (lo + hi);
    return grid;
  }
  for (std::size_t j = 0; j < count; ++j)
    grid[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1);
  return grid;
}

JointContour::JointContour(double center, double scale, double exponent, double two_r_last,
                           std::vector<RhoSlice> slices)
    : center_(center),
      scale_(scale),
      exponent_(exponent),
      log_two_r_last_(std::log(two_r_last)),
      slices_(std::move(slices)) {}

double JointContour::slice_plausibility(double theta, std::size_t j) const {
  const RhoSlice& s = slices_[j];
  const double v = (theta - center_) * s.v_scale;
  double lse = s.log_d0;
  if (v != 0.0) lse = log_add_exp(s.log_d0, 2.0 * std::log(std::abs(v)) - log_two_r_last_);
  const double log_f = s.f_linear - exponent_ * lse;
  const auto& sorted = s.sorted_log_density;
  const auto count = std::upper_bound(sorted.begin(), sorted.end(), log_f) - sorted.begin();
  return static_cast<double>(count) / static_cast<double>(sorted.size());
}

JointContour::Point JointContour::evaluate(double theta) const {
  Point best{-1.0, 0.0};
  for (std::size_t j = 0; j < slices_.size(); ++j) {
    const double p = slice_plausibility(theta, j);
    if (p > best.plausibility) best = {p, slices_[j].rho};
  }
  return best;
}

bool JointContour::any_tuning_failure() const {
  return std::any_of(slices_.begin(), slices_.end(),
                     [](const RhoSlice& s) { return s.tuning_failure; });
}

JointContour marginal_contour(const SuffStats& stats, const PredictionConstants& consts,
                              double center, const JointOptions& options) {
  if (options.rho_grid.empty()) fail(ErrorCode::Domain, "rho grid is empty");
  for (double rho : options.rho_grid)
    if (!(rho > 0.0 && rho < 1.0)) fail(ErrorCode::Domain, "rho grid values must lie in (0, 1)");

  std::vector<RhoSlice> slices(options.rho_grid.size());
  parallel_for(slices.size(), options.threads, [&](std::size_t j) {
    // Keyed by the rho value so nested grids share draws at common points.
    Engine rng = substream(options.seed, std::bit_cast<std::uint64_t>(options.rho_grid[j]));
    slices[j] = make_slice(stats, consts, options.rho_grid[j], options.m, rng, options.sampler);
  });

  const int L = stats.L();
  double total = 0.0;
  for (int l = 0; l < L; ++l) total += stats.mult(l);
  const double r_last = stats.mult(L - 1);
  // Typical theta spread: the rho = 1/2 scaling of a unit-variance v.
  const double scale = 1.0 / observed_v(1.0, 0.5, stats, consts, 0.0);
  return JointContour(center, scale, 0.5 * (1.0 + total), 2.0 * r_last, std::move(slices));
}

}  // namespace imlmm
