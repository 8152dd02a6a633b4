#include "methods.hpp"

#include "random.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <memory>

namespace imlmm {

namespace {

struct Tag {
  Method method;
  const char* name;
};

constexpr std::array<Tag, 11> kTags{{
    {Method::Oracle, "oracle"},
    {Method::StudentT, "student-t"},
    {Method::Satterthwaite, "satterthwaite"},
    {Method::GenSatterthwaite, "gen-satterthwaite"},
    {Method::ParamBoot, "param-boot"},
    {Method::NonparamBoot, "nonparam-boot"},
    {Method::Joint, "joint"},
    {Method::AdjJoint, "adj-joint"},
    {Method::Gen, "gen"},
    {Method::AdjGen, "adj-gen"},
    {Method::IidNormal, "iid-normal"},
}};

std::uint64_t method_stream(Method m) { return static_cast<std::uint64_t>(m) + 1; }

void add_joint_diagnostics(IntervalReport& r, const JointContour& c) {
  double acc_min = 1.0, acc_max = 0.0, ess_min = 1e300;
  int failures = 0;
  for (const auto& s : c.slices()) {
    acc_min = std::min(acc_min, s.acceptance_rate);
    acc_max = std::max(acc_max, s.acceptance_rate);
    ess_min = std::min(ess_min, s.ess);
    failures += s.tuning_failure ? 1 : 0;
  }
  r.diagnostics["rho_grid_size"] = static_cast<double>(c.slices().size());
  r.diagnostics["mcmc_draws"] = static_cast<double>(c.slices().front().sorted_log_density.size());
  r.diagnostics["acceptance_min"] = acc_min;
  r.diagnostics["acceptance_max"] = acc_max;
  r.diagnostics["ess_min"] = ess_min;
  r.diagnostics["tuning_failures"] = failures;
  if (failures > 0)
    r.warnings.push_back("TuningFailure: " + std::to_string(failures) +
                         " rho values had acceptance outside [0.1, 0.6]");
}

void add_gen_diagnostics(IntervalReport& r, const GenContour& c) {
  r.diagnostics["nu"] = c.nu();
  r.diagnostics["denominator"] = c.denominator().value;
  r.diagnostics["eta_star"] = c.denominator().at_infinity ? -1.0 : c.denominator().eta;
  r.diagnostics["eta_at_infinity"] = c.denominator().at_infinity ? 1.0 : 0.0;
}

}  // namespace

const char* method_tag(Method m) noexcept {
  for (const auto& t : kTags)
    if (t.method == m) return t.name;
  return "unknown";
}

std::optional<Method> parse_method(std::string_view tag) {
  for (const auto& t : kTags)
    if (tag == t.name) return t.method;
  return std::nullopt;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> v;
    for (const auto& t : kTags) v.push_back(t.method);
    return v;
  }();
  return methods;
}

JointContour build_joint_contour(const PredictionProblem& problem, const MethodOptions& options) {
  JointOptions j;
  j.rho_grid = options.rho_grid;
  j.m = options.joint_m;
  j.sampler = options.sampler;
  j.threads = options.threads;
  j.seed = splitmix64(options.seed ^ (method_stream(Method::Joint) << 32));
  return marginal_contour(problem.stats, problem.consts, problem.center, j);
}

GenContour build_gen_contour(Method method, const PredictionProblem& problem,
                             const MethodOptions& options, const VarianceEstimate* fit,
                             double* delta_out) {
  const GenAssociation assoc = make_gen_association(problem.stats, problem.consts, problem.center);
  if (method == Method::Gen) return GenContour(assoc, GenSpec{GenMode::Sup, 0.0, 0.0});
  if (method != Method::AdjGen) fail(ErrorCode::Usage, "not a generalized IM method");
  VarianceEstimate own;
  if (!fit) {
    own = reml_fit(problem.stats);
    fit = &own;
  }
  Engine rng = substream(options.seed, method_stream(Method::AdjGen));
  const EtaStandardError se = bootstrap_se_eta(problem.stats, *fit, options.delta_B, rng);
  if (delta_out) *delta_out = se.se;
  return GenContour(assoc, GenSpec{GenMode::Adjusted, fit->eta_hat, se.se});
}

Contour as_contour(const JointContour& c) {
  return Contour{[&c](double t) { return c.plausibility(t); }, c.center(), c.scale()};
}

Contour as_contour(const GenContour& c) {
  return Contour{[&c](double t) { return c.plausibility(t); }, c.center(), c.scale()};
}

std::vector<MethodResult> compute_methods(const std::vector<Method>& methods,
                                          const PredictionProblem& problem,
                                          const std::vector<double>& alphas,
                                          const MethodOptions& options) {
  std::optional<VarianceEstimate> fit;
  std::unique_ptr<JointContour> joint;
  auto need_fit = [&]() -> const VarianceEstimate& {
    if (!fit) fit = reml_fit(problem.stats);
    return *fit;
  };
  const TargetKind kind = problem.target.kind;

  std::vector<MethodResult> results;
  for (Method m : methods) {
    MethodResult res;
    res.method = m;
    try {
      switch (m) {
        case Method::Oracle:
          for (double a : alphas)
            res.intervals.push_back(
                closed_form_interval(ClosedForm::Oracle, problem, a, options.truth));
          break;
        case Method::StudentT:
        case Method::Satterthwaite:
        case Method::GenSatterthwaite: {
          const ClosedForm cf = m == Method::StudentT        ? ClosedForm::StudentT
                                : m == Method::Satterthwaite ? ClosedForm::Satterthwaite
                                                             : ClosedForm::GenSatterthwaite;
          for (double a : alphas)
            res.intervals.push_back(
                closed_form_interval(cf, problem, a, std::nullopt, &need_fit()));
          break;
        }
        case Method::ParamBoot: {
          Engine rng = substream(options.seed, method_stream(m));
          const BootDraws draws =
              parametric_bootstrap_draws(problem, need_fit(), options.param_boot_B, rng);
          for (double a : alphas) {
            auto r = percentile_interval(draws, a, method_tag(m), kind);
            r.diagnostics["B"] = static_cast<double>(options.param_boot_B);
            r.diagnostics["reml_boundary"] = need_fit().boundary ? 1.0 : 0.0;
            res.intervals.push_back(std::move(r));
          }
          break;
        }
        case Method::NonparamBoot: {
          Engine rng = substream(options.seed, method_stream(m));
          const BootDraws draws =
              nonparametric_bootstrap_draws(problem, options.nonparam_boot_B, rng);
          for (double a : alphas) {
            auto r = percentile_interval(draws, a, method_tag(m), kind);
            r.diagnostics["B"] = static_cast<double>(options.nonparam_boot_B);
            res.intervals.push_back(std::move(r));
          }
          break;
        }
        case Method::Joint:
        case Method::AdjJoint: {
          if (!joint) joint = std::make_unique<JointContour>(build_joint_contour(problem, options));
          const Contour c = as_contour(*joint);
          const CutMode mode = m == Method::Joint ? CutMode::Nominal : CutMode::JointAdjusted;
          res.cut_failures.assign(alphas.size(), std::nullopt);
          std::size_t failed = 0;
          for (std::size_t i = 0; i < alphas.size(); ++i) {
            IntervalReport r;
            try {
              r = alpha_cut(c, alphas[i], mode);
            } catch (const Error& e) {
              if (++failed == alphas.size()) throw;
              res.cut_failures[i] = CutFailure{e.code(), e.what()};
              r.lower = r.upper = std::numeric_limits<double>::quiet_NaN();
              r.level = 1.0 - alphas[i];
            }
            r.method = method_tag(m);
            r.kind = kind;
            add_joint_diagnostics(r, *joint);
            res.intervals.push_back(std::move(r));
          }
          break;
        }
        case Method::Gen:
        case Method::AdjGen: {
          double delta = 0.0;
          const GenContour g =
              build_gen_contour(m, problem, options, m == Method::AdjGen ? &need_fit() : nullptr,
                                &delta);
          for (double a : alphas) {
            const double half = g.half_width(a);
            IntervalReport r;
            r.lower = g.center() - half;
            r.upper = g.center() + half;
            r.level = 1.0 - a;
            r.method = method_tag(m);
            r.kind = kind;
            add_gen_diagnostics(r, g);
            if (m == Method::AdjGen) {
              r.diagnostics["eta_hat"] = need_fit().eta_hat;
              r.diagnostics["delta"] = delta;
            }
            res.intervals.push_back(std::move(r));
          }
          break;
        }
        case Method::IidNormal:
          for (double a : alphas) res.intervals.push_back(iid_normal_interval(problem.data.y, a));
          break;
      }
    } catch (const Error& e) {
      res.ok = false;
      res.error = e.code();
      res.message = e.what();
      res.intervals.clear();
      res.cut_failures.clear();
    }
    if (res.cut_failures.empty()) res.cut_failures.assign(res.intervals.size(), std::nullopt);
    results.push_back(std::move(res));
  }
  return results;
}

IntervalReport compute_interval(Method method, const PredictionProblem& problem, double alpha,
                                const MethodOptions& options) {
  auto results = compute_methods({method}, problem, {alpha}, options);
  if (!results[0].ok) fail(results[0].error, results[0].message);
  return results[0].intervals.front();
}

}  // namespace imlmm
