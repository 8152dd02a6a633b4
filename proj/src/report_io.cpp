#include "report_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace imlmm {

using nlohmann::json;

namespace {

// Shortest text that reads back to the same double.
std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json summary_object(const PredictionProblem& p) {
  const auto& sp = *p.stats.spectrum;
  json j;
  j["n"] = p.data.n();
  j["N"] = p.data.num_groups();
  j["p"] = p.data.p();
  j["L"] = sp.L();
  j["lambdas"] = sp.lambdas;
  j["mults"] = sp.mults;
  j["center"] = p.center;
  j["c1"] = p.consts.c1;
  j["c2"] = p.consts.c2;
  j["target"] = target_kind_tag(p.target.kind);
  return j;
}

}  // namespace

std::string interval_report_json(const IntervalReport& r) {
  json diag = json::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = finite_or_null(v);
  diag["warnings"] = r.warnings;
  json j;
  j["method"] = r.method;
  j["kind"] = target_kind_tag(r.kind);
  j["level"] = r.level;
  j["lower"] = r.lower;
  j["upper"] = r.upper;
  j["diagnostics"] = diag;
  return j.dump(2);
}

std::string dataset_summary_json(const PredictionProblem& problem) {
  return summary_object(problem).dump(2);
}

std::string fit_json(const PredictionProblem& problem, const VarianceEstimate& fit) {
  json j;
  j["dataset"] = summary_object(problem);
  j["reml"] = {{"sigma_alpha2", fit.sigma_alpha2}, {"sigma_eps2", fit.sigma_eps2},
               {"eta_hat", fit.eta_hat},           {"rho_hat", fit.rho_hat},
               {"converged", fit.converged},       {"boundary", fit.boundary},
               {"objective", fit.objective}};
  j["beta_hat"] = std::vector<double>(problem.stats.By.data(),
                                      problem.stats.By.data() + problem.stats.By.size());
  j["S"] = problem.stats.S;
  return j.dump(2);
}

std::string sim_report_json(const SimReport& report) {
  json rows = json::array();
  for (const auto& s : report.summaries) {
    json kinds = json::object();
    for (const auto& [k, v] : s.failure_kinds) kinds[k] = v;
    rows.push_back({{"method", method_tag(s.method)},
                    {"alpha", s.alpha},
                    {"level", 1.0 - s.alpha},
                    {"successes", s.successes},
                    {"failures", s.failures},
                    {"failure_kinds", kinds},
                    {"coverage", s.coverage},
                    {"coverage_se", s.coverage_se},
                    {"mean_length", s.mean_length},
                    {"length_ratio", s.length_ratio},
                    {"under_covers", s.under_covers},
                    {"below_paper_threshold", s.below_paper_threshold}});
  }
  json j;
  j["config"] = json::parse(study_config_json(report.config));
  // Worker count does not affect results; it is recorded in the run manifest instead.
  j["config"].erase("threads");
  j["summaries"] = rows;
  return j.dump(2);
}

std::string sim_report_csv(const SimReport& report) {
  std::ostringstream out;
  out << "method,alpha,coverage,length_ratio,coverage_se,mean_length,successes,failures\n";
  for (const auto& s : report.summaries)
    out << method_tag(s.method) << ',' << number(s.alpha) << ',' << number(s.coverage) << ','
        << number(s.length_ratio) << ',' << number(s.coverage_se) << ','
        << number(s.mean_length) << ',' << s.successes << ',' << s.failures << '\n';
  return out.str();
}

std::string contour_csv(const std::vector<ContourRow>& rows) {
  std::ostringstream out;
  out << "theta,plausibility,argmax_rho\n";
  for (const auto& r : rows) {
    out << number(r.theta) << ',' << number(r.plausibility) << ',';
    if (r.argmax_rho >= 0.0) out << number(r.argmax_rho);
    out << '\n';
  }
  return out.str();
}

std::string joint_contour_diagnostics_json(const JointContour& c) {
  json slices = json::array();
  for (const auto& s : c.slices())
    slices.push_back({{"rho", s.rho},
                      {"acceptance_rate", s.acceptance_rate},
                      {"ess", s.ess},
                      {"tuning_failure", s.tuning_failure}});
  json j;
  j["mode"] = "joint";
  j["center"] = c.center();
  j["scale"] = c.scale();
  j["draws_per_rho"] = c.slices().empty() ? 0 : c.slices().front().sorted_log_density.size();
  j["any_tuning_failure"] = c.any_tuning_failure();
  j["slices"] = slices;
  return j.dump(2);
}

std::string gen_contour_diagnostics_json(const GenContour& c, const std::string& mode,
                                         double eta_hat, double delta) {
  json j;
  j["mode"] = mode;
  j["center"] = c.center();
  j["scale"] = c.scale();
  j["nu"] = c.nu();
  j["denominator"] = c.denominator().value;
  j["eta_star"] = finite_or_null(c.denominator().eta);
  j["eta_at_infinity"] = c.denominator().at_infinity;
  if (mode == "adj-gen") {
    j["eta_hat"] = eta_hat;
    j["delta"] = delta;
  }
  return j.dump(2);
}

}  // namespace imlmm
