#ifndef IMLMM_SIMULATION_HPP
#define IMLMM_SIMULATION_HPP

#include "methods.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace imlmm {

/// Group sizes of the named designs A-D.
std::vector<int> design_sizes(const std::string& name);

struct StudyConfig {
  std::string design = "A";  // A, B, C, D or custom
  std::vector<int> group_sizes;
  double sigma_alpha2 = 0.5;
  double sigma_eps2 = 0.5;
  double mu = 0.0;
  TargetKind target = TargetKind::GroupMean;
  std::vector<Method> methods;
  std::size_t replications = 500;
  std::vector<double> alphas{0.05};
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::size_t rho_grid_size = 100;
  std::size_t joint_m = 5000;
  std::size_t param_boot_B = 500;
  std::size_t nonparam_boot_B = 500;
  std::size_t delta_B = 100;
};

/// Parses and validates a study config (JSON text). Unset fields keep their
/// defaults; `group_sizes` is filled from the design name.
StudyConfig parse_study_config(const std::string& json_text);
std::string study_config_json(const StudyConfig& config);
void validate_study_config(const StudyConfig& config);

struct SimDraw {
  Dataset data;
  double theta = 0.0;  // realized new-group mean
  double y_star = 0.0;  // realized new observation from that group
};

/// Deterministic in (config.seed, rep).
SimDraw generate_dataset(const StudyConfig& config, std::size_t rep);

struct MethodSummary {
  Method method = Method::Oracle;
  double alpha = 0.05;
  std::size_t successes = 0;
  std::size_t failures = 0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_length = 0.0;
  double length_ratio = 0.0;
  bool under_covers = false;        // coverage < 1 - alpha - 3 SE
  bool below_paper_threshold = false;  // 95% level and coverage < 0.935
  std::map<std::string, std::size_t> failure_kinds;
};

struct SimReport {
  StudyConfig config;
  std::vector<MethodSummary> summaries;  // method-major, then alpha
  double seconds = 0.0;                   // wall time; not serialized into the report
};

SimReport run_coverage_study(const StudyConfig& config);

const MethodSummary& find_summary(const SimReport& report, Method method, double alpha);

}  // namespace imlmm

#endif
