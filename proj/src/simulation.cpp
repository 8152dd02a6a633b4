#include "simulation.hpp"

#include "errors.hpp"
#include "parallel.hpp"
#include "random.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace imlmm {

using nlohmann::json;

std::vector<int> design_sizes(const std::string& name) {
  if (name == "A") return std::vector<int>(5, 6);
  if (name == "B") return std::vector<int>(10, 12);
  if (name == "C") return {4, 4, 4, 6, 12};
  if (name == "D") return {4, 4, 7, 11, 13, 16, 16, 16, 16, 17};
  fail(ErrorCode::Usage, "unknown design '" + name + "'");
}

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::uint64_t rep_seed(std::uint64_t master, std::size_t rep) {
  return splitmix64(splitmix64(master) ^ splitmix64(rep + 0x5eedULL));
}

struct Score {
  bool covered = false;
  double length = 0.0;
  std::string error;  // non-empty when this method failed at this level
};

struct RepOutcome {
  std::vector<std::vector<Score>> scores;  // [method][alpha]
};

}  // namespace

void validate_study_config(const StudyConfig& c) {
  if (c.group_sizes.size() < 2) fail(ErrorCode::Usage, "study needs at least two groups");
  for (int s : c.group_sizes)
    if (s < 1) fail(ErrorCode::Usage, "group sizes must be positive");
  if (!(c.sigma_alpha2 >= 0.0) || !(c.sigma_eps2 > 0.0))
    fail(ErrorCode::Usage, "need sigma_alpha2 >= 0 and sigma_eps2 > 0");
  if (c.replications < 100) fail(ErrorCode::Usage, "replications must be at least 100");
  if (c.alphas.empty()) fail(ErrorCode::Usage, "alphas must not be empty");
  for (double a : c.alphas)
    if (!(a > 0.0 && a < 1.0)) fail(ErrorCode::Usage, "alphas must lie in (0, 1)");
  if (c.methods.empty()) fail(ErrorCode::Usage, "methods must not be empty");
  if (c.rho_grid_size < 1) fail(ErrorCode::Usage, "rho_grid_size must be positive");
  if (c.joint_m < 1000) fail(ErrorCode::Usage, "joint_m must be at least 1000");
}

StudyConfig parse_study_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("study config is not valid JSON: ") + e.what());
  }
  StudyConfig c;
  try {
    read_opt(j, "design", c.design);
    if (c.design == "custom") {
      c.group_sizes = j.at("group_sizes").get<std::vector<int>>();
    } else {
      c.group_sizes = design_sizes(c.design);
    }
    read_opt(j, "sigma_alpha2", c.sigma_alpha2);
    read_opt(j, "sigma_eps2", c.sigma_eps2);
    read_opt(j, "mu", c.mu);
    if (j.contains("target")) {
      const auto t = j.at("target").get<std::string>();
      if (t == "group-mean")
        c.target = TargetKind::GroupMean;
      else if (t == "new-obs")
        c.target = TargetKind::NewObservation;
      else
        fail(ErrorCode::Usage, "target must be group-mean or new-obs");
    }
    if (j.contains("methods")) {
      for (const auto& m : j.at("methods")) {
        const auto tag = m.get<std::string>();
        const auto method = parse_method(tag);
        if (!method) fail(ErrorCode::Usage, "unknown method '" + tag + "'");
        c.methods.push_back(*method);
      }
    } else {
      c.methods = {Method::Oracle, Method::StudentT, Method::Gen};
    }
    read_opt(j, "replications", c.replications);
    read_opt(j, "alphas", c.alphas);
    read_opt(j, "seed", c.seed);
    read_opt(j, "threads", c.threads);
    read_opt(j, "rho_grid_size", c.rho_grid_size);
    read_opt(j, "joint_m", c.joint_m);
    read_opt(j, "param_boot_B", c.param_boot_B);
    read_opt(j, "nonparam_boot_B", c.nonparam_boot_B);
    read_opt(j, "delta_B", c.delta_B);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("study config field has the wrong type: ") + e.what());
  }
  validate_study_config(c);
  return c;
}

std::string study_config_json(const StudyConfig& c) {
  json j;
  j["design"] = c.design;
  j["group_sizes"] = c.group_sizes;
  j["sigma_alpha2"] = c.sigma_alpha2;
  j["sigma_eps2"] = c.sigma_eps2;
  j["mu"] = c.mu;
  j["target"] = target_kind_tag(c.target);
  std::vector<std::string> tags;
  for (Method m : c.methods) tags.emplace_back(method_tag(m));
  j["methods"] = tags;
  j["replications"] = c.replications;
  j["alphas"] = c.alphas;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["rho_grid_size"] = c.rho_grid_size;
  j["joint_m"] = c.joint_m;
  j["param_boot_B"] = c.param_boot_B;
  j["nonparam_boot_B"] = c.nonparam_boot_B;
  j["delta_B"] = c.delta_B;
  return j.dump(2);
}

SimDraw generate_dataset(const StudyConfig& config, std::size_t rep) {
  Engine rng = substream(config.seed, rep, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd_a = std::sqrt(config.sigma_alpha2), sd_e = std::sqrt(config.sigma_eps2);
  int n = 0;
  for (int s : config.group_sizes) n += s;
  VectorXd y(n);
  int j = 0;
  for (int s : config.group_sizes) {
    const double a = sd_a * normal(rng);
    for (int k = 0; k < s; ++k) y(j++) = config.mu + a + sd_e * normal(rng);
  }
  SimDraw out;
  out.theta = config.mu + sd_a * normal(rng);
  out.y_star = out.theta + sd_e * normal(rng);
  out.data = random_intercept_dataset(y, config.group_sizes);
  return out;
}

SimReport run_coverage_study(const StudyConfig& config) {
  validate_study_config(config);
  const auto start = std::chrono::steady_clock::now();

  std::vector<Method> methods = config.methods;
  if (std::find(methods.begin(), methods.end(), Method::Oracle) == methods.end())
    methods.insert(methods.begin(), Method::Oracle);

  const auto spectrum =
      std::make_shared<const Spectrum>(eigen_structure(generate_dataset(config, 0).data));

  MethodOptions base;
  base.rho_grid = default_rho_grid(config.rho_grid_size);
  base.joint_m = config.joint_m;
  base.sampler.estimate_ess = false;
  base.param_boot_B = config.param_boot_B;
  base.nonparam_boot_B = config.nonparam_boot_B;
  base.delta_B = config.delta_B;
  base.truth = VariancePair{config.sigma_alpha2, config.sigma_eps2};
  base.threads = 1;

  std::vector<RepOutcome> outcomes(config.replications);
  const unsigned threads = config.threads == 0 ? default_threads() : config.threads;
  parallel_for(config.replications, threads, [&](std::size_t rep) {
    const SimDraw draw = generate_dataset(config, rep);
    const double truth = config.target == TargetKind::GroupMean ? draw.theta : draw.y_star;
    RepOutcome& out = outcomes[rep];
    out.scores.assign(methods.size(), std::vector<Score>(config.alphas.size()));
    MethodOptions opts = base;
    opts.seed = rep_seed(config.seed, rep);
    std::vector<MethodResult> results;
    try {
      const PredictionProblem problem =
          make_problem(draw.data, default_target(draw.data, config.target), spectrum);
      results = compute_methods(methods, problem, config.alphas, opts);
    } catch (const Error& e) {
      for (auto& row : out.scores)
        for (auto& sc : row) sc.error = error_code_name(e.code());
      return;
    }
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const MethodResult& res = results[k];
      for (std::size_t a = 0; a < config.alphas.size(); ++a) {
        Score& sc = out.scores[k][a];
        if (!res.ok) {
          sc.error = error_code_name(res.error);
        } else if (res.cut_failures[a]) {
          sc.error = error_code_name(res.cut_failures[a]->code);
        } else {
          sc.covered = res.intervals[a].contains(truth);
          sc.length = res.intervals[a].length();
        }
      }
    }
  });

  SimReport report;
  report.config = config;
  std::vector<double> oracle_length(config.alphas.size(), 0.0);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    for (std::size_t a = 0; a < config.alphas.size(); ++a) {
      MethodSummary s;
      s.method = methods[k];
      s.alpha = config.alphas[a];
      double covered = 0.0, length = 0.0;
      for (const auto& o : outcomes) {
        const Score& sc = o.scores[k][a];
        if (!sc.error.empty()) {
          ++s.failures;
          ++s.failure_kinds[sc.error];
          continue;
        }
        ++s.successes;
        covered += sc.covered ? 1.0 : 0.0;
        length += sc.length;
      }
      if (s.successes > 0) {
        const double m = static_cast<double>(s.successes);
        s.coverage = covered / m;
        s.mean_length = length / m;
        const double nominal = 1.0 - s.alpha;
        s.coverage_se = std::sqrt(nominal * (1.0 - nominal) / m);
        s.under_covers = s.coverage < nominal - 3.0 * s.coverage_se;
        s.below_paper_threshold = std::abs(s.alpha - 0.05) < 1e-12 && s.coverage < 0.935;
      }
      if (methods[k] == Method::Oracle) oracle_length[a] = s.mean_length;
      report.summaries.push_back(s);
    }
  }
  for (auto& s : report.summaries) {
    const auto a = static_cast<std::size_t>(
        std::find(config.alphas.begin(), config.alphas.end(), s.alpha) - config.alphas.begin());
    s.length_ratio = oracle_length[a] > 0.0 ? s.mean_length / oracle_length[a] : 0.0;
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

const MethodSummary& find_summary(const SimReport& report, Method method, double alpha) {
  for (const auto& s : report.summaries)
    if (s.method == method && std::abs(s.alpha - alpha) < 1e-12) return s;
  fail(ErrorCode::Usage, std::string("no summary for method ") + method_tag(method));
}

}  // namespace imlmm
