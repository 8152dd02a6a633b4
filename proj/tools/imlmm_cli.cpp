// Command-line front end over the imlmm C API.
#include "imlmm/imlmm.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

struct CliFailure {
  int code;
  std::string name;
  std::string message;
};

[[noreturn]] void raise(imlmm_status status, const std::string& context = {}) {
  std::string message = imlmm_last_error_message();
  if (!context.empty()) message = context + ": " + message;
  throw CliFailure{static_cast<int>(status), imlmm_status_name(status), message};
}

void check(imlmm_status status) {
  if (status != IMLMM_OK) raise(status);
}

// Owns a string returned by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { imlmm_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

std::string stem_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliFailure{IMLMM_ERR_IO, imlmm_status_name(IMLMM_ERR_IO), "cannot write " + path};
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw CliFailure{IMLMM_ERR_IO, imlmm_status_name(IMLMM_ERR_IO), "cannot write " + path};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure{IMLMM_ERR_IO, imlmm_status_name(IMLMM_ERR_IO), "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

unsigned env_threads() {
  if (const char* v = std::getenv("IMLMM_THREADS")) {
    char* end = nullptr;
    const unsigned long n = std::strtoul(v, &end, 10);
    if (end != v && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  return 0;
}

struct DataArgs {
  std::string data;
  std::string response = "response";
  std::string group = "group";
  std::vector<std::string> covariates;
  std::vector<std::string> random_covariates;
  bool no_intercept = false;
  std::string target = "group-mean";
  std::vector<double> x;
  std::vector<double> z;
};

struct RunArgs {
  std::uint64_t seed = 20240601;
  std::optional<unsigned> threads;
  std::size_t rho_grid = 100;
  std::size_t mcmc_draws = 5000;
  std::size_t boot_b = 500;
  std::size_t nonparam_boot_b = 500;
  std::size_t delta_b = 100;
  std::optional<double> true_sigma_alpha2;
  std::optional<double> true_sigma_eps2;
};

void add_data_options(CLI::App* cmd, DataArgs& d, bool with_target) {
  cmd->add_option("--data", d.data, "CSV file with one row per observation")->required();
  cmd->add_option("--response", d.response, "response column");
  cmd->add_option("--group", d.group, "group column");
  cmd->add_option("--covariate", d.covariates, "fixed-effect covariate column (repeatable)");
  cmd->add_option("--random-covariate", d.random_covariates,
                  "random-effect covariate column (repeatable; default random intercept)");
  cmd->add_flag("--no-intercept", d.no_intercept, "omit the fixed intercept");
  if (with_target) {
    cmd->add_option("--target", d.target, "prediction target")
        ->check(CLI::IsMember({"group-mean", "new-obs"}));
    cmd->add_option("--x", d.x, "fixed-effect covariates of the target")->delimiter(',');
    cmd->add_option("--z", d.z, "random-effect covariates of the target")->delimiter(',');
  }
}

void add_run_options(CLI::App* cmd, RunArgs& r) {
  cmd->add_option("--seed", r.seed, "master seed");
  cmd->add_option("--threads", r.threads, "worker threads (env IMLMM_THREADS)");
  cmd->add_option("--rho-grid", r.rho_grid, "rho grid size for the joint IM");
  cmd->add_option("--mcmc-draws", r.mcmc_draws, "MCMC draws per rho for the joint IM");
  cmd->add_option("--boot-b", r.boot_b, "parametric bootstrap resamples");
  cmd->add_option("--nonparam-boot-b", r.nonparam_boot_b, "nonparametric bootstrap resamples");
  cmd->add_option("--delta-b", r.delta_b, "bootstrap resamples for the adjusted eta offset");
  cmd->add_option("--true-sigma-alpha2", r.true_sigma_alpha2, "true between-group variance (oracle)");
  cmd->add_option("--true-sigma-eps2", r.true_sigma_eps2, "true within-group variance (oracle)");
}

unsigned resolve_threads(const RunArgs& r) { return r.threads ? *r.threads : env_threads(); }

imlmm_options to_options(const RunArgs& r) {
  imlmm_options o;
  imlmm_options_init(&o);
  o.seed = r.seed;
  o.threads = resolve_threads(r);
  o.rho_grid_size = r.rho_grid;
  o.joint_m = r.mcmc_draws;
  o.param_boot_b = r.boot_b;
  o.nonparam_boot_b = r.nonparam_boot_b;
  o.delta_b = r.delta_b;
  if (r.true_sigma_alpha2 || r.true_sigma_eps2) {
    if (!r.true_sigma_alpha2 || !r.true_sigma_eps2)
      throw CliFailure{IMLMM_ERR_USAGE, imlmm_status_name(IMLMM_ERR_USAGE),
                       "--true-sigma-alpha2 and --true-sigma-eps2 go together"};
    o.has_truth = 1;
    o.true_sigma_alpha2 = *r.true_sigma_alpha2;
    o.true_sigma_eps2 = *r.true_sigma_eps2;
  }
  return o;
}

json run_echo(const RunArgs& r) {
  json j;
  j["seed"] = r.seed;
  j["threads"] = resolve_threads(r);
  j["rho_grid"] = r.rho_grid;
  j["mcmc_draws"] = r.mcmc_draws;
  j["boot_b"] = r.boot_b;
  j["nonparam_boot_b"] = r.nonparam_boot_b;
  j["delta_b"] = r.delta_b;
  if (r.true_sigma_alpha2) j["true_sigma_alpha2"] = *r.true_sigma_alpha2;
  if (r.true_sigma_eps2) j["true_sigma_eps2"] = *r.true_sigma_eps2;
  return j;
}

json data_echo(const DataArgs& d) {
  json j;
  j["data"] = d.data;
  j["response"] = d.response;
  j["group"] = d.group;
  j["covariates"] = d.covariates;
  j["random_covariates"] = d.random_covariates;
  j["intercept"] = !d.no_intercept;
  j["target"] = d.target;
  if (!d.x.empty()) j["x"] = d.x;
  if (!d.z.empty()) j["z"] = d.z;
  return j;
}

class Model {
 public:
  explicit Model(const DataArgs& d) {
    std::vector<const char*> cov, rcov;
    for (const auto& c : d.covariates) cov.push_back(c.c_str());
    for (const auto& c : d.random_covariates) rcov.push_back(c.c_str());
    imlmm_csv_schema schema;
    imlmm_csv_schema_init(&schema);
    schema.response = d.response.c_str();
    schema.group = d.group.c_str();
    schema.covariates = cov.data();
    schema.n_covariates = cov.size();
    schema.random_covariates = rcov.data();
    schema.n_random_covariates = rcov.size();
    schema.intercept = d.no_intercept ? 0 : 1;
    const imlmm_status s = imlmm_dataset_load_csv(d.data.c_str(), &schema, &dataset_);
    if (s != IMLMM_OK) raise(s, d.data);
    const imlmm_target target =
        d.target == "new-obs" ? IMLMM_TARGET_NEW_OBS : IMLMM_TARGET_GROUP_MEAN;
    const bool given = !d.x.empty() || !d.z.empty();
    check(imlmm_model_new(dataset_, target, given ? d.x.data() : nullptr, d.x.size(),
                          given ? d.z.data() : nullptr, d.z.size(), &model_));
  }
  ~Model() {
    imlmm_model_free(model_);
    imlmm_dataset_free(dataset_);
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  const imlmm_model* get() const { return model_; }

 private:
  imlmm_dataset* dataset_ = nullptr;
  imlmm_model* model_ = nullptr;
};

void write_manifest(const std::string& out, const std::string& command, const json& config,
                    std::uint64_t seed, double seconds, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  m["tool_version"] = imlmm_version();
  m["wall_seconds"] = seconds;
  m["outputs"] = outputs;
  write_file(stem_of(out) + ".manifest.json", m.dump(2));
}

void print_error(const CliFailure& f) {
  json j;
  j["error"] = f.name;
  j["code"] = f.code;
  j["message"] = f.message;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction intervals for linear mixed models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(imlmm_version()));

  DataArgs data;
  RunArgs run;
  std::string out;
  std::string method;
  double level = 0.95;
  std::size_t points = 201;
  std::optional<double> lo, hi;
  std::string config_path;

  auto* fit = app.add_subcommand("fit", "REML fit and eigen-structure summary");
  add_data_options(fit, data, false);
  fit->add_option("--out", out, "output JSON")->capture_default_str();

  auto* contour = app.add_subcommand("contour", "tabulate a plausibility contour");
  add_data_options(contour, data, true);
  add_run_options(contour, run);
  contour->add_option("--method", method, "contour type")
      ->required()
      ->check(CLI::IsMember({"joint", "gen", "adj-gen"}));
  contour->add_option("--points", points, "grid points");
  contour->add_option("--lo", lo, "grid lower end");
  contour->add_option("--hi", hi, "grid upper end");
  contour->add_option("--out", out, "output CSV");

  auto* predict = app.add_subcommand("predict", "prediction interval by one method");
  add_data_options(predict, data, true);
  add_run_options(predict, run);
  predict->add_option("--method", method, "interval method")->required();
  predict->add_option("--level", level, "nominal level 1 - alpha");
  predict->add_option("--out", out, "output JSON");

  auto* simulate = app.add_subcommand("simulate", "coverage study from a JSON config");
  simulate->add_option("--config", config_path, "study config JSON")->required();
  simulate->add_option("--threads", run.threads, "worker threads (env IMLMM_THREADS)");
  simulate->add_option("--out", out, "output JSON; the CSV table goes next to it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error({IMLMM_ERR_USAGE, imlmm_status_name(IMLMM_ERR_USAGE), e.what()});
    return IMLMM_ERR_USAGE;
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  try {
    if (fit->parsed()) {
      if (out.empty()) out = "fit.json";
      Model model(data);
      LibString text;
      check(imlmm_fit_json(model.get(), &text.p));
      write_file(out, text.str());
      write_manifest(out, "fit", data_echo(data), 0, elapsed(), {out});
    } else if (contour->parsed()) {
      if (out.empty()) out = "contour.csv";
      if (lo.has_value() != hi.has_value())
        throw CliFailure{IMLMM_ERR_USAGE, imlmm_status_name(IMLMM_ERR_USAGE),
                         "--lo and --hi go together"};
      Model model(data);
      const imlmm_options opts = to_options(run);
      LibString csv, diag;
      check(imlmm_contour_csv(model.get(), method.c_str(), points, lo.value_or(0.0),
                              hi.value_or(0.0), &opts, &csv.p, &diag.p));
      const std::string diag_path = stem_of(out) + ".diagnostics.json";
      write_file(out, csv.str());
      write_file(diag_path, diag.str());
      json config = data_echo(data);
      config["run"] = run_echo(run);
      config["method"] = method;
      config["points"] = points;
      write_manifest(out, "contour", config, run.seed, elapsed(), {out, diag_path});
    } else if (predict->parsed()) {
      if (out.empty()) out = "interval.json";
      Model model(data);
      const imlmm_options opts = to_options(run);
      LibString text;
      check(imlmm_predict_json(model.get(), method.c_str(), level, &opts, &text.p));
      write_file(out, text.str());
      json config = data_echo(data);
      config["run"] = run_echo(run);
      config["method"] = method;
      config["level"] = level;
      write_manifest(out, "predict", config, run.seed, elapsed(), {out});
    } else if (simulate->parsed()) {
      if (out.empty()) out = "sim_report.json";
      const std::string text = read_file(config_path);
      LibString report, table;
      check(imlmm_simulate(text.c_str(), resolve_threads(run), &report.p, &table.p));
      const std::string csv_path = stem_of(out) + ".csv";
      write_file(out, report.str());
      write_file(csv_path, table.str());
      const json parsed = json::parse(report.str());
      json config = parsed.at("config");
      config["threads"] = resolve_threads(run);
      write_manifest(out, "simulate", config, config.at("seed"), elapsed(), {out, csv_path});
    }
  } catch (const CliFailure& f) {
    print_error(f);
    return f.code;
  } catch (const std::exception& e) {
    print_error({IMLMM_ERR_INTERNAL, imlmm_status_name(IMLMM_ERR_INTERNAL), e.what()});
    return IMLMM_ERR_INTERNAL;
  }
  return 0;
}
