#include "imlmm/imlmm.h"

#include "baselines.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "methods.hpp"
#include "parallel.hpp"
#include "report_io.hpp"
#include "simulation.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

struct imlmm_dataset {
  imlmm::Dataset data;
};

struct imlmm_model {
  imlmm::PredictionProblem problem;
};

namespace {

thread_local std::string g_last_error;

template <class F>
imlmm_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return IMLMM_OK;
  } catch (const imlmm::Error& e) {
    g_last_error = e.what();
    return static_cast<imlmm_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return IMLMM_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) imlmm::fail(imlmm::ErrorCode::Usage, std::string(what) + " must not be NULL");
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

imlmm::MethodOptions to_options(const imlmm_options* o) {
  imlmm_options defaults;
  imlmm_options_init(&defaults);
  if (!o) o = &defaults;
  imlmm::MethodOptions m;
  m.seed = o->seed;
  m.threads = o->threads == 0 ? imlmm::default_threads() : o->threads;
  if (o->rho_grid_size < 1) imlmm::fail(imlmm::ErrorCode::Usage, "rho_grid_size must be positive");
  m.rho_grid = imlmm::default_rho_grid(o->rho_grid_size);
  m.joint_m = o->joint_m;
  m.param_boot_B = o->param_boot_b;
  m.nonparam_boot_B = o->nonparam_boot_b;
  m.delta_B = o->delta_b;
  if (o->has_truth) m.truth = imlmm::VariancePair{o->true_sigma_alpha2, o->true_sigma_eps2};
  return m;
}

imlmm::Method to_method(const char* tag) {
  require(tag, "method");
  const auto m = imlmm::parse_method(tag);
  if (!m) imlmm::fail(imlmm::ErrorCode::Usage, std::string("unknown method '") + tag + "'");
  return *m;
}

double level_to_alpha(double level) {
  if (!(level > 0.0 && level < 1.0)) imlmm::fail(imlmm::ErrorCode::Domain, "level must lie in (0, 1)");
  return 1.0 - level;
}

// Contour evaluator shared by imlmm_contour and imlmm_contour_csv.
struct ContourHolder {
  std::unique_ptr<imlmm::JointContour> joint;
  std::unique_ptr<imlmm::GenContour> gen;
  std::string diagnostics;

  ContourHolder(const imlmm::PredictionProblem& p, imlmm::Method method,
                const imlmm::MethodOptions& options) {
    using imlmm::Method;
    if (method == Method::Joint) {
      joint = std::make_unique<imlmm::JointContour>(imlmm::build_joint_contour(p, options));
      diagnostics = imlmm::joint_contour_diagnostics_json(*joint);
    } else if (method == Method::Gen || method == Method::AdjGen) {
      double delta = 0.0;
      const imlmm::VarianceEstimate fit = imlmm::reml_fit(p.stats);
      gen = std::make_unique<imlmm::GenContour>(
          imlmm::build_gen_contour(method, p, options, &fit, &delta));
      diagnostics = imlmm::gen_contour_diagnostics_json(*gen, imlmm::method_tag(method),
                                                        fit.eta_hat, delta);
    } else {
      imlmm::fail(imlmm::ErrorCode::Usage, "contours are available for joint, gen and adj-gen");
    }
  }

  imlmm::ContourRow at(double theta) const {
    if (joint) {
      const auto point = joint->evaluate(theta);
      return {theta, point.plausibility, point.argmax_rho};
    }
    return {theta, gen->plausibility(theta), -1.0};
  }

  imlmm::Contour contour() const {
    return joint ? imlmm::as_contour(*joint) : imlmm::as_contour(*gen);
  }
};

}  // namespace

extern "C" {

void imlmm_csv_schema_init(imlmm_csv_schema* schema) {
  if (!schema) return;
  *schema = imlmm_csv_schema{};
  schema->intercept = 1;
}

void imlmm_options_init(imlmm_options* options) {
  if (!options) return;
  *options = imlmm_options{};
  options->seed = 20240601;
  options->threads = 0;
  options->rho_grid_size = 100;
  options->joint_m = 5000;
  options->param_boot_b = 500;
  options->nonparam_boot_b = 500;
  options->delta_b = 100;
}

imlmm_status imlmm_dataset_load_csv(const char* path, const imlmm_csv_schema* schema,
                                    imlmm_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    imlmm::CsvSchema s;
    if (schema) {
      if (schema->response) s.response = schema->response;
      if (schema->group) s.group = schema->group;
      for (size_t k = 0; k < schema->n_covariates; ++k) s.covariates.emplace_back(schema->covariates[k]);
      for (size_t k = 0; k < schema->n_random_covariates; ++k)
        s.random_covariates.emplace_back(schema->random_covariates[k]);
      s.intercept = schema->intercept != 0;
    }
    *out = new imlmm_dataset{imlmm::load_dataset(path, s)};
  });
}

imlmm_status imlmm_dataset_from_groups(const double* y, const int* group_sizes, size_t n_groups,
                                       imlmm_dataset** out) {
  return guarded([&] {
    require(y, "y");
    require(group_sizes, "group_sizes");
    require(out, "out");
    std::vector<int> sizes(group_sizes, group_sizes + n_groups);
    long n = 0;
    for (int s : sizes) {
      if (s < 1) imlmm::fail(imlmm::ErrorCode::EmptyGroup, "group sizes must be positive");
      n += s;
    }
    const Eigen::Map<const Eigen::VectorXd> yv(y, n);
    *out = new imlmm_dataset{imlmm::random_intercept_dataset(yv, sizes)};
  });
}

void imlmm_dataset_free(imlmm_dataset* dataset) { delete dataset; }

imlmm_status imlmm_model_new(const imlmm_dataset* dataset, imlmm_target target, const double* x,
                             size_t x_len, const double* z, size_t z_len, imlmm_model** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    const auto kind = target == IMLMM_TARGET_NEW_OBS ? imlmm::TargetKind::NewObservation
                                                     : imlmm::TargetKind::GroupMean;
    imlmm::PredictionTarget t;
    if (!x && !z) {
      t = imlmm::default_target(dataset->data, kind);
    } else {
      require(x, "x");
      require(z, "z");
      t.kind = kind;
      t.x = Eigen::Map<const Eigen::VectorXd>(x, static_cast<Eigen::Index>(x_len));
      t.z = Eigen::Map<const Eigen::VectorXd>(z, static_cast<Eigen::Index>(z_len));
    }
    *out = new imlmm_model{imlmm::make_problem(dataset->data, std::move(t))};
  });
}

void imlmm_model_free(imlmm_model* model) { delete model; }

imlmm_status imlmm_model_summary_json(const imlmm_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    *out_json = duplicate(imlmm::dataset_summary_json(model->problem));
  });
}

imlmm_status imlmm_fit_json(const imlmm_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    *out_json = duplicate(imlmm::fit_json(model->problem, imlmm::reml_fit(model->problem.stats)));
  });
}

imlmm_status imlmm_predict(const imlmm_model* model, const char* method, double level,
                           const imlmm_options* options, imlmm_interval* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const auto r = imlmm::compute_interval(to_method(method), model->problem, level_to_alpha(level),
                                           to_options(options));
    *out = imlmm_interval{r.lower, r.upper, r.level};
  });
}

imlmm_status imlmm_predict_json(const imlmm_model* model, const char* method, double level,
                                const imlmm_options* options, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    const auto r = imlmm::compute_interval(to_method(method), model->problem, level_to_alpha(level),
                                           to_options(options));
    *out_json = duplicate(imlmm::interval_report_json(r));
  });
}

imlmm_status imlmm_contour(const imlmm_model* model, const char* method, const double* thetas,
                           size_t count, const imlmm_options* options, double* plausibility,
                           double* argmax_rho) {
  return guarded([&] {
    require(model, "model");
    require(thetas, "thetas");
    require(plausibility, "plausibility");
    const ContourHolder holder(model->problem, to_method(method), to_options(options));
    for (size_t k = 0; k < count; ++k) {
      const auto row = holder.at(thetas[k]);
      plausibility[k] = row.plausibility;
      if (argmax_rho) argmax_rho[k] = row.argmax_rho;
    }
  });
}

imlmm_status imlmm_contour_csv(const imlmm_model* model, const char* method, size_t points,
                               double lo, double hi, const imlmm_options* options, char** out_csv,
                               char** out_diagnostics_json) {
  return guarded([&] {
    require(model, "model");
    require(out_csv, "out_csv");
    if (points < 2) imlmm::fail(imlmm::ErrorCode::Usage, "need at least two grid points");
    const ContourHolder holder(model->problem, to_method(method), to_options(options));
    std::vector<imlmm::ContourRow> rows(points);
    const double span = static_cast<double>(points - 1);
    if (lo < hi) {
      for (size_t k = 0; k < points; ++k)
        rows[k] = holder.at(k + 1 == points ? hi : lo + (hi - lo) * static_cast<double>(k) / span);
    } else {
      const imlmm::Contour c = holder.contour();
      double half = 8.0 * c.scale;
      try {
        const auto cut = imlmm::alpha_cut(c, 0.01);
        half = 1.25 * std::max(c.center - cut.lower, cut.upper - c.center);
      } catch (const imlmm::Error&) {
      }
      // Symmetric grid; odd point counts contain the center exactly.
      for (size_t k = 0; k < points; ++k)
        rows[k] = holder.at(c.center + half * (2.0 * static_cast<double>(k) / span - 1.0));
    }
    *out_csv = duplicate(imlmm::contour_csv(rows));
    if (out_diagnostics_json) *out_diagnostics_json = duplicate(holder.diagnostics);
  });
}

imlmm_status imlmm_simulate(const char* config_json, unsigned threads, char** out_report_json,
                            char** out_report_csv) {
  return guarded([&] {
    require(config_json, "config_json");
    require(out_report_json, "out_report_json");
    auto config = imlmm::parse_study_config(config_json);
    if (threads > 0) config.threads = threads;
    const auto report = imlmm::run_coverage_study(config);
    *out_report_json = duplicate(imlmm::sim_report_json(report));
    if (out_report_csv) *out_report_csv = duplicate(imlmm::sim_report_csv(report));
  });
}

void imlmm_free_string(char* s) { std::free(s); }

const char* imlmm_last_error_message(void) { return g_last_error.c_str(); }

const char* imlmm_status_name(imlmm_status status) {
  if (status == IMLMM_OK) return "Ok";
  return imlmm::error_code_name(static_cast<imlmm::ErrorCode>(status));
}

const char* imlmm_version(void) { return IMLMM_VERSION_STRING; }

}  // extern "C"
