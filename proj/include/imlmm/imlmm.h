/* C interface to the imlmm prediction library.
 *
 * All functions return an imlmm_status. On failure, imlmm_last_error_message()
 * describes the error for the calling thread. Strings returned through char**
 * out-parameters are owned by the caller and released with imlmm_free_string().
 */
#ifndef IMLMM_IMLMM_H
#define IMLMM_IMLMM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(IMLMM_BUILDING_LIBRARY)
#define IMLMM_API __declspec(dllexport)
#else
#define IMLMM_API __declspec(dllimport)
#endif
#else
#define IMLMM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum imlmm_status {
  IMLMM_OK = 0,
  IMLMM_ERR_USAGE = 2,
  IMLMM_ERR_IO = 3,
  IMLMM_ERR_PARSE = 4,
  IMLMM_ERR_MISSING_COLUMN = 5,
  IMLMM_ERR_NON_NUMERIC = 6,
  IMLMM_ERR_EMPTY_GROUP = 7,
  IMLMM_ERR_RANK_DEFICIENT = 8,
  IMLMM_ERR_DIMENSION_MISMATCH = 9,
  IMLMM_ERR_DEGENERATE_SPECTRUM = 10,
  IMLMM_ERR_DEGENERATE_DATA = 11,
  IMLMM_ERR_DOMAIN = 12,
  IMLMM_ERR_ESTIMATION = 13,
  IMLMM_ERR_UNBOUNDED_DENOMINATOR = 14,
  IMLMM_ERR_EMPTY_CUT = 15,
  IMLMM_ERR_BRACKET = 16,
  IMLMM_ERR_INTERNAL = 99
} imlmm_status;

typedef enum imlmm_target {
  IMLMM_TARGET_GROUP_MEAN = 0,
  IMLMM_TARGET_NEW_OBS = 1
} imlmm_target;

typedef struct imlmm_dataset imlmm_dataset;
typedef struct imlmm_model imlmm_model;

/* Column mapping for CSV input. NULL names select the defaults "response"
 * and "group". Without random covariates the model has a random intercept. */
typedef struct imlmm_csv_schema {
  const char* response;
  const char* group;
  const char* const* covariates;
  size_t n_covariates;
  const char* const* random_covariates;
  size_t n_random_covariates;
  int intercept; /* nonzero adds an intercept column to X */
} imlmm_csv_schema;

typedef struct imlmm_options {
  uint64_t seed;
  unsigned threads; /* 0: hardware concurrency */
  size_t rho_grid_size;
  size_t joint_m;
  size_t param_boot_b;
  size_t nonparam_boot_b;
  size_t delta_b;
  int has_truth; /* oracle method only */
  double true_sigma_alpha2;
  double true_sigma_eps2;
} imlmm_options;

typedef struct imlmm_interval {
  double lower;
  double upper;
  double level;
} imlmm_interval;

IMLMM_API void imlmm_csv_schema_init(imlmm_csv_schema* schema);
IMLMM_API void imlmm_options_init(imlmm_options* options);

IMLMM_API imlmm_status imlmm_dataset_load_csv(const char* path, const imlmm_csv_schema* schema,
                                              imlmm_dataset** out);
/* Intercept-only random-intercept data; y is ordered group by group. */
IMLMM_API imlmm_status imlmm_dataset_from_groups(const double* y, const int* group_sizes,
                                                 size_t n_groups, imlmm_dataset** out);
IMLMM_API void imlmm_dataset_free(imlmm_dataset* dataset);

/* x (length p) and z (length a) may be NULL for intercept-only data. */
IMLMM_API imlmm_status imlmm_model_new(const imlmm_dataset* dataset, imlmm_target target,
                                       const double* x, size_t x_len, const double* z,
                                       size_t z_len, imlmm_model** out);
IMLMM_API void imlmm_model_free(imlmm_model* model);

IMLMM_API imlmm_status imlmm_model_summary_json(const imlmm_model* model, char** out_json);
IMLMM_API imlmm_status imlmm_fit_json(const imlmm_model* model, char** out_json);

/* method: oracle, student-t, satterthwaite, gen-satterthwaite, param-boot,
 * nonparam-boot, joint, adj-joint, gen, adj-gen, iid-normal. */
IMLMM_API imlmm_status imlmm_predict(const imlmm_model* model, const char* method, double level,
                                     const imlmm_options* options, imlmm_interval* out);
IMLMM_API imlmm_status imlmm_predict_json(const imlmm_model* model, const char* method,
                                          double level, const imlmm_options* options,
                                          char** out_json);

/* Plausibility at `count` points; method is joint, gen or adj-gen.
 * argmax_rho may be NULL and is -1 for the generalized contours. */
IMLMM_API imlmm_status imlmm_contour(const imlmm_model* model, const char* method,
                                     const double* thetas, size_t count,
                                     const imlmm_options* options, double* plausibility,
                                     double* argmax_rho);
/* Tabulated contour as CSV plus diagnostics JSON. When lo >= hi the range is
 * chosen around the 99% interval. */
IMLMM_API imlmm_status imlmm_contour_csv(const imlmm_model* model, const char* method,
                                         size_t points, double lo, double hi,
                                         const imlmm_options* options, char** out_csv,
                                         char** out_diagnostics_json);

/* Runs a coverage study. threads > 0 overrides the config. */
IMLMM_API imlmm_status imlmm_simulate(const char* config_json, unsigned threads,
                                      char** out_report_json, char** out_report_csv);

IMLMM_API void imlmm_free_string(char* s);
IMLMM_API const char* imlmm_last_error_message(void);
IMLMM_API const char* imlmm_status_name(imlmm_status status);
IMLMM_API const char* imlmm_version(void);

#ifdef __cplusplus
}
#endif

#endif
