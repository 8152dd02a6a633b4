/* Exercises the C interface from C so the header stays C-compatible. */
#include <imlmm/imlmm.h>

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

#define EXPECT_STATUS(expr, want)                                              \
  do {                                                                         \
    imlmm_status got_ = (expr);                                                \
    if (got_ != (want)) {                                                      \
      fprintf(stderr, "%s:%d: %s returned %s (%s)\n", __FILE__, __LINE__, #expr, \
              imlmm_status_name(got_), imlmm_last_error_message());            \
      ++failures;                                                              \
    }                                                                          \
  } while (0)

static void test_fixture_intervals(const char* data_dir) {
  char path[1024];
  snprintf(path, sizeof path, "%s/design_a_reml11.csv", data_dir);
  imlmm_csv_schema schema;
  imlmm_csv_schema_init(&schema);
  schema.group = "farm";
  imlmm_dataset* data = NULL;
  EXPECT_STATUS(imlmm_dataset_load_csv(path, &schema, &data), IMLMM_OK);
  if (!data) return;

  imlmm_model* model = NULL;
  EXPECT_STATUS(imlmm_model_new(data, IMLMM_TARGET_GROUP_MEAN, NULL, 0, NULL, 0, &model), IMLMM_OK);
  imlmm_dataset_free(data);
  if (!model) return;

  imlmm_options opts;
  imlmm_options_init(&opts);
  opts.threads = 1;
  imlmm_interval iv;
  EXPECT_STATUS(imlmm_predict(model, "student-t", 0.95, &opts, &iv), IMLMM_OK);
  EXPECT(fabs(iv.upper - 3.5342829823631168) < 1e-8);
  EXPECT(fabs(iv.lower + 3.5342829823631168) < 1e-8);
  EXPECT(fabs(iv.level - 0.95) < 1e-15);

  EXPECT_STATUS(imlmm_predict(model, "oracle", 0.95, &opts, &iv), IMLMM_ERR_USAGE);
  EXPECT(strlen(imlmm_last_error_message()) > 0);
  opts.has_truth = 1;
  opts.true_sigma_alpha2 = 1.0;
  opts.true_sigma_eps2 = 1.0;
  EXPECT_STATUS(imlmm_predict(model, "oracle", 0.95, &opts, &iv), IMLMM_OK);
  EXPECT(fabs(iv.upper - 2.176648619366346) < 1e-10);

  EXPECT_STATUS(imlmm_predict(model, "bayes", 0.95, &opts, &iv), IMLMM_ERR_USAGE);
  EXPECT_STATUS(imlmm_predict(model, "gen", 1.5, &opts, &iv), IMLMM_ERR_DOMAIN);

  char* json = NULL;
  EXPECT_STATUS(imlmm_predict_json(model, "gen", 0.9, &opts, &json), IMLMM_OK);
  EXPECT(json && strstr(json, "\"method\": \"gen\"") != NULL);
  imlmm_free_string(json);

  json = NULL;
  EXPECT_STATUS(imlmm_fit_json(model, &json), IMLMM_OK);
  EXPECT(json && strstr(json, "\"reml\"") != NULL);
  imlmm_free_string(json);

  json = NULL;
  EXPECT_STATUS(imlmm_model_summary_json(model, &json), IMLMM_OK);
  EXPECT(json && strstr(json, "\"lambdas\"") != NULL);
  imlmm_free_string(json);

  /* Generalized contour peaks at the point prediction (0 here). */
  double thetas[3] = {-1.0, 0.0, 1.0};
  double plaus[3], rho[3];
  EXPECT_STATUS(imlmm_contour(model, "gen", thetas, 3, &opts, plaus, rho), IMLMM_OK);
  EXPECT(plaus[1] == 1.0);
  EXPECT(fabs(plaus[0] - plaus[2]) < 1e-14);
  EXPECT(rho[0] == -1.0);

  opts.rho_grid_size = 10;
  opts.joint_m = 1000;
  EXPECT_STATUS(imlmm_contour(model, "joint", thetas, 3, &opts, plaus, rho), IMLMM_OK);
  EXPECT(plaus[1] >= plaus[0] && plaus[1] >= plaus[2]);
  EXPECT(rho[1] > 0.0 && rho[1] < 1.0);
  EXPECT_STATUS(imlmm_contour(model, "student-t", thetas, 3, &opts, plaus, NULL), IMLMM_ERR_USAGE);

  char* csv = NULL;
  char* diag = NULL;
  EXPECT_STATUS(imlmm_contour_csv(model, "gen", 11, 0.0, 0.0, &opts, &csv, &diag), IMLMM_OK);
  EXPECT(csv && strncmp(csv, "theta,plausibility,argmax_rho\n", 30) == 0);
  EXPECT(csv && strstr(csv, "\n0,1,\n") != NULL);
  EXPECT(diag && strstr(diag, "\"mode\"") != NULL);
  imlmm_free_string(csv);
  imlmm_free_string(diag);

  imlmm_model_free(model);
}

static void test_errors(const char* data_dir) {
  imlmm_dataset* data = NULL;
  EXPECT_STATUS(imlmm_dataset_load_csv("/nonexistent.csv", NULL, &data), IMLMM_ERR_IO);
  EXPECT(data == NULL);
  EXPECT(strcmp(imlmm_status_name(IMLMM_ERR_IO), "IoError") == 0);
  EXPECT(strcmp(imlmm_status_name(IMLMM_ERR_EMPTY_CUT), "EmptyCut") == 0);

  char path[1024];
  snprintf(path, sizeof path, "%s/design_a_reml11.csv", data_dir);
  EXPECT_STATUS(imlmm_dataset_load_csv(path, NULL, &data), IMLMM_ERR_MISSING_COLUMN);

  const double y[6] = {1, 2, 3, 4, 5, 6};
  const int single[6] = {1, 1, 1, 1, 1, 1};
  EXPECT_STATUS(imlmm_dataset_from_groups(y, single, 6, &data), IMLMM_OK);
  imlmm_model* model = NULL;
  EXPECT_STATUS(imlmm_model_new(data, IMLMM_TARGET_GROUP_MEAN, NULL, 0, NULL, 0, &model),
                IMLMM_ERR_DEGENERATE_SPECTRUM);
  imlmm_dataset_free(data);

  const int sizes[2] = {3, 3};
  EXPECT_STATUS(imlmm_dataset_from_groups(y, sizes, 2, &data), IMLMM_OK);
  const double x2[2] = {1.0, 2.0};
  const double z1[1] = {1.0};
  EXPECT_STATUS(imlmm_model_new(data, IMLMM_TARGET_NEW_OBS, x2, 2, z1, 1, &model),
                IMLMM_ERR_DIMENSION_MISMATCH);
  EXPECT_STATUS(imlmm_model_new(data, IMLMM_TARGET_NEW_OBS, x2, 1, NULL, 0, &model), IMLMM_ERR_USAGE);
  EXPECT_STATUS(imlmm_model_new(NULL, IMLMM_TARGET_NEW_OBS, NULL, 0, NULL, 0, &model), IMLMM_ERR_USAGE);
  imlmm_dataset_free(data);
  imlmm_dataset_free(NULL);
  imlmm_model_free(NULL);
  imlmm_free_string(NULL);
}

static void test_simulate(void) {
  const char* config =
      "{\"design\": \"A\", \"methods\": [\"gen\"], \"replications\": 100, \"seed\": 3}";
  char* json = NULL;
  char* csv = NULL;
  EXPECT_STATUS(imlmm_simulate(config, 1, &json, &csv), IMLMM_OK);
  EXPECT(json && strstr(json, "\"summaries\"") != NULL);
  EXPECT(csv && strncmp(csv, "method,alpha,", 13) == 0);
  char* json2 = NULL;
  char* csv2 = NULL;
  EXPECT_STATUS(imlmm_simulate(config, 2, &json2, &csv2), IMLMM_OK);
  EXPECT(json && json2 && strcmp(json, json2) == 0);
  imlmm_free_string(json);
  imlmm_free_string(csv);
  imlmm_free_string(json2);
  imlmm_free_string(csv2);
  EXPECT_STATUS(imlmm_simulate("{", 1, &json, &csv), IMLMM_ERR_PARSE);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: %s DATA_DIR\n", argv[0]);
    return 2;
  }
  EXPECT(strlen(imlmm_version()) > 0);
  test_fixture_intervals(argv[1]);
  test_errors(argv[1]);
  test_simulate();
  if (failures) {
    fprintf(stderr, "%d C API check(s) failed\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
