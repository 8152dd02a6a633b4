#include <doctest.h>

#include "../support/testing.hpp"
#include "baselines.hpp"
#include "csv.hpp"
#include "distributions.hpp"
#include "errors.hpp"
#include "random.hpp"

#include <boost/math/distributions/fisher_f.hpp>

#include <cmath>
#include <random>

using namespace imlmm;

namespace {

PredictionProblem fixture_problem(TargetKind kind = TargetKind::GroupMean) {
  CsvSchema schema;
  schema.group = "farm";
  Dataset d = load_dataset(IMLMM_TEST_DATA_DIR "/design_a_reml11.csv", schema);
  PredictionTarget t = default_target(d, kind);
  return make_problem(std::move(d), std::move(t));
}

PredictionProblem transformed(const PredictionProblem& p, double shift, double scale) {
  Dataset d = p.data;
  d.y = (d.y.array() * scale + shift).matrix();
  return make_problem(std::move(d), p.target, p.stats.spectrum);
}

// Balanced one-way ANOVA estimators from group means.
VariancePair anova(const Dataset& d) {
  const int N = d.num_groups(), m = d.group_sizes[0];
  std::vector<double> mean(N, 0.0);
  for (Eigen::Index j = 0; j < d.n(); ++j) mean[d.group[j]] += d.y(j) / m;
  const double grand = d.y.mean();
  double ssb = 0.0, ssw = 0.0;
  for (int i = 0; i < N; ++i) ssb += m * (mean[i] - grand) * (mean[i] - grand);
  for (Eigen::Index j = 0; j < d.n(); ++j) ssw += std::pow(d.y(j) - mean[d.group[j]], 2);
  const double msb = ssb / (N - 1), msw = ssw / (d.n() - N);
  return {(msb - msw) / m, msw};
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("fixture data has REML estimates (1, 1) and mean 0") {
  const PredictionProblem p = fixture_problem();
  CHECK(std::abs(p.center) < 1e-12);
  const VarianceEstimate fit = reml_fit(p.stats);
  CHECK(fit.sigma_alpha2 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fit.sigma_eps2 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK_FALSE(fit.boundary);
  CHECK(fit.converged);
}

TEST_CASE("REML matches ANOVA on balanced interior fits") {
  const StudyConfig cfg = testing::study({6, 6, 6, 6, 6}, 0.7, 0.6, 41);
  const auto sp = testing::spectrum_for(cfg);
  int interior = 0;
  for (std::size_t r = 0; r < 60; ++r) {
    const auto sim = testing::simulate(cfg, r, sp);
    const VariancePair a = anova(sim.problem.data);
    const VarianceEstimate fit = reml_fit(sim.problem.stats);
    if (a.sigma_alpha2 <= 0.0) {
      CHECK(fit.boundary);
      continue;
    }
    ++interior;
    CHECK(fit.sigma_alpha2 == doctest::Approx(a.sigma_alpha2).epsilon(1e-8));
    CHECK(fit.sigma_eps2 == doctest::Approx(a.sigma_eps2).epsilon(1e-8));
  }
  CHECK(interior > 30);
}

TEST_CASE("parametrizations of the estimate are consistent") {
  const StudyConfig cfg = testing::study({4, 4, 7, 11, 13, 16, 16, 16, 16, 17}, 0.5, 0.5, 42);
  const auto sp = testing::spectrum_for(cfg);
  for (std::size_t r = 0; r < 20; ++r) {
    const VarianceEstimate f = reml_fit(testing::simulate(cfg, r, sp).problem.stats);
    CHECK(f.sigma_eps2 > 0.0);
    CHECK(f.sigma_alpha2 >= 0.0);
    CHECK(f.rho_hat >= 0.0);
    CHECK(f.rho_hat < 1.0);
    CHECK(std::abs(f.eta_hat - f.sigma_alpha2 / f.sigma_eps2) < 1e-12 * std::max(1.0, f.eta_hat));
    CHECK(std::abs(f.rho_hat - f.sigma_alpha2 / (f.sigma_alpha2 + f.sigma_eps2)) < 1e-12);
  }
}

TEST_CASE("REML is scale equivariant") {
  const StudyConfig cfg = testing::study({4, 4, 4, 6, 12}, 1.0, 0.3, 43);
  const auto sim = testing::simulate(cfg, 0, testing::spectrum_for(cfg));
  const auto& st = sim.problem.stats;
  const VarianceEstimate a = reml_fit(st);
  for (double k : {1e-3, 0.5, 7.0, 1e4}) {
    std::vector<double> S = st.S;
    for (double& v : S) v *= k;
    const VarianceEstimate b = reml_fit(S, st.spectrum->lambdas, st.spectrum->mults);
    CHECK(b.sigma_alpha2 == doctest::Approx(k * a.sigma_alpha2).epsilon(1e-7));
    CHECK(b.sigma_eps2 == doctest::Approx(k * a.sigma_eps2).epsilon(1e-7));
    CHECK(b.eta_hat == doctest::Approx(a.eta_hat).epsilon(1e-7));
  }
}

TEST_CASE("REML optimum beats random interior points") {
  Engine rng = substream(44);
  std::exponential_distribution<double> ex(1.0);
  const StudyConfig cfg = testing::study({4, 4, 7, 11, 13, 16, 16, 16, 16, 17}, 0.3, 0.8, 44);
  const auto sp = testing::spectrum_for(cfg);
  for (std::size_t r = 0; r < 10; ++r) {
    const auto sim = testing::simulate(cfg, r, sp);
    const VarianceEstimate f = reml_fit(sim.problem.stats);
    const double best = reml_loglik(sim.problem.stats, {f.sigma_alpha2, f.sigma_eps2});
    for (int i = 0; i < 100; ++i) {
      const VariancePair v{3.0 * ex(rng), 0.01 + 3.0 * ex(rng)};
      CHECK(reml_loglik(sim.problem.stats, v) <= best + 1e-9);
    }
  }
}

TEST_CASE("boundary fraction in setting B follows the F-distribution oracle") {
  // Balanced one-way REML is on the boundary iff MSB <= MSW, an F(9, 110) event.
  const boost::math::fisher_f_distribution<double> F(9.0, 110.0);
  const double exact = cdf(F, 1.0 / (1.0 + 12.0 * 0.1));
  CHECK(exact == doctest::Approx(0.0982529719315767).epsilon(1e-10));
  const StudyConfig cfg = testing::study(std::vector<int>(10, 12), 0.1, 1.0, 45);
  const auto sp = testing::spectrum_for(cfg);
  const int reps = 1000;
  int small = 0;
  for (int r = 0; r < reps; ++r)
    if (reml_fit(testing::simulate(cfg, r, sp).problem.stats).sigma_alpha2 < 1e-4) ++small;
  const double frac = static_cast<double>(small) / reps;
  CHECK(std::abs(frac - exact) < 3.0 * std::sqrt(exact * (1 - exact) / reps) + 0.005);
}

TEST_CASE("degenerate statistics are rejected") {
  try {
    reml_fit({0.0, 0.0}, {6.0, 0.0}, {4, 25});
    FAIL("expected DegenerateData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateData);
  }
}

TEST_CASE("closed-form intervals on the fixture") {
  const PredictionProblem p = fixture_problem();
  const auto oracle = closed_form_interval(ClosedForm::Oracle, p, 0.05, VariancePair{1.0, 1.0});
  CHECK(oracle.lower == doctest::Approx(-2.176648619366346).epsilon(1e-10));
  CHECK(oracle.upper == doctest::Approx(2.176648619366346).epsilon(1e-10));
  const auto st = closed_form_interval(ClosedForm::StudentT, p, 0.05);
  CHECK(st.upper == doctest::Approx(3.5342829823631168).epsilon(1e-8));
  CHECK(st.lower == doctest::Approx(-3.5342829823631168).epsilon(1e-8));
  CHECK(st.diagnostics.at("df") == 3.0);
  CHECK(st.level == doctest::Approx(0.95));
  CHECK(st.method == "student-t");
}

TEST_CASE("oracle interval without the truth is a usage error") {
  const PredictionProblem p = fixture_problem();
  try {
    closed_form_interval(ClosedForm::Oracle, p, 0.05);
    FAIL("expected UsageError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Usage);
  }
}

TEST_CASE("Satterthwaite degrees of freedom collapse to n - p at the boundary") {
  const PredictionProblem p = fixture_problem();
  VarianceEstimate f;
  f.sigma_alpha2 = 0.0;
  f.sigma_eps2 = 0.8;
  f.boundary = true;
  CHECK(satterthwaite_df(p.stats, f) == doctest::Approx(29.0).epsilon(1e-12));
  const auto r = closed_form_interval(ClosedForm::Satterthwaite, p, 0.05, std::nullopt, &f);
  CHECK(r.diagnostics.at("reml_boundary") == 1.0);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("generalized Satterthwaite df is positive and finite") {
  const StudyConfig cfg = testing::study({4, 4, 4, 6, 12}, 0.5, 0.5, 46);
  const auto sp = testing::spectrum_for(cfg);
  for (std::size_t r = 0; r < 50; ++r) {
    const auto sim = testing::simulate(cfg, r, sp);
    const VarianceEstimate f = reml_fit(sim.problem.stats);
    const double df = gen_satterthwaite_df(sim.problem.stats, sim.problem.consts, f);
    CHECK(std::isfinite(df));
    CHECK(df > 0.0);
  }
}

TEST_CASE("generalized Satterthwaite df equals n - p at a boundary REML fit") {
  const StudyConfig cfg = testing::study(design_sizes("A"), 0.1, 1.0, 48);
  const auto sp = testing::spectrum_for(cfg);
  int boundary = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    const auto sim = testing::simulate(cfg, r, sp);
    const VarianceEstimate f = reml_fit(sim.problem.stats);
    if (!f.boundary) continue;
    ++boundary;
    const double df = gen_satterthwaite_df(sim.problem.stats, sim.problem.consts, f);
    CHECK(df == doctest::Approx(29.0).epsilon(1e-10));
    const auto r1 = closed_form_interval(ClosedForm::GenSatterthwaite, sim.problem, 0.05,
                                         std::nullopt, &f);
    const auto r2 = closed_form_interval(ClosedForm::StudentT, sim.problem, 0.05,
                                         std::nullopt, &f);
    CHECK(std::isfinite(r1.length()));
    CHECK(r1.length() < 2.0 * r2.length());
  }
  CHECK(boundary > 0);
}

TEST_CASE("oracle interval is an exact pivot on every design") {
  for (const char* design : {"A", "B", "C", "D"}) {
    StudyConfig cfg = testing::study(design_sizes(design), 0.5, 0.5, 47);
    const auto sp = testing::spectrum_for(cfg);
    int hit = 0;
    for (std::size_t r = 0; r < 2000; ++r) {
      const auto sim = testing::simulate(cfg, r, sp);
      if (closed_form_interval(ClosedForm::Oracle, sim.problem, 0.05, VariancePair{0.5, 0.5})
              .contains(sim.theta))
        ++hit;
    }
    CHECK(std::abs(hit / 2000.0 - 0.95) <= 0.015);
  }
}

TEST_CASE("parametric bootstrap is deterministic and roughly normal at a boundary fit") {
  const PredictionProblem p = fixture_problem();
  VarianceEstimate f;
  f.sigma_alpha2 = 0.0;
  f.sigma_eps2 = 1.0;
  f.boundary = true;
  Engine a = substream(48), b = substream(48);
  const auto ra = parametric_bootstrap_interval(p, f, 500, 0.05, a);
  const auto rb = parametric_bootstrap_interval(p, f, 500, 0.05, b);
  CHECK(ra.lower == rb.lower);
  CHECK(ra.upper == rb.upper);
  CHECK(ra.diagnostics.at("B") == 500.0);

  // Without a between-group term theta_b = ybar_b + z_b sd_b is close to
  // N(center, 2 / 30); refitting adds a small between-group component.
  Engine c = substream(49);
  const auto wide = parametric_bootstrap_interval(p, f, 4000, 0.05, c);
  const double normal_half = 1.959963984540054 * std::sqrt(2.0 / 30.0);
  CHECK(wide.upper > normal_half * 0.9);
  CHECK(wide.upper < normal_half * 1.5);
  CHECK(wide.lower < -normal_half * 0.9);
  CHECK(wide.lower > -normal_half * 1.5);
}

TEST_CASE("nonparametric bootstrap of constant data is a point") {
  const Dataset d = random_intercept_dataset(VectorXd::Constant(12, 3.25), {4, 4, 4});
  // The dataset is degenerate for the sufficient statistics, so build the problem by hand.
  PredictionProblem p;
  p.data = d;
  p.target = default_target(d, TargetKind::GroupMean);
  Engine rng = substream(50);
  const auto r = nonparametric_bootstrap_interval(p, 200, 0.05, rng);
  CHECK(r.lower == 3.25);
  CHECK(r.upper == 3.25);
}

TEST_CASE("nonparametric bootstrap ignores row order within groups") {
  const PredictionProblem p = fixture_problem();
  Dataset shuffled = p.data;
  // Reverse the rows of every group in place; groups are contiguous in the fixture.
  for (int start = 0; start < shuffled.n(); start += 6)
    std::reverse(shuffled.y.data() + start, shuffled.y.data() + start + 6);
  const PredictionProblem q = make_problem(shuffled, p.target, p.stats.spectrum);
  for (TargetKind kind : {TargetKind::GroupMean, TargetKind::NewObservation}) {
    PredictionProblem a = p, b = q;
    a.target.kind = b.target.kind = kind;
    Engine ra = substream(51), rb = substream(51);
    const auto ia = nonparametric_bootstrap_interval(a, 300, 0.05, ra);
    const auto ib = nonparametric_bootstrap_interval(b, 300, 0.05, rb);
    CHECK(ia.lower == ib.lower);
    CHECK(ia.upper == ib.upper);
  }
}

TEST_CASE("nonparametric bootstrap warns on singleton groups") {
  VectorXd y(7);
  y << 1, 2, 3, 4, 5, 6, 9;
  const Dataset d = random_intercept_dataset(y, {3, 3, 1});
  PredictionProblem p = make_problem(d, default_target(d, TargetKind::GroupMean));
  Engine rng = substream(52);
  const auto r = nonparametric_bootstrap_interval(p, 100, 0.1, rng);
  CHECK_FALSE(r.warnings.empty());
  CHECK(r.lower <= r.upper);
}

TEST_CASE("bootstrap standard error of eta") {
  const PredictionProblem p = fixture_problem();
  const VarianceEstimate fit = reml_fit(p.stats);
  Engine a = substream(53), b = substream(53);
  const auto sa = bootstrap_se_eta(p.stats, fit, 100, a);
  const auto sb = bootstrap_se_eta(p.stats, fit, 100, b);
  CHECK(sa.se == sb.se);
  CHECK(sa.se > 0.0);

  // Dispersion oracle: repeated runs at B and 2B.
  std::vector<double> at_b, at_2b;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Engine r1 = substream(54, s), r2 = substream(55, s);
    at_b.push_back(bootstrap_se_eta(p.stats, fit, 100, r1).se);
    at_2b.push_back(bootstrap_se_eta(p.stats, fit, 200, r2).se);
  }
  const double m1 = testing::mean_of(at_b), m2 = testing::mean_of(at_2b);
  CHECK(std::abs(m2 - m1) / m1 < 0.3);

  VarianceEstimate flat = fit;
  flat.sigma_alpha2 = 0.0;
  flat.eta_hat = 0.0;
  Engine c = substream(56);
  const auto s0 = bootstrap_se_eta(p.stats, flat, 100, c);
  CHECK(s0.boundary_fraction > 0.3);
  CHECK(s0.se < 0.25 * sa.se);
}

TEST_CASE("iid-normal interval closed form") {
  const auto zero = iid_normal_interval(Eigen::Vector2d(0.0, 0.0), 0.05);
  CHECK(zero.lower == 0.0);
  CHECK(zero.upper == 0.0);
  const auto r = iid_normal_interval(Eigen::Vector2d(-1.0, 1.0), 0.05);
  CHECK(r.upper == doctest::Approx(22.0077921748727).epsilon(1e-10));
  CHECK(r.lower == doctest::Approx(-22.0077921748727).epsilon(1e-10));
  CHECK(r.kind == TargetKind::NewObservation);
  try {
    iid_normal_interval(VectorXd::Ones(1), 0.05);
    FAIL("expected UsageError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Usage);
  }
}

TEST_CASE("closed-form and bootstrap intervals are shift and scale equivariant") {
  const StudyConfig cfg = testing::study({4, 4, 4, 6, 12}, 0.5, 0.5, 57);
  const auto sim = testing::simulate(cfg, 1, testing::spectrum_for(cfg));
  const PredictionProblem& p = sim.problem;
  for (const auto& [shift, scale] : std::vector<std::pair<double, double>>{{3.5, 1.0}, {0.0, 4.0}, {-2.0, 0.25}}) {
    const PredictionProblem q = transformed(p, shift, scale);
    const VarianceEstimate fp = reml_fit(p.stats), fq = reml_fit(q.stats);
    auto check = [&](const IntervalReport& a, const IntervalReport& b) {
      const double tol = 1e-6 * std::max(1.0, std::abs(scale * a.upper) + std::abs(shift));
      CHECK(std::abs(b.lower - (scale * a.lower + shift)) < tol);
      CHECK(std::abs(b.upper - (scale * a.upper + shift)) < tol);
    };
    for (ClosedForm m : {ClosedForm::StudentT, ClosedForm::Satterthwaite, ClosedForm::GenSatterthwaite})
      check(closed_form_interval(m, p, 0.05), closed_form_interval(m, q, 0.05));
    check(closed_form_interval(ClosedForm::Oracle, p, 0.05, VariancePair{0.5, 0.5}),
          closed_form_interval(ClosedForm::Oracle, q, 0.05, VariancePair{0.5 * scale * scale, 0.5 * scale * scale}));
    {
      Engine a = substream(58), b = substream(58);
      check(parametric_bootstrap_interval(p, fp, 500, 0.05, a),
            parametric_bootstrap_interval(q, fq, 500, 0.05, b));
    }
    {
      Engine a = substream(59), b = substream(59);
      check(nonparametric_bootstrap_interval(p, 500, 0.05, a),
            nonparametric_bootstrap_interval(q, 500, 0.05, b));
    }
    check(iid_normal_interval(p.data.y, 0.05), iid_normal_interval(q.data.y, 0.05));
  }
}

}  // TEST_SUITE
