#include <doctest.h>

#include "../support/testing.hpp"
#include "distributions.hpp"
#include "errors.hpp"
#include "generalized_im.hpp"
#include "random.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace imlmm;

namespace {

GenAssociation assoc_of(std::vector<double> S, std::vector<double> lambdas, double c1, double c2,
                        double nu, double center = 0.0) {
  GenAssociation a;
  a.S = std::move(S);
  a.lambdas = std::move(lambdas);
  a.c1 = c1;
  a.c2 = c2;
  a.nu = nu;
  a.center = center;
  return a;
}

// Independent supremum: dense log-spaced grid in eta plus both endpoints.
double grid_sup(const GenAssociation& a, int points) {
  double best = std::max(a.denom(0.0), a.denom(std::numeric_limits<double>::infinity()));
  const double lo = std::log(1e-8), hi = std::log(1e8);
  for (int i = 0; i < points; ++i) best = std::max(best, a.denom(std::exp(lo + (hi - lo) * i / (points - 1))));
  return best;
}

}  // namespace

TEST_SUITE("generalized-im") {

TEST_CASE("t tail contour values") {
  CHECK(t_tail_contour(0.0, 5.0) == 1.0);
  const double q29 = 2.045229642132703;
  CHECK(t_tail_contour(q29, 29.0) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(t_tail_contour(-q29, 29.0) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(t_tail_contour(3.1824, 3.0) == doctest::Approx(0.05000177761421257).epsilon(1e-10));
  CHECK(t_tail_contour(1e6, 3.0) < 1e-15);
  CHECK_THROWS_AS(t_tail_contour(1.0, 0.0), Error);
}

TEST_CASE("closed-form tail agrees with Monte Carlo t draws") {
  Engine rng = substream(3);
  std::student_t_distribution<double> t(7.0);
  const int m = 10000;
  std::vector<double> draws(m);
  for (double& d : draws) d = std::abs(t(rng));
  for (double q : {0.3, 1.0, 1.9, 2.8}) {
    double frac = 0.0;
    for (double d : draws) frac += d >= q ? 1.0 : 0.0;
    frac /= m;
    const double exact = t_tail_contour(q, 7.0);
    CHECK(std::abs(frac - exact) < 3.0 * std::sqrt(exact * (1 - exact) / m) + 1e-3);
  }
}

TEST_CASE("denominator parametrizations agree") {
  const GenAssociation a = assoc_of({3.0, 1.5, 7.0}, {9.2, 5.2, 4.0}, 1.25, 1.0 / 30.0, 4.0);
  for (double eta : {0.0, 0.01, 0.7, 3.0, 250.0}) {
    const double u = eta / (1.0 + eta);
    CHECK(a.denom(eta) == doctest::Approx(a.denom_u(u)).epsilon(1e-12));
  }
  CHECK(a.denom(std::numeric_limits<double>::infinity()) ==
        doctest::Approx(3.0 * 1.25 / 9.2 + 1.5 * 1.25 / 5.2 + 7.0 * 1.25 / 4.0).epsilon(1e-14));
  CHECK_THROWS_AS(a.denom(-1.0), Error);
}

TEST_CASE("constant denominator takes the eta = 0 endpoint") {
  const GenAssociation a = assoc_of({5.0}, {3.0}, 1.5, 0.5, 4.0);
  const DenominatorChoice d = sup_denominator(a);
  CHECK(d.eta == 0.0);
  CHECK_FALSE(d.at_infinity);
  CHECK(d.value == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("monotone denominator is maximized in the infinite limit") {
  // c1 > lambda c2: every term increases in eta.
  const StudyConfig cfg = testing::study({6, 6, 6, 6, 6}, 0.5, 0.5, 21);
  const auto sim = testing::simulate(cfg, 0, testing::spectrum_for(cfg));
  const GenAssociation a = make_gen_association(sim.problem.stats, sim.problem.consts, sim.problem.center);
  CHECK(a.c1 == doctest::Approx(1.2));
  CHECK(a.c2 == doctest::Approx(1.0 / 30.0));
  CHECK(a.nu == 4.0);
  const DenominatorChoice d = sup_denominator(a);
  CHECK(d.at_infinity);
  CHECK(std::isinf(d.eta));
  CHECK(d.value == doctest::Approx(a.S[0] * 1.2 / 6.0).epsilon(1e-12));
  CHECK(std::abs(d.value - grid_sup(a, 1000000)) / d.value < 1e-6);
}

TEST_CASE("supremum matches a dense grid oracle") {
  Engine rng = substream(22);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> ex(1.0);
  for (int t = 0; t < 12; ++t) {
    const int k = 1 + t % 5;
    std::vector<double> S, lambdas;
    double nu = 0.0;
    for (int l = 0; l < k; ++l) {
      S.push_back(0.1 + 10.0 * ex(rng));
      lambdas.push_back(0.05 + 20.0 * unif(rng));
      nu += 1.0;
    }
    const double c1 = 0.01 + 3.0 * unif(rng), c2 = 0.01 + 2.0 * unif(rng);
    const GenAssociation a = assoc_of(S, lambdas, c1, c2, nu);
    const DenominatorChoice d = sup_denominator(a);
    const double oracle = grid_sup(a, 1000000);
    CHECK(d.value >= oracle * (1.0 - 1e-12));
    CHECK(std::abs(d.value - oracle) / oracle < 1e-6);
    CHECK(d.value == doctest::Approx(d.at_infinity ? a.denom(std::numeric_limits<double>::infinity())
                                                   : a.denom(d.eta))
                         .epsilon(1e-12));
  }
}

TEST_CASE("a retained zero eigenvalue makes the denominator unbounded") {
  const GenAssociation a = assoc_of({2.0, 3.0}, {4.0, 0.0}, 1.0, 0.1, 3.0);
  try {
    sup_denominator(a);
    FAIL("expected UnboundedDenominator");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnboundedDenominator);
  }
  // Plug-in mode does not need the supremum.
  CHECK(gen_plausibility(0.0, a, {GenMode::PlugIn, 1.0, 0.0}) == 1.0);
}

TEST_CASE("contour equals one at the centre in every mode") {
  const GenAssociation a = assoc_of({3.0, 1.5}, {9.2, 5.2}, 1.25, 0.05, 2.0, 1.7);
  for (const GenSpec& spec : {GenSpec{GenMode::Sup, 0, 0}, GenSpec{GenMode::PlugIn, 0.4, 0},
                              GenSpec{GenMode::Adjusted, 0.4, 0.2}})
    CHECK(gen_plausibility(1.7, a, spec) == 1.0);
}

TEST_CASE("sup mode dominates every plug-in") {
  const StudyConfig cfg = testing::study({4, 4, 4, 6, 12}, 0.5, 0.5, 23);
  const auto sim = testing::simulate(cfg, 4, testing::spectrum_for(cfg));
  const GenAssociation a = make_gen_association(sim.problem.stats, sim.problem.consts, sim.problem.center);
  const GenContour sup(a, {GenMode::Sup, 0, 0});
  Engine rng = substream(24);
  std::exponential_distribution<double> ex(0.5);
  std::normal_distribution<double> z(0.0, 5.0);
  for (int e = 0; e < 20; ++e) {
    const GenContour plug(a, {GenMode::PlugIn, ex(rng), 0});
    for (int i = 0; i < 1000; ++i) {
      const double theta = a.center + z(rng);
      CHECK(std::abs(sup.t_prime(theta)) <= std::abs(plug.t_prime(theta)) * (1 + 1e-12));
      CHECK(sup.plausibility(theta) >= plug.plausibility(theta));
    }
  }
}

TEST_CASE("adjusted mode with zero offset is the plug-in") {
  const GenAssociation a = assoc_of({3.0, 1.5, 7.0}, {9.2, 5.2, 4.0}, 1.25, 1.0 / 30.0, 4.0, 0.3);
  for (double eta : {0.0, 0.2, 1.0, 5.0}) {
    const GenContour adj(a, {GenMode::Adjusted, eta, 0.0});
    const GenContour plug(a, {GenMode::PlugIn, eta, 0.0});
    CHECK(adj.denominator().value == plug.denominator().value);
    for (double th : {-3.0, 0.0, 0.9, 4.0}) CHECK(adj.plausibility(th) == plug.plausibility(th));
  }
}

TEST_CASE("adjusted mode takes the side with the larger denominator") {
  const GenAssociation a = assoc_of({3.0}, {6.0}, 1.2, 1.0 / 30.0, 4.0);  // increasing in eta
  const DenominatorChoice d = resolve_denominator(a, {GenMode::Adjusted, 0.5, 0.3});
  CHECK(d.eta == doctest::Approx(0.8));
  const GenAssociation b = assoc_of({3.0}, {6.0}, 0.1, 1.0, 4.0);  // decreasing in eta
  const DenominatorChoice e = resolve_denominator(b, {GenMode::Adjusted, 0.5, 0.3});
  CHECK(e.eta == doctest::Approx(0.2));
}

TEST_CASE("adjusted mode ignores a negative candidate") {
  const GenAssociation b = assoc_of({3.0}, {6.0}, 0.1, 1.0, 4.0);  // decreasing in eta
  const DenominatorChoice f = resolve_denominator(b, {GenMode::Adjusted, 0.1, 0.3});
  CHECK(f.eta == doctest::Approx(0.4));
  CHECK(f.value == doctest::Approx(b.denom(0.4)));
  const DenominatorChoice g = resolve_denominator(b, {GenMode::Adjusted, 0.3, 0.3});
  CHECK(g.eta == 0.0);
}

TEST_CASE("contour shape: continuous, strictly decreasing away from the centre, vanishing tails") {
  const GenAssociation a = assoc_of({3.0, 1.5, 7.0}, {9.2, 5.2, 4.0}, 1.25, 1.0 / 30.0, 4.0, -1.0);
  const GenContour c(a, {GenMode::Sup, 0, 0});
  double prev = 1.0;
  for (double d = 1e-3; d < 1e4; d *= 1.1) {
    const double up = c.plausibility(-1.0 + d), dn = c.plausibility(-1.0 - d);
    CHECK(up == doctest::Approx(dn).epsilon(1e-14));
    CHECK(up < prev);
    CHECK(prev - up < 0.2);
    prev = up;
  }
  CHECK(prev < 1e-8);
}

TEST_CASE("closed-form half width matches the t quantile") {
  const GenAssociation a = assoc_of({3.0, 1.5, 7.0}, {9.2, 5.2, 4.0}, 1.25, 1.0 / 30.0, 4.0);
  const GenContour c(a, {GenMode::Sup, 0, 0});
  for (double alpha : {0.05, 0.1, 0.2, 0.5}) {
    const double hw = c.half_width(alpha);
    CHECK(hw == doctest::Approx(dist::t_quantile(1 - alpha / 2, 4.0) * std::sqrt(c.denominator().value / 4.0)));
    CHECK(c.plausibility(hw) == doctest::Approx(alpha).epsilon(1e-10));
  }
}

TEST_CASE("plug-in at the true eta gives an exact t pivot") {
  for (const auto& sizes : std::vector<std::vector<int>>{{6, 6, 6, 6, 6}, {4, 4, 4, 6, 12}}) {
    const StudyConfig cfg = testing::study(sizes, 0.5, 0.5, 25);
    const auto sp = testing::spectrum_for(cfg);
    std::vector<double> tp;
    double nu = 0.0;
    for (std::size_t r = 0; r < 2000; ++r) {
      const auto sim = testing::simulate(cfg, r, sp);
      const GenAssociation a = make_gen_association(sim.problem.stats, sim.problem.consts, sim.problem.center);
      nu = a.nu;
      tp.push_back(GenContour(a, {GenMode::PlugIn, 1.0, 0.0}).t_prime(sim.theta));
    }
    CHECK(testing::ks_statistic(tp, [&](double x) { return dist::t_cdf(x, nu); }) < 0.05);
  }
}

}  // TEST_SUITE
