#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "stcausal/errors.hpp"
#include "stcausal/estimate.hpp"
#include "stcausal/numerics.hpp"
#include "stcausal/rng.hpp"

using namespace stcausal;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
const Window unit_window({0.0, 0.0, 1.0, 1.0});

// Closed-form log-density of a pattern with n points under a homogeneous
// process of rate h on the unit window (independent of engine arithmetic).
double homog_log_density(int n, double h) {
  return (1.0 - h) + n * std::log(h);
}

std::vector<PointPattern> fixed_treatments() {
  return {PointPattern(1, {0.2}, {0.3}),
          PointPattern(2, {}, {}),
          PointPattern(3, {0.5, 0.7}, {0.5, 0.1}),
          PointPattern(4, {0.9}, {0.9}),
          PointPattern(5, {0.1, 0.4, 0.6}, {0.2, 0.8, 0.5}),
          PointPattern(6, {0.3}, {0.6})};
}

std::vector<PointPattern> fixed_outcomes() {
  return {PointPattern(1, {0.5}, {0.5}),
          PointPattern(2, {0.25, 0.75}, {0.25, 0.75}),
          PointPattern(3, {}, {}),
          PointPattern(4, {0.6, 0.6, 0.2}, {0.4, 0.8, 0.2}),
          PointPattern(5, {0.45}, {0.55}),
          PointPattern(6, {0.8, 0.15}, {0.35, 0.65})};
}

// Identity setting: the "propensity" of each period is the intervention's own
// density, so every log-weight is exactly zero.
std::vector<double> identity_propensities(const Intervention& h,
                                          const std::vector<PointPattern>& w) {
  std::vector<double> out;
  for (const PointPattern& p : w) out.push_back(h.log_density(p));
  return out;
}
}  // namespace

TEST_CASE("log-weight windows combine intervention and propensity terms") {
  Intervention h2 = homogeneous_intervention(2.0, unit_window);
  Intervention h7 = homogeneous_intervention(7.0, unit_window);
  std::vector<PointPattern> w{PointPattern(1, {0.1}, {0.1}), PointPattern(2, {}, {}),
                              PointPattern(3, {0.3, 0.6}, {0.3, 0.6})};
  std::vector<double> logp{-0.1, 0.2, -0.3};

  SUBCASE("same intervention every period") {
    WeightSeries ws = compute_log_weights(InterventionSequence::iid(h2, 2), w, logp);
    REQUIRE(ws.log_weights.size() == 2);
    const double l2 = (homog_log_density(1, 2.0) - -0.1) + (homog_log_density(0, 2.0) - 0.2);
    const double l3 = (homog_log_density(0, 2.0) - 0.2) + (homog_log_density(2, 2.0) - -0.3);
    CHECK(ws.log_weight(2) == doctest::Approx(l2).epsilon(1e-14));
    CHECK(ws.log_weight(3) == doctest::Approx(l3).epsilon(1e-14));
    CHECK_THROWS_AS(ws.log_weight(1), std::out_of_range);
    CHECK_THROWS_AS(ws.log_weight(4), std::out_of_range);
  }

  SUBCASE("lagged design applies the alternate intervention at the window start") {
    WeightSeries ws =
        compute_log_weights(InterventionSequence::lagged(h2, h7, 2), w, logp);
    const double l2 = (homog_log_density(1, 7.0) - -0.1) + (homog_log_density(0, 2.0) - 0.2);
    const double l3 = (homog_log_density(0, 7.0) - 0.2) + (homog_log_density(2, 2.0) - -0.3);
    CHECK(ws.log_weight(2) == doctest::Approx(l2).epsilon(1e-14));
    CHECK(ws.log_weight(3) == doctest::Approx(l3).epsilon(1e-14));
  }

  SUBCASE("degenerate series length is rejected") {
    std::vector<PointPattern> two{w[0], w[1]};
    std::vector<double> lp{-0.1, 0.2};
    CHECK_THROWS_AS(compute_log_weights(InterventionSequence::iid(h2, 2), two, lp),
                    std::invalid_argument);
    CHECK_THROWS_AS(compute_log_weights(InterventionSequence::iid(h2, 1), w,
                                        std::vector<double>{-0.1, 0.2}),
                    std::invalid_argument);
  }
}

TEST_CASE("zero-propensity periods poison exactly the windows covering them") {
  Intervention h3 = homogeneous_intervention(3.0, unit_window);
  std::vector<PointPattern> w(5);
  for (int t = 1; t <= 5; ++t) w[t - 1] = PointPattern(t, {0.5}, {0.5});
  std::vector<double> logp{-0.2, -kInf, -0.1, -0.4, -0.3};

  WeightSeries ws1 = compute_log_weights(InterventionSequence::iid(h3, 1), w, logp);
  REQUIRE(ws1.has_violation());
  CHECK(*ws1.violation_period == 2);
  CHECK(ws1.log_weight(2) == kInf);
  CHECK(std::isfinite(ws1.log_weight(1)));
  CHECK(std::isfinite(ws1.log_weight(3)));
  CHECK(std::isnan(ws1.mean_weight()));

  WeightSeries ws2 = compute_log_weights(InterventionSequence::iid(h3, 2), w, logp);
  CHECK(ws2.log_weight(2) == kInf);
  CHECK(ws2.log_weight(3) == kInf);
  CHECK(std::isfinite(ws2.log_weight(4)));
  CHECK(std::isfinite(ws2.log_weight(5)));
}

TEST_CASE("identity weights concentrate at one") {
  Intervention h3 = homogeneous_intervention(3.0, unit_window);
  std::vector<PointPattern> w = fixed_treatments();
  WeightSeries ws = compute_log_weights(InterventionSequence::iid(h3, 2), w,
                                        identity_propensities(h3, w));
  for (double l : ws.log_weights) CHECK(l == 0.0);
  CHECK(ws.mean_weight() == 1.0);
  CHECK(ws.effective_sample_size() == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("period estimate") {
  KernelSpec kernel{0.1};
  Region whole = Region::whole_window(unit_window);
  PointPattern y(4, {0.5, 0.6}, {0.5, 0.4});

  const double g = smoothed_region_integral(y, kernel, whole);
  CHECK(period_estimate(4, 0.0, y, kernel, whole) == g);
  CHECK(period_estimate(4, std::log(2.0), y, kernel, whole) ==
        doctest::Approx(2.0 * g).epsilon(1e-15));

  SUBCASE("empty outcomes contribute zero regardless of the weight") {
    PointPattern empty;
    CHECK(period_estimate(4, 5.0, empty, kernel, whole) == 0.0);
    CHECK(period_estimate(4, -kInf, empty, kernel, whole) == 0.0);
  }

  SUBCASE("positivity violations abort with the period") {
    try {
      period_estimate(7, kInf, y, kernel, whole);
      FAIL("expected PositivityViolation");
    } catch (const PositivityViolation& e) {
      CHECK(e.period() == 7);
    }
    CHECK_THROWS_AS(
        period_estimate(7, std::numeric_limits<double>::quiet_NaN(), y, kernel, whole),
        PositivityViolation);
  }
}

TEST_CASE("temporal averages") {
  CHECK(ipw_average({2.0, 4.0}, 1, 2) == 3.0);
  CHECK(ipw_average({0.0, 0.0, 0.0}, 3, 5) == 0.0);
  CHECK(ipw_average({7.5, 7.5, 7.5, 7.5}, 2, 5) == 7.5);
  CHECK_THROWS_AS(ipw_average({1.0}, 1, 1), std::invalid_argument);   // T < M+1
  CHECK_THROWS_AS(ipw_average({1.0, 2.0}, 1, 3), std::invalid_argument);
}

TEST_CASE("self-normalized average") {
  SUBCASE("equal weights reduce to the plain mean") {
    std::vector<double> g{1.0, 4.0, 7.0};
    CHECK(hajek_average(g, {0.7, 0.7, 0.7}) == doctest::Approx(4.0).epsilon(1e-14));
  }
  SUBCASE("hand-computed two-period case") {
    // weights (1, 3), integrals (1, 3): (1*1 + 3*3) / 4 = 2.5
    CHECK(hajek_average({1.0, 3.0}, {0.0, std::log(3.0)}) ==
          doctest::Approx(2.5).epsilon(1e-14));
  }
  SUBCASE("always a convex combination of the region integrals") {
    RngStream rng(901);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> g, l;
      double lo = kInf, hi = -kInf;
      for (int i = 0; i < 12; ++i) {
        g.push_back(25.0 * rng.uniform());
        l.push_back(6.0 * rng.uniform() - 3.0);
        lo = std::min(lo, g.back());
        hi = std::max(hi, g.back());
      }
      const double est = hajek_average(g, l);
      CHECK(est >= lo);
      CHECK(est <= hi);
    }
  }
  SUBCASE("common log-weight shifts cancel") {
    std::vector<double> g{2.0, 0.5, 9.0, 4.0};
    std::vector<double> l{0.3, -1.2, 0.8, -0.4};
    const double base = hajek_average(g, l);
    for (double shift : {-7.0, 0.25, 11.0}) {
      std::vector<double> ls = l;
      for (double& x : ls) x += shift;
      CHECK(hajek_average(g, ls) == doctest::Approx(base).epsilon(1e-13));
    }
  }
  SUBCASE("all-zero weights are degenerate") {
    CHECK_THROWS_AS(hajek_average({1.0, 2.0}, {-kInf, -kInf}), std::domain_error);
  }
}

TEST_CASE("variance bound") {
  SUBCASE("constant series") {
    // vhat* = c^2, bound = c^2 / T
    CHECK(variance_bound({3.0, 3.0, 3.0}, 2, 4, EstimatorKind::ipw) ==
          doctest::Approx(9.0 / 4.0).epsilon(1e-15));
  }
  SUBCASE("single nonzero period") {
    // vhat* = v^2 / (T-M+1), bound = v^2 / ((T-M+1) T)
    CHECK(variance_bound({0.0, 5.0, 0.0, 0.0}, 1, 4, EstimatorKind::ipw) ==
          doctest::Approx(25.0 / 16.0).epsilon(1e-15));
  }
  SUBCASE("self-normalized rescaling") {
    // raw estimates (1, 9), weights (1, 3): vhat* = 41 * (2/4)^2 = 10.25
    const double b = variance_bound({1.0, 9.0}, 1, 2, EstimatorKind::hajek,
                                    {0.0, std::log(3.0)});
    CHECK(b == doctest::Approx(10.25 / 2.0).epsilon(1e-14));
    CHECK_THROWS_AS(variance_bound({1.0, 9.0}, 1, 2, EstimatorKind::hajek),
                    std::invalid_argument);
  }
}

TEST_CASE("confidence intervals") {
  auto [lo0, hi0] = confidence_interval(4.2, 0.0, 0.95);
  CHECK(lo0 == 4.2);
  CHECK(hi0 == 4.2);

  auto [lo, hi] = confidence_interval(0.0, 1.0, 0.95);
  CHECK(std::abs(hi - 1.959964) < 1e-6);
  CHECK(lo == -hi);

  auto [l90, h90] = confidence_interval(1.0, 2.0, 0.90);
  auto [l95, h95] = confidence_interval(1.0, 2.0, 0.95);
  auto [l99, h99] = confidence_interval(1.0, 2.0, 0.99);
  CHECK(l99 < l95);
  CHECK(l95 < l90);
  CHECK(h90 < h95);
  CHECK(h95 < h99);

  CHECK_THROWS_AS(confidence_interval(0.0, -1.0, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("average outcome under the identity intervention") {
  Intervention h3 = homogeneous_intervention(3.0, unit_window);
  std::vector<PointPattern> w = fixed_treatments();
  std::vector<PointPattern> y = fixed_outcomes();
  std::vector<double> logp = identity_propensities(h3, w);
  Region whole = Region::whole_window(unit_window);

  EstimateOptions opts;
  opts.kernel = KernelSpec{0.08};

  opts.kind = EstimatorKind::ipw;
  EstimateResult ipw = estimate_average_outcome(InterventionSequence::iid(h3, 2), w,
                                                y, logp, whole, opts);
  opts.kind = EstimatorKind::hajek;
  EstimateResult haj = estimate_average_outcome(InterventionSequence::iid(h3, 2), w,
                                                y, logp, whole, opts);

  // All weights are exactly one, so both estimators are the plain mean of the
  // smoothed region integrals over periods 2..6.
  std::vector<double> g;
  for (int t = 2; t <= 6; ++t) {
    g.push_back(smoothed_region_integral(y[t - 1], KernelSpec{0.08}, whole));
  }
  const double mean_g = pairwise_sum(g) / 5.0;
  CHECK(ipw.estimate == doctest::Approx(mean_g).epsilon(1e-15));
  CHECK(haj.estimate == doctest::Approx(mean_g).epsilon(1e-15));
  CHECK(ipw.region_integrals == haj.region_integrals);
  CHECK(ipw.descriptor.M == 2);
  CHECK(ipw.descriptor.T == 6);
  CHECK(ipw.descriptor.region_label == "window");
  CHECK(haj.note.find("no formal") != std::string::npos);

  // CI brackets the estimate with the stated half-width.
  const double z = 1.9599639845400545;
  CHECK(ipw.ci_lo == doctest::Approx(ipw.estimate - z * std::sqrt(ipw.variance_bound))
                         .epsilon(1e-12));
  CHECK(ipw.ci_hi >= ipw.estimate);

  // Sample boundedness of the self-normalized estimator.
  double lo = kInf, hi = -kInf;
  for (double v : haj.region_integrals) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(haj.estimate >= lo);
  CHECK(haj.estimate <= hi);
}

TEST_CASE("count mode uses raw region counts") {
  Intervention h3 = homogeneous_intervention(3.0, unit_window);
  std::vector<PointPattern> w = fixed_treatments();
  std::vector<PointPattern> y = fixed_outcomes();
  Region left("left", {Rect{0.0, 0.0, 0.5, 1.0}}, unit_window);

  EstimateOptions opts;
  opts.kind = EstimatorKind::ipw;
  opts.smoothed = false;
  EstimateResult r = estimate_average_outcome(InterventionSequence::iid(h3, 1), w, y,
                                              identity_propensities(h3, w), left, opts);
  // Hand counts of outcomes with x < 0.5 for periods 1..6: 0,1,0,1,1,1.
  CHECK(r.region_integrals == std::vector<double>{0.0, 1.0, 0.0, 1.0, 1.0, 1.0});
  CHECK(r.estimate == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK_FALSE(r.descriptor.smoothed);
}

TEST_CASE("positivity violations surface the offending period") {
  Intervention h3 = homogeneous_intervention(3.0, unit_window);
  std::vector<PointPattern> w = fixed_treatments();
  std::vector<PointPattern> y = fixed_outcomes();
  std::vector<double> logp = identity_propensities(h3, w);
  logp[3] = -kInf;
  Region whole = Region::whole_window(unit_window);
  try {
    estimate_average_outcome(InterventionSequence::iid(h3, 1), w, y, logp, whole);
    FAIL("expected PositivityViolation");
  } catch (const PositivityViolation& e) {
    CHECK(e.period() == 4);
  }
}

TEST_CASE("input shape errors") {
  Intervention h3 = homogeneous_intervention(3.0, unit_window);
  std::vector<PointPattern> w = fixed_treatments();
  std::vector<PointPattern> y = fixed_outcomes();
  std::vector<double> logp = identity_propensities(h3, w);
  Region whole = Region::whole_window(unit_window);

  std::vector<PointPattern> y_short(y.begin(), y.end() - 1);
  CHECK_THROWS_AS(
      estimate_average_outcome(InterventionSequence::iid(h3, 1), w, y_short, logp, whole),
      std::invalid_argument);
  // T = M: a single usable period is degenerate by contract.
  CHECK_THROWS_AS(
      estimate_average_outcome(InterventionSequence::iid(h3, 6), w, y, logp, whole),
      std::invalid_argument);
}

TEST_CASE("dominating-measure constant cancels between numerator and denominator") {
  // Changing the reference measure adds the same constant to a period's log f
  // and log p; every estimator output must be unmoved. An Intervention whose
  // cached integral is lowered by c has log-density log f + c exactly.
  Intervention h4 = homogeneous_intervention(4.0, unit_window);
  std::vector<PointPattern> w = fixed_treatments();
  std::vector<PointPattern> y = fixed_outcomes();
  Region region("east", {Rect{0.5, 0.0, 1.0, 1.0}}, unit_window);
  std::vector<double> logp =
      identity_propensities(homogeneous_intervention(2.0, unit_window), w);

  const double c = 0.37;
  Intervention h4_shifted("h4", h4.process(), h4.expected_count() - c);
  std::vector<double> logp_shifted = logp;
  for (double& v : logp_shifted) v += c;

  for (EstimatorKind kind : {EstimatorKind::ipw, EstimatorKind::hajek}) {
    EstimateOptions opts;
    opts.kind = kind;
    opts.kernel = KernelSpec{0.1};
    EstimateResult base = estimate_average_outcome(InterventionSequence::iid(h4, 2),
                                                   w, y, logp, region, opts);
    EstimateResult shifted =
        estimate_average_outcome(InterventionSequence::iid(h4_shifted, 2), w, y,
                                 logp_shifted, region, opts);
    CHECK(shifted.estimate == doctest::Approx(base.estimate).epsilon(1e-12));
    CHECK(shifted.variance_bound ==
          doctest::Approx(base.variance_bound).epsilon(1e-12));
    CHECK(shifted.ci_lo == doctest::Approx(base.ci_lo).epsilon(1e-12));
    CHECK(shifted.ci_hi == doctest::Approx(base.ci_hi).epsilon(1e-12));
  }
}

TEST_CASE("effect contrasts") {
  Intervention h3 = homogeneous_intervention(3.0, unit_window);
  std::vector<PointPattern> w = fixed_treatments();
  std::vector<PointPattern> y = fixed_outcomes();
  std::vector<double> logp = identity_propensities(h3, w);
  Region whole = Region::whole_window(unit_window);
  EstimateOptions opts;
  opts.kind = EstimatorKind::ipw;
  opts.kernel = KernelSpec{0.08};
  InterventionSequence seq = InterventionSequence::iid(h3, 1);
  EstimateResult r = estimate_average_outcome(seq, w, y, logp, whole, opts);

  SUBCASE("identical interventions cancel exactly") {
    EstimateResult d = effect_contrast(r, r);
    CHECK(d.estimate == 0.0);
    for (double v : d.period_contributions) CHECK(v == 0.0);
    CHECK(d.variance_bound == 0.0);
    CHECK(d.ci_lo == 0.0);
    CHECK(d.ci_hi == 0.0);
  }

  SUBCASE("second minus first, antisymmetric with identical bound") {
    // An intervention density twice h3's: every weight doubles.
    Intervention h3x2("h3-doubled", h3.process(),
                      h3.expected_count() - std::log(2.0));
    EstimateResult r2 = estimate_average_outcome(InterventionSequence::iid(h3x2, 1),
                                                 w, y, logp, whole, opts);
    CHECK(r2.estimate == doctest::Approx(2.0 * r.estimate).epsilon(1e-12));
    EstimateResult ab = effect_contrast(r, r2);
    EstimateResult ba = effect_contrast(r2, r);
    CHECK(ab.estimate == doctest::Approx(r.estimate).epsilon(1e-12));  // 2x - x
    CHECK(ab.estimate == -ba.estimate);
    CHECK(ab.variance_bound == ba.variance_bound);
    CHECK(ab.descriptor.intervention_label.find("h3-doubled") != std::string::npos);
  }

  SUBCASE("mismatched frames are rejected") {
    EstimateOptions other = opts;
    other.kind = EstimatorKind::hajek;
    EstimateResult rh = estimate_average_outcome(seq, w, y, logp, whole, other);
    CHECK_THROWS_AS(effect_contrast(r, rh), std::invalid_argument);

    Region left("left", {Rect{0.0, 0.0, 0.5, 1.0}}, unit_window);
    EstimateResult rl = estimate_average_outcome(seq, w, y, logp, left, opts);
    CHECK_THROWS_AS(effect_contrast(r, rl), std::invalid_argument);
  }
}

TEST_CASE("thread count does not change results") {
  Intervention h3 = homogeneous_intervention(3.0, unit_window);
  std::vector<PointPattern> w = fixed_treatments();
  std::vector<PointPattern> y = fixed_outcomes();
  std::vector<double> logp = identity_propensities(h3, w);
  Region whole = Region::whole_window(unit_window);
  InterventionSequence seq = InterventionSequence::iid(h3, 2);

  EstimateOptions one;
  one.threads = 1;
  EstimateOptions many;
  many.threads = 4;
  EstimateResult a = estimate_average_outcome(seq, w, y, logp, whole, one);
  EstimateResult b = estimate_average_outcome(seq, w, y, logp, whole, many);
  CHECK(a.estimate == b.estimate);
  CHECK(a.variance_bound == b.variance_bound);
  CHECK(a.region_integrals == b.region_integrals);
}

TEST_CASE("estimator kind names round trip") {
  CHECK(estimator_kind_from_name("ipw") == EstimatorKind::ipw);
  CHECK(estimator_kind_from_name("hajek") == EstimatorKind::hajek);
  CHECK(estimator_kind_name(EstimatorKind::ipw) == std::string("ipw"));
  CHECK(estimator_kind_name(EstimatorKind::hajek) == std::string("hajek"));
  CHECK_THROWS_AS(estimator_kind_from_name("other"), std::invalid_argument);
}
