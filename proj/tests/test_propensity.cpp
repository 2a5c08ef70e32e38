#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "stcausal/errors.hpp"
#include "stcausal/pointprocess.hpp"
#include "stcausal/propensity.hpp"
#include "stcausal/rng.hpp"

using namespace stcausal;

namespace {
const Window unit_window({0.0, 0.0, 1.0, 1.0});
const QuadratureGrid grid64(unit_window, 64, 64);

HistoryFrame bare_frame(int period) {
  HistoryFrame f;
  f.period = period;
  return f;
}

// i.i.d. draws from a fixed log-linear intensity; history plays no role.
std::vector<PointPattern> iid_series(const LogLinearIntensity& li, int T,
                                     std::uint64_t seed) {
  PoissonProcess process(li, unit_window, grid64);
  RngStream root(seed);
  std::vector<PointPattern> out;
  out.reserve(T);
  for (int t = 1; t <= T; ++t) {
    RngStream s = root.child(t);
    out.push_back(sample(process, s, t));
  }
  return out;
}

Surface ridge_covariate() {
  SegmentSet roads;
  roads.add_segment({0.2, 0.0}, {0.8, 1.0});
  return decay_surface(roads, 2.0, 1.2);
}
}  // namespace

TEST_CASE("intercept-only fit recovers the homogeneous MLE in closed form") {
  std::vector<FeatureSpec> spec{FeatureSpec::intercept()};
  std::vector<HistoryFrame> frames{bare_frame(1), bare_frame(2), bare_frame(3)};
  std::vector<PointPattern> pats{PointPattern(1, {0.1, 0.2}, {0.1, 0.2}),
                                 PointPattern(2, {0.3, 0.4, 0.5}, {0.3, 0.4, 0.5}),
                                 PointPattern(3, {0.6, 0.7, 0.8, 0.9}, {0.6, 0.7, 0.8, 0.9})};
  PropensityModel m = fit_propensity(spec, frames, pats, grid64);
  CHECK(m.beta()[0] == doctest::Approx(std::log(3.0)).epsilon(1e-8));
  CHECK(m.diagnostics().converged);
  // Observed information of the homogeneous model is the expected count n.
  CHECK(m.diagnostics().observed_information[0] == doctest::Approx(9.0).epsilon(1e-6));
  CHECK(m.diagnostics().std_errors[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("log propensity closed forms") {
  PropensityModel log3({FeatureSpec::intercept()}, {std::log(3.0)});
  CHECK(log_propensity(log3, bare_frame(1), PointPattern(), grid64) ==
        doctest::Approx(-2.0).epsilon(1e-12));

  PropensityModel unit({FeatureSpec::intercept()}, {0.0});
  PointPattern some(1, {0.2, 0.5, 0.8}, {0.3, 0.6, 0.9});
  CHECK(log_propensity(unit, bare_frame(1), some, grid64) == 0.0);
}

TEST_CASE("raising intensity away from the pattern lowers the density") {
  std::vector<FeatureSpec> spec{FeatureSpec::intercept(),
                                FeatureSpec::covariate(0, "bump")};
  HistoryFrame frame = bare_frame(1);
  frame.covariates.push_back(Surface::gaussian_density({0.8, 0.8}, 0.08));
  PointPattern far_point(1, {0.1}, {0.1});
  double prev = log_propensity(PropensityModel(spec, {0.0, 0.0}), frame, far_point, grid64);
  for (double b : {0.05, 0.1, 0.15}) {
    const double cur =
        log_propensity(PropensityModel(spec, {0.0, b}), frame, far_point, grid64);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("fit recovers a known log-linear intensity") {
  std::vector<FeatureSpec> spec{FeatureSpec::intercept(),
                                FeatureSpec::covariate(0, "ridge")};
  Surface ridge = ridge_covariate();
  const std::vector<double> truth{1.0, 0.8};
  LogLinearIntensity li(truth, {Surface::constant(1.0), ridge});
  std::vector<PointPattern> pats = iid_series(li, 200, 777);
  std::vector<HistoryFrame> frames;
  for (int t = 1; t <= 200; ++t) {
    HistoryFrame f = bare_frame(t);
    f.covariates.push_back(ridge);
    frames.push_back(std::move(f));
  }
  PropensityModel m = fit_propensity(spec, frames, pats, grid64);
  REQUIRE(m.diagnostics().converged);
  for (std::size_t f = 0; f < 2; ++f) {
    CHECK(std::abs(m.beta()[f] - truth[f]) < 3.0 * m.diagnostics().std_errors[f]);
    CHECK(std::abs(m.beta()[f] - truth[f]) < 0.3);
  }
  // Newton with halving never decreases the accepted objective.
  const auto& path = m.diagnostics().objective_path;
  for (std::size_t i = 1; i < path.size(); ++i) CHECK(path[i] >= path[i - 1]);
  // At the optimum the exposed score agrees with the fit's convergence state.
  LikelihoodEval at_opt = evaluate_likelihood(spec, m.beta(), frames, pats, grid64);
  for (double s : at_opt.score) CHECK(std::abs(s) < 1e-8);
  CHECK(at_opt.log_likelihood == m.diagnostics().log_likelihood);
}

TEST_CASE("constant weights leave the maximizer unchanged") {
  std::vector<FeatureSpec> spec{FeatureSpec::intercept(),
                                FeatureSpec::covariate(0, "ridge")};
  Surface ridge = ridge_covariate();
  LogLinearIntensity li({0.9, 0.7}, {Surface::constant(1.0), ridge});
  std::vector<PointPattern> pats = iid_series(li, 60, 778);
  std::vector<HistoryFrame> frames;
  for (int t = 1; t <= 60; ++t) {
    HistoryFrame f = bare_frame(t);
    f.covariates.push_back(ridge);
    frames.push_back(std::move(f));
  }
  PropensityModel plain = fit_propensity(spec, frames, pats, grid64);
  PropensityModel scaled =
      fit_propensity(spec, frames, pats, grid64, std::vector<double>(60, 2.5));
  for (std::size_t f = 0; f < 2; ++f) {
    CHECK(scaled.beta()[f] == doctest::Approx(plain.beta()[f]).epsilon(1e-10));
  }
}

TEST_CASE("analytic score matches central finite differences") {
  std::vector<FeatureSpec> spec{FeatureSpec::intercept(),
                                FeatureSpec::covariate(0, "ridge"),
                                FeatureSpec::treatment_decay(1, 2, 2.0, 1.0, "w*")};
  Surface ridge = ridge_covariate();
  LogLinearIntensity li({1.2, 0.5}, {Surface::constant(1.0), ridge});
  std::vector<PointPattern> pats = iid_series(li, 12, 779);
  std::vector<HistoryFrame> frames;
  for (int t = 1; t <= 12; ++t) {
    HistoryFrame f = bare_frame(t);
    f.covariates.push_back(ridge);
    if (t >= 2) f.lagged_treatments.push_back(pats[t - 2]);
    if (t >= 3) f.lagged_treatments.push_back(pats[t - 3]);
    frames.push_back(std::move(f));
  }
  RngStream rng(780);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> beta{rng.uniform() - 0.5, rng.uniform() - 0.5,
                             rng.uniform() - 0.5};
    LikelihoodEval at = evaluate_likelihood(spec, beta, frames, pats, grid64);
    const double h = 1e-5;
    for (std::size_t f = 0; f < beta.size(); ++f) {
      std::vector<double> up = beta, dn = beta;
      up[f] += h;
      dn[f] -= h;
      const double fd =
          (evaluate_likelihood(spec, up, frames, pats, grid64).log_likelihood -
           evaluate_likelihood(spec, dn, frames, pats, grid64).log_likelihood) /
          (2.0 * h);
      CHECK(std::abs(fd - at.score[f]) <= 1e-5 * (1.0 + std::abs(at.score[f])));
    }
  }
}

TEST_CASE("near-collinear features drive coefficients past the divergence guard") {
  // Data generated with a real loading on `bump`, but the fit only sees
  // `h` and `h + 0.01*bump`: matching the truth needs an opposing pair of
  // coefficients near -59/+60, so the Newton path must cross |beta| = 50.
  Surface h = ridge_covariate();
  Surface bump = Surface::gaussian_density({0.5, 0.5}, 0.2);
  Surface near_copy = Surface::sum({h, bump}, {1.0, 0.01});
  LogLinearIntensity li({0.5, 1.0, 0.6},
                        {Surface::constant(1.0), h, bump});
  std::vector<PointPattern> pats = iid_series(li, 100, 781);
  std::vector<FeatureSpec> spec{FeatureSpec::intercept(),
                                FeatureSpec::covariate(0, "copy-a"),
                                FeatureSpec::covariate(1, "copy-b")};
  std::vector<HistoryFrame> frames;
  for (int t = 1; t <= 100; ++t) {
    HistoryFrame f = bare_frame(t);
    f.covariates.push_back(h);
    f.covariates.push_back(near_copy);
    frames.push_back(std::move(f));
  }
  try {
    fit_propensity(spec, frames, pats, grid64);
    FAIL("expected FitError");
  } catch (const FitError& e) {
    CHECK((e.feature() == "copy-a" || e.feature() == "copy-b"));
  }
}

TEST_CASE("a feature with no signal yields NaN standard errors, not garbage") {
  std::vector<FeatureSpec> spec{FeatureSpec::intercept(),
                                FeatureSpec::outcome_decay(1, 1, 2.0, 1.0, "y*")};
  // No outcome history anywhere: the y* feature is identically zero, so the
  // likelihood is flat in its coefficient and the information is singular.
  std::vector<HistoryFrame> frames{bare_frame(1), bare_frame(2)};
  std::vector<PointPattern> pats{PointPattern(1, {0.4}, {0.4}),
                                 PointPattern(2, {0.6}, {0.6})};
  PropensityModel m = fit_propensity(spec, frames, pats, grid64);
  CHECK(m.beta()[1] == 0.0);  // flat direction never moves off the start
  REQUIRE(m.diagnostics().std_errors.size() == 2);
  CHECK(std::isnan(m.diagnostics().std_errors[1]));
  CHECK(std::isnan(m.diagnostics().p_values[1]));
}

TEST_CASE("balance report structure and idempotent unweighted refit") {
  // Treatments respond to lagged outcomes; outcomes are exogenous noise.
  const double a0 = 1.1, aY = 0.6;
  std::vector<FeatureSpec> spec{FeatureSpec::intercept(),
                                FeatureSpec::outcome_decay(1, 1, 2.0, 1.0, "y*")};
  PoissonProcess outcome_law(Surface::constant(8.0), unit_window, 8.0);
  RngStream root(782);
  const int T = 120;
  std::vector<PointPattern> outcomes, treatments;
  std::vector<HistoryFrame> frames;
  PointPattern prev_y;
  for (int t = 1; t <= T; ++t) {
    HistoryFrame f = bare_frame(t);
    f.lagged_outcomes.push_back(prev_y);
    LogLinearIntensity li({a0, aY},
                          {Surface::constant(1.0), decay_surface(prev_y, 2.0, 1.0)});
    PoissonProcess w_law(li, unit_window, grid64);
    RngStream sw = root.child(t, 1);
    treatments.push_back(sample(w_law, sw, t));
    frames.push_back(f);
    RngStream sy = root.child(t, 2);
    prev_y = sample(outcome_law, sy, t);
  }

  PropensityModel truth(spec, {a0, aY});
  BalanceReport report = balance_check(truth, frames, treatments, grid64, 0.9);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.truncation_quantile == 0.9);
  CHECK(report.weight_cap > 0.0);
  for (double w : report.weights) CHECK(w <= report.weight_cap);
  for (const BalanceRow& row : report.rows) {
    CHECK(row.unweighted_p >= 0.0);
    CHECK(row.unweighted_p <= 1.0);
    CHECK(row.weighted_p >= 0.0);
    CHECK(row.weighted_p <= 1.0);
  }
  // The unweighted refit is the plain fit of the same specification.
  PropensityModel direct = fit_propensity(spec, frames, treatments, grid64);
  CHECK(report.rows[1].unweighted_coef == doctest::Approx(direct.beta()[1]).epsilon(1e-8));
  // The unweighted fit sees the confounding (coefficient near truth).
  CHECK(std::abs(report.rows[1].unweighted_coef - aY) < 0.5);

  SUBCASE("quantile 1 leaves weights untouched") {
    BalanceReport full = balance_check(truth, frames, treatments, grid64, 1.0);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const double lp = log_propensity(truth, frames[t], treatments[t], grid64);
      CHECK(full.weights[t] == doctest::Approx(std::exp(-lp)).epsilon(1e-12));
    }
  }
}

TEST_CASE("degenerate weights are a diagnostic error") {
  // A wildly wrong model gives infinite inverse-propensity weights on almost
  // every period, so the truncation cap itself is infinite.
  std::vector<FeatureSpec> spec{FeatureSpec::intercept()};
  PropensityModel absurd(spec, {-800.0});
  std::vector<HistoryFrame> frames;
  std::vector<PointPattern> pats;
  RngStream root(783);
  for (int t = 1; t <= 40; ++t) {
    frames.push_back(bare_frame(t));
    RngStream s = root.child(t);
    PoissonProcess law(Surface::constant(5.0), unit_window, 5.0);
    pats.push_back(sample(law, s, t));
  }
  CHECK_THROWS_AS(balance_check(absurd, frames, pats, grid64, 0.9), FitError);
}

TEST_CASE("model JSON round trip preserves behavior") {
  std::vector<FeatureSpec> spec{FeatureSpec::intercept(),
                                FeatureSpec::covariate(0, "ridge"),
                                FeatureSpec::treatment_decay(1, 3, 2.0, 1.0, "w*1:3")};
  PropensityModel m(spec, {0.4, -0.2, 0.9});
  PropensityModel back = propensity_model_from_json(to_json_string(m));
  REQUIRE(back.n_features() == 3);
  CHECK(back.beta() == m.beta());
  CHECK(back.features()[2].lag_hi == 3);
  CHECK(back.features()[2].kind == FeatureSpec::Kind::treatment_decay);

  HistoryFrame frame = bare_frame(9);
  frame.covariates.push_back(ridge_covariate());
  frame.lagged_treatments.push_back(PointPattern(8, {0.5}, {0.5}));
  frame.lagged_treatments.push_back(PointPattern());
  frame.lagged_treatments.push_back(PointPattern(6, {0.2, 0.9}, {0.8, 0.1}));
  PointPattern probe(9, {0.45, 0.55}, {0.5, 0.5});
  CHECK(log_propensity(back, frame, probe, grid64) ==
        log_propensity(m, frame, probe, grid64));
}

TEST_CASE("feature spec validation") {
  CHECK_THROWS(FeatureSpec::treatment_decay(0, 1, 2.0, 1.0, "bad-lag"));
  CHECK_THROWS(FeatureSpec::treatment_decay(2, 1, 2.0, 1.0, "inverted"));
  CHECK_THROWS(FeatureSpec::outcome_decay(1, 1, 0.0, 1.0, "flat"));
  CHECK_THROWS(PropensityModel({FeatureSpec::covariate(0, "x")}, {1.0}));
  CHECK_THROWS(PropensityModel({FeatureSpec::intercept()}, {1.0, 2.0}));
}
