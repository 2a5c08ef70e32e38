#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stcausal/estimate.hpp"
#include "stcausal/geom.hpp"
#include "stcausal/interventions.hpp"
#include "stcausal/propensity.hpp"
#include "stcausal/smooth.hpp"
#include "stcausal/surfaces.hpp"

namespace stcausal {

// The synthetic spatio-temporal study design. Two static confounders decay
// off a road network (lines) and an arc; two point-process confounders are
// refreshed every period with intensity exp{rho0 + rho1*X1}; treatments and
// outcomes are Poisson patterns whose log-intensities are linear in the
// confounders and in exponential-decay transforms of recent history:
//   lambda_t^W = exp{alpha0 + alpha_x.X_t + alpha_w*W*_{t-1} + alpha_y*Y*_{t-1}}
//   lambda_t^Y = exp{gamma0 + gamma_x.X_t + gamma2*X2
//                    + gamma_w*W*_{(t-3):t} + gamma_y*Y*_{t-1}}
// where A*(w) = exp{-point_decay_scale * dist(w, A)} and X_t collects
// (X1, X2, X3_t, X4_t). The outcome thus depends on the current and three
// previous treatment patterns (a lag-four treatment dependence).
struct DgpSpec {
  Window window{Rect{0.0, 0.0, 1.0, 1.0}};
  SegmentSet roads;  // X1 geometry (line segments)
  SegmentSet arcs;   // X2 geometry (arcs)
  double x1_amplitude = 1.2, x1_scale = 2.0;
  double x2_amplitude = 1.0, x2_scale = 3.0;
  // Decay rate of every point-history transform (X3*, X4*, W*, Y*).
  double point_decay_scale = 2.0;

  double rho0_3 = 1.8, rho1_3 = 1.0;    // X3 process
  double rho0_4 = 1.6, rho1_4 = 1.5;    // X4 process

  double alpha0 = 0.4;                  // treatment intercept
  std::array<double, 4> alpha_x{0.8, 0.5, 0.6, 0.6};
  double alpha_w = 0.5;                 // response to last period's treatments
  double alpha_y = 0.8;                 // response to last period's outcomes

  double gamma0 = 1.4;                  // outcome intercept
  std::array<double, 4> gamma_x{0.4, 0.3, 0.3, 0.3};
  double gamma2 = 0.3;                  // extra loading on the arc confounder
  double gamma_w = 1.0;                 // treatment effect channel
  double gamma_y = 0.5;                 // outcome self-excitation

  int T = 500;       // analysis periods
  int burn_in = 10;  // generated but excluded from estimation

  // Shipped defaults: the layout above with intercepts calibrated so the
  // long-run means are ~5 treatment / ~21 outcome / ~10 covariate points.
  static DgpSpec defaults();

  void validate() const;  // throws std::invalid_argument

  Surface x1_surface() const;  // x1_amplitude * exp{-x1_scale * d(roads)}
  Surface x2_surface() const;
};

// One simulated draw of the full design. Periods are stored 1..burn_in+T;
// the last T ("analysis periods") feed estimation, with the burn-in
// providing genuine lagged history for the early analysis periods.
struct SimulatedSeries {
  DgpSpec spec;
  std::uint64_t seed = 0;
  std::vector<PointPattern> x3, x4;  // confounder point realizations
  std::vector<PointPattern> treatments;
  std::vector<PointPattern> outcomes;
  int bound_enlargements = 0;  // thinning retries that occurred (normally 0)

  int total_periods() const { return spec.burn_in + spec.T; }
  // Stored index of analysis period t (1-based t in [1, spec.T]).
  int stored_index(int t) const { return spec.burn_in + t - 1; }

  std::vector<PointPattern> analysis_treatments() const;
  std::vector<PointPattern> analysis_outcomes() const;
  double mean_count(const std::vector<PointPattern>& pats, bool analysis_only) const;
};

SimulatedSeries generate_series(const DgpSpec& spec, std::uint64_t seed);

// The correctly-specified treatment-model features, in the coefficient order
// [intercept, X1, X2, X3, X4, W*(lag 1), Y*(lag 1)].
std::vector<FeatureSpec> dgp_propensity_features(const DgpSpec& spec);

// The generating coefficients in that same order.
std::vector<double> dgp_true_beta(const DgpSpec& spec);

// History frames for the analysis periods: covariates [X1, X2, X3_t, X4_t]
// and one lag of treatments/outcomes drawn from the stored history (burn-in
// included, so no frame has artificial empty lags).
std::vector<HistoryFrame> analysis_frames(const SimulatedSeries& s);

// log p_t(W_t) for the analysis periods under the DGP's model form with the
// given coefficients (the true ones, or a fit's). Batched fast path;
// quadrature over grid_n x grid_n midpoints.
std::vector<double> dgp_model_log_propensities(const SimulatedSeries& s,
                                               const std::vector<double>& beta,
                                               int grid_n = 128);

// Same under the generating coefficients: the true propensity series.
std::vector<double> true_log_propensities(const SimulatedSeries& s,
                                          int grid_n = 128);

// Closed-form log p_t(W_t) for a homogeneous model with the given intercept
// (the unadjusted analysis: no confounders).
std::vector<double> homogeneous_log_propensities(const SimulatedSeries& s,
                                                 double intercept);

// --- Monte Carlo oracles -------------------------------------------------

// E[outcome measure of B at t | pre-window history] under the intervention:
// for each analysis period t >= M and each replication, draw the window's
// treatments from the intervention, regenerate the window's outcomes through
// the outcome law (conditioning on observed covariates and pre-window
// history), and score the final pattern on B. Scoring: the plain point count
// (kernel == nullptr) or the kernel-smoothed region integral — the latter is
// the exact functional the estimators target, so estimator-vs-truth
// comparisons must use it (the raw count differs by the smoother's boundary
// leakage at finite bandwidth).
struct TruthResult {
  std::vector<double> per_period;  // index 0 <-> t = M (analysis numbering)
  double average = 0.0;
  double mc_standard_error = 0.0;  // MC error of `average`
  int replications = 0;
};

TruthResult mc_truth_oracle(const SimulatedSeries& s, const InterventionSequence& seq,
                            const Region& region, int R, std::uint64_t seed,
                            int threads = 0, const KernelSpec* kernel = nullptr);

// Shared-draw variant: one rolled treatment/outcome path scores every region
// (the draws are identical to the single-region call with the same seed).
std::vector<TruthResult> mc_truth_oracle_multi(const SimulatedSeries& s,
                                               const InterventionSequence& seq,
                                               const std::vector<Region>& regions,
                                               int R, std::uint64_t seed,
                                               int threads = 0,
                                               const KernelSpec* kernel = nullptr);

// Monte Carlo approximation of the period estimator's variance v and second
// moment v* (its upper bound), averaged over analysis periods: per (t, r),
// draw the window's treatments AND outcomes from the data-generating laws,
// form the weighted smoothed period estimate, then take moments over r.
// Population variance (divide by R), so v <= v* holds by construction.
// period_stride > 1 samples every k-th eligible period (cheaper; the moments
// average over the sampled periods only).
struct VarianceOracleResult {
  double v = 0.0;
  double v_star = 0.0;
  std::vector<double> per_period_v;       // sampled periods, in order
  std::vector<double> per_period_v_star;
  std::vector<int> sampled_periods;       // analysis-period indices sampled
  int replications = 0;
};

VarianceOracleResult mc_variance_oracle(const SimulatedSeries& s,
                                        const InterventionSequence& seq,
                                        const Region& region,
                                        const KernelSpec& kernel, int R,
                                        std::uint64_t seed, int threads = 0,
                                        int period_stride = 1);

// Shared-draw variant: one set of replicate draws scores every region
// (identical to the single-region call with the same seed, per region).
std::vector<VarianceOracleResult> mc_variance_oracle_multi(
    const SimulatedSeries& s, const InterventionSequence& seq,
    const std::vector<Region>& regions, const KernelSpec& kernel, int R,
    std::uint64_t seed, int threads = 0, int period_stride = 1);

// --- Intercept calibration ------------------------------------------------

struct CalibrationTargets {
  double x3_mean = 10.0;
  double x4_mean = 10.0;
  double treatment_mean = 5.0;
  double outcome_mean = 21.0;
  double tolerance = 0.05;  // relative
};

// Bisection on each intercept (rho0_3, rho0_4, alpha0, gamma0) against short
// pilot series until the long-run mean counts hit the targets. Fully
// decoupled intercepts (all slopes zero) are solved in closed form.
DgpSpec calibrate_intercepts(const DgpSpec& tmpl, const CalibrationTargets& targets,
                             std::uint64_t seed);

}  // namespace stcausal
