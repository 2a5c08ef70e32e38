#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stcausal/estimate.hpp"
#include "stcausal/propensity.hpp"
#include "stcausal/simstudy.hpp"

namespace stcausal {

// Shared knobs for the simulation-study experiment drivers. The defaults are
// the desk-scale profile: 50 datasets with R=500 truth draws keeps every
// experiment on a single core within minutes; `full_profile()` matches the
// 200-dataset study size.
struct StudyOptions {
  int n_datasets = 50;
  int truth_replications = 500;
  int variance_replications = 100;
  // The variance oracle evaluates every `variance_period_stride`-th eligible
  // period; 1 means all periods.
  int variance_period_stride = 5;
  // Datasets used for the Monte Carlo variance table (heavier per dataset
  // than the coverage cells, so a smaller default).
  int variance_n_datasets = 12;
  // Per-dataset MC-true variance intervals are produced for windows up to
  // this length (the oracle cost grows linearly in M).
  int mc_true_max_M = 7;
  int fit_grid_n = 48;    // quadrature for propensity fitting
  int logp_grid_n = 128;  // quadrature for log-propensity evaluation
  double level = 0.95;
  std::uint64_t seed = 20260825;
  int threads = 0;  // dataset-level parallelism; 0 = hardware

  static StudyOptions full_profile() {
    StudyOptions o;
    o.n_datasets = 200;
    return o;
  }
};

// One simulated dataset with everything the estimators need: the fitted
// propensity model and the three log-propensity series (fitted model, the
// generating coefficients, and the no-confounder homogeneous fit whose
// intercept is the closed-form Poisson MLE log(total / (T * area))).
struct PreparedDataset {
  SimulatedSeries series;
  std::vector<HistoryFrame> frames;
  std::vector<PointPattern> treatments;
  std::vector<PointPattern> outcomes;
  std::optional<PropensityModel> fitted;
  bool fit_failed = false;
  std::string fit_error;
  std::vector<double> logp_fitted;      // empty when fit_failed
  std::vector<double> logp_true;
  std::vector<double> logp_unadjusted;
};

PreparedDataset prepare_dataset(const DgpSpec& spec, int T,
                                std::uint64_t dataset_seed,
                                const StudyOptions& opt);

// --- Coverage ---------------------------------------------------------------

// One (T, M, intensity, region, estimator, variance flavor) cell of the
// CI-coverage study. Flavors: "estimated" uses each dataset's own variance
// bound; "mc_true" builds the interval from the Monte Carlo approximation of
// the true asymptotic variance (true-propensity weights).
struct CoverageCell {
  int T = 0;
  int M = 1;
  double intensity = 0.0;
  std::string region;
  EstimatorKind kind = EstimatorKind::hajek;
  std::string variance_flavor;
  double level = 0.95;
  int n_datasets = 0;
  int n_failed = 0;  // fit failures excluded from the fractions
  double coverage = 0.0;
  double mean_estimate = 0.0;
  double mean_truth = 0.0;
  double median_abs_error = 0.0;
  double mean_half_width = 0.0;
};

// Coverage of the estimators' confidence intervals against the per-dataset
// truth oracle, over a grid of homogeneous-intervention intensities, window
// lengths M, report regions, and series lengths T.
std::vector<CoverageCell> coverage_experiment(const DgpSpec& spec,
                                              const std::vector<double>& intensity_grid,
                                              const std::vector<int>& M_grid,
                                              const std::vector<Region>& regions,
                                              const std::vector<int>& T_grid,
                                              const StudyOptions& opt);

// --- Estimator-quality trend ------------------------------------------------

// M=1, whole-window cells comparing Hajek, IPW and the unadjusted
// (no-confounder) analysis against the truth oracle.
struct TrendCell {
  int T = 0;
  double intensity = 0.0;
  int n_datasets = 0;
  int n_failed = 0;
  double median_abs_error_hajek = 0.0;
  double median_abs_error_ipw = 0.0;
  double median_abs_error_unadjusted = 0.0;
  // Fraction of datasets with |hajek - truth| < |unadjusted - truth|.
  double frac_hajek_beats_unadjusted = 0.0;
};

std::vector<TrendCell> trend_experiment(const DgpSpec& spec,
                                        const std::vector<double>& intensity_grid,
                                        const std::vector<int>& T_grid,
                                        const StudyOptions& opt);

// --- Variance bound behavior ------------------------------------------------

// Monte Carlo v / v* for one (T, intensity) cell, averaged over datasets,
// plus how well each dataset's estimated bound tracks the MC v*:
// rel err = |(T-M+1) * variance_bound - v*_mc| / v*_mc with true-propensity
// IPW weights, averaged over datasets.
struct VarianceCell {
  int T = 0;
  int M = 1;
  double intensity = 0.0;
  std::string region;
  int n_datasets = 0;
  double v_mc = 0.0;
  double v_star_mc = 0.0;
  double ratio = 0.0;  // v_star_mc / v_mc
  double mean_rel_err_bound = 0.0;
};

std::vector<VarianceCell> variance_experiment(const DgpSpec& spec,
                                              const std::vector<double>& intensity_grid,
                                              int M, const Region& region,
                                              const std::vector<int>& T_grid,
                                              const StudyOptions& opt);

// --- Balance ----------------------------------------------------------------

// Replicated balance check with the generating coefficients as the propensity
// (true-propensity weights): the weighted association between treatment
// placement and each confounder should vanish. Tracks the lagged-outcome
// feature, the channel the weighting must break.
struct BalanceStudyResult {
  int replicates = 0;
  int T = 0;
  std::string feature;  // tracked feature name
  double mean_weighted_coef = 0.0;
  double mc_se_weighted_coef = 0.0;  // SD over replicates / sqrt(replicates)
  double mean_unweighted_coef = 0.0;
  double median_weighted_p = 0.0;
  double median_unweighted_p = 0.0;
  // Per-replicate rows for the tracked feature, in replicate order.
  std::vector<BalanceRow> replicate_rows;
};

BalanceStudyResult balance_experiment(const DgpSpec& spec, int replicates,
                                      const StudyOptions& opt);

}  // namespace stcausal
