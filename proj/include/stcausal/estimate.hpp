#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stcausal/geom.hpp"
#include "stcausal/interventions.hpp"
#include "stcausal/propensity.hpp"
#include "stcausal/smooth.hpp"

namespace stcausal {

// Per-period importance log-weights against the treatment-assignment model:
//   l_t = sum_{j=t-M+1}^{t} [ log f_{h_j}(W_j) - log p_j(W_j) ],  t = M..T.
// Kept in log space throughout; the M=30 products underflow otherwise.
struct WeightSeries {
  int M = 1;
  int T = 0;
  // Index 0 holds t = M. A window that covers a period whose observed
  // treatment has zero propensity density gets +inf (positivity violation).
  std::vector<double> log_weights;
  // Earliest period j with log p_j = -inf (or non-finite), if any.
  std::optional<int> violation_period;

  double log_weight(int t) const;  // t in [M, T]
  bool has_violation() const { return violation_period.has_value(); }
  // Sample mean of exp(l_t) (concentrates at 1 under the identity
  // intervention) and Kish effective sample size (sum w)^2 / sum w^2.
  double mean_weight() const;
  double effective_sample_size() const;
};

// Build the log-weight series. log_propensities[j-1] = log p_j(W_j) for
// j = 1..T; intervention slot t-j of the sequence is applied to W_j.
WeightSeries compute_log_weights(const InterventionSequence& seq,
                                 const std::vector<PointPattern>& treatments,
                                 const std::vector<double>& log_propensities);

// Convenience: log p_t(W_t) for every period under a fitted model
// (parallel map over periods; deterministic output).
std::vector<double> log_propensity_series(const PropensityModel& model,
                                          const std::vector<HistoryFrame>& frames,
                                          const std::vector<PointPattern>& treatments,
                                          const QuadratureGrid& grid,
                                          int threads = 0);

enum class EstimatorKind { ipw, hajek };

struct EstimandDescriptor {
  std::string region_label;
  std::string intervention_label;
  int M = 1;
  int T = 0;
  EstimatorKind kind = EstimatorKind::hajek;
  bool smoothed = true;
  double level = 0.95;
};

// Do two results describe the same estimand frame (so a contrast is
// meaningful)? Intervention labels are allowed to differ.
bool compatible(const EstimandDescriptor& a, const EstimandDescriptor& b);

struct EstimateResult {
  EstimandDescriptor descriptor;
  double estimate = 0.0;
  // Estimated upper bound on Var(estimate): vhat*/T, Hajek-rescaled when
  // applicable. Dominates the unobservable asymptotic variance.
  double variance_bound = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  // Per-period contributions whose plain mean equals the point estimate;
  // for Hajek the self-normalization (T-M+1)/sum_t exp(l_t) is folded in.
  // Their mean square over T is exactly `variance_bound`.
  std::vector<double> period_contributions;
  // Unweighted smoothed region integrals (or counts) G_t, t = M..T.
  std::vector<double> region_integrals;
  std::vector<double> log_weights;  // l_t, t = M..T
  // Caveats the numbers cannot carry (e.g. the Hajek interval's heuristic
  // rescaling has no formal guarantee).
  std::string note;
};

struct EstimateOptions {
  EstimatorKind kind = EstimatorKind::hajek;
  bool smoothed = true;  // false: use raw outcome counts in B instead
  double level = 0.95;
  // Smoothing kernel; defaults to bandwidth_rule(T).
  std::optional<KernelSpec> kernel;
  int threads = 0;
};

// --- Primitive estimator pieces (composable, used by the driver) ---

// exp(l_t) * smoothed_region_integral(Y_t, kernel, B). Empty outcomes give 0
// regardless of the weight. Non-finite positive l_t marks a positivity
// violation and throws.
double period_estimate(int t, double log_weight, const PointPattern& outcome,
                       const KernelSpec& kernel, const Region& region);

// Plain mean over t = M..T (requires exactly T-M+1 values).
double ipw_average(const std::vector<double>& period_estimates, int M, int T);

// sum_t exp(l_t) G_t / sum_t exp(l_t); always inside [min G_t, max G_t].
double hajek_average(const std::vector<double>& region_integrals,
                     const std::vector<double>& log_weights);

// vhat* = mean of squared period estimates; returns vhat*/T. For Hajek,
// multiplied by [(T-M+1)/sum_t exp(l_t)]^2 (log_weights required then).
double variance_bound(const std::vector<double>& period_estimates, int M, int T,
                      EstimatorKind kind,
                      const std::vector<double>& log_weights = {});

// estimate +- z_{(1+level)/2} * sqrt(bound).
std::pair<double, double> confidence_interval(double estimate, double bound,
                                              double level);

// --- Drivers ---

// Expected outcome count in `region` under the intervention sequence:
// the temporal average of weighted smoothed region integrals (IPW) or its
// Hajek variant, with variance bound and normal-quantile interval.
EstimateResult estimate_average_outcome(
    const InterventionSequence& seq, const std::vector<PointPattern>& treatments,
    const std::vector<PointPattern>& outcomes,
    const std::vector<double>& log_propensities, const Region& region,
    const EstimateOptions& opts = {});

// Effect of moving from the first intervention to the second: point estimate
// second - first; variance bound from the per-period contribution
// differences. Descriptors must be compatible.
EstimateResult effect_contrast(const EstimateResult& first,
                               const EstimateResult& second);

const char* estimator_kind_name(EstimatorKind k);
EstimatorKind estimator_kind_from_name(const std::string& name);

}  // namespace stcausal
