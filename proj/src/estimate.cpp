#include "stcausal/estimate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "stcausal/errors.hpp"
#include "stcausal/numerics.hpp"
#include "stcausal/parallel.hpp"

namespace stcausal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool zero_density(double log_p) { return std::isnan(log_p) || log_p == -kInf; }

std::string sequence_label(const InterventionSequence& seq) {
  const std::string& head = seq.at(0).label();
  const std::string& tail = seq.at(seq.M() - 1).label();
  if (head == tail) return head;
  return head + " then " + tail + " at the window start";
}

double pairwise_mean(const std::vector<double>& v) {
  return pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace

double WeightSeries::log_weight(int t) const {
  if (t < M || t > T) {
    throw std::out_of_range("WeightSeries::log_weight: period " + std::to_string(t) +
                            " outside [" + std::to_string(M) + ", " +
                            std::to_string(T) + "]");
  }
  return log_weights[static_cast<std::size_t>(t - M)];
}

double WeightSeries::mean_weight() const {
  if (log_weights.empty() || has_violation()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i]);
  return pairwise_mean(w);
}

double WeightSeries::effective_sample_size() const {
  if (log_weights.empty() || has_violation()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<double> w(log_weights.size()), w2(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i]);
    w2[i] = w[i] * w[i];
  }
  const double s = pairwise_sum(w), s2 = pairwise_sum(w2);
  if (!(s2 > 0.0)) return 0.0;
  return s * s / s2;
}

WeightSeries compute_log_weights(const InterventionSequence& seq,
                                 const std::vector<PointPattern>& treatments,
                                 const std::vector<double>& log_propensities) {
  const int T = static_cast<int>(treatments.size());
  const int M = seq.M();
  if (log_propensities.size() != treatments.size()) {
    throw std::invalid_argument(
        "compute_log_weights: need one log-propensity per treatment period (got " +
        std::to_string(log_propensities.size()) + " for " + std::to_string(T) +
        " periods)");
  }
  if (T < M + 1) {
    throw std::invalid_argument("compute_log_weights: series length " +
                                std::to_string(T) + " is degenerate for window M=" +
                                std::to_string(M) + " (need T >= M+1)");
  }

  // log f_{h_k}(W_j) for every sequence slot k and period j. Distinct slots
  // are few (one or two in practice) but correctness is per-slot.
  std::vector<double> slot_log_f(static_cast<std::size_t>(M) * T);
  for (int k = 0; k < M; ++k) {
    const Intervention& h = seq.at(k);
    for (int j = 1; j <= T; ++j) {
      slot_log_f[static_cast<std::size_t>(k) * T + (j - 1)] =
          h.log_density(treatments[static_cast<std::size_t>(j - 1)]);
    }
  }

  WeightSeries ws;
  ws.M = M;
  ws.T = T;
  ws.log_weights.resize(static_cast<std::size_t>(T - M + 1));
  for (int j = 1; j <= T; ++j) {
    if (zero_density(log_propensities[static_cast<std::size_t>(j - 1)])) {
      ws.violation_period = j;
      break;
    }
  }
  for (int t = M; t <= T; ++t) {
    double acc = 0.0;
    bool violated = false;
    for (int j = t - M + 1; j <= t; ++j) {
      const double log_p = log_propensities[static_cast<std::size_t>(j - 1)];
      if (zero_density(log_p)) {
        violated = true;
        break;
      }
      const int k = t - j;  // slot: 0 at period t, M-1 at t-M+1
      acc += slot_log_f[static_cast<std::size_t>(k) * T + (j - 1)] - log_p;
    }
    ws.log_weights[static_cast<std::size_t>(t - M)] = violated ? kInf : acc;
  }
  return ws;
}

std::vector<double> log_propensity_series(const PropensityModel& model,
                                          const std::vector<HistoryFrame>& frames,
                                          const std::vector<PointPattern>& treatments,
                                          const QuadratureGrid& grid, int threads) {
  if (frames.size() != treatments.size()) {
    throw std::invalid_argument(
        "log_propensity_series: frames and treatments must align");
  }
  std::vector<double> out(frames.size());
  parallel_for(
      static_cast<std::int64_t>(frames.size()),
      [&](std::int64_t i) {
        out[static_cast<std::size_t>(i)] =
            log_propensity(model, frames[static_cast<std::size_t>(i)],
                           treatments[static_cast<std::size_t>(i)], grid);
      },
      threads);
  return out;
}

bool compatible(const EstimandDescriptor& a, const EstimandDescriptor& b) {
  return a.region_label == b.region_label && a.M == b.M && a.T == b.T &&
         a.kind == b.kind && a.smoothed == b.smoothed && a.level == b.level;
}

double period_estimate(int t, double log_weight, const PointPattern& outcome,
                       const KernelSpec& kernel, const Region& region) {
  if (std::isnan(log_weight) || log_weight == kInf) {
    throw PositivityViolation(
        "period_estimate: non-finite weight (observed treatment has zero "
        "propensity density inside the window ending at period " +
            std::to_string(t) + ")",
        t);
  }
  const double g = smoothed_region_integral(outcome, kernel, region);
  if (g == 0.0) return 0.0;  // empty pattern: zero regardless of the weight
  return std::exp(log_weight) * g;
}

double ipw_average(const std::vector<double>& period_estimates, int M, int T) {
  if (T < M + 1) {
    throw std::invalid_argument("ipw_average: need T >= M+1 (got T=" +
                                std::to_string(T) + ", M=" + std::to_string(M) + ")");
  }
  if (period_estimates.size() != static_cast<std::size_t>(T - M + 1)) {
    throw std::invalid_argument("ipw_average: expected " + std::to_string(T - M + 1) +
                                " period estimates, got " +
                                std::to_string(period_estimates.size()));
  }
  return pairwise_mean(period_estimates);
}

double hajek_average(const std::vector<double>& region_integrals,
                     const std::vector<double>& log_weights) {
  if (region_integrals.size() != log_weights.size() || region_integrals.empty()) {
    throw std::invalid_argument(
        "hajek_average: region integrals and log-weights must align and be "
        "non-empty");
  }
  const std::size_t n = region_integrals.size();
  std::vector<double> w(n), wg(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(log_weights[i]);
    wg[i] = w[i] * region_integrals[i];
  }
  const double denom = pairwise_sum(w);
  if (!(denom > 0.0)) {
    throw std::domain_error(
        "hajek_average: degenerate weights (sum of exp(l_t) is zero)");
  }
  return pairwise_sum(wg) / denom;
}

double variance_bound(const std::vector<double>& period_estimates, int M, int T,
                      EstimatorKind kind, const std::vector<double>& log_weights) {
  if (T < M + 1) {
    throw std::invalid_argument("variance_bound: need T >= M+1");
  }
  if (period_estimates.size() != static_cast<std::size_t>(T - M + 1)) {
    throw std::invalid_argument("variance_bound: expected " +
                                std::to_string(T - M + 1) + " period estimates");
  }
  std::vector<double> sq(period_estimates.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    sq[i] = period_estimates[i] * period_estimates[i];
  }
  double vstar = pairwise_mean(sq);
  if (kind == EstimatorKind::hajek) {
    if (log_weights.size() != period_estimates.size()) {
      throw std::invalid_argument(
          "variance_bound: Hajek rescaling needs the log-weight series");
    }
    std::vector<double> w(log_weights.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i]);
    const double denom = pairwise_sum(w);
    if (!(denom > 0.0)) {
      throw std::domain_error(
          "variance_bound: degenerate weights (sum of exp(l_t) is zero)");
    }
    const double scale = static_cast<double>(T - M + 1) / denom;
    vstar *= scale * scale;
  }
  return vstar / static_cast<double>(T);
}

std::pair<double, double> confidence_interval(double estimate, double bound,
                                              double level) {
  if (!(bound >= 0.0)) {
    throw std::invalid_argument("confidence_interval: negative variance bound");
  }
  if (!(level > 0.0) || !(level < 1.0)) {
    throw std::invalid_argument("confidence_interval: level must be in (0,1)");
  }
  const double z = norm_quantile(0.5 * (1.0 + level));
  const double half = z * std::sqrt(bound);
  return {estimate - half, estimate + half};
}

EstimateResult estimate_average_outcome(const InterventionSequence& seq,
                                        const std::vector<PointPattern>& treatments,
                                        const std::vector<PointPattern>& outcomes,
                                        const std::vector<double>& log_propensities,
                                        const Region& region,
                                        const EstimateOptions& opts) {
  const int T = static_cast<int>(treatments.size());
  const int M = seq.M();
  if (outcomes.size() != treatments.size()) {
    throw std::invalid_argument(
        "estimate_average_outcome: treatments and outcomes must cover the same "
        "periods (got " +
        std::to_string(treatments.size()) + " vs " + std::to_string(outcomes.size()) +
        ")");
  }
  if (T < M + 1) {
    throw std::invalid_argument("estimate_average_outcome: series length " +
                                std::to_string(T) + " is degenerate for window M=" +
                                std::to_string(M) + " (need T >= M+1)");
  }

  WeightSeries ws = compute_log_weights(seq, treatments, log_propensities);
  if (ws.has_violation()) {
    throw PositivityViolation(
        "estimate_average_outcome: observed treatment of period " +
            std::to_string(*ws.violation_period) +
            " has zero density under the propensity model",
        *ws.violation_period);
  }

  const KernelSpec kernel = opts.kernel ? *opts.kernel : KernelSpec{bandwidth_rule(T)};
  const std::size_t n = ws.log_weights.size();

  // Unweighted region integrals, computed as an independent parallel map and
  // combined in fixed ascending-t order below (thread-count invariant).
  std::vector<double> g(n);
  parallel_for(
      static_cast<std::int64_t>(n),
      [&](std::int64_t i) {
        const PointPattern& y = outcomes[static_cast<std::size_t>(M - 1 + i)];
        g[static_cast<std::size_t>(i)] =
            opts.smoothed ? smoothed_region_integral(y, kernel, region)
                          : static_cast<double>(count_in_region(y, region));
      },
      opts.threads);

  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = g[i] == 0.0 ? 0.0 : std::exp(ws.log_weights[i]) * g[i];
  }

  EstimateResult r;
  r.descriptor = EstimandDescriptor{region.label(), sequence_label(seq), M,     T,
                                    opts.kind,      opts.smoothed,       opts.level};
  r.region_integrals = g;
  r.log_weights = ws.log_weights;

  if (opts.kind == EstimatorKind::ipw) {
    r.period_contributions = std::move(raw);
    r.estimate = pairwise_mean(r.period_contributions);
  } else {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(ws.log_weights[i]);
    const double denom = pairwise_sum(w);
    if (!(denom > 0.0)) {
      throw std::domain_error(
          "estimate_average_outcome: degenerate weights (sum of exp(l_t) is "
          "zero)");
    }
    const double scale = static_cast<double>(n) / denom;
    r.period_contributions.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.period_contributions[i] = raw[i] * scale;
    r.estimate = pairwise_mean(r.period_contributions);
    r.note =
        "Hajek variance bound uses the heuristic self-normalization rescaling "
        "[(T-M+1)/sum exp(l_t)]^2; it has no formal coverage guarantee.";
  }

  {
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
      sq[i] = r.period_contributions[i] * r.period_contributions[i];
    }
    r.variance_bound = pairwise_mean(sq) / static_cast<double>(T);
  }
  auto [lo, hi] = confidence_interval(r.estimate, r.variance_bound, opts.level);
  r.ci_lo = lo;
  r.ci_hi = hi;
  return r;
}

EstimateResult effect_contrast(const EstimateResult& first,
                               const EstimateResult& second) {
  if (!compatible(first.descriptor, second.descriptor)) {
    throw std::invalid_argument(
        "effect_contrast: results describe different estimand frames (region/"
        "M/T/estimator/smoothing/level must match)");
  }
  if (first.period_contributions.size() != second.period_contributions.size()) {
    throw std::invalid_argument(
        "effect_contrast: per-period contribution series lengths differ");
  }
  const std::size_t n = first.period_contributions.size();
  EstimateResult r;
  r.descriptor = first.descriptor;
  r.descriptor.intervention_label = "(" + second.descriptor.intervention_label +
                                    ") - (" + first.descriptor.intervention_label +
                                    ")";
  r.period_contributions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.period_contributions[i] =
        second.period_contributions[i] - first.period_contributions[i];
  }
  r.estimate = pairwise_mean(r.period_contributions);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    sq[i] = r.period_contributions[i] * r.period_contributions[i];
  }
  r.variance_bound = pairwise_mean(sq) / static_cast<double>(r.descriptor.T);
  auto [lo, hi] =
      confidence_interval(r.estimate, r.variance_bound, r.descriptor.level);
  r.ci_lo = lo;
  r.ci_hi = hi;
  if (!first.note.empty()) r.note = first.note;
  return r;
}

const char* estimator_kind_name(EstimatorKind k) {
  return k == EstimatorKind::ipw ? "ipw" : "hajek";
}

EstimatorKind estimator_kind_from_name(const std::string& name) {
  if (name == "ipw") return EstimatorKind::ipw;
  if (name == "hajek") return EstimatorKind::hajek;
  throw std::invalid_argument("unknown estimator kind '" + name +
                              "' (expected 'ipw' or 'hajek')");
}

}  // namespace stcausal
