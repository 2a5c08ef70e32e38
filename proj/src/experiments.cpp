#include "stcausal/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stcausal/errors.hpp"
#include "stcausal/numerics.hpp"
#include "stcausal/parallel.hpp"
#include "stcausal/rng.hpp"
#include "stcausal/smooth.hpp"

namespace stcausal {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double mid = v[n / 2];
  return (n % 2 == 1) ? mid : 0.5 * (v[n / 2 - 1] + mid);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return pairwise_sum(v) / static_cast<double>(v.size());
}

double z_quantile(double level) {
  // Acklam's inverse-normal rational approximation is overkill here: the
  // experiments only build central intervals, so invert via bisection on
  // erfc, which is exact to double precision for our purposes.
  const double target = 0.5 * (1.0 + level);
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
    (cdf < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void validate_options(const StudyOptions& opt, const char* where) {
  if (opt.n_datasets < 1)
    throw std::invalid_argument(std::string(where) + ": n_datasets must be at least 1");
  if (opt.truth_replications < 1)
    throw std::invalid_argument(std::string(where) +
                                ": truth_replications must be at least 1");
  if (opt.variance_replications < 1)
    throw std::invalid_argument(std::string(where) +
                                ": variance_replications must be at least 1");
  if (opt.variance_period_stride < 1)
    throw std::invalid_argument(std::string(where) +
                                ": variance_period_stride must be at least 1");
  if (opt.fit_grid_n < 4 || opt.logp_grid_n < 4)
    throw std::invalid_argument(std::string(where) +
                                ": quadrature grids must be at least 4x4");
  if (!(opt.level > 0.0 && opt.level < 1.0))
    throw std::invalid_argument(std::string(where) + ": level must be in (0, 1)");
}

// Deterministic per-(purpose, T, dataset) seeds from the study seed.
std::uint64_t derived_seed(const StudyOptions& opt, std::uint64_t purpose, int T,
                           int dataset) {
  return RngStream(opt.seed)
      .child(purpose, static_cast<std::uint64_t>(T),
             static_cast<std::uint64_t>(dataset))
      .key();
}

}  // namespace

PreparedDataset prepare_dataset(const DgpSpec& spec, int T,
                                std::uint64_t dataset_seed,
                                const StudyOptions& opt) {
  DgpSpec s = spec;
  s.T = T;
  PreparedDataset d;
  d.series = generate_series(s, dataset_seed);
  d.frames = analysis_frames(d.series);
  d.treatments = d.series.analysis_treatments();
  d.outcomes = d.series.analysis_outcomes();

  d.logp_true = true_log_propensities(d.series, opt.logp_grid_n);

  // No-confounder analysis: homogeneous Poisson with the closed-form MLE rate.
  double total = 0.0;
  for (const PointPattern& p : d.treatments) total += static_cast<double>(p.size());
  const double area = s.window.area();
  const double rate = std::max(total, 1.0) / (static_cast<double>(T) * area);
  d.logp_unadjusted = homogeneous_log_propensities(d.series, std::log(rate));

  try {
    const QuadratureGrid fit_grid(s.window, opt.fit_grid_n, opt.fit_grid_n);
    d.fitted = fit_propensity(dgp_propensity_features(s), d.frames, d.treatments,
                              fit_grid);
    d.logp_fitted = dgp_model_log_propensities(d.series, d.fitted->beta(),
                                               opt.logp_grid_n);
  } catch (const FitError& e) {
    d.fit_failed = true;
    d.fit_error = e.what();
  }
  return d;
}

// --- Coverage ---------------------------------------------------------------

std::vector<CoverageCell> coverage_experiment(const DgpSpec& spec,
                                              const std::vector<double>& intensity_grid,
                                              const std::vector<int>& M_grid,
                                              const std::vector<Region>& regions,
                                              const std::vector<int>& T_grid,
                                              const StudyOptions& opt) {
  validate_options(opt, "coverage_experiment");
  if (intensity_grid.empty() || M_grid.empty() || regions.empty() || T_grid.empty())
    throw std::invalid_argument("coverage_experiment: every grid must be non-empty");
  for (int M : M_grid)
    if (M < 1) throw std::invalid_argument("coverage_experiment: M must be at least 1");

  const double z = z_quantile(opt.level);
  const std::size_t nreg = regions.size();

  // Per-dataset record for one (T, M, intensity) combination.
  struct Record {
    bool fit_failed = false;
    // per region: truth, estimates, half-widths
    std::vector<double> truth;
    std::vector<double> hajek, hajek_hw;
    std::vector<double> ipw, ipw_hw;
    std::vector<double> ipw_mc_hw;  // empty when the MC-true flavor is off
  };

  std::vector<CoverageCell> cells;
  for (int T : T_grid) {
    // Prepare datasets once per T; reuse across (M, intensity) combinations.
    std::vector<PreparedDataset> data(static_cast<std::size_t>(opt.n_datasets));
    parallel_for(
        opt.n_datasets,
        [&](std::int64_t d) {
          StudyOptions inner = opt;
          inner.threads = 1;
          data[static_cast<std::size_t>(d)] = prepare_dataset(
              spec, T, derived_seed(opt, rngtag::dataset, T, static_cast<int>(d) + 1),
              inner);
        },
        opt.threads);

    for (int M : M_grid) {
      if (T < M)
        throw std::invalid_argument(
            "coverage_experiment: T grid contains a series shorter than window M");
      for (double h : intensity_grid) {
        const InterventionSequence seq = InterventionSequence::iid(
            homogeneous_intervention(h, spec.window), M);
        const bool mc_true = M <= opt.mc_true_max_M;
        const double n = static_cast<double>(T - M + 1);
        std::vector<Record> rec(static_cast<std::size_t>(opt.n_datasets));

        parallel_for(
            opt.n_datasets,
            [&](std::int64_t di) {
              const PreparedDataset& d = data[static_cast<std::size_t>(di)];
              Record& r = rec[static_cast<std::size_t>(di)];
              r.fit_failed = d.fit_failed;
              const int ds = static_cast<int>(di) + 1;

              // Smoothed scoring: the truth must target the same functional
              // the estimators compute, or coverage measures smoothing bias.
              const KernelSpec truth_kernel{bandwidth_rule(T)};
              const auto truths = mc_truth_oracle_multi(
                  d.series, seq, regions, opt.truth_replications,
                  derived_seed(opt, rngtag::truth_oracle, T, ds), 1, &truth_kernel);
              r.truth.resize(nreg);
              for (std::size_t k = 0; k < nreg; ++k) r.truth[k] = truths[k].average;
              if (d.fit_failed) return;

              std::vector<VarianceOracleResult> vres;
              if (mc_true)
                vres = mc_variance_oracle_multi(
                    d.series, seq, regions, KernelSpec{bandwidth_rule(T)},
                    opt.variance_replications,
                    derived_seed(opt, rngtag::variance_oracle, T, ds), 1,
                    opt.variance_period_stride);

              r.hajek.resize(nreg);
              r.hajek_hw.resize(nreg);
              r.ipw.resize(nreg);
              r.ipw_hw.resize(nreg);
              if (mc_true) r.ipw_mc_hw.resize(nreg);
              for (std::size_t k = 0; k < nreg; ++k) {
                EstimateOptions eo;
                eo.level = opt.level;
                eo.threads = 1;
                eo.kind = EstimatorKind::hajek;
                const EstimateResult hr = estimate_average_outcome(
                    seq, d.treatments, d.outcomes, d.logp_fitted, regions[k], eo);
                r.hajek[k] = hr.estimate;
                r.hajek_hw[k] = 0.5 * (hr.ci_hi - hr.ci_lo);
                eo.kind = EstimatorKind::ipw;
                const EstimateResult ir = estimate_average_outcome(
                    seq, d.treatments, d.outcomes, d.logp_fitted, regions[k], eo);
                r.ipw[k] = ir.estimate;
                r.ipw_hw[k] = 0.5 * (ir.ci_hi - ir.ci_lo);
                if (mc_true) r.ipw_mc_hw[k] = z * std::sqrt(vres[k].v / n);
              }
            },
            opt.threads);

        // Aggregate the three flavors per region, in fixed order.
        for (std::size_t k = 0; k < nreg; ++k) {
          struct Flavor {
            EstimatorKind kind;
            const char* flavor;
            bool mc = false;
          };
          std::vector<Flavor> flavors{{EstimatorKind::hajek, "estimated", false},
                                      {EstimatorKind::ipw, "estimated", false}};
          if (mc_true) flavors.push_back({EstimatorKind::ipw, "mc_true", true});
          for (const Flavor& f : flavors) {
            CoverageCell c;
            c.T = T;
            c.M = M;
            c.intensity = h;
            c.region = regions[k].label();
            c.kind = f.kind;
            c.variance_flavor = f.flavor;
            c.level = opt.level;
            c.n_datasets = opt.n_datasets;
            int used = 0, covered = 0;
            std::vector<double> est, tru, abserr, hw;
            for (const Record& r : rec) {
              if (r.fit_failed) continue;
              ++used;
              const double e =
                  (f.kind == EstimatorKind::hajek) ? r.hajek[k] : r.ipw[k];
              const double half = f.mc ? r.ipw_mc_hw[k]
                                  : (f.kind == EstimatorKind::hajek)
                                      ? r.hajek_hw[k]
                                      : r.ipw_hw[k];
              const double t = r.truth[k];
              if (e - half <= t && t <= e + half) ++covered;
              est.push_back(e);
              tru.push_back(t);
              abserr.push_back(std::fabs(e - t));
              hw.push_back(half);
            }
            c.n_failed = opt.n_datasets - used;
            c.coverage = used > 0 ? static_cast<double>(covered) / used : 0.0;
            c.mean_estimate = mean_of(est);
            c.mean_truth = mean_of(tru);
            c.median_abs_error = median_of(abserr);
            c.mean_half_width = mean_of(hw);
            cells.push_back(std::move(c));
          }
        }
      }
    }
  }
  return cells;
}

// --- Estimator-quality trend ------------------------------------------------

std::vector<TrendCell> trend_experiment(const DgpSpec& spec,
                                        const std::vector<double>& intensity_grid,
                                        const std::vector<int>& T_grid,
                                        const StudyOptions& opt) {
  validate_options(opt, "trend_experiment");
  if (intensity_grid.empty() || T_grid.empty())
    throw std::invalid_argument("trend_experiment: every grid must be non-empty");

  const Region whole = Region::whole_window(spec.window, "window");
  std::vector<TrendCell> cells;

  for (int T : T_grid) {
    std::vector<PreparedDataset> data(static_cast<std::size_t>(opt.n_datasets));
    parallel_for(
        opt.n_datasets,
        [&](std::int64_t d) {
          StudyOptions inner = opt;
          inner.threads = 1;
          data[static_cast<std::size_t>(d)] = prepare_dataset(
              spec, T, derived_seed(opt, rngtag::dataset, T, static_cast<int>(d) + 1),
              inner);
        },
        opt.threads);

    for (double h : intensity_grid) {
      const InterventionSequence seq =
          InterventionSequence::iid(homogeneous_intervention(h, spec.window), 1);

      struct Row {
        bool ok = false;
        double truth = 0.0, hajek = 0.0, ipw = 0.0, unadj = 0.0;
      };
      std::vector<Row> rows(static_cast<std::size_t>(opt.n_datasets));

      parallel_for(
          opt.n_datasets,
          [&](std::int64_t di) {
            const PreparedDataset& d = data[static_cast<std::size_t>(di)];
            Row& r = rows[static_cast<std::size_t>(di)];
            if (d.fit_failed) return;
            const int ds = static_cast<int>(di) + 1;
            const KernelSpec truth_kernel{bandwidth_rule(T)};
            const TruthResult truth = mc_truth_oracle(
                d.series, seq, whole, opt.truth_replications,
                derived_seed(opt, rngtag::truth_oracle, T, ds), 1, &truth_kernel);
            EstimateOptions eo;
            eo.level = opt.level;
            eo.threads = 1;
            eo.kind = EstimatorKind::hajek;
            r.hajek = estimate_average_outcome(seq, d.treatments, d.outcomes,
                                               d.logp_fitted, whole, eo)
                          .estimate;
            eo.kind = EstimatorKind::ipw;
            r.ipw = estimate_average_outcome(seq, d.treatments, d.outcomes,
                                             d.logp_fitted, whole, eo)
                        .estimate;
            // Unadjusted analysis: same Hajek machinery, no-confounder fit.
            eo.kind = EstimatorKind::hajek;
            r.unadj = estimate_average_outcome(seq, d.treatments, d.outcomes,
                                               d.logp_unadjusted, whole, eo)
                          .estimate;
            r.truth = truth.average;
            r.ok = true;
          },
          opt.threads);

      TrendCell c;
      c.T = T;
      c.intensity = h;
      c.n_datasets = opt.n_datasets;
      std::vector<double> eh, ei, eu;
      int beat = 0, used = 0;
      for (const Row& r : rows) {
        if (!r.ok) continue;
        ++used;
        eh.push_back(std::fabs(r.hajek - r.truth));
        ei.push_back(std::fabs(r.ipw - r.truth));
        eu.push_back(std::fabs(r.unadj - r.truth));
        if (eh.back() < eu.back()) ++beat;
      }
      c.n_failed = opt.n_datasets - used;
      c.median_abs_error_hajek = median_of(eh);
      c.median_abs_error_ipw = median_of(ei);
      c.median_abs_error_unadjusted = median_of(eu);
      c.frac_hajek_beats_unadjusted =
          used > 0 ? static_cast<double>(beat) / used : 0.0;
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

// --- Variance bound behavior ------------------------------------------------

std::vector<VarianceCell> variance_experiment(const DgpSpec& spec,
                                              const std::vector<double>& intensity_grid,
                                              int M, const Region& region,
                                              const std::vector<int>& T_grid,
                                              const StudyOptions& opt) {
  validate_options(opt, "variance_experiment");
  if (intensity_grid.empty() || T_grid.empty())
    throw std::invalid_argument("variance_experiment: every grid must be non-empty");
  if (M < 1) throw std::invalid_argument("variance_experiment: M must be at least 1");

  const int nd = opt.variance_n_datasets;
  if (nd < 1)
    throw std::invalid_argument(
        "variance_experiment: variance_n_datasets must be at least 1");

  std::vector<VarianceCell> cells;
  for (int T : T_grid) {
    if (T < M)
      throw std::invalid_argument(
          "variance_experiment: T grid contains a series shorter than window M");
    std::vector<PreparedDataset> data(static_cast<std::size_t>(nd));
    parallel_for(
        nd,
        [&](std::int64_t d) {
          StudyOptions inner = opt;
          inner.threads = 1;
          data[static_cast<std::size_t>(d)] = prepare_dataset(
              spec, T, derived_seed(opt, rngtag::dataset, T, static_cast<int>(d) + 1),
              inner);
        },
        opt.threads);

    const double n = static_cast<double>(T - M + 1);
    for (double h : intensity_grid) {
      const InterventionSequence seq = InterventionSequence::iid(
          homogeneous_intervention(h, spec.window), M);

      struct Row {
        double v = 0.0, vstar = 0.0, rel_err = 0.0;
      };
      std::vector<Row> rows(static_cast<std::size_t>(nd));
      parallel_for(
          nd,
          [&](std::int64_t di) {
            const PreparedDataset& d = data[static_cast<std::size_t>(di)];
            Row& r = rows[static_cast<std::size_t>(di)];
            const int ds = static_cast<int>(di) + 1;
            const VarianceOracleResult vres = mc_variance_oracle(
                d.series, seq, region, KernelSpec{bandwidth_rule(T)},
                opt.variance_replications,
                derived_seed(opt, rngtag::variance_oracle, T, ds), 1,
                opt.variance_period_stride);
            r.v = vres.v;
            r.vstar = vres.v_star;
            // Estimated bound with true-propensity IPW weights vs the MC v*.
            EstimateOptions eo;
            eo.level = opt.level;
            eo.threads = 1;
            eo.kind = EstimatorKind::ipw;
            const EstimateResult er = estimate_average_outcome(
                seq, d.treatments, d.outcomes, d.logp_true, region, eo);
            const double vhat_star = n * er.variance_bound;
            r.rel_err = std::fabs(vhat_star - vres.v_star) / vres.v_star;
          },
          opt.threads);

      VarianceCell c;
      c.T = T;
      c.M = M;
      c.intensity = h;
      c.region = region.label();
      c.n_datasets = nd;
      std::vector<double> vs, vstars, errs;
      for (const Row& r : rows) {
        vs.push_back(r.v);
        vstars.push_back(r.vstar);
        errs.push_back(r.rel_err);
      }
      c.v_mc = mean_of(vs);
      c.v_star_mc = mean_of(vstars);
      c.ratio = c.v_mc > 0.0 ? c.v_star_mc / c.v_mc
                             : std::numeric_limits<double>::infinity();
      c.mean_rel_err_bound = mean_of(errs);
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

// --- Balance ----------------------------------------------------------------

BalanceStudyResult balance_experiment(const DgpSpec& spec, int replicates,
                                      const StudyOptions& opt) {
  validate_options(opt, "balance_experiment");
  if (replicates < 2)
    throw std::invalid_argument("balance_experiment: need at least 2 replicates");

  const char* kTracked = "y_lag1";
  const PropensityModel true_model(dgp_propensity_features(spec),
                                   dgp_true_beta(spec));
  const QuadratureGrid grid(spec.window, opt.fit_grid_n, opt.fit_grid_n);

  std::vector<BalanceRow> rows(static_cast<std::size_t>(replicates));
  parallel_for(
      replicates,
      [&](std::int64_t ri) {
        const std::uint64_t seed =
            derived_seed(opt, rngtag::dataset, spec.T, static_cast<int>(ri) + 1);
        DgpSpec s = spec;
        const SimulatedSeries series = generate_series(s, seed);
        const auto frames = analysis_frames(series);
        const auto wobs = series.analysis_treatments();
        const BalanceReport rep =
            balance_check(true_model, frames, wobs, grid, 1.0);
        for (const BalanceRow& row : rep.rows)
          if (row.feature == kTracked) {
            rows[static_cast<std::size_t>(ri)] = row;
            return;
          }
        throw std::logic_error(
            "balance_experiment: tracked feature missing from balance report");
      },
      opt.threads);

  BalanceStudyResult res;
  res.replicates = replicates;
  res.T = spec.T;
  res.feature = kTracked;
  std::vector<double> wc, uc, wp, up;
  for (const BalanceRow& r : rows) {
    wc.push_back(r.weighted_coef);
    uc.push_back(r.unweighted_coef);
    wp.push_back(r.weighted_p);
    up.push_back(r.unweighted_p);
  }
  res.mean_weighted_coef = mean_of(wc);
  res.mean_unweighted_coef = mean_of(uc);
  double ss = 0.0;
  for (double c : wc) ss += (c - res.mean_weighted_coef) * (c - res.mean_weighted_coef);
  res.mc_se_weighted_coef =
      std::sqrt(ss / static_cast<double>(replicates - 1)) /
      std::sqrt(static_cast<double>(replicates));
  res.median_weighted_p = median_of(wp);
  res.median_unweighted_p = median_of(up);
  res.replicate_rows = std::move(rows);
  return res;
}

}  // namespace stcausal
