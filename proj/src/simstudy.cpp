#include "stcausal/simstudy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "stcausal/errors.hpp"
#include "stcausal/kernels.hpp"
#include "stcausal/numerics.hpp"
#include "stcausal/parallel.hpp"
#include "stcausal/pointprocess.hpp"
#include "stcausal/rng.hpp"

namespace stcausal {

namespace {

const PointPattern kEmptyPattern;

// Quadrature used by the variance oracle's per-replicate ∫λ^W evaluations.
// Coarser than the estimator's propensity grid: the intensities are smooth,
// and this integral sits inside a Monte Carlo loop.
constexpr int kVarianceOracleGridN = 64;

// Thinning with an analytic bound never breaches; the retry ladder is a
// backstop that keeps a breach from aborting a long run. Each attempt doubles
// the bound and uses a fresh child stream, so the result is still an exact
// draw from the target process.
constexpr int kMaxBoundDoublings = 6;

struct Scratch {
  std::vector<double> d2, dec;
  void ensure(std::size_t n) {
    if (d2.size() < n) {
      d2.resize(n);
      dec.resize(n);
    }
  }
};

using EvalFn =
    std::function<void(const double*, const double*, std::size_t, double*)>;

PointPattern draw_thinned(const Window& window, double bound, const EvalFn& eval,
                          const RngStream& parent, std::uint64_t tag, int period,
                          int* enlargements) {
  double b = bound;
  for (int attempt = 0;; ++attempt) {
    RngStream rng = parent.child(tag, static_cast<std::uint64_t>(period),
                                 static_cast<std::uint64_t>(attempt));
    try {
      PointPattern p = sample_thinning(window, b, eval, rng, period);
      if (enlargements != nullptr) *enlargements += attempt;
      return p;
    } catch (const BoundBreach&) {
      if (attempt >= kMaxBoundDoublings) throw;
      b *= 2.0;
    }
  }
}

// Batched evaluation of the design's log-linear intensities. All feature
// terms are either geometry decays (roads/arcs, cacheable per node set) or
// point-pattern decays evaluated through the distance kernels.
class DgpEval {
 public:
  struct TreatmentCoefs {
    double c0 = 0.0;
    std::array<double, 4> cx{0.0, 0.0, 0.0, 0.0};
    double cw = 0.0, cy = 0.0;
  };

  // Geometry feature values cached at a fixed node set (quadrature nodes).
  struct NodeCache {
    const double* xs = nullptr;
    const double* ys = nullptr;
    std::size_t n = 0;
    std::vector<double> x1, x2;
  };

  explicit DgpEval(const DgpSpec& spec) : spec_(spec) {}

  TreatmentCoefs alpha_coefs() const {
    return TreatmentCoefs{spec_.alpha0, spec_.alpha_x, spec_.alpha_w, spec_.alpha_y};
  }

  // Supremum bounds: every feature lives in (0, amplitude], so positive
  // coefficients contribute coef·amplitude and negative ones at most 0.
  // The slack keeps the bound strictly above the evaluator's output even
  // when the vectorized exp rounds a supremum-attaining point a few ULP
  // above std::exp; a breach-triggered retry would otherwise condition the
  // kept pattern on its own candidate count and bias the draw. Thinning is
  // exact under any dominating bound, so the slack costs nothing.
  static constexpr double kBoundSlack = 1.0 + 1e-9;
  double x3_bound() const {
    return kBoundSlack *
           std::exp(spec_.rho0_3 + std::max(spec_.rho1_3 * spec_.x1_amplitude, 0.0));
  }
  double x4_bound() const {
    return kBoundSlack *
           std::exp(spec_.rho0_4 + std::max(spec_.rho1_4 * spec_.x1_amplitude, 0.0));
  }
  double treatment_bound() const {
    double e = spec_.alpha0;
    e += std::max(spec_.alpha_x[0] * spec_.x1_amplitude, 0.0);
    e += std::max(spec_.alpha_x[1] * spec_.x2_amplitude, 0.0);
    e += std::max(spec_.alpha_x[2], 0.0) + std::max(spec_.alpha_x[3], 0.0);
    e += std::max(spec_.alpha_w, 0.0) + std::max(spec_.alpha_y, 0.0);
    return kBoundSlack * std::exp(e);
  }
  double outcome_bound() const {
    double e = spec_.gamma0;
    e += std::max(spec_.gamma_x[0] * spec_.x1_amplitude, 0.0);
    e += std::max((spec_.gamma_x[1] + spec_.gamma2) * spec_.x2_amplitude, 0.0);
    e += std::max(spec_.gamma_x[2], 0.0) + std::max(spec_.gamma_x[3], 0.0);
    e += std::max(spec_.gamma_w, 0.0) + std::max(spec_.gamma_y, 0.0);
    return kBoundSlack * std::exp(e);
  }

  // eta[i] += coef · amp·exp{−scale·dist((xs,ys)_i, set)}.
  void add_set(double coef, const SegmentSet& set, double scale, double amp,
               const double* xs, const double* ys, std::size_t n, Scratch& sc,
               double* eta) const {
    if (coef == 0.0 || n == 0) return;
    sc.ensure(n);
    set.distance_batch(xs, ys, n, sc.d2.data());
    for (std::size_t i = 0; i < n; ++i) sc.d2[i] *= -scale;
    kernels().exp_v(sc.d2.data(), sc.dec.data(), n);
    kernels().axpy(coef * amp, sc.dec.data(), eta, n);
  }

  // eta[i] += coef · exp{−point_decay_scale·dist((xs,ys)_i, union of pats)}.
  // An all-empty union contributes zero (the empty-history convention).
  void add_patterns(double coef, std::initializer_list<const PointPattern*> pats,
                    const double* xs, const double* ys, std::size_t n, Scratch& sc,
                    double* eta) const {
    if (coef == 0.0 || n == 0) return;
    sc.ensure(n);
    bool any = false;
    for (const PointPattern* p : pats) {
      if (p == nullptr || p->empty()) continue;
      kernels().min_dist2(xs, ys, n, p->xs().data(), p->ys().data(), p->size(),
                          sc.d2.data(), any);
      any = true;
    }
    if (!any) return;
    kernels().decay_from_dist2(sc.d2.data(), n, spec_.point_decay_scale, 1.0,
                               sc.dec.data());
    kernels().axpy(coef, sc.dec.data(), eta, n);
  }

  // Linear predictor of the treatment model at arbitrary points.
  void treatment_eta(const TreatmentCoefs& c, const PointPattern* x3,
                     const PointPattern* x4, const PointPattern* w_prev,
                     const PointPattern* y_prev, const double* xs, const double* ys,
                     std::size_t n, Scratch& sc, double* eta) const {
    std::fill(eta, eta + n, c.c0);
    add_set(c.cx[0], spec_.roads, spec_.x1_scale, spec_.x1_amplitude, xs, ys, n, sc, eta);
    add_set(c.cx[1], spec_.arcs, spec_.x2_scale, spec_.x2_amplitude, xs, ys, n, sc, eta);
    add_patterns(c.cx[2], {x3}, xs, ys, n, sc, eta);
    add_patterns(c.cx[3], {x4}, xs, ys, n, sc, eta);
    add_patterns(c.cw, {w_prev}, xs, ys, n, sc, eta);
    add_patterns(c.cy, {y_prev}, xs, ys, n, sc, eta);
  }

  // Linear predictor of the outcome model. w_recent holds the four treatment
  // patterns of periods j−3..j in ascending order (union decay). The arc
  // confounder carries the extra loading gamma2 on top of its slot in
  // gamma_x, so its effective coefficient is the sum.
  void outcome_eta(const PointPattern* x3, const PointPattern* x4,
                   const std::array<const PointPattern*, 4>& w_recent,
                   const PointPattern* y_prev, const double* xs, const double* ys,
                   std::size_t n, Scratch& sc, double* eta) const {
    std::fill(eta, eta + n, spec_.gamma0);
    add_set(spec_.gamma_x[0], spec_.roads, spec_.x1_scale, spec_.x1_amplitude,
            xs, ys, n, sc, eta);
    add_set(spec_.gamma_x[1] + spec_.gamma2, spec_.arcs, spec_.x2_scale,
            spec_.x2_amplitude, xs, ys, n, sc, eta);
    add_patterns(spec_.gamma_x[2], {x3}, xs, ys, n, sc, eta);
    add_patterns(spec_.gamma_x[3], {x4}, xs, ys, n, sc, eta);
    add_patterns(spec_.gamma_w,
                 {w_recent[0], w_recent[1], w_recent[2], w_recent[3]},
                 xs, ys, n, sc, eta);
    add_patterns(spec_.gamma_y, {y_prev}, xs, ys, n, sc, eta);
  }

  NodeCache make_cache(const double* xs, const double* ys, std::size_t n) const {
    NodeCache cache;
    cache.xs = xs;
    cache.ys = ys;
    cache.n = n;
    cache.x1.assign(n, 0.0);
    cache.x2.assign(n, 0.0);
    Scratch sc;
    add_set(1.0, spec_.roads, spec_.x1_scale, spec_.x1_amplitude, xs, ys, n, sc,
            cache.x1.data());
    add_set(1.0, spec_.arcs, spec_.x2_scale, spec_.x2_amplitude, xs, ys, n, sc,
            cache.x2.data());
    return cache;
  }

  // Treatment predictor at the cached nodes, static part only (intercept and
  // the four covariates). History terms are added by the caller per draw.
  void static_treatment_eta(const TreatmentCoefs& c, const NodeCache& cache,
                            const PointPattern* x3, const PointPattern* x4,
                            Scratch& sc, double* eta) const {
    std::fill(eta, eta + cache.n, c.c0);
    kernels().axpy(c.cx[0], cache.x1.data(), eta, cache.n);
    kernels().axpy(c.cx[1], cache.x2.data(), eta, cache.n);
    add_patterns(c.cx[2], {x3}, cache.xs, cache.ys, cache.n, sc, eta);
    add_patterns(c.cx[3], {x4}, cache.xs, cache.ys, cache.n, sc, eta);
  }

  void history_treatment_eta(const TreatmentCoefs& c, const NodeCache& cache,
                             const PointPattern* w_prev, const PointPattern* y_prev,
                             Scratch& sc, double* eta) const {
    add_patterns(c.cw, {w_prev}, cache.xs, cache.ys, cache.n, sc, eta);
    add_patterns(c.cy, {y_prev}, cache.xs, cache.ys, cache.n, sc, eta);
  }

  const DgpSpec& spec() const { return spec_; }

 private:
  const DgpSpec& spec_;
};

// Stored pattern of analysis-numbered period q (q ≤ 0 reaches into the
// burn-in; anything before the first stored period is the empty pattern).
const PointPattern& stored_or_empty(const std::vector<PointPattern>& stored,
                                    const DgpSpec& spec, int q) {
  const int idx = spec.burn_in + q - 1;
  if (idx < 0 || idx >= static_cast<int>(stored.size())) return kEmptyPattern;
  return stored[static_cast<std::size_t>(idx)];
}

// Window-local treatment/outcome draws layered over the observed history:
// periods inside (t−M, t] resolve to the replicate's own draws, earlier ones
// to the stored series.
struct WindowRoll {
  const SimulatedSeries* s = nullptr;
  int t = 0, M = 0;
  std::vector<PointPattern> w_loc, y_loc;

  WindowRoll(const SimulatedSeries& series, int period, int window_len)
      : s(&series), t(period), M(window_len), w_loc(window_len), y_loc(window_len) {}

  int slot_of(int q) const { return q - (t - M + 1); }

  const PointPattern& w_at(int q) const {
    if (q > t - M) return w_loc[static_cast<std::size_t>(slot_of(q))];
    return stored_or_empty(s->treatments, s->spec, q);
  }
  const PointPattern& y_at(int q) const {
    if (q > t - M) return y_loc[static_cast<std::size_t>(slot_of(q))];
    return stored_or_empty(s->outcomes, s->spec, q);
  }
  std::array<const PointPattern*, 4> w_recent(int j) const {
    std::array<const PointPattern*, 4> out{};
    for (int k = 0; k < 4; ++k) out[static_cast<std::size_t>(k)] = &w_at(j - 3 + k);
    return out;
  }
};

void check_finite(double v, const char* name) {
  if (!std::isfinite(v))
    throw std::invalid_argument(std::string("DgpSpec: ") + name + " must be finite");
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string("DgpSpec: ") + name + " must be positive");
}

}  // namespace

// --- DgpSpec --------------------------------------------------------------

DgpSpec DgpSpec::defaults() {
  DgpSpec s;
  // Two road segments crossing the window and a three-quarter arc in the
  // lower right; the default intercepts below are calibrated so the long-run
  // mean counts are ~10/~10 covariate, ~5 treatment, ~21 outcome points.
  s.roads.add_segment({0.10, 0.15}, {0.85, 0.95});
  s.roads.add_segment({0.00, 0.70}, {1.00, 0.45});
  s.arcs.add_arc({0.65, 0.30}, 0.28, 0.0, 4.712388980384690);
  s.rho0_3 = 1.3777105515;
  s.rho0_4 = 0.9049580220;
  s.alpha0 = -1.2480961393;
  s.gamma0 = 0.6937911123;
  return s;
}

void DgpSpec::validate() const {
  if (roads.empty())
    throw std::invalid_argument("DgpSpec: roads must contain at least one segment");
  if (arcs.empty())
    throw std::invalid_argument("DgpSpec: arcs must contain at least one arc");
  roads.validate_inside(window);
  arcs.validate_inside(window);
  check_positive(x1_amplitude, "x1_amplitude");
  check_positive(x2_amplitude, "x2_amplitude");
  check_positive(x1_scale, "x1_scale");
  check_positive(x2_scale, "x2_scale");
  check_positive(point_decay_scale, "point_decay_scale");
  check_finite(rho0_3, "rho0_3");
  check_finite(rho1_3, "rho1_3");
  check_finite(rho0_4, "rho0_4");
  check_finite(rho1_4, "rho1_4");
  check_finite(alpha0, "alpha0");
  for (double v : alpha_x) check_finite(v, "alpha_x");
  check_finite(alpha_w, "alpha_w");
  check_finite(alpha_y, "alpha_y");
  check_finite(gamma0, "gamma0");
  for (double v : gamma_x) check_finite(v, "gamma_x");
  check_finite(gamma2, "gamma2");
  check_finite(gamma_w, "gamma_w");
  check_finite(gamma_y, "gamma_y");
  if (T < 1) throw std::invalid_argument("DgpSpec: T must be at least 1");
  if (burn_in < 0) throw std::invalid_argument("DgpSpec: burn_in must be nonnegative");
}

Surface DgpSpec::x1_surface() const {
  return decay_surface(roads, x1_scale, x1_amplitude);
}

Surface DgpSpec::x2_surface() const {
  return decay_surface(arcs, x2_scale, x2_amplitude);
}

// --- SimulatedSeries ------------------------------------------------------

std::vector<PointPattern> SimulatedSeries::analysis_treatments() const {
  std::vector<PointPattern> out;
  out.reserve(static_cast<std::size_t>(spec.T));
  for (int t = 1; t <= spec.T; ++t) {
    const PointPattern& p = treatments[static_cast<std::size_t>(stored_index(t))];
    out.emplace_back(t, p.xs(), p.ys());
  }
  return out;
}

std::vector<PointPattern> SimulatedSeries::analysis_outcomes() const {
  std::vector<PointPattern> out;
  out.reserve(static_cast<std::size_t>(spec.T));
  for (int t = 1; t <= spec.T; ++t) {
    const PointPattern& p = outcomes[static_cast<std::size_t>(stored_index(t))];
    out.emplace_back(t, p.xs(), p.ys());
  }
  return out;
}

double SimulatedSeries::mean_count(const std::vector<PointPattern>& pats,
                                   bool analysis_only) const {
  std::size_t start = 0;
  if (analysis_only && pats.size() == static_cast<std::size_t>(total_periods()))
    start = static_cast<std::size_t>(spec.burn_in);
  if (pats.size() <= start) return 0.0;
  double sum = 0.0;
  for (std::size_t i = start; i < pats.size(); ++i)
    sum += static_cast<double>(pats[i].size());
  return sum / static_cast<double>(pats.size() - start);
}

// --- Generation -----------------------------------------------------------

SimulatedSeries generate_series(const DgpSpec& spec, std::uint64_t seed) {
  spec.validate();
  SimulatedSeries s;
  s.spec = spec;
  s.seed = seed;

  const DgpEval ev(s.spec);
  Scratch sc;
  const int N = spec.burn_in + spec.T;
  const std::size_t cap = static_cast<std::size_t>(N);
  s.x3.reserve(cap);
  s.x4.reserve(cap);
  s.treatments.reserve(cap);
  s.outcomes.reserve(cap);

  const RngStream root(seed);
  const double bx3 = ev.x3_bound();
  const double bx4 = ev.x4_bound();
  const double bw = ev.treatment_bound();
  const double by = ev.outcome_bound();
  const DgpEval::TreatmentCoefs alpha = ev.alpha_coefs();

  for (int t = 1; t <= N; ++t) {
    const PointPattern* w_prev = t >= 2 ? &s.treatments[static_cast<std::size_t>(t - 2)]
                                        : &kEmptyPattern;
    const PointPattern* y_prev = t >= 2 ? &s.outcomes[static_cast<std::size_t>(t - 2)]
                                        : &kEmptyPattern;

    const EvalFn x3_eval = [&](const double* xs, const double* ys, std::size_t n,
                               double* out) {
      std::fill(out, out + n, spec.rho0_3);
      ev.add_set(spec.rho1_3, spec.roads, spec.x1_scale, spec.x1_amplitude, xs, ys,
                 n, sc, out);
      kernels().exp_v(out, out, n);
    };
    s.x3.push_back(draw_thinned(spec.window, bx3, x3_eval, root, rngtag::covariate3,
                                t, &s.bound_enlargements));

    const EvalFn x4_eval = [&](const double* xs, const double* ys, std::size_t n,
                               double* out) {
      std::fill(out, out + n, spec.rho0_4);
      ev.add_set(spec.rho1_4, spec.roads, spec.x1_scale, spec.x1_amplitude, xs, ys,
                 n, sc, out);
      kernels().exp_v(out, out, n);
    };
    s.x4.push_back(draw_thinned(spec.window, bx4, x4_eval, root, rngtag::covariate4,
                                t, &s.bound_enlargements));

    const PointPattern& x3t = s.x3.back();
    const PointPattern& x4t = s.x4.back();

    const EvalFn w_eval = [&](const double* xs, const double* ys, std::size_t n,
                              double* out) {
      ev.treatment_eta(alpha, &x3t, &x4t, w_prev, y_prev, xs, ys, n, sc, out);
      kernels().exp_v(out, out, n);
    };
    s.treatments.push_back(draw_thinned(spec.window, bw, w_eval, root,
                                        rngtag::treatment, t, &s.bound_enlargements));

    std::array<const PointPattern*, 4> wrec{};
    for (int k = 0; k < 4; ++k) {
      const int q = t - 3 + k;
      wrec[static_cast<std::size_t>(k)] =
          q >= 1 ? &s.treatments[static_cast<std::size_t>(q - 1)] : &kEmptyPattern;
    }
    const EvalFn y_eval = [&](const double* xs, const double* ys, std::size_t n,
                              double* out) {
      ev.outcome_eta(&x3t, &x4t, wrec, y_prev, xs, ys, n, sc, out);
      kernels().exp_v(out, out, n);
    };
    s.outcomes.push_back(draw_thinned(spec.window, by, y_eval, root, rngtag::outcome,
                                      t, &s.bound_enlargements));
  }
  return s;
}

// --- Model form -----------------------------------------------------------

std::vector<FeatureSpec> dgp_propensity_features(const DgpSpec& spec) {
  std::vector<FeatureSpec> f;
  f.reserve(7);
  f.push_back(FeatureSpec::intercept());
  f.push_back(FeatureSpec::covariate(0, "x1_roads"));
  f.push_back(FeatureSpec::covariate(1, "x2_arcs"));
  f.push_back(FeatureSpec::covariate(2, "x3_points"));
  f.push_back(FeatureSpec::covariate(3, "x4_points"));
  f.push_back(FeatureSpec::treatment_decay(1, 1, spec.point_decay_scale, 1.0,
                                           "w_lag1"));
  f.push_back(FeatureSpec::outcome_decay(1, 1, spec.point_decay_scale, 1.0,
                                         "y_lag1"));
  return f;
}

std::vector<double> dgp_true_beta(const DgpSpec& spec) {
  return {spec.alpha0,   spec.alpha_x[0], spec.alpha_x[1], spec.alpha_x[2],
          spec.alpha_x[3], spec.alpha_w,   spec.alpha_y};
}

std::vector<HistoryFrame> analysis_frames(const SimulatedSeries& s) {
  const DgpSpec& spec = s.spec;
  const Surface x1 = spec.x1_surface();
  const Surface x2 = spec.x2_surface();
  std::vector<HistoryFrame> frames;
  frames.reserve(static_cast<std::size_t>(spec.T));
  for (int t = 1; t <= spec.T; ++t) {
    const std::size_t idx = static_cast<std::size_t>(s.stored_index(t));
    HistoryFrame fr;
    fr.period = t;
    fr.covariates = {x1, x2,
                     decay_surface(s.x3[idx], spec.point_decay_scale, 1.0),
                     decay_surface(s.x4[idx], spec.point_decay_scale, 1.0)};
    fr.lagged_treatments = {stored_or_empty(s.treatments, spec, t - 1)};
    fr.lagged_outcomes = {stored_or_empty(s.outcomes, spec, t - 1)};
    frames.push_back(std::move(fr));
  }
  return frames;
}

// --- Log-propensity series ------------------------------------------------

std::vector<double> dgp_model_log_propensities(const SimulatedSeries& s,
                                               const std::vector<double>& beta,
                                               int grid_n) {
  if (beta.size() != 7)
    throw std::invalid_argument(
        "dgp_model_log_propensities: expected 7 coefficients "
        "[intercept, x1, x2, x3, x4, w_lag1, y_lag1]");
  if (grid_n < 2)
    throw std::invalid_argument("dgp_model_log_propensities: grid_n must be >= 2");
  const DgpSpec& spec = s.spec;
  const DgpEval ev(spec);
  const QuadratureGrid grid(spec.window, grid_n, grid_n);
  const DgpEval::NodeCache cache =
      ev.make_cache(grid.node_x().data(), grid.node_y().data(), grid.node_count());
  DgpEval::TreatmentCoefs c;
  c.c0 = beta[0];
  c.cx = {beta[1], beta[2], beta[3], beta[4]};
  c.cw = beta[5];
  c.cy = beta[6];

  const double area = spec.window.area();
  const double cellw = grid.cell_weight();
  std::vector<double> out(static_cast<std::size_t>(spec.T));

  parallel_for(static_cast<std::size_t>(spec.T), [&](std::size_t i) {
    static thread_local Scratch sc;
    static thread_local std::vector<double> eta;
    const int t = static_cast<int>(i) + 1;
    const std::size_t idx = static_cast<std::size_t>(s.stored_index(t));
    const PointPattern& x3t = s.x3[idx];
    const PointPattern& x4t = s.x4[idx];
    const PointPattern& wt = s.treatments[idx];
    const PointPattern& w_prev = stored_or_empty(s.treatments, spec, t - 1);
    const PointPattern& y_prev = stored_or_empty(s.outcomes, spec, t - 1);

    eta.resize(cache.n);
    ev.static_treatment_eta(c, cache, &x3t, &x4t, sc, eta.data());
    ev.history_treatment_eta(c, cache, &w_prev, &y_prev, sc, eta.data());
    kernels().exp_v(eta.data(), eta.data(), cache.n);
    const double integral = cellw * kernels().sum(eta.data(), cache.n);

    double logp = area - integral;
    if (!wt.empty()) {
      eta.resize(wt.size());
      ev.treatment_eta(c, &x3t, &x4t, &w_prev, &y_prev, wt.xs().data(),
                       wt.ys().data(), wt.size(), sc, eta.data());
      logp += kernels().sum(eta.data(), wt.size());
    }
    out[i] = logp;
  });
  return out;
}

std::vector<double> true_log_propensities(const SimulatedSeries& s, int grid_n) {
  return dgp_model_log_propensities(s, dgp_true_beta(s.spec), grid_n);
}

std::vector<double> homogeneous_log_propensities(const SimulatedSeries& s,
                                                 double intercept) {
  const double area = s.spec.window.area();
  const double rate = std::exp(intercept);
  std::vector<double> out(static_cast<std::size_t>(s.spec.T));
  for (int t = 1; t <= s.spec.T; ++t) {
    const PointPattern& wt = s.treatments[static_cast<std::size_t>(s.stored_index(t))];
    out[static_cast<std::size_t>(t - 1)] =
        (area - rate * area) + static_cast<double>(wt.size()) * intercept;
  }
  return out;
}

// --- Truth oracle ---------------------------------------------------------

std::vector<TruthResult> mc_truth_oracle_multi(const SimulatedSeries& s,
                                               const InterventionSequence& seq,
                                               const std::vector<Region>& regions,
                                               int R, std::uint64_t seed,
                                               int threads, const KernelSpec* kernel) {
  const DgpSpec& spec = s.spec;
  const int M = seq.M();
  if (R < 1) throw std::invalid_argument("mc_truth_oracle: R must be at least 1");
  if (regions.empty())
    throw std::invalid_argument("mc_truth_oracle: need at least one region");
  if (spec.T < M)
    throw std::invalid_argument(
        "mc_truth_oracle: series has fewer analysis periods than the window length");

  const DgpEval ev(spec);
  const double by = ev.outcome_bound();
  const std::size_t nreg = regions.size();
  const std::size_t nper = static_cast<std::size_t>(spec.T - M + 1);
  const RngStream root(seed);

  // mean_var[g][i] = Var(per-period mean) for region g at t = M + i.
  std::vector<std::vector<double>> per_period(nreg, std::vector<double>(nper, 0.0));
  std::vector<std::vector<double>> mean_var(nreg, std::vector<double>(nper, 0.0));

  parallel_for(
      nper,
      [&](std::size_t i) {
        static thread_local Scratch sc;
        const int t = M + static_cast<int>(i);
        WindowRoll roll(s, t, M);
        std::vector<double> rsum(nreg, 0.0), rsumsq(nreg, 0.0);

        for (int r = 0; r < R; ++r) {
          const RngStream rep = root.child(rngtag::truth_oracle,
                                           static_cast<std::uint64_t>(t),
                                           static_cast<std::uint64_t>(r));
          for (int j = t - M + 1; j <= t; ++j) {
            const std::size_t slot = static_cast<std::size_t>(roll.slot_of(j));
            const Intervention& iv = seq.at(t - j);
            RngStream wrng =
                rep.child(rngtag::intervention, static_cast<std::uint64_t>(slot));
            roll.w_loc[slot] = sample(iv.process(), wrng, j);

            const PointPattern& x3j = stored_or_empty(s.x3, spec, j);
            const PointPattern& x4j = stored_or_empty(s.x4, spec, j);
            const auto wrec = roll.w_recent(j);
            const PointPattern& y_prev = roll.y_at(j - 1);
            const EvalFn y_eval = [&](const double* xs, const double* ys,
                                      std::size_t n, double* out) {
              ev.outcome_eta(&x3j, &x4j, wrec, &y_prev, xs, ys, n, sc, out);
              kernels().exp_v(out, out, n);
            };
            roll.y_loc[slot] = draw_thinned(spec.window, by, y_eval, rep,
                                            rngtag::outcome, j, nullptr);
          }
          const PointPattern& y_final = roll.y_loc[static_cast<std::size_t>(M - 1)];
          for (std::size_t g = 0; g < nreg; ++g) {
            const double score =
                kernel ? smoothed_region_integral(y_final, *kernel, regions[g])
                       : static_cast<double>(count_in_region(y_final, regions[g]));
            rsum[g] += score;
            rsumsq[g] += score * score;
          }
        }
        for (std::size_t g = 0; g < nreg; ++g) {
          const double mean = rsum[g] / R;
          const double pop_var = std::max(0.0, rsumsq[g] / R - mean * mean);
          per_period[g][i] = mean;
          mean_var[g][i] = pop_var / R;
        }
      },
      threads);

  std::vector<TruthResult> results(nreg);
  for (std::size_t g = 0; g < nreg; ++g) {
    TruthResult& res = results[g];
    res.per_period = per_period[g];
    res.replications = R;
    res.average = pairwise_sum(res.per_period) / static_cast<double>(nper);
    const double var_of_avg = pairwise_sum(mean_var[g]) /
                              (static_cast<double>(nper) * static_cast<double>(nper));
    res.mc_standard_error = std::sqrt(var_of_avg);
  }
  return results;
}

TruthResult mc_truth_oracle(const SimulatedSeries& s, const InterventionSequence& seq,
                            const Region& region, int R, std::uint64_t seed,
                            int threads, const KernelSpec* kernel) {
  return mc_truth_oracle_multi(s, seq, {region}, R, seed, threads, kernel)[0];
}

// --- Variance oracle ------------------------------------------------------

VarianceOracleResult mc_variance_oracle(const SimulatedSeries& s,
                                        const InterventionSequence& seq,
                                        const Region& region,
                                        const KernelSpec& kernel, int R,
                                        std::uint64_t seed, int threads,
                                        int period_stride) {
  return mc_variance_oracle_multi(s, seq, {region}, kernel, R, seed, threads,
                                  period_stride)
      .front();
}

std::vector<VarianceOracleResult> mc_variance_oracle_multi(
    const SimulatedSeries& s, const InterventionSequence& seq,
    const std::vector<Region>& regions, const KernelSpec& kernel, int R,
    std::uint64_t seed, int threads, int period_stride) {
  const DgpSpec& spec = s.spec;
  const int M = seq.M();
  if (R < 1) throw std::invalid_argument("mc_variance_oracle: R must be at least 1");
  if (regions.empty())
    throw std::invalid_argument("mc_variance_oracle: need at least one region");
  if (period_stride < 1)
    throw std::invalid_argument("mc_variance_oracle: period_stride must be at least 1");
  if (spec.T < M)
    throw std::invalid_argument(
        "mc_variance_oracle: series has fewer analysis periods than the window "
        "length");

  const DgpEval ev(spec);
  const DgpEval::TreatmentCoefs alpha = ev.alpha_coefs();
  const double bw = ev.treatment_bound();
  const double by = ev.outcome_bound();
  const double area = spec.window.area();
  const QuadratureGrid grid(spec.window, kVarianceOracleGridN, kVarianceOracleGridN);
  const DgpEval::NodeCache cache =
      ev.make_cache(grid.node_x().data(), grid.node_y().data(), grid.node_count());
  const double cellw = grid.cell_weight();

  std::vector<int> sampled;
  for (int t = M; t <= spec.T; t += period_stride) sampled.push_back(t);
  const std::size_t nper = sampled.size();
  const std::size_t nreg = regions.size();
  const RngStream root(seed);
  // per region: per-period moment accumulators
  std::vector<std::vector<double>> per_v(nreg, std::vector<double>(nper, 0.0));
  std::vector<std::vector<double>> per_vstar(nreg, std::vector<double>(nper, 0.0));

  parallel_for(
      nper,
      [&](std::size_t i) {
        static thread_local Scratch sc;
        static thread_local std::vector<double> eta;
        const int t = sampled[i];

        // Static node predictor per window period (intercept + covariates);
        // per-replicate draws only add the two history decays.
        std::vector<std::vector<double>> base(static_cast<std::size_t>(M));
        for (int j = t - M + 1; j <= t; ++j) {
          const std::size_t slot = static_cast<std::size_t>(j - (t - M + 1));
          base[slot].resize(cache.n);
          ev.static_treatment_eta(alpha, cache, &stored_or_empty(s.x3, spec, j),
                                  &stored_or_empty(s.x4, spec, j), sc,
                                  base[slot].data());
        }

        std::vector<double> sum(nreg, 0.0), sumsq(nreg, 0.0);
        WindowRoll roll(s, t, M);
        for (int r = 0; r < R; ++r) {
          const RngStream rep = root.child(rngtag::variance_oracle,
                                           static_cast<std::uint64_t>(t),
                                           static_cast<std::uint64_t>(r));
          double ell = 0.0;
          for (int j = t - M + 1; j <= t; ++j) {
            const std::size_t slot = static_cast<std::size_t>(roll.slot_of(j));
            const PointPattern& x3j = stored_or_empty(s.x3, spec, j);
            const PointPattern& x4j = stored_or_empty(s.x4, spec, j);
            const PointPattern& w_prev = roll.w_at(j - 1);
            const PointPattern& y_prev = roll.y_at(j - 1);

            const EvalFn w_eval = [&](const double* xs, const double* ys,
                                      std::size_t n, double* out) {
              ev.treatment_eta(alpha, &x3j, &x4j, &w_prev, &y_prev, xs, ys, n, sc,
                               out);
              kernels().exp_v(out, out, n);
            };
            roll.w_loc[slot] = draw_thinned(spec.window, bw, w_eval, rep,
                                            rngtag::treatment, j, nullptr);
            const PointPattern& wj = roll.w_loc[slot];

            // log f under the intervention, log p under the generating law.
            ell += seq.at(t - j).log_density(wj);
            eta.assign(base[slot].begin(), base[slot].end());
            ev.history_treatment_eta(alpha, cache, &w_prev, &y_prev, sc, eta.data());
            kernels().exp_v(eta.data(), eta.data(), cache.n);
            const double integral = cellw * kernels().sum(eta.data(), cache.n);
            double logp = area - integral;
            if (!wj.empty()) {
              eta.resize(wj.size());
              ev.treatment_eta(alpha, &x3j, &x4j, &w_prev, &y_prev, wj.xs().data(),
                               wj.ys().data(), wj.size(), sc, eta.data());
              logp += kernels().sum(eta.data(), wj.size());
            }
            ell -= logp;

            const auto wrec = roll.w_recent(j);
            const EvalFn y_eval = [&](const double* xs, const double* ys,
                                      std::size_t n, double* out) {
              ev.outcome_eta(&x3j, &x4j, wrec, &y_prev, xs, ys, n, sc, out);
              kernels().exp_v(out, out, n);
            };
            roll.y_loc[slot] = draw_thinned(spec.window, by, y_eval, rep,
                                            rngtag::outcome, j, nullptr);
          }
          const double w = std::exp(ell);
          const PointPattern& yT = roll.y_loc[static_cast<std::size_t>(M - 1)];
          for (std::size_t k = 0; k < nreg; ++k) {
            const double est = w * smoothed_region_integral(yT, kernel, regions[k]);
            sum[k] += est;
            sumsq[k] += est * est;
          }
        }
        for (std::size_t k = 0; k < nreg; ++k) {
          const double mean = sum[k] / R;
          per_vstar[k][i] = sumsq[k] / R;
          // Population variance over the R draws: v = v* − mean² ≤ v* always.
          per_v[k][i] = std::max(0.0, per_vstar[k][i] - mean * mean);
        }
      },
      threads);

  std::vector<VarianceOracleResult> out(nreg);
  for (std::size_t k = 0; k < nreg; ++k) {
    VarianceOracleResult& res = out[k];
    res.per_period_v = std::move(per_v[k]);
    res.per_period_v_star = std::move(per_vstar[k]);
    res.sampled_periods = sampled;
    res.v = pairwise_sum(res.per_period_v) / static_cast<double>(nper);
    res.v_star = pairwise_sum(res.per_period_v_star) / static_cast<double>(nper);
    res.replications = R;
  }
  return out;
}

// --- Calibration ----------------------------------------------------------

namespace {

constexpr int kPilotT = 200;
constexpr int kPilotReps = 20;
constexpr int kBisectMax = 16;
constexpr int kSweepMax = 6;
// Half-width of the bisection bracket around the warm start, and how many
// bracket-width shifts to try when the warm start misses. Kept narrow on
// purpose: probing an intercept far above the target blows up the simulated
// pattern sizes (cost is quadratic in points per period).
constexpr double kBracketHalfWidth = 0.6;
constexpr int kBracketWalkMax = 8;

// Mean analysis-period count of one series under a candidate spec, averaged
// over pilot replicates. Replicate seeds are fixed by (seed, rep) only, so
// repeated evaluations at different intercepts share random numbers and the
// pilot mean is a smooth, monotone function of the intercept.
double pilot_mean(const DgpSpec& spec, int which, std::uint64_t seed) {
  DgpSpec p = spec;
  p.T = kPilotT;
  const RngStream root(seed);
  double acc = 0.0;
  for (int rep = 0; rep < kPilotReps; ++rep) {
    const std::uint64_t rep_seed =
        root.child(rngtag::calibration, static_cast<std::uint64_t>(rep)).key();
    const SimulatedSeries sim = generate_series(p, rep_seed);
    const std::vector<PointPattern>& v = which == 0   ? sim.x3
                                         : which == 1 ? sim.x4
                                         : which == 2 ? sim.treatments
                                                      : sim.outcomes;
    acc += sim.mean_count(v, true);
  }
  return acc / kPilotReps;
}

}  // namespace

DgpSpec calibrate_intercepts(const DgpSpec& tmpl, const CalibrationTargets& targets,
                             std::uint64_t seed) {
  for (double v : {targets.x3_mean, targets.x4_mean, targets.treatment_mean,
                   targets.outcome_mean})
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("calibrate_intercepts: targets must be positive");
  if (!(targets.tolerance > 0.0 && targets.tolerance < 1.0))
    throw std::invalid_argument(
        "calibrate_intercepts: tolerance must lie in (0, 1)");

  DgpSpec spec = tmpl;
  spec.validate();
  const double area = spec.window.area();

  struct Item {
    const char* label;
    int which;
    double DgpSpec::*member;
    double target;
    bool decoupled;
  };
  const auto all_zero = [](const std::array<double, 4>& a) {
    return a[0] == 0.0 && a[1] == 0.0 && a[2] == 0.0 && a[3] == 0.0;
  };
  const std::array<Item, 4> items{{
      {"x3", 0, &DgpSpec::rho0_3, targets.x3_mean, spec.rho1_3 == 0.0},
      {"x4", 1, &DgpSpec::rho0_4, targets.x4_mean, spec.rho1_4 == 0.0},
      {"treatment", 2, &DgpSpec::alpha0, targets.treatment_mean,
       all_zero(spec.alpha_x) && spec.alpha_w == 0.0 && spec.alpha_y == 0.0},
      {"outcome", 3, &DgpSpec::gamma0, targets.outcome_mean,
       all_zero(spec.gamma_x) && spec.gamma2 == 0.0 && spec.gamma_w == 0.0 &&
           spec.gamma_y == 0.0},
  }};

  // With all slopes zero the mean count is exp(intercept)·area exactly.
  for (const Item& it : items)
    if (it.decoupled) spec.*(it.member) = std::log(it.target / area);

  for (int sweep = 0; sweep < kSweepMax; ++sweep) {
    bool adjusted = false;
    for (const Item& it : items) {
      if (it.decoupled) continue;
      const double current = pilot_mean(spec, it.which, seed);
      if (std::abs(current - it.target) <= targets.tolerance * it.target) continue;
      adjusted = true;

      const auto mean_at = [&](double c) {
        DgpSpec q = spec;
        q.*(it.member) = c;
        return pilot_mean(q, it.which, seed);
      };
      // Counts scale roughly like exp(Δintercept), so one pilot pins down a
      // warm start; bisect in a narrow bracket around it, sliding the bracket
      // when feedback in the design bends the response away from the guess.
      const double warm = spec.*(it.member) + std::log(it.target / current);
      double lo = warm - kBracketHalfWidth;
      double hi = warm + kBracketHalfWidth;
      int walks = 0;
      while (mean_at(lo) > it.target) {
        lo -= 2.0 * kBracketHalfWidth;
        hi = lo + 2.0 * kBracketHalfWidth;
        if (++walks > kBracketWalkMax)
          throw std::domain_error(std::string("calibrate_intercepts: target for ") +
                                  it.label + " could not be bracketed");
      }
      while (mean_at(hi) < it.target) {
        hi += 2.0 * kBracketHalfWidth;
        lo = hi - 2.0 * kBracketHalfWidth;
        if (++walks > kBracketWalkMax)
          throw std::domain_error(std::string("calibrate_intercepts: target for ") +
                                  it.label + " could not be bracketed");
      }
      for (int k = 0; k < kBisectMax; ++k) {
        const double mid = 0.5 * (lo + hi);
        const double m = mean_at(mid);
        if (std::abs(m - it.target) <= 0.5 * targets.tolerance * it.target) {
          lo = hi = mid;
          break;
        }
        (m < it.target ? lo : hi) = mid;
      }
      spec.*(it.member) = 0.5 * (lo + hi);
    }
    if (!adjusted) return spec;
  }
  throw std::runtime_error(
      "calibrate_intercepts: intercepts did not settle within the sweep limit");
}

}  // namespace stcausal
