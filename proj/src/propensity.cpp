#include "stcausal/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <utility>

#include <json.hpp>

#include "stcausal/errors.hpp"
#include "stcausal/kernels.hpp"
#include "stcausal/numerics.hpp"
#include "stcausal/parallel.hpp"

namespace stcausal {

namespace {

void validate_spec(const FeatureSpec& f) {
  switch (f.kind) {
    case FeatureSpec::Kind::intercept:
      break;
    case FeatureSpec::Kind::covariate:
      if (f.index < 0) {
        throw std::invalid_argument("feature '" + f.name +
                                    "': covariate index must be >= 0");
      }
      break;
    case FeatureSpec::Kind::treatment_decay:
    case FeatureSpec::Kind::outcome_decay:
      if (f.lag_lo < 1 || f.lag_hi < f.lag_lo) {
        throw std::invalid_argument("feature '" + f.name +
                                    "': lags must satisfy 1 <= lag_lo <= lag_hi");
      }
      if (!(f.scale > 0.0)) {
        throw std::invalid_argument("feature '" + f.name +
                                    "': decay scale must be > 0");
      }
      break;
  }
}

Surface build_feature(const FeatureSpec& f, const HistoryFrame& frame) {
  switch (f.kind) {
    case FeatureSpec::Kind::intercept:
      return Surface::constant(1.0);
    case FeatureSpec::Kind::covariate:
      if (f.index >= static_cast<int>(frame.covariates.size())) {
        throw std::invalid_argument("feature '" + f.name + "': frame for period " +
                                    std::to_string(frame.period) + " has only " +
                                    std::to_string(frame.covariates.size()) +
                                    " covariate surfaces");
      }
      return frame.covariates[f.index];
    case FeatureSpec::Kind::treatment_decay:
    case FeatureSpec::Kind::outcome_decay: {
      const auto& source = f.kind == FeatureSpec::Kind::treatment_decay
                               ? frame.lagged_treatments
                               : frame.lagged_outcomes;
      std::vector<const PointPattern*> patterns;
      for (int lag = f.lag_lo; lag <= f.lag_hi; ++lag) {
        const std::size_t idx = static_cast<std::size_t>(lag - 1);
        if (idx < source.size()) patterns.push_back(&source[idx]);
      }
      return decay_surface_union(patterns, f.scale, f.amplitude);
    }
  }
  throw std::logic_error("unreachable feature kind");
}

// Cached per-period data for the likelihood: node rows are pooled so surfaces
// shared across periods (static covariates, the intercept) are evaluated once.
struct FitWorkspace {
  std::size_t k = 0, T = 0, n_nodes = 0;
  double cell_w = 0.0;
  std::vector<std::vector<double>> node_rows;  // one row per unique surface
  std::vector<std::size_t> row_of;             // [t*k + f] -> node_rows index
  std::vector<double> point_sums;              // [t*k + f] = sum_s X_f(s)
  std::vector<double> n_points;                // per period
  std::vector<double> weights;                 // resolved (all 1 when empty)
};

FitWorkspace build_workspace(const std::vector<FeatureSpec>& specs,
                             const std::vector<HistoryFrame>& frames,
                             const std::vector<PointPattern>& observed,
                             const QuadratureGrid& grid,
                             const std::vector<double>& weights) {
  if (specs.empty()) throw std::invalid_argument("propensity fit: no features");
  if (frames.empty()) throw std::invalid_argument("propensity fit: no periods");
  if (frames.size() != observed.size()) {
    throw std::invalid_argument("propensity fit: frames and treatments differ in length");
  }
  if (!weights.empty() && weights.size() != frames.size()) {
    throw std::invalid_argument("propensity fit: weight count != period count");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("propensity fit: weights must be finite and >= 0");
    }
  }
  for (const FeatureSpec& f : specs) validate_spec(f);

  FitWorkspace ws;
  ws.k = specs.size();
  ws.T = frames.size();
  ws.n_nodes = grid.node_count();
  ws.cell_w = grid.cell_weight();
  ws.row_of.resize(ws.T * ws.k);
  ws.point_sums.assign(ws.T * ws.k, 0.0);
  ws.n_points.resize(ws.T);
  ws.weights = weights.empty() ? std::vector<double>(ws.T, 1.0) : weights;

  // First pass: build the feature surfaces, dedupe by implementation identity,
  // and take the per-period point-feature sums (points only enter through
  // sum_s X(s), so the full point rows need not be kept).
  std::unordered_map<const void*, std::size_t> row_index;
  std::vector<Surface> unique_surfaces;
  std::vector<double> buf;
  for (std::size_t t = 0; t < ws.T; ++t) {
    const std::vector<Surface> feats = build_features(specs, frames[t]);
    const PointPattern& pts = observed[t];
    ws.n_points[t] = static_cast<double>(pts.size());
    buf.resize(pts.size());
    for (std::size_t f = 0; f < ws.k; ++f) {
      const auto [it, inserted] =
          row_index.try_emplace(feats[f].identity(), unique_surfaces.size());
      if (inserted) unique_surfaces.push_back(feats[f]);
      ws.row_of[t * ws.k + f] = it->second;
      if (!pts.empty()) {
        feats[f].value_batch(pts.xs().data(), pts.ys().data(), pts.size(), buf.data());
        ws.point_sums[t * ws.k + f] = pairwise_sum(buf);
      }
    }
  }

  // Second pass: evaluate each unique surface over the grid nodes (parallel
  // over surfaces; rows are independent slots, so order is deterministic).
  ws.node_rows.resize(unique_surfaces.size());
  parallel_for(unique_surfaces.size(), [&](std::size_t i) {
    ws.node_rows[i].resize(ws.n_nodes);
    unique_surfaces[i].value_batch(grid.node_x().data(), grid.node_y().data(),
                                   ws.n_nodes, ws.node_rows[i].data());
  });
  return ws;
}

struct EvalResult {
  double loglik = 0.0;
  std::vector<double> score;
  std::vector<double> info;  // negative Hessian, row-major k x k
};

EvalResult eval_likelihood(const FitWorkspace& ws, const std::vector<double>& beta,
                           bool with_derivatives) {
  const std::size_t k = ws.k, n = ws.n_nodes;
  EvalResult out;
  if (with_derivatives) {
    out.score.assign(k, 0.0);
    out.info.assign(k * k, 0.0);
  }
  std::vector<double> eta(n), ex(n);
  const KernelOps& ops = kernels();
  for (std::size_t t = 0; t < ws.T; ++t) {
    const double w = ws.weights[t];
    if (w == 0.0) continue;
    std::fill(eta.begin(), eta.end(), 0.0);
    for (std::size_t f = 0; f < k; ++f) {
      const double b = beta[f];
      if (b != 0.0) ops.axpy(b, ws.node_rows[ws.row_of[t * k + f]].data(), eta.data(), n);
    }
    ops.exp_v(eta.data(), ex.data(), n);
    const double integral = ws.cell_w * ops.sum(ex.data(), n);
    double point_term = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      point_term += beta[f] * ws.point_sums[t * k + f];
    }
    out.loglik += w * (point_term - integral);
    if (!with_derivatives) continue;
    for (std::size_t f = 0; f < k; ++f) {
      const double* xf = ws.node_rows[ws.row_of[t * k + f]].data();
      out.score[f] += w * (ws.point_sums[t * k + f] - ws.cell_w * ops.dot(ex.data(), xf, n));
      for (std::size_t g = f; g < k; ++g) {
        const double* xg = ws.node_rows[ws.row_of[t * k + g]].data();
        out.info[f * k + g] += w * ws.cell_w * ops.dot3(ex.data(), xf, xg, n);
      }
    }
  }
  if (with_derivatives) {
    for (std::size_t f = 0; f < k; ++f) {
      for (std::size_t g = 0; g < f; ++g) out.info[f * k + g] = out.info[g * k + f];
    }
  }
  return out;
}

// Wald machinery shared by fit diagnostics and the balance report.
void fill_wald(FitDiagnostics& d, std::size_t k) {
  d.std_errors.assign(k, std::numeric_limits<double>::quiet_NaN());
  d.p_values.assign(k, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> inv = d.observed_information;
  if (!invert_spd(inv, k)) return;
  for (std::size_t f = 0; f < k; ++f) {
    const double var = inv[f * k + f];
    if (!(var > 0.0)) continue;
    d.std_errors[f] = std::sqrt(var);
    // beta is unknown here; caller overwrites p-values with the right z.
  }
}

}  // namespace

FeatureSpec FeatureSpec::intercept() { return FeatureSpec{}; }

FeatureSpec FeatureSpec::covariate(int index, std::string name) {
  FeatureSpec f;
  f.kind = Kind::covariate;
  f.index = index;
  f.name = std::move(name);
  return f;
}

FeatureSpec FeatureSpec::treatment_decay(int lag_lo, int lag_hi, double scale,
                                         double amplitude, std::string name) {
  FeatureSpec f;
  f.kind = Kind::treatment_decay;
  f.lag_lo = lag_lo;
  f.lag_hi = lag_hi;
  f.scale = scale;
  f.amplitude = amplitude;
  f.name = std::move(name);
  validate_spec(f);
  return f;
}

FeatureSpec FeatureSpec::outcome_decay(int lag_lo, int lag_hi, double scale,
                                       double amplitude, std::string name) {
  FeatureSpec f = treatment_decay(lag_lo, lag_hi, scale, amplitude, std::move(name));
  f.kind = Kind::outcome_decay;
  return f;
}

std::vector<Surface> build_features(const std::vector<FeatureSpec>& specs,
                                    const HistoryFrame& frame) {
  std::vector<Surface> out;
  out.reserve(specs.size());
  for (const FeatureSpec& f : specs) out.push_back(build_feature(f, frame));
  return out;
}

PropensityModel::PropensityModel(std::vector<FeatureSpec> features,
                                 std::vector<double> beta)
    : PropensityModel(std::move(features), std::move(beta), FitDiagnostics{}) {}

PropensityModel::PropensityModel(std::vector<FeatureSpec> features,
                                 std::vector<double> beta, FitDiagnostics diagnostics)
    : features_(std::move(features)), beta_(std::move(beta)),
      diagnostics_(std::move(diagnostics)) {
  if (features_.empty()) {
    throw std::invalid_argument("PropensityModel: needs at least one feature");
  }
  if (features_.size() != beta_.size()) {
    throw std::invalid_argument("PropensityModel: coefficient count != feature count");
  }
  if (features_.front().kind != FeatureSpec::Kind::intercept) {
    throw std::invalid_argument("PropensityModel: first feature must be the intercept");
  }
  for (const FeatureSpec& f : features_) validate_spec(f);
  for (double b : beta_) {
    if (!std::isfinite(b)) {
      throw std::invalid_argument("PropensityModel: coefficients must be finite");
    }
  }
}

LogLinearIntensity PropensityModel::intensity_for(const HistoryFrame& frame) const {
  // The model's first feature need not be the literal intercept surface, so
  // prepend nothing: LogLinearIntensity validates feature 0 is constant 1.
  return LogLinearIntensity(beta_, build_features(features_, frame));
}

PropensityModel fit_propensity(const std::vector<FeatureSpec>& features,
                               const std::vector<HistoryFrame>& frames,
                               const std::vector<PointPattern>& observed_treatments,
                               const QuadratureGrid& grid,
                               const std::vector<double>& weights) {
  FitWorkspace ws = build_workspace(features, frames, observed_treatments, grid, weights);
  const std::size_t k = ws.k;

  // Warm start: the homogeneous MLE on the intercept, zero elsewhere.
  std::vector<double> beta(k, 0.0);
  for (std::size_t f = 0; f < k; ++f) {
    if (features[f].kind == FeatureSpec::Kind::intercept) {
      const double total = std::max(0.5, pairwise_sum(ws.n_points));
      beta[f] = std::log(total / (static_cast<double>(ws.T) * grid.window().area()));
      break;
    }
  }

  FitDiagnostics diag;
  EvalResult cur = eval_likelihood(ws, beta, true);
  diag.objective_path.push_back(cur.loglik);

  std::vector<double> step(k);
  for (int iter = 0; iter < 100; ++iter) {
    double gmax = 0.0;
    for (double s : cur.score) gmax = std::max(gmax, std::abs(s));
    diag.gradient_max_norm = gmax;
    if (gmax < 1e-8) {
      diag.converged = true;
      break;
    }

    std::vector<double> lhs = cur.info;
    step = cur.score;
    if (!solve_spd(lhs, step, k)) {
      // Singular information: name the flattest direction (typically a
      // feature that is identically zero over the whole series).
      std::size_t worst = 0;
      for (std::size_t f = 1; f < k; ++f) {
        if (cur.info[f * k + f] < cur.info[worst * k + worst]) worst = f;
      }
      throw FitError("propensity fit: observed information is singular "
                     "(feature '" + features[worst].name + "' carries no signal)",
                     features[worst].name);
    }

    // Step halving on the discretized objective.
    double scale = 1.0;
    std::vector<double> cand(k);
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      for (std::size_t f = 0; f < k; ++f) cand[f] = beta[f] + scale * step[f];
      const EvalResult trial = eval_likelihood(ws, cand, false);
      if (trial.loglik >= cur.loglik - 1e-12 * (1.0 + std::abs(cur.loglik))) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // stalled: report non-convergence, do not fail

    beta = cand;
    cur = eval_likelihood(ws, beta, true);
    diag.objective_path.push_back(cur.loglik);
    diag.iterations = iter + 1;

    double bmax = 0.0;
    std::size_t barg = 0;
    for (std::size_t f = 0; f < k; ++f) {
      if (std::abs(beta[f]) > bmax) {
        bmax = std::abs(beta[f]);
        barg = f;
      }
    }
    if (bmax > 50.0) {
      throw FitError("propensity fit diverged: |coefficient| of feature '" +
                         features[barg].name + "' exceeds 50 (separation?)",
                     features[barg].name);
    }
  }

  diag.log_likelihood = cur.loglik;
  diag.observed_information = cur.info;
  {
    double gmax = 0.0;
    for (double s : cur.score) gmax = std::max(gmax, std::abs(s));
    diag.gradient_max_norm = gmax;
    if (gmax < 1e-8) diag.converged = true;
  }
  fill_wald(diag, k);
  for (std::size_t f = 0; f < k; ++f) {
    if (diag.std_errors[f] > 0.0) {
      diag.p_values[f] = 2.0 * norm_cdf(-std::abs(beta[f]) / diag.std_errors[f]);
    }
  }
  return PropensityModel(features, std::move(beta), std::move(diag));
}

double log_propensity(const PropensityModel& model, const HistoryFrame& frame,
                      const PointPattern& pattern, const QuadratureGrid& grid) {
  const std::vector<Surface> feats = build_features(model.features(), frame);
  const std::vector<double>& beta = model.beta();
  const std::size_t k = feats.size();

  // integral of exp{beta.X} over the window.
  const std::size_t n = grid.node_count();
  std::vector<double> eta(n, 0.0), ex(n);
  for (std::size_t f = 0; f < k; ++f) {
    if (beta[f] != 0.0) {
      std::vector<double> row(n);
      feats[f].value_batch(grid.node_x().data(), grid.node_y().data(), n, row.data());
      kernels().axpy(beta[f], row.data(), eta.data(), n);
    }
  }
  kernels().exp_v(eta.data(), ex.data(), n);
  const double integral = grid.cell_weight() * kernels().sum(ex.data(), n);

  double log_points = 0.0;
  if (!pattern.empty()) {
    std::vector<double> vals(pattern.size()), acc(pattern.size(), 0.0);
    for (std::size_t f = 0; f < k; ++f) {
      if (beta[f] == 0.0) continue;
      feats[f].value_batch(pattern.xs().data(), pattern.ys().data(), pattern.size(),
                           vals.data());
      kernels().axpy(beta[f], vals.data(), acc.data(), pattern.size());
    }
    for (double lv : acc) {
      if (!std::isfinite(lv) && lv < 0.0) return -std::numeric_limits<double>::infinity();
      log_points += lv;
    }
  }
  return (grid.window().area() - integral) + log_points;
}

LikelihoodEval evaluate_likelihood(const std::vector<FeatureSpec>& features,
                                   const std::vector<double>& beta,
                                   const std::vector<HistoryFrame>& frames,
                                   const std::vector<PointPattern>& observed_treatments,
                                   const QuadratureGrid& grid,
                                   const std::vector<double>& weights) {
  if (beta.size() != features.size()) {
    throw std::invalid_argument("evaluate_likelihood: beta size != feature count");
  }
  FitWorkspace ws =
      build_workspace(features, frames, observed_treatments, grid, weights);
  EvalResult r = eval_likelihood(ws, beta, true);
  return LikelihoodEval{r.loglik, std::move(r.score), std::move(r.info)};
}

BalanceReport balance_check(const PropensityModel& model,
                            const std::vector<HistoryFrame>& frames,
                            const std::vector<PointPattern>& observed_treatments,
                            const QuadratureGrid& grid, double truncation_quantile) {
  if (!(truncation_quantile > 0.0) || truncation_quantile > 1.0) {
    throw std::invalid_argument("balance_check: truncation quantile must be in (0, 1]");
  }
  if (frames.size() != observed_treatments.size() || frames.empty()) {
    throw std::invalid_argument("balance_check: need matching, nonempty series");
  }

  std::vector<double> w(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const double lp = log_propensity(model, frames[t], observed_treatments[t], grid);
    w[t] = std::exp(-lp);  // 1 / p_t(W_t); +inf on a positivity violation
  }
  const double cap = quantile(w, truncation_quantile);
  if (!std::isfinite(cap) || !(cap > 0.0)) {
    throw FitError("balance_check: weight truncation cap is degenerate (" +
                       std::to_string(cap) + ")",
                   "weights");
  }
  for (double& x : w) x = std::min(x, cap);

  PropensityModel unweighted =
      fit_propensity(model.features(), frames, observed_treatments, grid);
  PropensityModel weighted =
      fit_propensity(model.features(), frames, observed_treatments, grid, w);

  BalanceReport report;
  report.truncation_quantile = truncation_quantile;
  report.weight_cap = cap;
  report.weights = std::move(w);
  for (std::size_t f = 0; f < model.n_features(); ++f) {
    BalanceRow row;
    row.feature = model.features()[f].name;
    row.unweighted_coef = unweighted.beta()[f];
    row.unweighted_p = unweighted.diagnostics().p_values[f];
    row.weighted_coef = weighted.beta()[f];
    row.weighted_p = weighted.diagnostics().p_values[f];
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

const char* kind_name(FeatureSpec::Kind k) {
  switch (k) {
    case FeatureSpec::Kind::intercept: return "intercept";
    case FeatureSpec::Kind::covariate: return "covariate";
    case FeatureSpec::Kind::treatment_decay: return "treatment_decay";
    case FeatureSpec::Kind::outcome_decay: return "outcome_decay";
  }
  return "?";
}

FeatureSpec::Kind kind_from_name(const std::string& s) {
  if (s == "intercept") return FeatureSpec::Kind::intercept;
  if (s == "covariate") return FeatureSpec::Kind::covariate;
  if (s == "treatment_decay") return FeatureSpec::Kind::treatment_decay;
  if (s == "outcome_decay") return FeatureSpec::Kind::outcome_decay;
  throw std::invalid_argument("unknown feature kind '" + s + "'");
}

}  // namespace

std::string to_json_string(const PropensityModel& model) {
  nlohmann::json j;
  for (std::size_t f = 0; f < model.n_features(); ++f) {
    const FeatureSpec& spec = model.features()[f];
    nlohmann::json jf{{"kind", kind_name(spec.kind)}, {"name", spec.name}};
    if (spec.kind == FeatureSpec::Kind::covariate) jf["index"] = spec.index;
    if (spec.kind == FeatureSpec::Kind::treatment_decay ||
        spec.kind == FeatureSpec::Kind::outcome_decay) {
      jf["lag_lo"] = spec.lag_lo;
      jf["lag_hi"] = spec.lag_hi;
      jf["scale"] = spec.scale;
      jf["amplitude"] = spec.amplitude;
    }
    j["features"].push_back(std::move(jf));
  }
  j["beta"] = model.beta();
  const FitDiagnostics& d = model.diagnostics();
  j["fit"] = {{"converged", d.converged},
              {"iterations", d.iterations},
              {"log_likelihood", d.log_likelihood},
              {"gradient_max_norm", d.gradient_max_norm}};
  if (!d.std_errors.empty()) {
    j["fit"]["std_errors"] = d.std_errors;
    j["fit"]["p_values"] = d.p_values;
  }
  return j.dump(2);
}

PropensityModel propensity_model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("propensity model JSON: ") + e.what());
  }
  std::vector<FeatureSpec> specs;
  for (const auto& jf : j.at("features")) {
    FeatureSpec f;
    f.kind = kind_from_name(jf.at("kind").get<std::string>());
    f.name = jf.at("name").get<std::string>();
    if (f.kind == FeatureSpec::Kind::covariate) f.index = jf.at("index").get<int>();
    if (f.kind == FeatureSpec::Kind::treatment_decay ||
        f.kind == FeatureSpec::Kind::outcome_decay) {
      f.lag_lo = jf.at("lag_lo").get<int>();
      f.lag_hi = jf.at("lag_hi").get<int>();
      f.scale = jf.at("scale").get<double>();
      f.amplitude = jf.at("amplitude").get<double>();
    }
    specs.push_back(std::move(f));
  }
  std::vector<double> beta = j.at("beta").get<std::vector<double>>();
  FitDiagnostics diag;
  if (j.contains("fit")) {
    const auto& jd = j["fit"];
    diag.converged = jd.value("converged", false);
    diag.iterations = jd.value("iterations", 0);
    diag.log_likelihood = jd.value("log_likelihood", 0.0);
    diag.gradient_max_norm = jd.value("gradient_max_norm", 0.0);
    if (jd.contains("std_errors")) {
      diag.std_errors = jd["std_errors"].get<std::vector<double>>();
      diag.p_values = jd["p_values"].get<std::vector<double>>();
    }
  }
  return PropensityModel(std::move(specs), std::move(beta), std::move(diag));
}

}  // namespace stcausal
