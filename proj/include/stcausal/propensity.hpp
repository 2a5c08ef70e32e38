#pragma once

#include <string>
#include <vector>

#include "stcausal/geom.hpp"
#include "stcausal/surfaces.hpp"

namespace stcausal {

// Everything realized strictly before the treatment of `period`: lagged
// treatment/outcome patterns (index 0 = one period back) and the current
// covariate surfaces. Lags beyond the stored history count as empty.
struct HistoryFrame {
  int period = 0;
  std::vector<PointPattern> lagged_treatments;
  std::vector<PointPattern> lagged_outcomes;
  std::vector<Surface> covariates;
};

// One term of the log-linear treatment intensity: a rule mapping a history
// frame to a feature surface.
struct FeatureSpec {
  enum class Kind { intercept, covariate, treatment_decay, outcome_decay };

  Kind kind = Kind::intercept;
  std::string name = "intercept";
  int index = 0;              // covariate slot (covariate kind only)
  int lag_lo = 1, lag_hi = 1; // inclusive lag range (decay kinds only)
  double scale = 2.0;         // decay rate in exp{-scale * distance}
  double amplitude = 1.0;

  static FeatureSpec intercept();
  static FeatureSpec covariate(int index, std::string name);
  static FeatureSpec treatment_decay(int lag_lo, int lag_hi, double scale,
                                     double amplitude, std::string name);
  static FeatureSpec outcome_decay(int lag_lo, int lag_hi, double scale,
                                   double amplitude, std::string name);
};

// Evaluate the feature surfaces for one frame, in spec order.
std::vector<Surface> build_features(const std::vector<FeatureSpec>& specs,
                                    const HistoryFrame& frame);

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double gradient_max_norm = 0.0;
  // Log-likelihood after each accepted Newton step (ascent property).
  std::vector<double> objective_path;
  // Negative Hessian at the optimum, row-major k x k.
  std::vector<double> observed_information;
  std::vector<double> std_errors;
  std::vector<double> p_values;  // two-sided Wald
};

// A treatment-assignment model lambda_t(w) = exp{beta . X_t(w)}. Construct
// directly for a known model, or through fit_propensity for an estimated one.
// The first feature must be the intercept (the model form always carries one).
class PropensityModel {
 public:
  PropensityModel(std::vector<FeatureSpec> features, std::vector<double> beta);
  PropensityModel(std::vector<FeatureSpec> features, std::vector<double> beta,
                  FitDiagnostics diagnostics);

  std::size_t n_features() const { return features_.size(); }
  const std::vector<FeatureSpec>& features() const { return features_; }
  const std::vector<double>& beta() const { return beta_; }
  const FitDiagnostics& diagnostics() const { return diagnostics_; }

  LogLinearIntensity intensity_for(const HistoryFrame& frame) const;

 private:
  std::vector<FeatureSpec> features_;
  std::vector<double> beta_;
  FitDiagnostics diagnostics_;
};

// Maximize the (optionally period-weighted) point-process log-likelihood
//   sum_t w_t [ sum_{s in W_t} beta.X_t(s) - integral exp{beta.X_t} ]
// by Newton's method with step halving on the quadrature-discretized
// objective. Convergence: score max-norm < 1e-8 (else reported, not fatal).
// Throws FitError naming the runaway feature if |beta|_inf exceeds 50.
PropensityModel fit_propensity(const std::vector<FeatureSpec>& features,
                               const std::vector<HistoryFrame>& frames,
                               const std::vector<PointPattern>& observed_treatments,
                               const QuadratureGrid& grid,
                               const std::vector<double>& weights = {});

// log p_t(pattern): the Poisson log-density of the pattern under the model's
// intensity for this frame, w.r.t. the unit-rate dominating process.
double log_propensity(const PropensityModel& model, const HistoryFrame& frame,
                      const PointPattern& pattern, const QuadratureGrid& grid);

// Objective, score, and observed information at an arbitrary coefficient
// vector (the fit's internals, exposed for gradient checks and diagnostics).
struct LikelihoodEval {
  double log_likelihood = 0.0;
  std::vector<double> score;
  std::vector<double> observed_information;  // row-major k x k
};
LikelihoodEval evaluate_likelihood(const std::vector<FeatureSpec>& features,
                                   const std::vector<double>& beta,
                                   const std::vector<HistoryFrame>& frames,
                                   const std::vector<PointPattern>& observed_treatments,
                                   const QuadratureGrid& grid,
                                   const std::vector<double>& weights = {});

struct BalanceRow {
  std::string feature;
  double unweighted_coef = 0.0;
  double unweighted_p = 1.0;
  double weighted_coef = 0.0;
  double weighted_p = 1.0;
};

struct BalanceReport {
  std::vector<BalanceRow> rows;
  double truncation_quantile = 1.0;
  double weight_cap = 0.0;  // weights above this were clipped
  std::vector<double> weights;  // truncated per-period weights actually used
};

// Inverse-propensity balance diagnostic: weights 1/p_t(W_t) truncated above
// at the given quantile, then the model specification is refit weighted and
// unweighted; balanced features should lose significance in the weighted fit.
BalanceReport balance_check(const PropensityModel& model,
                            const std::vector<HistoryFrame>& frames,
                            const std::vector<PointPattern>& observed_treatments,
                            const QuadratureGrid& grid, double truncation_quantile);

// JSON round trip (feature rules, coefficients, fit metadata).
std::string to_json_string(const PropensityModel& model);
PropensityModel propensity_model_from_json(const std::string& text);

}  // namespace stcausal
