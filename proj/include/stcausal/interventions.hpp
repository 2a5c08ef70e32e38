#pragma once

#include <string>
#include <vector>

#include "stcausal/pointprocess.hpp"
#include "stcausal/surfaces.hpp"

namespace stcausal {

// A stochastic intervention F_h: a Poisson process over treatment patterns
// with intensity h, plus the precomputed expected count ∫_Ω h used in its
// density. Immutable after construction.
class Intervention {
 public:
  Intervention(std::string label, PoissonProcess process, double expected_count);

  const std::string& label() const { return label_; }
  double expected_count() const { return expected_count_; }
  const PoissonProcess& process() const { return process_; }

  // log f_h(pattern) using the cached ∫h; −inf where h vanishes at a point.
  double log_density(const PointPattern& pattern) const;

 private:
  std::string label_;
  PoissonProcess process_;
  double expected_count_;
};

// Rescale a nonnegative surface so it integrates to exactly 1 on the given
// grid — the way raw smoothed baselines become valid φ0 inputs.
Surface normalize_density(const Surface& s, const QuadratureGrid& grid);

// Constant intensity h over the window.
Intervention homogeneous_intervention(double h, const Window& window);

// c·φ0 for a baseline density φ0 with unit window mass (checked to 1e-6).
Intervention scaled_baseline(double c, const Surface& baseline_density,
                             const Window& window, const QuadratureGrid& grid);

// c_α·φ0·d_α with d_α an isotropic Gaussian density at focal_point with
// precision alpha; c_α is solved by quadrature so the expected count is c.
// alpha = 0 degenerates to scaled_baseline.
Intervention focal_intervention(double c, const Surface& baseline_density,
                                Vec2 focal_point, double alpha, const Window& window,
                                const QuadratureGrid& grid);

// Renormalizes φ0 separately inside and outside the region so expected counts
// there are exactly c_inside and c_outside; the intensity outside does not
// depend on c_inside (the defining locality property).
Intervention local_intervention(const Region& region, double c_inside,
                                double c_outside, const Surface& baseline_density,
                                const QuadratureGrid& grid);

// Per-period interventions (F_{h_1}, ..., F_{h_M}), index 0 nearest the
// evaluation period t and index M−1 at period t−M+1.
class InterventionSequence {
 public:
  explicit InterventionSequence(std::vector<Intervention> interventions);

  int M() const { return static_cast<int>(interventions_.size()); }
  const Intervention& at(int j) const { return interventions_.at(j); }

  // F_h^M: the same intervention every period.
  static InterventionSequence iid(const Intervention& h, int M);
  // F_{h0}^{M−1} × F_{h1}: baseline h0 everywhere except the earliest period
  // of the window (t−M+1), which gets h1 — the lagged-effect design.
  static InterventionSequence lagged(const Intervention& h0, const Intervention& h1,
                                     int M);

 private:
  std::vector<Intervention> interventions_;
};

// Σ_j log f_{h_j}(patterns[j]); patterns[j] is the treatment of period t−j.
double sequence_log_density(const InterventionSequence& seq,
                            const std::vector<const PointPattern*>& patterns);

}  // namespace stcausal
