// stcausal -- batch front end for the spatio-temporal causal engine.
//
//   stcausal run <config> [--threads N] [--profile desk|full] [--out DIR]
//
// One config file describes one experiment (see configs/ for a commented
// exemplar per mode). Every run writes results.csv (the headline table),
// results.json (the same numbers plus diagnostics), and manifest.json (the
// resolved configuration; enough to re-run), plus mode-specific artifacts
// (series.csv, rasters/, trend.csv, variance.csv, truth_periods.csv).
// Re-running with the same config and seed reproduces results.csv byte for
// byte, at any thread count.
//
// Exit codes: 0 success, 2 configuration or data error, 3 positivity
// violation, 4 propensity-fit failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stcausal/config.hpp"
#include "stcausal/errors.hpp"
#include "stcausal/estimate.hpp"
#include "stcausal/experiments.hpp"
#include "stcausal/geom.hpp"
#include "stcausal/interventions.hpp"
#include "stcausal/io.hpp"
#include "stcausal/propensity.hpp"
#include "stcausal/rng.hpp"
#include "stcausal/simstudy.hpp"
#include "stcausal/smooth.hpp"
#include "stcausal/surfaces.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace stcausal;

constexpr const char* kVersion = "1.0.0";

// --- small utilities --------------------------------------------------------

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// CSV cells are comma-separated without quoting; keep free-text fields clean.
std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

struct RunContext {
  std::filesystem::path out_dir;
  int threads = 0;
  std::string profile = "desk";
  std::uint64_t seed = 0;
  json effective = json::object();        // mode-specific resolved knobs
  std::vector<std::string> artifacts;     // relative paths, in write order
};

void write_artifact_text(RunContext& ctx, const std::string& name,
                         const std::string& text) {
  const std::filesystem::path p = ctx.out_dir / name;
  std::filesystem::create_directories(p.parent_path());
  write_text_file(p.string(), text);
  ctx.artifacts.push_back(name);
}

void write_artifact_csv(RunContext& ctx, const std::string& name,
                        const CsvTable& table) {
  write_artifact_text(ctx, name, csv_to_string(table));
}

void write_artifact_json(RunContext& ctx, const std::string& name, const json& j) {
  write_artifact_text(ctx, name, j.dump(2) + "\n");
}

// --- shared config resolution ----------------------------------------------

// DgpSpec = shipped calibrated defaults + any dgp.* overrides.
DgpSpec resolve_dgp(const ConfigMap& cfg) {
  DgpSpec spec = DgpSpec::defaults();
  spec.T = static_cast<int>(cfg.get_int("dgp.T", spec.T));
  spec.burn_in = static_cast<int>(cfg.get_int("dgp.burn_in", spec.burn_in));

  const std::pair<const char*, double*> scalars[] = {
      {"dgp.x1_amplitude", &spec.x1_amplitude},
      {"dgp.x1_scale", &spec.x1_scale},
      {"dgp.x2_amplitude", &spec.x2_amplitude},
      {"dgp.x2_scale", &spec.x2_scale},
      {"dgp.point_decay_scale", &spec.point_decay_scale},
      {"dgp.rho0_3", &spec.rho0_3},
      {"dgp.rho1_3", &spec.rho1_3},
      {"dgp.rho0_4", &spec.rho0_4},
      {"dgp.rho1_4", &spec.rho1_4},
      {"dgp.alpha0", &spec.alpha0},
      {"dgp.alpha_w", &spec.alpha_w},
      {"dgp.alpha_y", &spec.alpha_y},
      {"dgp.gamma0", &spec.gamma0},
      {"dgp.gamma2", &spec.gamma2},
      {"dgp.gamma_w", &spec.gamma_w},
      {"dgp.gamma_y", &spec.gamma_y},
  };
  for (const auto& [key, slot] : scalars) *slot = cfg.get_real(key, *slot);

  const std::pair<const char*, std::array<double, 4>*> quads[] = {
      {"dgp.alpha_x", &spec.alpha_x},
      {"dgp.gamma_x", &spec.gamma_x},
  };
  for (const auto& [key, slot] : quads) {
    if (!cfg.has(key)) continue;
    const std::vector<double> v = cfg.require_real_list(key);
    if (v.size() != 4) {
      throw ConfigError(std::string(key) + ": expected 4 coefficients (X1..X4), got " +
                        std::to_string(v.size()));
    }
    std::copy(v.begin(), v.end(), slot->begin());
  }

  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dgp: ") + e.what());
  }
  return spec;
}

// In modes where the series length comes from elsewhere, a dgp.T override
// would be silently ignored; reject it instead.
void reject_dgp_length_keys(const ConfigMap& cfg, const std::string& advice) {
  if (cfg.has("dgp.T")) throw ConfigError("dgp.T: " + advice);
  if (cfg.has("dgp.burn_in")) throw ConfigError("dgp.burn_in: " + advice);
}

// Report regions: the whole window (label "window") plus any region.<label>
// rectangle lists [x0, y0, x1, y1, ...] (multiples of 4 give multi-part
// regions).
std::vector<Region> parse_regions(const ConfigMap& cfg, const Window& window) {
  std::vector<Region> regions;
  regions.push_back(Region::whole_window(window, "window"));
  for (const std::string& key : cfg.keys_with_prefix("region.")) {
    const std::string label = key.substr(std::string("region.").size());
    if (label == "window") {
      throw ConfigError(key + ": the label 'window' is reserved for the full "
                        "observation window (always reported)");
    }
    const std::vector<double> v = cfg.require_real_list(key);
    if (v.empty() || v.size() % 4 != 0) {
      throw ConfigError(key + ": expected [x0, y0, x1, y1] (a multiple of 4 "
                        "values for multi-rectangle regions)");
    }
    std::vector<Rect> parts;
    for (std::size_t i = 0; i < v.size(); i += 4) {
      parts.push_back(Rect{v[i], v[i + 1], v[i + 2], v[i + 3]});
    }
    try {
      regions.emplace_back(label, parts, window);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  return regions;
}

const Region& find_region(const std::vector<Region>& regions, const std::string& label,
                          const std::string& key) {
  for (const Region& r : regions) {
    if (r.label() == label) return r;
  }
  throw ConfigError(key + ": unknown region '" + label + "' (declare it as region." +
                    label + " = [x0, y0, x1, y1])");
}

// --- intervention declarations ----------------------------------------------

// Parsed form of intervention.* (and intervention.earliest.* /
// intervention_b.*); turned into Intervention objects once the data-driven
// baseline density is available.
struct InterventionDecl {
  std::string key_prefix;
  std::string kind;
  std::string label;
  double h = 0.0;                 // homogeneous
  double c = 0.0;                 // scaled_baseline / focal expected count
  Vec2 focus{0.0, 0.0};           // focal
  double alpha = 0.0;             // focal precision
  std::string region_label;       // local
  double c_inside = 0.0, c_outside = 0.0;  // local
  std::string sequence = "iid";   // iid | lagged (top-level declarations only)
  std::shared_ptr<InterventionDecl> earliest;  // lagged: the t-M+1 period

  bool needs_baseline() const { return kind != "homogeneous"; }
};

std::string default_intervention_label(const InterventionDecl& d) {
  if (d.kind == "homogeneous") return "hom(" + format_double(d.h) + ")";
  if (d.kind == "scaled_baseline") return "scaled(" + format_double(d.c) + ")";
  if (d.kind == "focal") {
    return "focal(" + format_double(d.c) + "@" + format_double(d.focus.x) + ";" +
           format_double(d.focus.y) + ";a=" + format_double(d.alpha) + ")";
  }
  return "local(" + d.region_label + ";" + format_double(d.c_inside) + ";" +
         format_double(d.c_outside) + ")";
}

InterventionDecl parse_intervention_decl(const ConfigMap& cfg, const std::string& prefix,
                                         const Window& window, bool top_level) {
  InterventionDecl d;
  d.key_prefix = prefix;
  d.kind = cfg.require_string(prefix + ".kind");
  if (d.kind == "homogeneous") {
    d.h = cfg.require_real(prefix + ".h");
    if (!(d.h > 0.0)) throw ConfigError(prefix + ".h: intensity must be positive");
  } else if (d.kind == "scaled_baseline") {
    d.c = cfg.require_real(prefix + ".c");
    if (!(d.c > 0.0)) throw ConfigError(prefix + ".c: expected-count scale must be positive");
  } else if (d.kind == "focal") {
    d.c = cfg.require_real(prefix + ".c");
    if (!(d.c > 0.0)) throw ConfigError(prefix + ".c: expected count must be positive");
    const std::vector<double> f = cfg.require_real_list(prefix + ".focus");
    if (f.size() != 2) throw ConfigError(prefix + ".focus: expected [x, y]");
    d.focus = Vec2{f[0], f[1]};
    if (!window.contains(d.focus)) {
      throw ConfigError(prefix + ".focus: point (" + format_double(f[0]) + ", " +
                        format_double(f[1]) + ") lies outside the observation window");
    }
    d.alpha = cfg.require_real(prefix + ".alpha");
    if (d.alpha < 0.0) throw ConfigError(prefix + ".alpha: precision must be >= 0");
  } else if (d.kind == "local") {
    d.region_label = cfg.require_string(prefix + ".region");
    d.c_inside = cfg.require_real(prefix + ".c_inside");
    d.c_outside = cfg.require_real(prefix + ".c_outside");
    if (d.c_inside < 0.0 || d.c_outside < 0.0 || d.c_inside + d.c_outside <= 0.0) {
      throw ConfigError(prefix + ".c_inside: expected counts must be nonnegative "
                        "with a positive total");
    }
  } else {
    throw ConfigError(prefix + ".kind: unknown intervention kind '" + d.kind +
                      "' (expected homogeneous, scaled_baseline, focal, or local)");
  }
  d.label = cfg.get_string(prefix + ".label", default_intervention_label(d));
  if (d.label.find(',') != std::string::npos || d.label.find('\n') != std::string::npos) {
    throw ConfigError(prefix + ".label: commas and newlines are not allowed "
                      "(the label becomes a CSV cell)");
  }
  if (top_level) {
    d.sequence = cfg.get_string(prefix + ".sequence", "iid");
    if (d.sequence != "iid" && d.sequence != "lagged") {
      throw ConfigError(prefix + ".sequence: expected iid or lagged");
    }
    if (d.sequence == "lagged") {
      d.earliest = std::make_shared<InterventionDecl>(
          parse_intervention_decl(cfg, prefix + ".earliest", window, false));
    }
  }
  return d;
}

// The label reported in results tables (folds in a lagged earliest period).
std::string sequence_label(const InterventionDecl& d) {
  if (d.sequence == "lagged") return d.label + "/early:" + d.earliest->label;
  return d.label;
}

// Baseline density for scaled/focal/local interventions: Scott-smoothed
// density of the pooled observed treatment points, renormalized on the
// quadrature grid. Built at most once per run.
class LazyBaseline {
 public:
  LazyBaseline(const std::vector<PointPattern>* treatments, const Window& window,
               const QuadratureGrid& grid)
      : treatments_(treatments), window_(window), grid_(grid) {}

  const Surface& get(const std::string& key_prefix) {
    if (built_) return surface_;
    std::vector<double> xs, ys;
    for (const PointPattern& p : *treatments_) {
      xs.insert(xs.end(), p.xs().begin(), p.xs().end());
      ys.insert(ys.end(), p.ys().begin(), p.ys().end());
    }
    if (xs.size() < 2) {
      throw ConfigError(key_prefix + ": this intervention kind estimates its "
                        "baseline density from the observed treatment points, "
                        "but fewer than 2 exist");
    }
    PointPattern pooled(1, std::move(xs), std::move(ys));
    try {
      surface_ = normalize_density(scott_baseline_density(pooled, window_), grid_);
    } catch (const std::exception& e) {
      throw ConfigError(key_prefix + ": baseline density estimation failed: " + e.what());
    }
    built_ = true;
    return surface_;
  }

 private:
  const std::vector<PointPattern>* treatments_;
  Window window_;
  const QuadratureGrid& grid_;
  Surface surface_;
  bool built_ = false;
};

Intervention relabel(const Intervention& iv, const std::string& label) {
  if (iv.label() == label) return iv;
  return Intervention(label, iv.process(), iv.expected_count());
}

Intervention build_intervention(const InterventionDecl& d, const Window& window,
                                const QuadratureGrid& grid,
                                const std::vector<Region>& regions,
                                LazyBaseline& baseline) {
  try {
    if (d.kind == "homogeneous") {
      return relabel(homogeneous_intervention(d.h, window), d.label);
    }
    const Surface& phi0 = baseline.get(d.key_prefix);
    if (d.kind == "scaled_baseline") {
      return relabel(scaled_baseline(d.c, phi0, window, grid), d.label);
    }
    if (d.kind == "focal") {
      return relabel(focal_intervention(d.c, phi0, d.focus, d.alpha, window, grid),
                     d.label);
    }
    const Region& region =
        find_region(regions, d.region_label, d.key_prefix + ".region");
    if (region.is_whole_window()) {
      throw ConfigError(d.key_prefix + ".region: a local intervention needs a "
                        "proper subregion (it renormalizes inside and outside)");
    }
    return relabel(local_intervention(region, d.c_inside, d.c_outside, phi0, grid),
                   d.label);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(d.key_prefix + ": " + e.what());
  }
}

InterventionSequence build_sequence(const InterventionDecl& d, int M,
                                    const Window& window, const QuadratureGrid& grid,
                                    const std::vector<Region>& regions,
                                    LazyBaseline& baseline) {
  const Intervention base = build_intervention(d, window, grid, regions, baseline);
  try {
    if (d.sequence == "lagged") {
      const Intervention early =
          build_intervention(*d.earliest, window, grid, regions, baseline);
      return InterventionSequence::lagged(base, early, M);
    }
    return InterventionSequence::iid(base, M);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(d.key_prefix + ": " + e.what());
  }
}

// --- estimation data --------------------------------------------------------

struct DataDecl {
  bool from_series = false;
  std::string series_path, treatments_path, outcomes_path;
  std::string treatment_type, outcome_type;  // optional filters (pattern files)
  int burn_in = 0;
};

DataDecl parse_data_decl(const ConfigMap& cfg) {
  DataDecl d;
  const bool has_series = cfg.has("data.series");
  const bool has_w = cfg.has("data.treatments");
  const bool has_y = cfg.has("data.outcomes");
  if (has_series && (has_w || has_y)) {
    throw ConfigError("data.series: give either one series file or "
                      "data.treatments plus data.outcomes, not both");
  }
  if (!has_series && !(has_w && has_y)) {
    if (has_w) throw ConfigError("data.outcomes: required alongside data.treatments");
    if (has_y) throw ConfigError("data.treatments: required alongside data.outcomes");
    throw ConfigError("data.series: estimate mode needs input data "
                      "(data.series, or data.treatments plus data.outcomes)");
  }
  d.from_series = has_series;
  if (has_series) {
    d.series_path = cfg.require_string("data.series");
  } else {
    d.treatments_path = cfg.require_string("data.treatments");
    d.outcomes_path = cfg.require_string("data.outcomes");
  }
  d.treatment_type = cfg.get_string("data.treatment_type", "");
  d.outcome_type = cfg.get_string("data.outcome_type", "");
  if (d.from_series && !d.treatment_type.empty()) {
    throw ConfigError("data.treatment_type: type filters apply to pattern-file "
                      "inputs; a series file already selects by its type column");
  }
  if (d.from_series && !d.outcome_type.empty()) {
    throw ConfigError("data.outcome_type: type filters apply to pattern-file "
                      "inputs; a series file already selects by its type column");
  }
  // Series files default to simulate's warm-up length; bare pattern files to 0.
  d.burn_in = static_cast<int>(cfg.get_int("data.burn_in", has_series ? 10 : 0));
  if (d.burn_in < 0) throw ConfigError("data.burn_in: must be >= 0");
  return d;
}

json quality_json(const std::string& source, const char* role, const IngestReport& rep) {
  json q;
  q["source"] = source;
  q["role"] = role;
  q["rows_read"] = rep.rows_read;
  q["points_kept"] = rep.points_kept;
  q["duplicate_points"] = rep.duplicate_points;
  q["monotone_t"] = rep.monotone_t;
  q["warnings"] = rep.warnings;
  return q;
}

std::vector<PointPattern> pad_periods(std::vector<PointPattern> pats, std::size_t P) {
  for (std::size_t t = pats.size() + 1; t <= P; ++t) {
    pats.emplace_back(static_cast<int>(t), std::vector<double>{}, std::vector<double>{});
  }
  return pats;
}

struct LoadedSeries {
  SimulatedSeries series;
  json quality = json::array();
  std::vector<std::string> warnings;
};

LoadedSeries load_estimation_data(const DataDecl& d, const DgpSpec& base) {
  LoadedSeries out;
  SimulatedSeries& s = out.series;
  s.spec = base;
  s.seed = 0;

  auto ingest_role = [&](const std::string& path, const char* role,
                         std::optional<std::string> filter) {
    IngestOptions opts;
    opts.type_filter = std::move(filter);
    IngestReport rep;
    std::vector<PointPattern> pats = ingest_patterns(path, base.window, &rep, opts);
    out.quality.push_back(quality_json(path, role, rep));
    for (const std::string& w : rep.warnings) out.warnings.push_back(path + ": " + w);
    return pats;
  };

  if (d.from_series) {
    s.x3 = ingest_role(d.series_path, "x3", "x3");
    s.x4 = ingest_role(d.series_path, "x4", "x4");
    s.treatments = ingest_role(d.series_path, "treatment", "treatment");
    s.outcomes = ingest_role(d.series_path, "outcome", "outcome");
  } else {
    s.treatments = ingest_role(
        d.treatments_path, "treatment",
        d.treatment_type.empty() ? std::nullopt
                                 : std::optional<std::string>(d.treatment_type));
    s.outcomes = ingest_role(
        d.outcomes_path, "outcome",
        d.outcome_type.empty() ? std::nullopt
                               : std::optional<std::string>(d.outcome_type));
  }

  const std::size_t P = std::max({s.x3.size(), s.x4.size(), s.treatments.size(),
                                  s.outcomes.size()});
  s.x3 = pad_periods(std::move(s.x3), P);
  s.x4 = pad_periods(std::move(s.x4), P);
  s.treatments = pad_periods(std::move(s.treatments), P);
  s.outcomes = pad_periods(std::move(s.outcomes), P);

  if (P <= static_cast<std::size_t>(d.burn_in)) {
    throw ConfigError("data.burn_in: burn-in of " + std::to_string(d.burn_in) +
                      " consumes all " + std::to_string(P) + " data periods");
  }
  s.spec.burn_in = d.burn_in;
  s.spec.T = static_cast<int>(P) - d.burn_in;
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  std::set<std::string> seen;
  for (const std::string& w : warnings) {
    if (seen.insert(w).second) std::fprintf(stderr, "[stcausal] warning: %s\n", w.c_str());
  }
}

// Kish effective sample size / mean weight straight from a result's weights.
std::pair<std::string, std::string> weight_summary(const EstimateResult& r) {
  if (r.log_weights.empty()) return {"", ""};
  WeightSeries ws;
  ws.M = r.descriptor.M;
  ws.T = r.descriptor.T;
  ws.log_weights = r.log_weights;
  return {format_double(ws.effective_sample_size()), format_double(ws.mean_weight())};
}

// --- mode: simulate ---------------------------------------------------------

void run_simulate(const ConfigMap& cfg, RunContext& ctx) {
  const DgpSpec spec = resolve_dgp(cfg);
  const bool rasters = cfg.get_bool("rasters", false);
  const int raster_n = static_cast<int>(cfg.get_int("raster_grid_n", 64));
  if (raster_n < 2 || raster_n > 4096) {
    throw ConfigError("raster_grid_n: expected a lattice size in [2, 4096]");
  }
  cfg.reject_unknown();

  const SimulatedSeries s = generate_series(spec, ctx.seed);
  write_artifact_text(ctx, "series.csv", csv_to_string(series_table(s)));

  const struct {
    const char* name;
    const std::vector<PointPattern>* pats;
  } groups[] = {{"x3", &s.x3}, {"x4", &s.x4}, {"treatment", &s.treatments},
                {"outcome", &s.outcomes}};

  CsvTable table;
  table.header = {"type", "stored_periods", "analysis_periods", "analysis_total",
                  "analysis_mean_count"};
  json counts = json::object();
  for (const auto& g : groups) {
    std::size_t total = 0;
    for (int t = 1; t <= spec.T; ++t) {
      total += (*g.pats)[static_cast<std::size_t>(s.stored_index(t))].size();
    }
    const double mean = static_cast<double>(total) / spec.T;
    table.rows.push_back({g.name, std::to_string(s.total_periods()),
                          std::to_string(spec.T), std::to_string(total),
                          format_double(mean)});
    counts[g.name] = mean;
  }
  write_artifact_csv(ctx, "results.csv", table);

  json res;
  res["mode"] = "simulate";
  res["seed"] = ctx.seed;
  res["T"] = spec.T;
  res["burn_in"] = spec.burn_in;
  res["analysis_mean_counts"] = counts;
  res["bound_enlargements"] = s.bound_enlargements;
  write_artifact_json(ctx, "results.json", res);

  if (rasters) {
    const struct {
      const char* name;
      Surface surface;
    } fields[] = {{"x1", spec.x1_surface()}, {"x2", spec.x2_surface()}};
    const Rect& b = spec.window.bounds();
    for (const auto& f : fields) {
      CsvTable r;
      r.header = {"x", "y", "value"};
      for (int iy = 0; iy < raster_n; ++iy) {
        for (int ix = 0; ix < raster_n; ++ix) {
          const double x = b.x0 + (ix + 0.5) * b.width() / raster_n;
          const double y = b.y0 + (iy + 0.5) * b.height() / raster_n;
          r.rows.push_back({format_double(x), format_double(y),
                            format_double(f.surface(x, y))});
        }
      }
      write_artifact_csv(ctx, std::string("rasters/") + f.name + ".csv", r);
    }
  }

  ctx.effective = {{"T", spec.T}, {"burn_in", spec.burn_in}, {"rasters", rasters}};
  std::printf("[stcausal] simulated T=%d burn_in=%d: mean counts x3=%.2f x4=%.2f "
              "treatment=%.2f outcome=%.2f\n",
              spec.T, spec.burn_in, counts["x3"].get<double>(),
              counts["x4"].get<double>(), counts["treatment"].get<double>(),
              counts["outcome"].get<double>());
}

// --- mode: estimate ---------------------------------------------------------

void run_estimate(const ConfigMap& cfg, RunContext& ctx) {
  reject_dgp_length_keys(cfg, "the series length comes from the data in estimate "
                              "mode (use data.burn_in for the history prefix)");
  const DgpSpec base = resolve_dgp(cfg);
  const DataDecl data_decl = parse_data_decl(cfg);

  const std::string model = cfg.get_string("model", "dgp");
  if (model != "dgp" && model != "unadjusted" && model != "true") {
    throw ConfigError("model: unknown propensity model '" + model +
                      "' (expected dgp, unadjusted, or true)");
  }
  std::vector<int> Ms;
  for (std::int64_t m : cfg.get_int_list("M", {1})) {
    if (m < 1) throw ConfigError("M: window lengths must be >= 1");
    Ms.push_back(static_cast<int>(m));
  }
  std::vector<EstimatorKind> kinds;
  for (const std::string& name : cfg.get_string_list("estimators", {"hajek", "ipw"})) {
    try {
      kinds.push_back(estimator_kind_from_name(name));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("estimators: ") + e.what());
    }
  }
  const double level = cfg.get_real("level", 0.95);
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level: must lie inside (0, 1)");
  const bool smoothed = cfg.get_bool("smoothed", true);
  const std::optional<double> sigma = cfg.get_optional_real("kernel.sigma");
  if (sigma && !(*sigma > 0.0)) throw ConfigError("kernel.sigma: must be positive");
  const int fit_grid_n = static_cast<int>(cfg.get_int("fit_grid_n", 48));
  const int grid_n = static_cast<int>(cfg.get_int("grid_n", 128));
  if (fit_grid_n < 8 || fit_grid_n > 1024) {
    throw ConfigError("fit_grid_n: expected a quadrature size in [8, 1024]");
  }
  if (grid_n < 8 || grid_n > 2048) {
    throw ConfigError("grid_n: expected a quadrature size in [8, 2048]");
  }
  const std::vector<Region> regions = parse_regions(cfg, base.window);
  const InterventionDecl decl_a =
      parse_intervention_decl(cfg, "intervention", base.window, true);
  std::optional<InterventionDecl> decl_b;
  if (!cfg.keys_with_prefix("intervention_b.").empty()) {
    decl_b = parse_intervention_decl(cfg, "intervention_b", base.window, true);
  }
  cfg.reject_unknown();

  // ---- execute ----
  LoadedSeries data = load_estimation_data(data_decl, base);
  print_warnings(data.warnings);
  SimulatedSeries& s = data.series;
  const int T = s.spec.T;
  for (int M : Ms) {
    if (M > T) {
      throw ConfigError("M: window length " + std::to_string(M) + " exceeds the " +
                        std::to_string(T) + " analysis periods in the data");
    }
  }

  const std::vector<PointPattern> wobs = s.analysis_treatments();
  const std::vector<PointPattern> yobs = s.analysis_outcomes();

  std::vector<double> logp;
  json fit_json = json::object();
  fit_json["model"] = model;
  if (model == "dgp") {
    const std::vector<HistoryFrame> frames = analysis_frames(s);
    const QuadratureGrid fit_grid(s.spec.window, fit_grid_n, fit_grid_n);
    const PropensityModel fitted =
        fit_propensity(dgp_propensity_features(s.spec), frames, wobs, fit_grid);
    logp = dgp_model_log_propensities(s, fitted.beta(), grid_n);
    const FitDiagnostics& dg = fitted.diagnostics();
    json coef = json::array();
    for (std::size_t k = 0; k < fitted.n_features(); ++k) {
      json c;
      c["feature"] = fitted.features()[k].name;
      c["beta"] = fitted.beta()[k];
      c["std_error"] = k < dg.std_errors.size() ? dg.std_errors[k] : 0.0;
      c["p_value"] = k < dg.p_values.size() ? dg.p_values[k] : 1.0;
      coef.push_back(c);
    }
    fit_json["coefficients"] = coef;
    fit_json["converged"] = dg.converged;
    fit_json["iterations"] = dg.iterations;
    fit_json["log_likelihood"] = dg.log_likelihood;
  } else if (model == "true") {
    logp = true_log_propensities(s, grid_n);
  } else {
    double total = 0.0;
    for (const PointPattern& p : wobs) total += static_cast<double>(p.size());
    const double rate = std::max(total, 1.0) / (static_cast<double>(T) * s.spec.window.area());
    logp = homogeneous_log_propensities(s, std::log(rate));
    fit_json["homogeneous_rate"] = rate;
  }

  const QuadratureGrid igrid(s.spec.window, grid_n, grid_n);
  LazyBaseline baseline(&wobs, s.spec.window, igrid);

  CsvTable table;
  table.header = {"T", "M", "intervention", "region", "estimator", "variance_flavor",
                  "estimate", "variance_bound", "ci_lo", "ci_hi", "level", "ess",
                  "mean_weight", "note"};
  json cells = json::array();
  auto add_row = [&](int M, const std::string& iv_label, const std::string& region,
                     const EstimateResult& r) {
    const auto [ess, mw] = weight_summary(r);
    table.rows.push_back({std::to_string(T), std::to_string(M), csv_safe(iv_label),
                          region, estimator_kind_name(r.descriptor.kind), "estimated",
                          format_double(r.estimate), format_double(r.variance_bound),
                          format_double(r.ci_lo), format_double(r.ci_hi),
                          format_double(r.descriptor.level), ess, mw,
                          csv_safe(r.note)});
    json c;
    c["T"] = T;
    c["M"] = M;
    c["intervention"] = iv_label;
    c["region"] = region;
    c["estimator"] = estimator_kind_name(r.descriptor.kind);
    c["estimate"] = r.estimate;
    c["variance_bound"] = r.variance_bound;
    c["ci_lo"] = r.ci_lo;
    c["ci_hi"] = r.ci_hi;
    c["level"] = r.descriptor.level;
    if (!ess.empty()) {
      c["effective_sample_size"] = std::stod(ess);
      c["mean_weight"] = std::stod(mw);
    }
    if (!r.note.empty()) c["note"] = r.note;
    cells.push_back(c);
    std::printf("[stcausal] %s %s region=%s M=%d: %.4f [%.4f, %.4f]\n",
                estimator_kind_name(r.descriptor.kind), iv_label.c_str(),
                region.c_str(), M, r.estimate, r.ci_lo, r.ci_hi);
  };

  for (int M : Ms) {
    const InterventionSequence seq_a =
        build_sequence(decl_a, M, s.spec.window, igrid, regions, baseline);
    std::optional<InterventionSequence> seq_b;
    if (decl_b) {
      seq_b = build_sequence(*decl_b, M, s.spec.window, igrid, regions, baseline);
    }
    for (EstimatorKind kind : kinds) {
      EstimateOptions eo;
      eo.kind = kind;
      eo.smoothed = smoothed;
      eo.level = level;
      eo.threads = ctx.threads;
      if (sigma) eo.kernel = KernelSpec{*sigma};
      for (const Region& region : regions) {
        const EstimateResult ra =
            estimate_average_outcome(seq_a, wobs, yobs, logp, region, eo);
        add_row(M, sequence_label(decl_a), region.label(), ra);
        if (seq_b) {
          const EstimateResult rb =
              estimate_average_outcome(*seq_b, wobs, yobs, logp, region, eo);
          add_row(M, sequence_label(*decl_b), region.label(), rb);
          const EstimateResult rc = effect_contrast(ra, rb);
          add_row(M, rc.descriptor.intervention_label, region.label(), rc);
        }
      }
    }
  }
  write_artifact_csv(ctx, "results.csv", table);

  const double sigma_eff = sigma ? *sigma : bandwidth_rule(T);
  json res;
  res["mode"] = "estimate";
  res["T"] = T;
  res["burn_in"] = s.spec.burn_in;
  res["model"] = model;
  res["smoothed"] = smoothed;
  res["kernel_sigma"] = sigma_eff;
  res["fit"] = fit_json;
  res["cells"] = cells;
  res["data_quality"] = data.quality;
  write_artifact_json(ctx, "results.json", res);

  ctx.effective = {{"T", T},
                   {"burn_in", s.spec.burn_in},
                   {"model", model},
                   {"M", Ms},
                   {"level", level},
                   {"smoothed", smoothed},
                   {"kernel_sigma", sigma_eff},
                   {"fit_grid_n", fit_grid_n},
                   {"grid_n", grid_n}};
}

// --- mode: coverage ---------------------------------------------------------

std::vector<int> int_grid(const ConfigMap& cfg, const std::string& key,
                          std::vector<std::int64_t> def, int lo) {
  std::vector<int> out;
  for (std::int64_t v : cfg.get_int_list(key, std::move(def))) {
    if (v < lo) {
      throw ConfigError(key + ": values must be >= " + std::to_string(lo));
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<double> real_grid(const ConfigMap& cfg, const std::string& key,
                              std::vector<double> def) {
  const std::vector<double> v = cfg.get_real_list(key, std::move(def));
  for (double x : v) {
    if (!(x > 0.0)) throw ConfigError(key + ": values must be positive");
  }
  return v;
}

void run_coverage(const ConfigMap& cfg, RunContext& ctx) {
  reject_dgp_length_keys(cfg, "series lengths come from coverage.T in coverage mode");
  const DgpSpec spec = resolve_dgp(cfg);

  StudyOptions so;
  const int cfg_datasets = static_cast<int>(cfg.get_int("coverage.datasets", so.n_datasets));
  // --profile full pins the study size; desk runs take the config's value.
  so.n_datasets = ctx.profile == "full" ? StudyOptions::full_profile().n_datasets
                                        : cfg_datasets;
  so.truth_replications =
      static_cast<int>(cfg.get_int("coverage.truth_replications", so.truth_replications));
  so.variance_replications = static_cast<int>(
      cfg.get_int("coverage.variance_replications", so.variance_replications));
  so.variance_period_stride =
      static_cast<int>(cfg.get_int("coverage.variance_stride", so.variance_period_stride));
  so.variance_n_datasets =
      static_cast<int>(cfg.get_int("coverage.variance_datasets", so.variance_n_datasets));
  so.mc_true_max_M = static_cast<int>(cfg.get_int("coverage.mc_true_max_M", so.mc_true_max_M));
  so.fit_grid_n = static_cast<int>(cfg.get_int("fit_grid_n", so.fit_grid_n));
  so.logp_grid_n = static_cast<int>(cfg.get_int("grid_n", so.logp_grid_n));
  so.level = cfg.get_real("level", so.level);
  if (!(so.level > 0.0 && so.level < 1.0)) throw ConfigError("level: must lie inside (0, 1)");
  so.seed = ctx.seed;
  so.threads = ctx.threads;

  const std::vector<int> Ts = int_grid(cfg, "coverage.T", {500}, 2);
  const std::vector<int> Ms = int_grid(cfg, "coverage.M", {1, 3, 7, 30}, 1);
  const std::vector<double> hs = real_grid(cfg, "coverage.intensities", {5.0});
  for (int M : Ms) {
    for (int T : Ts) {
      if (M > T) {
        throw ConfigError("coverage.M: window length " + std::to_string(M) +
                          " exceeds series length " + std::to_string(T));
      }
    }
  }
  const std::vector<Region> regions = parse_regions(cfg, spec.window);

  const bool want_trend = !cfg.keys_with_prefix("trend.").empty();
  const std::vector<int> trend_T = int_grid(cfg, "trend.T", {200, 500}, 2);
  const std::vector<double> trend_h = real_grid(cfg, "trend.intensities", {3.0, 5.0, 7.0});

  const bool want_variance = !cfg.keys_with_prefix("variance.").empty();
  const std::vector<int> var_T = int_grid(cfg, "variance.T", {200, 500}, 2);
  const int var_M = static_cast<int>(cfg.get_int("variance.M", 3));
  const std::vector<double> var_h = real_grid(cfg, "variance.intensities", {3.0, 5.0, 7.0});
  const std::string var_region_label = cfg.get_string("variance.region", "window");
  if (var_M < 1) throw ConfigError("variance.M: must be >= 1");
  for (int T : var_T) {
    if (var_M > T) {
      throw ConfigError("variance.M: window length " + std::to_string(var_M) +
                        " exceeds series length " + std::to_string(T));
    }
  }
  const Region* var_region =
      want_variance ? &find_region(regions, var_region_label, "variance.region") : nullptr;
  cfg.reject_unknown();

  // ---- execute ----
  const std::vector<CoverageCell> cells =
      coverage_experiment(spec, hs, Ms, regions, Ts, so);
  CsvTable table;
  table.header = {"T", "M", "intensity", "region", "estimator", "variance_flavor",
                  "level", "n_datasets", "n_failed", "coverage", "mean_estimate",
                  "mean_truth", "median_abs_error", "mean_half_width"};
  json jcov = json::array();
  for (const CoverageCell& c : cells) {
    table.rows.push_back({std::to_string(c.T), std::to_string(c.M),
                          format_double(c.intensity), c.region,
                          estimator_kind_name(c.kind), c.variance_flavor,
                          format_double(c.level), std::to_string(c.n_datasets),
                          std::to_string(c.n_failed), format_double(c.coverage),
                          format_double(c.mean_estimate), format_double(c.mean_truth),
                          format_double(c.median_abs_error),
                          format_double(c.mean_half_width)});
    json j;
    j["T"] = c.T;
    j["M"] = c.M;
    j["intensity"] = c.intensity;
    j["region"] = c.region;
    j["estimator"] = estimator_kind_name(c.kind);
    j["variance_flavor"] = c.variance_flavor;
    j["level"] = c.level;
    j["n_datasets"] = c.n_datasets;
    j["n_failed"] = c.n_failed;
    j["coverage"] = c.coverage;
    j["mean_estimate"] = c.mean_estimate;
    j["mean_truth"] = c.mean_truth;
    j["median_abs_error"] = c.median_abs_error;
    j["mean_half_width"] = c.mean_half_width;
    jcov.push_back(j);
  }
  write_artifact_csv(ctx, "results.csv", table);
  std::printf("[stcausal] coverage: %zu cells over %d datasets\n", cells.size(),
              so.n_datasets);

  json res;
  res["mode"] = "coverage";
  res["coverage"] = jcov;

  if (want_trend) {
    const std::vector<TrendCell> tcells = trend_experiment(spec, trend_h, trend_T, so);
    CsvTable tt;
    tt.header = {"T", "intensity", "n_datasets", "n_failed", "median_abs_error_hajek",
                 "median_abs_error_ipw", "median_abs_error_unadjusted",
                 "frac_hajek_beats_unadjusted"};
    json jt = json::array();
    for (const TrendCell& c : tcells) {
      tt.rows.push_back({std::to_string(c.T), format_double(c.intensity),
                         std::to_string(c.n_datasets), std::to_string(c.n_failed),
                         format_double(c.median_abs_error_hajek),
                         format_double(c.median_abs_error_ipw),
                         format_double(c.median_abs_error_unadjusted),
                         format_double(c.frac_hajek_beats_unadjusted)});
      json j;
      j["T"] = c.T;
      j["intensity"] = c.intensity;
      j["n_datasets"] = c.n_datasets;
      j["n_failed"] = c.n_failed;
      j["median_abs_error_hajek"] = c.median_abs_error_hajek;
      j["median_abs_error_ipw"] = c.median_abs_error_ipw;
      j["median_abs_error_unadjusted"] = c.median_abs_error_unadjusted;
      j["frac_hajek_beats_unadjusted"] = c.frac_hajek_beats_unadjusted;
      jt.push_back(j);
    }
    write_artifact_csv(ctx, "trend.csv", tt);
    res["trend"] = jt;
    std::printf("[stcausal] trend: %zu cells\n", tcells.size());
  }

  if (want_variance) {
    const std::vector<VarianceCell> vcells =
        variance_experiment(spec, var_h, var_M, *var_region, var_T, so);
    CsvTable vt;
    vt.header = {"T", "M", "intensity", "region", "n_datasets", "v_mc", "v_star_mc",
                 "ratio", "mean_rel_err_bound"};
    json jv = json::array();
    for (const VarianceCell& c : vcells) {
      vt.rows.push_back({std::to_string(c.T), std::to_string(c.M),
                         format_double(c.intensity), c.region,
                         std::to_string(c.n_datasets), format_double(c.v_mc),
                         format_double(c.v_star_mc), format_double(c.ratio),
                         format_double(c.mean_rel_err_bound)});
      json j;
      j["T"] = c.T;
      j["M"] = c.M;
      j["intensity"] = c.intensity;
      j["region"] = c.region;
      j["n_datasets"] = c.n_datasets;
      j["v_mc"] = c.v_mc;
      j["v_star_mc"] = c.v_star_mc;
      j["ratio"] = c.ratio;
      j["mean_rel_err_bound"] = c.mean_rel_err_bound;
      jv.push_back(j);
    }
    write_artifact_csv(ctx, "variance.csv", vt);
    res["variance"] = jv;
    std::printf("[stcausal] variance: %zu cells\n", vcells.size());
  }

  json opts;
  opts["datasets"] = so.n_datasets;
  opts["truth_replications"] = so.truth_replications;
  opts["variance_replications"] = so.variance_replications;
  opts["variance_stride"] = so.variance_period_stride;
  opts["variance_datasets"] = so.variance_n_datasets;
  opts["mc_true_max_M"] = so.mc_true_max_M;
  opts["fit_grid_n"] = so.fit_grid_n;
  opts["grid_n"] = so.logp_grid_n;
  opts["level"] = so.level;
  res["options"] = opts;
  write_artifact_json(ctx, "results.json", res);
  ctx.effective = opts;
  ctx.effective["T"] = Ts;
  ctx.effective["M"] = Ms;
  ctx.effective["intensities"] = hs;
}

// --- mode: balance ----------------------------------------------------------

void run_balance(const ConfigMap& cfg, RunContext& ctx) {
  const DgpSpec spec = resolve_dgp(cfg);
  const int replicates = static_cast<int>(cfg.get_int("replicates", 200));
  if (replicates < 2) throw ConfigError("replicates: need at least 2");
  StudyOptions so;
  so.fit_grid_n = static_cast<int>(cfg.get_int("fit_grid_n", so.fit_grid_n));
  so.seed = ctx.seed;
  so.threads = ctx.threads;
  cfg.reject_unknown();

  const BalanceStudyResult res = balance_experiment(spec, replicates, so);

  CsvTable table;
  table.header = {"replicate", "feature", "unweighted_coef", "unweighted_p",
                  "weighted_coef", "weighted_p"};
  for (std::size_t i = 0; i < res.replicate_rows.size(); ++i) {
    const BalanceRow& r = res.replicate_rows[i];
    table.rows.push_back({std::to_string(i + 1), r.feature,
                          format_double(r.unweighted_coef),
                          format_double(r.unweighted_p),
                          format_double(r.weighted_coef),
                          format_double(r.weighted_p)});
  }
  write_artifact_csv(ctx, "results.csv", table);

  json j;
  j["mode"] = "balance";
  j["replicates"] = res.replicates;
  j["T"] = res.T;
  j["feature"] = res.feature;
  j["mean_weighted_coef"] = res.mean_weighted_coef;
  j["mc_se_weighted_coef"] = res.mc_se_weighted_coef;
  j["mean_unweighted_coef"] = res.mean_unweighted_coef;
  j["median_weighted_p"] = res.median_weighted_p;
  j["median_unweighted_p"] = res.median_unweighted_p;
  write_artifact_json(ctx, "results.json", j);

  ctx.effective = {{"replicates", replicates}, {"T", spec.T},
                   {"fit_grid_n", so.fit_grid_n}, {"feature", res.feature}};
  std::printf("[stcausal] balance (%s, %d replicates at T=%d): weighted coef "
              "%.4f (mc se %.4f), median weighted p %.3f, median unweighted p %.3g\n",
              res.feature.c_str(), replicates, spec.T, res.mean_weighted_coef,
              res.mc_se_weighted_coef, res.median_weighted_p, res.median_unweighted_p);
}

// --- mode: truth-oracle -----------------------------------------------------

void run_truth_oracle(const ConfigMap& cfg, RunContext& ctx) {
  const DgpSpec spec = resolve_dgp(cfg);
  const int M = static_cast<int>(cfg.get_int("M", 1));
  if (M < 1) throw ConfigError("M: must be >= 1");
  if (M > spec.T) {
    throw ConfigError("M: window length " + std::to_string(M) +
                      " exceeds dgp.T = " + std::to_string(spec.T));
  }
  const int R = static_cast<int>(cfg.get_int("replications", 500));
  if (R < 2) throw ConfigError("replications: need at least 2");
  const std::string functional = cfg.get_string("functional", "count");
  if (functional != "count" && functional != "smoothed") {
    throw ConfigError("functional: expected count or smoothed");
  }
  const std::optional<double> sigma = cfg.get_optional_real("kernel.sigma");
  if (sigma && functional != "smoothed") {
    throw ConfigError("kernel.sigma: only applies to functional = \"smoothed\"");
  }
  if (sigma && !(*sigma > 0.0)) throw ConfigError("kernel.sigma: must be positive");
  const int grid_n = static_cast<int>(cfg.get_int("grid_n", 128));
  if (grid_n < 8 || grid_n > 2048) {
    throw ConfigError("grid_n: expected a quadrature size in [8, 2048]");
  }
  const std::vector<Region> regions = parse_regions(cfg, spec.window);
  const InterventionDecl decl =
      parse_intervention_decl(cfg, "intervention", spec.window, true);
  cfg.reject_unknown();

  // ---- execute ----
  const SimulatedSeries s = generate_series(spec, ctx.seed);
  const QuadratureGrid igrid(spec.window, grid_n, grid_n);
  const std::vector<PointPattern> wobs = s.analysis_treatments();
  LazyBaseline baseline(&wobs, spec.window, igrid);
  const InterventionSequence seq =
      build_sequence(decl, M, spec.window, igrid, regions, baseline);

  const KernelSpec kernel{sigma ? *sigma : bandwidth_rule(spec.T)};
  const KernelSpec* kptr = functional == "smoothed" ? &kernel : nullptr;
  const std::uint64_t oracle_seed =
      RngStream(ctx.seed).child(rngtag::truth_oracle, static_cast<std::uint64_t>(spec.T),
                                static_cast<std::uint64_t>(M)).key();
  const std::vector<TruthResult> results =
      mc_truth_oracle_multi(s, seq, regions, R, oracle_seed, ctx.threads, kptr);

  const std::string iv_label = sequence_label(decl);
  CsvTable table;
  table.header = {"T", "M", "intervention", "region", "functional", "replications",
                  "average", "mc_standard_error"};
  CsvTable periods;
  periods.header = {"region", "t", "value"};
  json jregions = json::array();
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const TruthResult& r = results[k];
    table.rows.push_back({std::to_string(spec.T), std::to_string(M),
                          csv_safe(iv_label), regions[k].label(), functional,
                          std::to_string(r.replications), format_double(r.average),
                          format_double(r.mc_standard_error)});
    for (std::size_t i = 0; i < r.per_period.size(); ++i) {
      periods.rows.push_back({regions[k].label(), std::to_string(M + static_cast<int>(i)),
                              format_double(r.per_period[i])});
    }
    json j;
    j["region"] = regions[k].label();
    j["average"] = r.average;
    j["mc_standard_error"] = r.mc_standard_error;
    j["replications"] = r.replications;
    jregions.push_back(j);
    std::printf("[stcausal] truth %s region=%s M=%d: %.4f (mc se %.4f)\n",
                functional.c_str(), regions[k].label().c_str(), M, r.average,
                r.mc_standard_error);
  }
  write_artifact_csv(ctx, "results.csv", table);
  write_artifact_csv(ctx, "truth_periods.csv", periods);

  json res;
  res["mode"] = "truth-oracle";
  res["T"] = spec.T;
  res["M"] = M;
  res["intervention"] = iv_label;
  res["functional"] = functional;
  if (functional == "smoothed") res["kernel_sigma"] = kernel.sigma;
  res["replications"] = R;
  res["regions"] = jregions;
  write_artifact_json(ctx, "results.json", res);

  ctx.effective = {{"T", spec.T}, {"M", M}, {"replications", R},
                   {"functional", functional}, {"intervention", iv_label}};
}

// --- driver -----------------------------------------------------------------

int run_from_file(const std::string& config_path, int cli_threads,
                  const std::string& cli_profile, const std::string& cli_out) {
  const std::string text = read_text_file(config_path);
  const ConfigMap cfg = ConfigMap::parse(text, config_path);

  const std::string mode = cfg.require_string("mode");
  const std::set<std::string> known_modes = {"simulate", "estimate", "coverage",
                                            "balance", "truth-oracle"};
  if (!known_modes.count(mode)) {
    throw ConfigError("mode: unknown mode '" + mode +
                      "' (expected simulate, estimate, coverage, balance, or "
                      "truth-oracle)");
  }

  RunContext ctx;
  const std::int64_t seed = cfg.get_int("seed", 20260825);
  if (seed < 0) throw ConfigError("seed: must be nonnegative");
  ctx.seed = static_cast<std::uint64_t>(seed);
  const std::int64_t cfg_threads = cfg.get_int("threads", 0);
  if (cfg_threads < 0 || cfg_threads > 4096) {
    throw ConfigError("threads: expected a count in [0, 4096] (0 = hardware)");
  }
  ctx.threads = cli_threads >= 0 ? cli_threads : static_cast<int>(cfg_threads);
  // Config keys are consumed unconditionally (so reject_unknown stays exact);
  // command-line flags take precedence over their values.
  const std::string cfg_profile = cfg.get_string("profile", "desk");
  ctx.profile = !cli_profile.empty() ? cli_profile : cfg_profile;
  if (ctx.profile != "desk" && ctx.profile != "full") {
    throw ConfigError("profile: expected desk or full");
  }
  const std::string cfg_out = cfg.get_string("out_dir", "out");
  const std::string out_dir = !cli_out.empty() ? cli_out : cfg_out;
  ctx.out_dir = out_dir;
  std::filesystem::create_directories(ctx.out_dir);

  std::printf("[stcausal] mode=%s profile=%s threads=%d seed=%llu out=%s\n",
              mode.c_str(), ctx.profile.c_str(), ctx.threads,
              static_cast<unsigned long long>(ctx.seed), out_dir.c_str());

  if (mode == "simulate") {
    run_simulate(cfg, ctx);
  } else if (mode == "estimate") {
    run_estimate(cfg, ctx);
  } else if (mode == "coverage") {
    run_coverage(cfg, ctx);
  } else if (mode == "balance") {
    run_balance(cfg, ctx);
  } else {
    run_truth_oracle(cfg, ctx);
  }

  json manifest;
  manifest["artifact"] = "stcausal";
  manifest["version"] = kVersion;
  manifest["mode"] = mode;
  manifest["profile"] = ctx.profile;
  manifest["threads"] = ctx.threads;
  manifest["seed"] = ctx.seed;
  manifest["config_hash"] = "fnv1a64:" + hex64(fnv1a64(text));
  std::string canonical;
  for (const auto& [key, literal] : cfg.entries()) {
    canonical += key + " = " + literal + "\n";
  }
  manifest["config_text"] = canonical;
  manifest["effective"] = ctx.effective;
  manifest["artifacts"] = ctx.artifacts;
  write_artifact_json(ctx, "manifest.json", manifest);

  for (const std::string& a : ctx.artifacts) {
    std::printf("[stcausal] wrote %s\n", (ctx.out_dir / a).string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stcausal: simulation and causal estimation for spatio-temporal "
               "point patterns"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = -1;
  std::string profile;
  std::string out_dir;
  CLI::App* run = app.add_subcommand("run", "execute the experiment described by "
                                            "a config file");
  run->add_option("config", config_path, "path to the experiment config")->required();
  run->add_option("--threads", threads, "worker threads (0 = all hardware threads)")
      ->check(CLI::Range(0, 4096));
  run->add_option("--profile", profile, "study size: desk (default) or full")
      ->check(CLI::IsMember({"desk", "full"}));
  run->add_option("--out", out_dir, "output directory (overrides the config's out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // flag misuse is a configuration error
  }

  try {
    return run_from_file(config_path, threads, profile, out_dir);
  } catch (const stcausal::ConfigError& e) {
    std::fprintf(stderr, "[stcausal] config error: %s\n", e.what());
    return 2;
  } catch (const stcausal::PositivityViolation& e) {
    std::fprintf(stderr, "[stcausal] positivity violation: %s\n", e.what());
    return 3;
  } catch (const stcausal::FitError& e) {
    std::fprintf(stderr, "[stcausal] fit failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "[stcausal] error: %s\n", e.what());
    return 1;
  }
}
