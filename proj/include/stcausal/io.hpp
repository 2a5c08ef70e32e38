#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stcausal/geom.hpp"
#include "stcausal/simstudy.hpp"

namespace stcausal {

// --- Point-pattern ingestion ------------------------------------------------

struct IngestOptions {
  // Keep only rows whose type column equals this value (requires the file to
  // have a type column). Empty = keep everything.
  std::optional<std::string> type_filter;
};

// Data-quality findings from one ingestion pass.
struct IngestReport {
  int rows_read = 0;        // data rows, excluding the header
  int points_kept = 0;      // after any type filter
  int duplicate_points = 0; // exact repeats of an earlier row, kept as points
  bool monotone_t = true;   // false when period numbers arrived out of order
  std::vector<std::string> warnings;
};

// Reads a CSV with header `t,x,y` or `t,x,y,type`: periods are positive
// integers, coordinates must lie inside the window. Returns patterns for
// periods 1..max(t) with empty patterns materialized for gaps; rows appear in
// file order within their period (non-monotone t is permitted and sorted into
// place). Exact duplicate rows are preserved as distinct points and counted
// in the report. Throws ConfigError naming the row (and coordinates, when a
// point falls outside the window).
std::vector<PointPattern> ingest_patterns(const std::string& path,
                                          const Window& window,
                                          IngestReport* report = nullptr,
                                          const IngestOptions& opts = {});

// Same parser over an in-memory string; `origin` names the source in errors.
std::vector<PointPattern> ingest_patterns_text(const std::string& text,
                                               const Window& window,
                                               IngestReport* report = nullptr,
                                               const IngestOptions& opts = {},
                                               const std::string& origin = "<string>");

// --- Writers ----------------------------------------------------------------

// Shortest round-trip decimal form (std::to_chars): deterministic, locale-free,
// and parses back to the identical double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Writes header + rows, comma-separated, one trailing newline, LF endings.
void write_csv(const std::string& path, const CsvTable& table);
std::string csv_to_string(const CsvTable& table);

// All stored periods of a simulated series as rows t,x,y,type with type in
// {x3, x4, treatment, outcome}; re-ingesting reproduces the series exactly
// (periods keep their stored numbering, burn-in included).
void write_series_csv(const std::string& path, const SimulatedSeries& series);
CsvTable series_table(const SimulatedSeries& series);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace stcausal
