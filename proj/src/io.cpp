#include "stcausal/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "stcausal/errors.hpp"

namespace stcausal {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double_field(const std::string& s, const std::string& origin,
                          int row, const char* what) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError(origin + ": row " + std::to_string(row) + ": " + what +
                      " must be a number, got '" + s + "'");
  return v;
}

long parse_period_field(const std::string& s, const std::string& origin, int row) {
  const std::string t = trim(s);
  long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || v < 1)
    throw ConfigError(origin + ": row " + std::to_string(row) +
                      ": t must be a positive integer, got '" + s + "'");
  return v;
}

}  // namespace

std::vector<PointPattern> ingest_patterns_text(const std::string& text,
                                               const Window& window,
                                               IngestReport* report,
                                               const IngestOptions& opts,
                                               const std::string& origin) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  rep = IngestReport{};

  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError(origin + ": empty file (expected header t,x,y[,type])");

  const std::vector<std::string> header = split_csv_row(line);
  bool has_type = false;
  if (header.size() == 4 && header[0] == "t" && header[1] == "x" &&
      header[2] == "y" && header[3] == "type") {
    has_type = true;
  } else if (!(header.size() == 3 && header[0] == "t" && header[1] == "x" &&
               header[2] == "y")) {
    throw ConfigError(origin + ": header must be 't,x,y' or 't,x,y,type', got '" +
                      line + "'");
  }
  if (opts.type_filter && !has_type)
    throw ConfigError(origin + ": a type filter was requested but the file has no "
                      "type column");

  struct Row {
    long t;
    double x, y;
  };
  long max_t = 0;
  std::map<long, std::vector<Row>> by_period;
  std::set<std::tuple<long, std::uint64_t, std::uint64_t, std::string>> seen;
  bool filter_matched = !opts.type_filter.has_value();
  long prev_t = 0;

  int row_no = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv_row(line);
    const std::size_t want = has_type ? 4 : 3;
    if (f.size() != want)
      throw ConfigError(origin + ": row " + std::to_string(row_no) + ": expected " +
                        std::to_string(want) + " fields (" +
                        (has_type ? "t,x,y,type" : "t,x,y") + "), got " +
                        std::to_string(f.size()) + " in '" + line + "'");
    ++rep.rows_read;
    const long t = parse_period_field(f[0], origin, row_no);
    const double x = parse_double_field(f[1], origin, row_no, "x");
    const double y = parse_double_field(f[2], origin, row_no, "y");
    if (!window.contains({x, y}))
      throw ConfigError(origin + ": row " + std::to_string(row_no) + ": point (" +
                        format_double(x) + ", " + format_double(y) +
                        ") lies outside the window [" +
                        format_double(window.bounds().x0) + ", " +
                        format_double(window.bounds().x1) + "] x [" +
                        format_double(window.bounds().y0) + ", " +
                        format_double(window.bounds().y1) + "]");
    if (t < prev_t) rep.monotone_t = false;
    prev_t = std::max(prev_t, t);
    max_t = std::max(max_t, t);

    const std::string type = has_type ? f[3] : "";
    std::uint64_t bx, by;
    static_assert(sizeof(bx) == sizeof(x));
    std::memcpy(&bx, &x, sizeof(bx));
    std::memcpy(&by, &y, sizeof(by));
    if (!seen.insert({t, bx, by, type}).second) ++rep.duplicate_points;

    if (opts.type_filter && type != *opts.type_filter) continue;
    filter_matched = true;
    ++rep.points_kept;
    by_period[t].push_back({t, x, y});
  }

  if (rep.rows_read == 0)
    throw ConfigError(origin + ": no data rows after the header");
  if (!filter_matched)
    rep.warnings.push_back("type filter '" + *opts.type_filter +
                           "' matched no rows; all periods are empty");
  if (rep.duplicate_points > 0)
    rep.warnings.push_back(std::to_string(rep.duplicate_points) +
                           " exact duplicate row(s) kept as distinct points");
  if (!rep.monotone_t)
    rep.warnings.push_back("period numbers arrived out of order; rows were "
                           "sorted into their periods");

  std::vector<PointPattern> series;
  series.reserve(static_cast<std::size_t>(max_t));
  for (long t = 1; t <= max_t; ++t) {
    std::vector<double> xs, ys;
    const auto it = by_period.find(t);
    if (it != by_period.end())
      for (const Row& r : it->second) {
        xs.push_back(r.x);
        ys.push_back(r.y);
      }
    series.emplace_back(static_cast<int>(t), std::move(xs), std::move(ys));
  }
  return series;
}

std::vector<PointPattern> ingest_patterns(const std::string& path,
                                          const Window& window,
                                          IngestReport* report,
                                          const IngestOptions& opts) {
  return ingest_patterns_text(read_text_file(path), window, report, opts, path);
}

// --- Writers ----------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_to_string(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out.push_back(',');
    out += table.header[i];
  }
  out.push_back('\n');
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw std::logic_error("csv_to_string: row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      out += row[i];
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const std::string& path, const CsvTable& table) {
  write_text_file(path, csv_to_string(table));
}

CsvTable series_table(const SimulatedSeries& series) {
  CsvTable t;
  t.header = {"t", "x", "y", "type"};
  const struct {
    const char* name;
    const std::vector<PointPattern>* pats;
  } groups[] = {{"x3", &series.x3},
                {"x4", &series.x4},
                {"treatment", &series.treatments},
                {"outcome", &series.outcomes}};
  for (int period = 1; period <= series.total_periods(); ++period) {
    for (const auto& g : groups) {
      const PointPattern& p = (*g.pats)[static_cast<std::size_t>(period - 1)];
      for (std::size_t i = 0; i < p.size(); ++i)
        t.rows.push_back({std::to_string(period), format_double(p.xs()[i]),
                          format_double(p.ys()[i]), g.name});
    }
  }
  return t;
}

void write_series_csv(const std::string& path, const SimulatedSeries& series) {
  write_csv(path, series_table(series));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("failed while writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace stcausal
