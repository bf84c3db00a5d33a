#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotq/error.hpp"
#include "cotq/grid.hpp"
#include "cotq/quantile_map.hpp"
#include "cotq/regression.hpp"
#include "cotq/types.hpp"
#include "cotq/weights.hpp"

namespace cotq {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "cotq/1";

struct Dataset {
  Matrix X;
  Matrix Y;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
  /// Rows dropped because a selected cell was missing.
  long long dropped = 0;
};

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

/// Splits one CSV record; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') cell += '"', ++i;
      else if (ch == '"') quoted = false;
      else cell += ch;
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += ch;
    }
  }
  out.push_back(cell);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool is_missing(const std::string& cell) {
  std::string lower;
  for (char c : cell) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower.empty() || lower == "na" || lower == "nan";
}

inline std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

}  // namespace detail

/**
 * Reads the selected columns of a comma-separated file with a header row.
 * Empty, NA and NaN cells count as missing; such rows are dropped.
 */
inline Dataset load_csv(const std::string& path, const std::vector<std::string>& x_columns,
                        const std::vector<std::string>& y_columns) {
  if (x_columns.empty() || y_columns.empty()) fail(ErrorKind::InvalidSpec, "select at least one x and one y column");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Data, "'" + path + "' is empty (a header row is required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = detail::split_csv_line(line);
  for (auto& h : header) h = detail::trim(h);

  auto locate = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::Data, "column '" + name + "' not found in header of '" + path + "'");
    return static_cast<int>(it - header.begin());
  };
  std::vector<int> cols;
  for (const auto& c : x_columns) cols.push_back(locate(c));
  for (const auto& c : y_columns) cols.push_back(locate(c));
  const std::size_t m = x_columns.size();

  Dataset ds;
  ds.x_names = x_columns;
  ds.y_names = y_columns;
  std::vector<std::vector<double>> rows;
  long long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    std::vector<double> row;
    bool missing = false;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const std::string name = j < m ? x_columns[j] : y_columns[j - m];
      if (cols[j] >= static_cast<int>(cells.size())) {
        missing = true;
        break;
      }
      const std::string cell = detail::trim(cells[cols[j]]);
      if (detail::is_missing(cell)) {
        missing = true;
        break;
      }
      const auto v = detail::parse_number(cell);
      if (!v)
        fail(ErrorKind::Data, "row " + std::to_string(lineno) + ", column '" + name + "': cannot parse '" + cell +
                                  "' as a number");
      row.push_back(*v);
    }
    if (missing) ++ds.dropped;
    else rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::Data, "'" + path + "' has no complete rows in the selected columns");
  const auto n = static_cast<Eigen::Index>(rows.size());
  ds.X.resize(n, static_cast<Eigen::Index>(m));
  ds.Y.resize(n, static_cast<Eigen::Index>(y_columns.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (j < m) ds.X(i, static_cast<Eigen::Index>(j)) = rows[i][j];
      else ds.Y(i, static_cast<Eigen::Index>(j - m)) = rows[i][j];
    }
  return ds;
}

/// Writes a header and the rows of [A B ...] with round-trip precision.
inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const std::vector<const Matrix*>& blocks) {
  Eigen::Index rows = blocks.empty() ? 0 : blocks.front()->rows();
  std::size_t width = 0;
  for (const Matrix* b : blocks) {
    if (b->rows() != rows) fail(ErrorKind::Internal, "csv blocks have different row counts");
    width += static_cast<std::size_t>(b->cols());
  }
  if (width != names.size()) fail(ErrorKind::Internal, "csv header does not match column count");
  std::ofstream out = detail::open_output(path);
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (Eigen::Index i = 0; i < rows; ++i) {
    bool first = true;
    for (const Matrix* b : blocks)
      for (Eigen::Index j = 0; j < b->cols(); ++j) {
        out << (first ? "" : ",") << format_double((*b)(i, j));
        first = false;
      }
    out << '\n';
  }
  detail::finish(out, path);
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::vector<std::string> names = ds.x_names;
  names.insert(names.end(), ds.y_names.begin(), ds.y_names.end());
  write_csv(path, names, {&ds.X, &ds.Y});
}

/// Output directory: the explicit one, else $COTQ_OUTPUT_DIR, else ./cotq_out.
inline std::filesystem::path output_dir(const std::string& explicit_dir = "") {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("COTQ_OUTPUT_DIR"); env && *env) return env;
  return "cotq_out";
}

inline std::filesystem::path prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) fail(ErrorKind::Io, "cannot create output directory '" + dir.string() + "'");
  return dir;
}

// ---------------------------------------------------------------- config

struct RunConfig {
  std::string dataset;
  std::vector<std::string> x_columns;
  std::vector<std::string> y_columns;
  WeightSpec weights;
  std::optional<GridSpec> grid;
  std::vector<double> taus{0.2, 0.4, 0.8};
  /// "auto:K" or a comma separated list of scalars; rows separated by ';' when m > 1.
  std::string queries = "auto:10";
  double smoothing = 0.0;
  std::string output_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Dense transport size cap; 0 keeps the solver default.
  long long max_cost_entries = 0;
};

inline Json to_json(const GridSpec& g) {
  return Json{{"d", g.d}, {"n_r", g.n_r}, {"n_s", g.n_s}, {"n_0", g.n_0}, {"direction_seed", g.direction_seed}};
}

inline Json to_json(const WeightSpec& w) {
  Json j{{"scheme", to_string(w.scheme)}};
  if (w.is_kernel()) j["h"] = w.h;
  else j["k"] = w.k;
  return j;
}

inline Json to_json(const RunConfig& c) {
  Json j{{"dataset", c.dataset}, {"x_columns", c.x_columns}, {"y_columns", c.y_columns},
         {"weights", to_json(c.weights)}};
  if (c.grid) j["grid"] = to_json(*c.grid);
  j["taus"] = c.taus;
  j["queries"] = c.queries;
  j["smoothing"] = c.smoothing;
  j["seed"] = c.seed;
  return j;
}

namespace detail {

template <class T>
void read_field(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::InvalidSpec, std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Fields missing from the document keep the values already in `c`.
inline void merge_config(const Json& j, RunConfig& c) {
  if (!j.is_object()) fail(ErrorKind::InvalidSpec, "config must be a JSON object");
  detail::read_field(j, "dataset", c.dataset);
  detail::read_field(j, "x_columns", c.x_columns);
  detail::read_field(j, "y_columns", c.y_columns);
  if (j.contains("weights")) {
    const Json& w = j.at("weights");
    std::string scheme = to_string(c.weights.scheme);
    detail::read_field(w, "scheme", scheme);
    c.weights.scheme = parse_weight_scheme(scheme);
    detail::read_field(w, "h", c.weights.h);
    detail::read_field(w, "k", c.weights.k);
  }
  if (j.contains("grid")) {
    GridSpec g = c.grid.value_or(GridSpec{});
    const Json& gj = j.at("grid");
    detail::read_field(gj, "d", g.d);
    detail::read_field(gj, "n_r", g.n_r);
    detail::read_field(gj, "n_s", g.n_s);
    detail::read_field(gj, "n_0", g.n_0);
    detail::read_field(gj, "direction_seed", g.direction_seed);
    c.grid = g;
  }
  detail::read_field(j, "taus", c.taus);
  if (j.contains("queries") && j.at("queries").is_array()) {
    std::string list;
    for (const auto& q : j.at("queries")) {
      if (!list.empty()) list += ';';
      if (q.is_array()) {
        for (std::size_t i = 0; i < q.size(); ++i) list += (i ? "," : "") + format_double(q[i].get<double>());
      } else {
        list += format_double(q.get<double>());
      }
    }
    c.queries = list;
  } else {
    detail::read_field(j, "queries", c.queries);
  }
  detail::read_field(j, "smoothing", c.smoothing);
  detail::read_field(j, "output_dir", c.output_dir);
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "threads", c.threads);
  detail::read_field(j, "max_cost_entries", c.max_cost_entries);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidSpec, "config '" + path + "' is not valid JSON: " + e.what());
  }
  RunConfig c;
  merge_config(j, c);
  return c;
}

/**
 * Query covariates from "auto:K" (K evenly spaced points over the observed
 * range, m = 1 only) or an explicit list: scalars separated by ',' or ';' when
 * m = 1, otherwise rows separated by ';' with ',' between coordinates.
 */
inline std::vector<Vector> resolve_queries(const std::string& spec, const Matrix& X) {
  const auto m = X.cols();
  if (spec.rfind("auto:", 0) == 0) {
    const auto count = detail::parse_number(spec.substr(5));
    if (!count || *count < 1 || *count != std::floor(*count)) fail(ErrorKind::InvalidSpec, "queries 'auto:K' needs an integer K >= 1");
    if (m != 1) fail(ErrorKind::Unsupported, "automatic queries need a single covariate; list them explicitly");
    return linspace_queries(X.col(0).minCoeff(), X.col(0).maxCoeff(), static_cast<int>(*count));
  }
  std::vector<Vector> out;
  std::stringstream rows(spec);
  std::string row;
  const char sep = m == 1 ? '\0' : ';';
  auto parse_row = [&](const std::string& r) {
    std::vector<double> vals;
    for (const auto& cell : detail::split_names(r)) {
      const auto v = detail::parse_number(cell);
      if (!v) fail(ErrorKind::InvalidSpec, "query value '" + cell + "' is not a number");
      vals.push_back(*v);
    }
    return vals;
  };
  if (sep == '\0') {
    std::string flat_list = spec;
    std::replace(flat_list.begin(), flat_list.end(), ';', ',');
    for (double v : parse_row(flat_list)) out.push_back(Vector::Constant(1, v));
  } else {
    while (std::getline(rows, row, sep)) {
      if (detail::trim(row).empty()) continue;
      const auto vals = parse_row(row);
      if (static_cast<Eigen::Index>(vals.size()) != m)
        fail(ErrorKind::InvalidSpec, "query '" + row + "' does not have " + std::to_string(m) + " coordinates");
      out.push_back(Eigen::Map<const Vector>(vals.data(), m));
    }
  }
  if (out.empty()) fail(ErrorKind::InvalidSpec, "no query covariates given");
  return out;
}

inline RegressionConfig regression_config(const RunConfig& c, const Matrix& X) {
  RegressionConfig r;
  r.weights = c.weights;
  r.grid = c.grid;
  r.taus = c.taus;
  r.queries = resolve_queries(c.queries, X);
  r.smoothing = c.smoothing;
  r.threads = c.threads;
  r.direction_seed = c.seed;
  if (c.max_cost_entries > 0) r.solver.max_dense_entries = c.max_cost_entries;
  return r;
}

// ---------------------------------------------------------------- results

/// One (query, tau) contour with the median of that query.
struct ContourRecord {
  std::vector<double> query;
  double tau = 0.0;
  std::vector<std::vector<double>> vertices;
  std::vector<double> median;
  std::optional<double> coverage;
  /// Weighted share of the training sample inside the region (real data).
  std::optional<double> in_sample_mass;

  friend bool operator==(const ContourRecord&, const ContourRecord&) = default;
};

inline std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline std::vector<std::vector<double>> to_std(const Matrix& m) {
  std::vector<std::vector<double>> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i].assign(m.row(i).data(), m.row(i).data() + m.cols());
  return out;
}

inline Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  const auto cols = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) fail(ErrorKind::Data, "ragged vertex list");
    for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][j];
  }
  return m;
}

/// Closed contours get their first vertex repeated at the end if it is not already.
inline Matrix closed_vertices(const ContourSet& c) {
  const Matrix& v = c.vertices;
  if (!c.closed || v.rows() < 2 || v.row(0) == v.row(v.rows() - 1)) return v;
  Matrix out(v.rows() + 1, v.cols());
  out << v, v.row(0);
  return out;
}

inline Json to_json(const ContourRecord& r) {
  Json j{{"query", r.query}, {"tau", r.tau}, {"vertices", r.vertices}, {"median", r.median}};
  if (r.coverage) j["coverage"] = *r.coverage;
  if (r.in_sample_mass) j["in_sample_mass"] = *r.in_sample_mass;
  return j;
}

inline ContourRecord record_from_json(const Json& j) {
  ContourRecord r;
  try {
    j.at("query").get_to(r.query);
    j.at("tau").get_to(r.tau);
    j.at("vertices").get_to(r.vertices);
    j.at("median").get_to(r.median);
    if (j.contains("coverage")) r.coverage = j.at("coverage").get<double>();
    if (j.contains("in_sample_mass")) r.in_sample_mass = j.at("in_sample_mass").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("malformed contour record: ") + e.what());
  }
  return r;
}

inline Json results_document(const std::vector<ContourRecord>& records, const Json& config = Json::object()) {
  Json doc{{"schema", kSchema}};
  if (!config.empty()) doc["config"] = config;
  doc["results"] = Json::array();
  for (const auto& r : records) doc["results"].push_back(to_json(r));
  return doc;
}

inline std::vector<ContourRecord> parse_results(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Data, std::string("results are not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != kSchema)
    fail(ErrorKind::Data, std::string("results document lacks schema '") + kSchema + "'");
  std::vector<ContourRecord> out;
  for (const auto& r : doc.at("results")) out.push_back(record_from_json(r));
  return out;
}

/// Weighted share of the sample whose rank is at most tau, for each tau.
inline std::vector<double> in_sample_mass(const ConditionalQuantileMap& map, const Matrix& X, const Matrix& Y,
                                          const WeightSpec& spec, const std::vector<double>& taus) {
  const WeightVector w = compute_weights(map.query_x, X, spec);
  std::vector<double> mass(taus.size(), 0.0);
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    if (w.values[i] <= 0.0) continue;
    const double r = rank(map, Y.row(i).transpose());
    for (std::size_t t = 0; t < taus.size(); ++t)
      if (r <= taus[t] + 1e-12) mass[t] += w.values[i];
  }
  return mass;
}

/// One record per (query, tau), queries outermost.
inline std::vector<ContourRecord> make_records(const std::vector<ConditionalQuantileMap>& maps,
                                               const std::vector<double>& taus) {
  std::vector<ContourRecord> out;
  for (const auto& m : maps) {
    const std::vector<double> med = to_std(median_region(m).point);
    for (double tau : taus) {
      ContourRecord r;
      r.query = to_std(m.query_x);
      r.tau = tau;
      r.vertices = to_std(closed_vertices(contour(m, tau)));
      r.median = med;
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::string contour_file_name(std::size_t query_index, double tau) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "contour_q%03zu_tau%s.csv", query_index, format_double(tau).c_str());
  return buf;
}

// ---------------------------------------------------------------- svg

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Blue (low tau) to orange (high tau).
inline std::string tau_color(double tau) {
  const double t = std::clamp(tau, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(31 + t * (230 - 31)));
  const int g = static_cast<int>(std::lround(119 + t * (126 - 119)));
  const int b = static_cast<int>(std::lround(180 + t * (34 - 180)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace detail

/**
 * Small multiples for planar responses: one panel per query on shared axes,
 * contours colored by tau and the median as a red dot. Optional data points
 * are drawn faintly underneath.
 */
inline std::string render_svg(const std::vector<ContourRecord>& records, const std::string& title,
                              const std::vector<std::string>& axis_names = {"y1", "y2"}) {
  std::vector<std::vector<double>> queries;
  for (const auto& r : records) {
    if (r.median.size() != 2) fail(ErrorKind::Unsupported, "svg plots need two response coordinates");
    if (queries.empty() || queries.back() != r.query) queries.push_back(r.query);
  }
  double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
  for (const auto& r : records) {
    for (const auto& v : r.vertices) lo0 = std::min(lo0, v[0]), hi0 = std::max(hi0, v[0]), lo1 = std::min(lo1, v[1]), hi1 = std::max(hi1, v[1]);
    lo0 = std::min(lo0, r.median[0]), hi0 = std::max(hi0, r.median[0]);
    lo1 = std::min(lo1, r.median[1]), hi1 = std::max(hi1, r.median[1]);
  }
  if (records.empty()) lo0 = lo1 = 0, hi0 = hi1 = 1;
  if (hi0 <= lo0) hi0 = lo0 + 1;
  if (hi1 <= lo1) hi1 = lo1 + 1;

  const int cols = std::max(1, std::min<int>(5, static_cast<int>(queries.size())));
  const int rows = std::max(1, static_cast<int>((queries.size() + cols - 1) / cols));
  const double panel = 200, pad = 24, top = 40, legend = 30;
  const double width = cols * (panel + pad) + pad, height = top + rows * (panel + pad + 14) + legend;
  auto px = [&](double v) { return (v - lo0) / (hi0 - lo0) * (panel - 10) + 5; };
  auto py = [&](double v) { return panel - 5 - (v - lo1) / (hi1 - lo1) * (panel - 10); };
  using detail::svg_num;

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(width) << "\" height=\"" << svg_num(height)
      << "\" viewBox=\"0 0 " << svg_num(width) << ' ' << svg_num(height) << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << svg_num(pad) << "\" y=\"24\" font-size=\"14\">" << detail::xml_escape(title) << "</text>\n";
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double ox = pad + static_cast<double>(q % cols) * (panel + pad);
    const double oy = top + static_cast<double>(q / cols) * (panel + pad + 14);
    std::string label = "x =";
    for (double v : queries[q]) label += " " + format_double(v);
    out << "<g transform=\"translate(" << svg_num(ox) << ',' << svg_num(oy + 14) << ")\">\n"
        << "<text x=\"0\" y=\"-4\" font-size=\"11\">" << detail::xml_escape(label) << "</text>\n"
        << "<rect width=\"" << svg_num(panel) << "\" height=\"" << svg_num(panel) << "\" fill=\"none\" stroke=\"#999\"/>\n";
    const std::vector<double>* median = nullptr;
    for (const auto& r : records) {
      if (r.query != queries[q]) continue;
      median = &r.median;
      out << "<polyline fill=\"none\" stroke=\"" << detail::tau_color(r.tau) << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t v = 0; v < r.vertices.size(); ++v)
        out << (v ? " " : "") << svg_num(px(r.vertices[v][0])) << ',' << svg_num(py(r.vertices[v][1]));
      out << "\"><title>tau " << format_double(r.tau) << "</title></polyline>\n";
    }
    if (median)
      out << "<circle cx=\"" << svg_num(px((*median)[0])) << "\" cy=\"" << svg_num(py((*median)[1]))
          << "\" r=\"3\" fill=\"#d62728\"><title>median</title></circle>\n";
    out << "</g>\n";
  }
  std::vector<double> taus;
  for (const auto& r : records)
    if (std::find(taus.begin(), taus.end(), r.tau) == taus.end()) taus.push_back(r.tau);
  double lx = pad;
  const double ly = height - 10;
  for (double tau : taus) {
    out << "<line x1=\"" << svg_num(lx) << "\" y1=\"" << svg_num(ly - 4) << "\" x2=\"" << svg_num(lx + 18) << "\" y2=\""
        << svg_num(ly - 4) << "\" stroke=\"" << detail::tau_color(tau) << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << svg_num(lx + 22) << "\" y=\"" << svg_num(ly) << "\" font-size=\"11\">tau "
        << format_double(tau) << "</text>\n";
    lx += 80;
  }
  out << "<circle cx=\"" << svg_num(lx + 5) << "\" cy=\"" << svg_num(ly - 4) << "\" r=\"3\" fill=\"#d62728\"/>\n"
      << "<text x=\"" << svg_num(lx + 12) << "\" y=\"" << svg_num(ly) << "\" font-size=\"11\">median</text>\n"
      << "<text x=\"" << svg_num(width - pad) << "\" y=\"" << svg_num(ly) << "\" font-size=\"11\" text-anchor=\"end\">"
      << detail::xml_escape(axis_names.size() == 2 ? axis_names[0] + " horizontal, " + axis_names[1] + " vertical" : "")
      << "</text>\n</svg>\n";
  return out.str();
}

struct WrittenFiles {
  std::vector<std::filesystem::path> contours;
  std::filesystem::path medians;
  std::filesystem::path json;
  std::optional<std::filesystem::path> svg;
};

/**
 * Per-(query, tau) vertex CSVs, a medians CSV, results.json and, for one
 * covariate and planar responses, tubes.svg.
 */
inline WrittenFiles write_contours(const std::vector<ContourRecord>& records, const std::filesystem::path& dir,
                                   const std::vector<std::string>& x_names, const std::vector<std::string>& y_names,
                                   const Json& config = Json::object()) {
  prepare_dir(dir);
  WrittenFiles files;
  std::vector<std::vector<double>> queries;
  std::vector<std::vector<double>> medians;
  for (const auto& r : records) {
    if (queries.empty() || queries.back() != r.query) queries.push_back(r.query), medians.push_back(r.median);
    const Matrix v = to_matrix(r.vertices);
    files.contours.push_back(dir / contour_file_name(queries.size() - 1, r.tau));
    write_csv(files.contours.back(), y_names, {&v});
  }
  const Matrix q = to_matrix(queries), med = to_matrix(medians);
  std::vector<std::string> med_names = x_names;
  for (const auto& y : y_names) med_names.push_back("median_" + y);
  files.medians = dir / "medians.csv";
  if (!queries.empty()) write_csv(files.medians, med_names, {&q, &med});

  files.json = dir / "results.json";
  std::ofstream js = detail::open_output(files.json);
  js << results_document(records, config).dump(2) << '\n';
  detail::finish(js, files.json);

  if (x_names.size() == 1 && y_names.size() == 2) {
    files.svg = dir / "tubes.svg";
    std::ofstream svg = detail::open_output(*files.svg);
    svg << render_svg(records, "Quantile contours by covariate " + x_names[0], y_names);
    detail::finish(svg, *files.svg);
  }
  return files;
}

}  // namespace cotq
