#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "epm/analysis.hpp"
#include "epm/core.hpp"
#include "epm/datasets.hpp"
#include "epm/partial_match.hpp"

namespace epm::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw invalid_input(where + ": not a number: '" + s + "'");
  }
  if (used != s.size()) throw invalid_input(where + ": not a number: '" + s + "'");
  return v;
}

// Nonempty data rows of a CSV whose first line must equal `header` (ignoring spaces).
inline std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                                      std::string_view header) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw invalid_input(path.string() + ": empty file");
  const auto got = split_csv_line(line);
  const auto want = split_csv_line(header);
  if (got != want) throw invalid_input(path.string() + ": expected header '" + std::string(header) + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != want.size())
      throw invalid_input(path.string() + ": row " + std::to_string(rows.size() + 2) +
                          " has the wrong number of fields");
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("cannot write " + path.string());
  out << text;
  if (!out) throw invalid_input("write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 64-bit FNV-1a of a byte string, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string hash_file(const fs::path& path) { return fnv1a_hex(read_text(path)); }

// Function file: header t,value; censor point = last time.
inline std::string function_csv(const CensoredFunction& f) {
  std::string s = "t,value\n";
  for (std::size_t i = 0; i < f.size(); ++i)
    s += format_double(f.time(i)) + "," + format_double(f[i]) + "\n";
  return s;
}

inline void write_function(const fs::path& path, const CensoredFunction& f) {
  write_text(path, function_csv(f));
}

inline CensoredFunction read_function(const fs::path& path) {
  const auto rows = read_csv(path, "t,value");
  std::vector<double> t;
  std::vector<double> v;
  for (const auto& r : rows) {
    t.push_back(parse_double(r[0], path.string()));
    v.push_back(parse_double(r[1], path.string()));
  }
  return CensoredFunction::from_samples(t, v);
}

// Group element as a map t -> g(t) on [0, max(b, domain_end)] at the unit-warp knots.
inline std::vector<std::pair<double, double>> group_element_samples(const GroupElement& g,
                                                                     double domain_end) {
  std::vector<std::pair<double, double>> out;
  const double b = g.pivot();
  for (double x : g.unit_warp().times()) out.emplace_back(b * x, g(b * x));
  if (domain_end > b) out.emplace_back(domain_end, g(domain_end));
  return out;
}

inline std::string warp_csv(const GroupElement& g, double domain_end) {
  std::string s = "t,gamma_t\n";
  for (const auto& [t, y] : group_element_samples(g, domain_end))
    s += format_double(t) + "," + format_double(y) + "\n";
  return s;
}

// {a, b, gamma: [[t, gamma(t)]...] on [0, b], energy, dissimilarity, iterations, converged}.
inline json match_result_json(const MatchResult& r) {
  const auto& g = r.group_element;
  const double b = g.pivot();
  json gamma = json::array();
  const auto& w = g.unit_warp();
  const auto xs = w.times();
  const auto ys = w.values();
  for (std::size_t i = 0; i < xs.size(); ++i) gamma.push_back({b * xs[i], b * ys[i]});
  return {{"a", g.scale()},
          {"b", b},
          {"gamma", gamma},
          {"energy", r.energy},
          {"dissimilarity", r.dissimilarity},
          {"matched_energy", r.matched_energy},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"energy_trace", r.energy_trace}};
}

inline std::string matrix_csv(const SquareMatrix& m) {
  std::string s = "id";
  for (const auto& id : m.ids) s += "," + id;
  s += "\n";
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    s += m.ids[i];
    for (std::size_t j = 0; j < n; ++j) s += "," + format_double(m.values[i * n + j]);
    s += "\n";
  }
  return s;
}

// Square matrix with a header row and first column of ids; rows may be missing
// (resumable fills) and come back as NaN with present[i] = false.
struct PartialMatrix {
  SquareMatrix matrix;
  std::vector<bool> present;
};

inline PartialMatrix read_partial_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw invalid_input(path.string() + ": empty matrix file");
  auto head = split_csv_line(line);
  if (head.empty() || head.front() != "id") throw invalid_input(path.string() + ": header must start with 'id'");
  head.erase(head.begin());
  const std::size_t n = head.size();
  if (n == 0) throw invalid_input(path.string() + ": no columns");
  PartialMatrix pm;
  pm.matrix.ids = head;
  pm.matrix.values.assign(n * n, std::numeric_limits<double>::quiet_NaN());
  pm.present.assign(n, false);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto row = split_csv_line(line);
    if (row.size() != n + 1) throw invalid_input(path.string() + ": matrix is not square");
    const auto it = std::find(head.begin(), head.end(), row.front());
    if (it == head.end()) throw invalid_input(path.string() + ": unknown row id '" + row.front() + "'");
    const auto i = static_cast<std::size_t>(it - head.begin());
    if (pm.present[i]) throw invalid_input(path.string() + ": duplicate row '" + row.front() + "'");
    for (std::size_t j = 0; j < n; ++j) pm.matrix.values[i * n + j] = parse_double(row[j + 1], path.string());
    pm.present[i] = true;
  }
  return pm;
}

inline SquareMatrix read_matrix(const fs::path& path) {
  auto pm = read_partial_matrix(path);
  for (std::size_t i = 0; i < pm.present.size(); ++i)
    if (!pm.present[i]) throw invalid_input(path.string() + ": matrix is not square (missing row '" + pm.matrix.ids[i] + "')");
  return std::move(pm.matrix);
}

inline std::vector<DailyCount> read_daily_counts(const fs::path& path) {
  const auto rows = read_csv(path, "date,count");
  std::vector<DailyCount> out;
  for (const auto& r : rows) out.push_back({parse_iso_date(r[0]), parse_double(r[1], path.string())});
  return out;
}

inline std::string safe_file_stem(const std::string& id) {
  std::string s;
  for (char c : id) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.') ? c : '_';
  return s;
}

// Dataset entries of a manifest: [{id, path, label?}], paths relative to the manifest.
inline json dataset_entries(const LabeledDataset& ds) {
  json arr = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    json e = {{"id", ds.ids[i]}, {"path", safe_file_stem(ds.ids[i]) + ".csv"}};
    if (ds.labels) e["label"] = (*ds.labels)[i];
    arr.push_back(std::move(e));
  }
  return arr;
}

// Writes one CSV per function into dir; returns the manifest entries.
inline json write_dataset_files(const fs::path& dir, const LabeledDataset& ds) {
  ds.validate();
  fs::create_directories(dir);
  json entries = dataset_entries(ds);
  for (std::size_t i = 0; i < ds.size(); ++i)
    write_function(dir / entries[i]["path"].get<std::string>(), ds.functions[i]);
  return entries;
}

inline LabeledDataset load_dataset(const fs::path& manifest_path) {
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw invalid_input(manifest_path.string() + ": " + e.what());
  }
  if (!m.is_object() || !m.contains("dataset") || !m["dataset"].is_array())
    throw invalid_input(manifest_path.string() + ": manifest has no dataset list");
  const fs::path base = manifest_path.parent_path();
  LabeledDataset ds;
  bool any_label = false;
  bool all_label = true;
  std::vector<int> labels;
  for (const auto& e : m["dataset"]) {
    if (!e.is_object() || !e.contains("id") || !e.contains("path") || !e["id"].is_string() ||
        !e["path"].is_string())
      throw invalid_input(manifest_path.string() + ": dataset entries need string id and path");
    ds.ids.push_back(e["id"].get<std::string>());
    ds.functions.push_back(read_function(base / e["path"].get<std::string>()));
    if (e.contains("label") && e["label"].is_number_integer()) {
      any_label = true;
      labels.push_back(e["label"].get<int>());
    } else {
      all_label = false;
      labels.push_back(0);
    }
  }
  if (ds.size() == 0) throw invalid_input(manifest_path.string() + ": empty dataset");
  if (any_label && all_label) ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

inline json config_json(const MatchConfig& c) {
  return {{"lambda", c.lambda},       {"scale_lo", c.scale_lo},   {"scale_hi", c.scale_hi},
          {"grid_size", c.grid_size}, {"tol_eps", c.tol_eps},     {"max_iters", c.max_iters},
          {"step_delta", c.step_delta}, {"beta", c.beta},         {"tau", c.tau},
          {"min_step", c.min_step},   {"dp_max_slope", c.dp_max_slope},
          {"dp_samples", c.dp_samples}, {"psi_samples", c.psi_samples}};
}

inline json cluster_report_json(const ClusterReport& r) {
  json clusters = json::array();
  for (std::size_t c = 0; c < r.clusters.size(); ++c) {
    const auto& cs = r.clusters[c];
    json ids = json::array();
    for (std::size_t i : cs.members) ids.push_back(r.ids[i]);
    clusters.push_back({{"label", c}, {"ids", ids}, {"size", cs.members.size()},
                        {"avg_variance", cs.stats.avg_variance}});
  }
  json labels = json::object();
  for (std::size_t i = 0; i < r.ids.size(); ++i) labels[r.ids[i]] = r.labels[i];
  return {{"method", std::string(to_string(r.method))},
          {"clusters", clusters},
          {"labels", labels},
          {"separability", r.separability}};
}

// Plot data for one cluster: t, mean, sd, mean - sd, mean + sd.
inline std::string cluster_curve_csv(const CrossSectionalStats& s) {
  std::string out = "t,mean,sd,lower,upper\n";
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const double sd = std::sqrt(std::max(s.variance[i], 0.0));
    out += format_double(s.t[i]) + "," + format_double(s.mean[i]) + "," + format_double(sd) + "," +
           format_double(s.mean[i] - sd) + "," + format_double(s.mean[i] + sd) + "\n";
  }
  return out;
}

}  // namespace epm::io
