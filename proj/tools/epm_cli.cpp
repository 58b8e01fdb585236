#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epm/epm.hpp"
#include "epm/io.hpp"

namespace {

namespace fs = std::filesystem;
using epm::io::json;

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kFailure = 1, kInputError = 2, kStrictFailure = 3 };

struct StrictFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  epm::MatchConfig cfg;
  std::string grid;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool strict = false;
};

void apply_grid(const std::string& text, epm::MatchConfig& cfg) {
  if (text.empty()) return;
  const auto a = text.find(':');
  const auto b = text.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos)
    throw epm::invalid_input("--grid expects lo:hi:J");
  cfg.scale_lo = epm::io::parse_double(text.substr(0, a), "--grid");
  cfg.scale_hi = epm::io::parse_double(text.substr(a + 1, b - a - 1), "--grid");
  const double j = epm::io::parse_double(text.substr(b + 1), "--grid");
  if (!(j >= 1.0) || j != static_cast<double>(static_cast<std::size_t>(j)))
    throw epm::invalid_input("--grid: J must be a positive integer");
  cfg.grid_size = static_cast<std::size_t>(j);
}

class Manifest {
 public:
  Manifest(std::string command, const GlobalOptions& g)
      : start_(std::chrono::steady_clock::now()) {
    doc_ = {{"schema", "epm-manifest/1"},
            {"command", std::move(command)},
            {"tool_version", kVersion},
            {"config", epm::io::config_json(g.cfg)},
            {"seed", g.seed},
            {"threads", g.threads},
            {"strict", g.strict},
            {"inputs", json::object()},
            {"outputs", json::array()}};
  }

  void input(const fs::path& p) { doc_["inputs"][p.string()] = epm::io::hash_file(p); }
  void output(const std::string& name) { doc_["outputs"].push_back(name); }
  json& operator[](const char* key) { return doc_[key]; }

  void write(const fs::path& dir) {
    doc_["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    epm::io::write_text(dir / "manifest.json", doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw epm::invalid_input("cannot create directory " + dir.string());
}

// ---- align ----

struct AlignOptions {
  std::string file1;
  std::string file2;
  std::string method = "elastic-partial";
  std::string out = "align_out";
};

int run_align(const AlignOptions& o, const GlobalOptions& g) {
  const epm::Method method = epm::parse_method(o.method);
  const auto f1 = epm::io::read_function(o.file1);
  const auto f2 = epm::io::read_function(o.file2);
  ensure_dir(o.out);
  Manifest man("align", g);
  man.input(o.file1);
  man.input(o.file2);
  man["method"] = o.method;
  epm::MatchResult r;
  epm::CensoredFunction aligned = f2;
  double domain_end = f2.censor_point();
  switch (method) {
    case epm::Method::elastic_partial:
      r = epm::shape_match(f1, f2, g.cfg);
      aligned = *r.aligned_function;
      domain_end = aligned.censor_point();
      break;
    case epm::Method::elastic_fixed:
    case epm::Method::l2_fixed: {
      const std::size_t n = std::max(f1.size(), f2.size());
      const auto u1 = epm::rescale_domain(f1, 1.0, n);
      const auto u2 = epm::rescale_domain(f2, 1.0, n);
      if (method == epm::Method::elastic_fixed) {
        r = epm::elastic_fixed_match(epm::srvf_from_function(u1), epm::srvf_from_function(u2), g.cfg);
      } else {
        const auto a = u1.values();
        const auto b = u2.values();
        std::vector<double> d2(n);
        for (std::size_t k = 0; k < n; ++k) d2[k] = (a[k] - b[k]) * (a[k] - b[k]);
        r.energy = epm::detail::trapezoid(d2, 1.0);
        r.dissimilarity = std::sqrt(r.energy);
        r.matched_energy = r.energy;
        r.converged = true;
      }
      aligned = epm::warp_function(u2, r.group_element);
      domain_end = 1.0;
      break;
    }
  }
  const fs::path out(o.out);
  epm::io::write_text(out / "result.json", epm::io::match_result_json(r).dump(2) + "\n");
  epm::io::write_function(out / "aligned.csv", aligned);
  epm::io::write_text(out / "warp.csv", epm::io::warp_csv(r.group_element, domain_end));
  for (const char* name : {"result.json", "aligned.csv", "warp.csv"}) man.output(name);
  man["dissimilarity"] = r.dissimilarity;
  man.write(out);
  std::printf("%.10g\n", r.dissimilarity);
  if (g.strict && method == epm::Method::elastic_partial && !r.converged)
    throw StrictFailure("gradient descent did not converge in " + std::to_string(r.iterations) +
                        " iterations");
  return kOk;
}

// ---- simulate ----

struct SimulateOptions {
  std::string out = "simulated";
  std::size_t n_per_class = 17;
  std::size_t n_samples = 156;
  double roughness = 0.3;
};

int run_simulate(const SimulateOptions& o, const GlobalOptions& g) {
  epm::SimConfig sc;
  sc.seed = g.seed;
  sc.n_per_class = o.n_per_class;
  sc.n_samples = o.n_samples;
  sc.warp_roughness = o.roughness;
  const auto ds = epm::generate_simulated(sc);
  ensure_dir(o.out);
  Manifest man("simulate", g);
  man["simulation"] = {{"n_per_class", sc.n_per_class}, {"n_samples", sc.n_samples},
                       {"mixture_sigma", sc.mixture_sigma}, {"warp_roughness", sc.warp_roughness}};
  man["dataset"] = epm::io::write_dataset_files(o.out, ds);
  man.write(o.out);
  std::printf("%zu functions written to %s\n", ds.size(), o.out.c_str());
  return kOk;
}

// ---- distmat ----

struct DistmatOptions {
  std::string manifest;
  std::string method = "elastic-partial";
  std::string out = "distmat";
  bool resume = false;
};

int run_distmat(const DistmatOptions& o, const GlobalOptions& g) {
  const epm::Method method = epm::parse_method(o.method);
  const auto ds = epm::io::load_dataset(o.manifest);
  ensure_dir(o.out);
  const fs::path out(o.out);
  const fs::path partial = out / "rows.partial.csv";
  const epm::PairwiseEngine engine(ds, method, g.cfg);
  const std::size_t n = engine.size();
  std::vector<std::vector<double>> rows(n);
  std::vector<std::size_t> todo;
  std::size_t resumed = 0;
  if (o.resume && fs::exists(partial)) {
    const auto pm = epm::io::read_partial_matrix(partial);
    if (pm.matrix.ids != ds.ids) throw epm::invalid_input("--resume: partial rows belong to another dataset");
    for (std::size_t i = 0; i < n; ++i) {
      if (!pm.present[i]) continue;
      rows[i].assign(pm.matrix.values.begin() + static_cast<std::ptrdiff_t>(i * n),
                     pm.matrix.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      ++resumed;
    }
  } else {
    std::string head = "id";
    for (const auto& id : ds.ids) head += "," + id;
    epm::io::write_text(partial, head + "\n");
  }
  for (std::size_t i = 0; i < n; ++i)
    if (rows[i].empty()) todo.push_back(i);
  std::ofstream log(partial, std::ios::app);
  if (!log) throw epm::invalid_input("cannot write " + partial.string());
  const auto on_row = [&](std::size_t i, const std::vector<double>& r) {
    log << ds.ids[i];
    for (double v : r) log << "," << epm::io::format_double(v);
    log << "\n" << std::flush;
  };
  rows = epm::compute_rows(engine, todo, g.threads, std::move(rows), on_row);
  log.close();
  const auto d = engine.assemble(rows);
  Manifest man("distmat", g);
  man.input(o.manifest);
  man["method"] = o.method;
  man["rows_resumed"] = resumed;
  man["rows_computed"] = todo.size();
  epm::io::write_text(out / "matrix.csv", epm::io::matrix_csv(d));
  fs::remove(partial);
  man.output("matrix.csv");
  man.write(out);
  std::printf("%zux%zu %s matrix written to %s (%zu rows resumed)\n", n, n, o.method.c_str(),
              (out / "matrix.csv").c_str(), resumed);
  return kOk;
}

// ---- cluster ----

struct ClusterOptions {
  std::string matrix;
  std::string dataset;
  std::string method = "elastic-partial";
  std::string out = "clusters";
  std::size_t k_hint = 3;
  bool svg = false;
};

std::string svg_chart(const epm::ClusterReport& r) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const double w = 640.0;
  const double h = 400.0;
  const double pad = 40.0;
  double tmax = 0.0;
  double ymax = 0.0;
  for (const auto& c : r.clusters) {
    if (!c.stats.t.empty()) tmax = std::max(tmax, c.stats.t.back());
    for (std::size_t i = 0; i < c.stats.mean.size(); ++i)
      ymax = std::max(ymax, c.stats.mean[i] + std::sqrt(c.stats.variance[i]));
  }
  if (!(tmax > 0.0)) tmax = 1.0;
  if (!(ymax > 0.0)) ymax = 1.0;
  const auto x = [&](double t) { return pad + (w - 2 * pad) * t / tmax; };
  const auto y = [&](double v) { return h - pad - (h - 2 * pad) * v / ymax; };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                pad, h - pad, w - pad, h - pad, pad, pad, pad, h - pad);
  s += buf;
  for (std::size_t c = 0; c < r.clusters.size(); ++c) {
    const auto& st = r.clusters[c].stats;
    const char* color = colors[c % 6];
    for (int band = -1; band <= 1; ++band) {
      s += "<polyline fill=\"none\" stroke=\"";
      s += color;
      s += band == 0 ? "\" stroke-width=\"2\" points=\"" : "\" stroke-dasharray=\"4 3\" points=\"";
      for (std::size_t i = 0; i < st.t.size(); ++i) {
        const double v = st.mean[i] + band * std::sqrt(st.variance[i]);
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x(st.t[i]), y(v));
        s += buf;
      }
      s += "\"/>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

int run_cluster(const ClusterOptions& o, const GlobalOptions& g) {
  const epm::Method method = epm::parse_method(o.method);
  const auto m = epm::io::read_matrix(o.matrix);
  const auto ds = epm::io::load_dataset(o.dataset);
  if (m.ids != ds.ids) throw epm::invalid_input("matrix ids do not match the dataset");
  epm::DissimilarityMatrix d(m.ids);
  d.values = m.values;
  d.method = method;
  ensure_dir(o.out);
  const fs::path out(o.out);
  const auto report = epm::cluster_report(ds.functions, d, method, g.cfg, o.k_hint, ds.labels);
  Manifest man("cluster", g);
  man.input(o.matrix);
  man.input(o.dataset);
  man["method"] = o.method;
  json doc = epm::io::cluster_report_json(report);
  if (ds.labels) doc["label_accuracy"] = epm::label_accuracy(*ds.labels, report.labels);
  epm::io::write_text(out / "report.json", doc.dump(2) + "\n");
  man.output("report.json");
  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    const std::string name = "cluster_" + std::to_string(c) + ".csv";
    epm::io::write_text(out / name, epm::io::cluster_curve_csv(report.clusters[c].stats));
    man.output(name);
  }
  if (o.svg) {
    epm::io::write_text(out / "clusters.svg", svg_chart(report));
    man.output("clusters.svg");
  }
  man.write(out);
  std::printf("%zu clusters, separability %.6g\n", report.clusters.size(), report.separability);
  return kOk;
}

// ---- preprocess ----

struct PreprocessOptions {
  std::string raw_dir;
  std::string truncate;
  std::string out = "preprocessed";
  std::size_t samples = 100;
};

int run_preprocess(const PreprocessOptions& o, const GlobalOptions& g) {
  const auto cut = epm::parse_iso_date(o.truncate);
  if (!fs::is_directory(o.raw_dir)) throw epm::invalid_input("not a directory: " + o.raw_dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.raw_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw epm::invalid_input("no .csv files in " + o.raw_dir);
  epm::LabeledDataset ds;
  Manifest man("preprocess", g);
  for (const auto& f : files) {
    ds.ids.push_back(f.stem().string());
    ds.functions.push_back(epm::preprocess_rate_series(epm::io::read_daily_counts(f), cut, o.samples));
    man.input(f);
  }
  ensure_dir(o.out);
  man["truncate"] = o.truncate;
  man["samples"] = o.samples;
  man["dataset"] = epm::io::write_dataset_files(o.out, ds);
  man.write(o.out);
  std::printf("%zu series preprocessed into %s\n", ds.size(), o.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elastic partial matching of censored functions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  GlobalOptions g;
  auto& c = g.cfg;
  app.add_option("--lambda", c.lambda, "tail weight")->capture_default_str();
  app.add_option("--grid", g.grid, "scale grid lo:hi:J (default 0.5:2:50)");
  app.add_option("--eps", c.tol_eps, "gradient-norm tolerance")->capture_default_str();
  app.add_option("--delta", c.step_delta, "initial step size")->capture_default_str();
  app.add_option("--beta", c.beta, "Armijo constant")->capture_default_str();
  app.add_option("--tau", c.tau, "backtracking factor")->capture_default_str();
  app.add_option("--max-iters", c.max_iters, "gradient descent iterations")->capture_default_str();
  app.add_option("--dp-slope", c.dp_max_slope, "largest DP step slope")->capture_default_str();
  app.add_option("--dp-samples", c.dp_samples, "DP lattice size (0 = input size)")->capture_default_str();
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for matrix fill")->capture_default_str();
  app.add_flag("--strict", g.strict, "exit 3 on numerical failure");

  AlignOptions ao;
  auto* align = app.add_subcommand("align", "partially match file2 onto file1");
  align->add_option("file1", ao.file1)->required();
  align->add_option("file2", ao.file2)->required();
  align->add_option("--method", ao.method)->capture_default_str();
  align->add_option("--out", ao.out, "output directory")->capture_default_str();

  SimulateOptions so;
  auto* sim = app.add_subcommand("simulate", "generate the simulated three-class dataset");
  sim->add_option("--out", so.out)->capture_default_str();
  sim->add_option("--n-per-class", so.n_per_class)->capture_default_str();
  sim->add_option("--n-samples", so.n_samples)->capture_default_str();
  sim->add_option("--roughness", so.roughness, "random warp roughness")->capture_default_str();

  DistmatOptions dopt;
  auto* dist = app.add_subcommand("distmat", "pairwise dissimilarity matrix of a dataset");
  dist->add_option("manifest", dopt.manifest)->required();
  dist->add_option("--method", dopt.method)->capture_default_str();
  dist->add_option("--out", dopt.out)->capture_default_str();
  dist->add_flag("--resume", dopt.resume, "keep rows already computed in --out");

  ClusterOptions co;
  auto* clu = app.add_subcommand("cluster", "cluster a dissimilarity matrix and summarize clusters");
  clu->add_option("matrix", co.matrix)->required();
  clu->add_option("--dataset", co.dataset, "dataset manifest the matrix was computed from")->required();
  clu->add_option("--method", co.method)->capture_default_str();
  clu->add_option("--k-hint", co.k_hint)->capture_default_str();
  clu->add_option("--out", co.out)->capture_default_str();
  clu->add_flag("--svg", co.svg, "also write clusters.svg");

  PreprocessOptions po;
  auto* pre = app.add_subcommand("preprocess", "turn raw daily counts into rate curves");
  pre->add_option("raw_dir", po.raw_dir)->required();
  pre->add_option("--truncate", po.truncate, "truncation date YYYY-MM-DD")->required();
  pre->add_option("--out", po.out)->capture_default_str();
  pre->add_option("--samples", po.samples)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    apply_grid(g.grid, g.cfg);
    g.cfg.validate();
    if (g.threads == 0) throw epm::invalid_input("--threads must be >= 1");
    if (*align) return run_align(ao, g);
    if (*sim) return run_simulate(so, g);
    if (*dist) return run_distmat(dopt, g);
    if (*clu) return run_cluster(co, g);
    if (*pre) return run_preprocess(po, g);
  } catch (const StrictFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStrictFailure;
  } catch (const epm::io::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return g.strict ? kStrictFailure : kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
