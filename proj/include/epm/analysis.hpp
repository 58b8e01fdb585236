#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "epm/core.hpp"
#include "epm/datasets.hpp"
#include "epm/partial_match.hpp"

namespace epm {

enum class Method { l2_fixed, elastic_fixed, elastic_partial };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::l2_fixed: return "l2-fixed";
    case Method::elastic_fixed: return "elastic-fixed";
    case Method::elastic_partial: return "elastic-partial";
  }
  return "";
}

inline Method parse_method(std::string_view s) {
  if (s == "l2-fixed") return Method::l2_fixed;
  if (s == "elastic-fixed") return Method::elastic_fixed;
  if (s == "elastic-partial") return Method::elastic_partial;
  throw invalid_input("unknown method '" + std::string(s) +
                      "' (expected l2-fixed, elastic-fixed or elastic-partial)");
}

// Row-major square matrix with id labels.
struct SquareMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;

  SquareMatrix() = default;
  explicit SquareMatrix(std::vector<std::string> names)
      : ids(std::move(names)), values(ids.size() * ids.size(), 0.0) {}

  std::size_t size() const noexcept { return ids.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * size() + j]; }
};

struct DissimilarityMatrix : SquareMatrix {
  Method method = Method::elastic_partial;
  using SquareMatrix::SquareMatrix;
};

using SimilarityMatrix = SquareMatrix;

// Fixed-endpoint elastic match: both SRVFs on the same interval, a single scale a = 1,
// lambda = 1, no gradient refinement.
inline MatchResult elastic_fixed_match(const CensoredSrvf& q1, const CensoredSrvf& q2,
                                       MatchConfig cfg) {
  cfg.lambda = 1.0;
  cfg.scale_lo = cfg.scale_hi = 1.0;
  cfg.grid_size = 1;
  return grid_search_align(q1, q2, cfg);
}

// Pairwise dissimilarities for one method. Rows are independent so they can be computed
// in any order (or resumed); assemble() turns them into the final matrix.
class PairwiseEngine {
 public:
  PairwiseEngine(const LabeledDataset& ds, Method method, MatchConfig cfg)
      : method_(method), cfg_(cfg), ids_(ds.ids) {
    ds.validate();
    cfg_.validate();
    if (ds.size() < 2) throw invalid_input("dissimilarity matrix needs >= 2 functions");
    std::size_t n_max = 0;
    for (const auto& f : ds.functions) n_max = std::max(n_max, f.size());
    for (const auto& f : ds.functions) {
      if (method_ == Method::elastic_partial) {
        srvfs_.push_back(srvf_from_function(f));
      } else {
        rescaled_.push_back(rescale_domain(f, 1.0, n_max));
        if (method_ == Method::elastic_fixed) srvfs_.push_back(srvf_from_function(rescaled_.back()));
      }
    }
  }

  std::size_t size() const noexcept { return ids_.size(); }
  Method method() const noexcept { return method_; }
  bool symmetric() const noexcept { return method_ != Method::elastic_partial; }

  // Dissimilarity of function j registered onto function i.
  double directed(std::size_t i, std::size_t j) const {
    switch (method_) {
      case Method::l2_fixed: {
        const auto u = rescaled_[i].values();
        const auto v = rescaled_[j].values();
        std::vector<double> d2(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) d2[k] = (u[k] - v[k]) * (u[k] - v[k]);
        return std::sqrt(detail::trapezoid(d2, 1.0));
      }
      case Method::elastic_fixed:
        return elastic_fixed_match(srvfs_[i], srvfs_[j], cfg_).dissimilarity;
      case Method::elastic_partial: {
        const MatchResult start = grid_search_align(srvfs_[i], srvfs_[j], cfg_);
        return gradient_descent_align(srvfs_[i], srvfs_[j], start.group_element, cfg_).dissimilarity;
      }
    }
    return 0.0;
  }

  // Entries needed from row i: j > i for the symmetric methods, every j != i otherwise.
  // Entries not computed are NaN.
  std::vector<double> row(std::size_t i) const {
    std::vector<double> r(size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < size(); ++j) {
      if (j == i || (symmetric() && j < i)) continue;
      r[j] = directed(i, j);
    }
    return r;
  }

  DissimilarityMatrix assemble(const std::vector<std::vector<double>>& rows) const {
    const std::size_t n = size();
    if (rows.size() != n) throw invalid_input("assemble: wrong number of rows");
    DissimilarityMatrix d(ids_);
    d.method = method_;
    const auto get = [&](std::size_t i, std::size_t j) {
      const double v = rows[i].at(j);
      if (!std::isfinite(v)) throw invalid_input("assemble: missing entry");
      return v;
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = symmetric() ? get(i, j) : 0.5 * (get(i, j) + get(j, i));
        d(i, j) = d(j, i) = v;
      }
    }
    return d;
  }

 private:
  Method method_;
  MatchConfig cfg_;
  std::vector<std::string> ids_;
  std::vector<CensoredFunction> rescaled_;
  std::vector<CensoredSrvf> srvfs_;
};

using RowCallback = std::function<void(std::size_t, const std::vector<double>&)>;

// Fills rows with up to `threads` workers. Each row is computed by exactly one worker,
// so the result does not depend on the thread count. on_row, if set, is called under a
// lock as each row finishes.
inline std::vector<std::vector<double>> compute_rows(const PairwiseEngine& engine,
                                                     const std::vector<std::size_t>& todo,
                                                     unsigned threads,
                                                     std::vector<std::vector<double>> rows = {},
                                                     const RowCallback& on_row = {}) {
  if (rows.empty()) rows.resize(engine.size());
  std::atomic<std::size_t> next{0};
  std::mutex lock;
  const auto work = [&] {
    for (std::size_t k = next++; k < todo.size(); k = next++) {
      auto r = engine.row(todo[k]);
      const std::scoped_lock guard(lock);
      rows[todo[k]] = std::move(r);
      if (on_row) on_row(todo[k], rows[todo[k]]);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(todo.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
  }
  return rows;
}

inline DissimilarityMatrix dissimilarity_matrix(const LabeledDataset& ds, Method method,
                                                const MatchConfig& cfg, unsigned threads = 1) {
  const PairwiseEngine engine(ds, method, cfg);
  std::vector<std::size_t> todo(engine.size());
  for (std::size_t i = 0; i < todo.size(); ++i) todo[i] = i;
  return engine.assemble(compute_rows(engine, todo, threads));
}

// S = 1 - D / max(D).
inline SimilarityMatrix similarity_from_dissimilarity(const SquareMatrix& d) {
  const double mx = *std::max_element(d.values.begin(), d.values.end());
  if (!(mx > 0.0)) throw degenerate_input("similarity: all dissimilarities are zero");
  SimilarityMatrix s(d.ids);
  for (std::size_t k = 0; k < d.values.size(); ++k) s.values[k] = 1.0 - d.values[k] / mx;
  return s;
}

namespace detail {

inline double silhouette(const SquareMatrix& dist, const std::vector<int>& labels, int k) {
  const std::size_t n = labels.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> cnt(static_cast<std::size_t>(k), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<std::size_t>(labels[j])] += dist(i, j);
      ++cnt[static_cast<std::size_t>(labels[j])];
    }
    const auto own = static_cast<std::size_t>(labels[i]);
    if (cnt[own] == 0) continue;  // singleton contributes 0
    const double a = sum[own] / static_cast<double>(cnt[own]);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c)
      if (c != own && cnt[c] > 0) b = std::min(b, sum[c] / static_cast<double>(cnt[c]));
    const double den = std::max(a, b);
    if (den > 0.0 && std::isfinite(b)) total += (b - a) / den;
  }
  return total / static_cast<double>(n);
}

// Labels numbered by first appearance.
inline std::vector<int> canonical_labels(const std::vector<int>& raw) {
  std::vector<int> map;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto it = std::find(map.begin(), map.end(), raw[i]);
    if (it == map.end()) {
      map.push_back(raw[i]);
      out[i] = static_cast<int>(map.size() - 1);
    } else {
      out[i] = static_cast<int>(it - map.begin());
    }
  }
  return out;
}

}  // namespace detail

// Average-linkage agglomerative clustering on 1 - S; the number of clusters is the one
// in [2, k_hint + 3] with the largest mean silhouette (smaller k on ties). A matrix
// without structure (constant off-diagonal) yields a single cluster.
inline std::vector<int> cluster(const SimilarityMatrix& s, std::size_t k_hint = 3) {
  const std::size_t n = s.size();
  if (n == 0) return {};
  SquareMatrix dist(s.ids);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        dist(i, j) = 1.0 - s(i, j);
        lo = std::min(lo, dist(i, j));
        hi = std::max(hi, dist(i, j));
      }
  if (n <= 2 || hi - lo <= 1e-12) return std::vector<int>(n, 0);

  // Record the merge sequence once, then cut it at each candidate k.
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  std::vector<bool> alive(n, true);
  SquareMatrix link = dist;
  std::vector<std::pair<std::size_t, std::size_t>> merges;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j)
        if (alive[j] && link(i, j) < best) {
          best = link(i, j);
          bi = i;
          bj = j;
        }
    }
    const double ni = static_cast<double>(members[bi].size());
    const double nj = static_cast<double>(members[bj].size());
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      link(bi, k) = link(k, bi) = (ni * link(bi, k) + nj * link(bj, k)) / (ni + nj);
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    members[bj].clear();
    alive[bj] = false;
    merges.emplace_back(bi, bj);
  }

  const auto cut = [&](std::size_t k) {
    std::vector<int> lab(n);
    for (std::size_t i = 0; i < n; ++i) lab[i] = static_cast<int>(i);
    for (std::size_t step = 0; step < n - k; ++step) {
      const int from = lab[merges[step].second];
      const int to = lab[merges[step].first];
      for (int& l : lab)
        if (l == from) l = to;
    }
    return detail::canonical_labels(lab);
  };

  const std::size_t k_max = std::min(k_hint + 3, n - 1);
  std::vector<int> best_labels(n, 0);
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 2; k <= k_max; ++k) {
    auto lab = cut(k);
    const double score = detail::silhouette(dist, lab, static_cast<int>(k));
    if (score > best_score + 1e-12) {
      best_score = score;
      best_labels = std::move(lab);
    }
  }
  return best_labels;
}

struct CrossSectionalStats {
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> variance;  // population convention
  double avg_variance = 0.0;
};

// Pointwise mean and variance on [0, min censor], on the largest member grid size.
inline CrossSectionalStats cross_sectional_stats(const std::vector<CensoredFunction>& aligned) {
  if (aligned.empty()) throw invalid_input("cross_sectional_stats: empty cluster");
  double end = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  for (const auto& f : aligned) {
    end = std::min(end, f.censor_point());
    n = std::max(n, f.size());
  }
  CrossSectionalStats st;
  st.t = detail::uniform_grid(end, n);
  st.mean.assign(n, 0.0);
  st.variance.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // Welford update across members.
    double mean = 0.0;
    double m2 = 0.0;
    double count = 0.0;
    for (const auto& f : aligned) {
      const double x = f(std::min(st.t[i], f.censor_point()));
      count += 1.0;
      const double delta = x - mean;
      mean += delta / count;
      m2 += delta * (x - mean);
    }
    st.mean[i] = mean;
    st.variance[i] = std::max(m2 / count, 0.0);
  }
  double s = 0.0;
  for (double v : st.variance) s += v;
  st.avg_variance = s / static_cast<double>(n);
  return st;
}

// Cluster members brought into correspondence: rescaled to [0, 1] (l2-fixed), rescaled and
// elastically registered to the longest member (elastic-fixed), or partially matched to the
// longest member (elastic-partial).
inline std::vector<CensoredFunction> mutual_align(const std::vector<CensoredFunction>& members,
                                                  Method method, const MatchConfig& cfg) {
  if (members.empty()) throw invalid_input("mutual_align: empty cluster");
  std::size_t ref = 0;
  std::size_t n_max = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i].censor_point() > members[ref].censor_point()) ref = i;
    n_max = std::max(n_max, members[i].size());
  }
  std::vector<CensoredFunction> out;
  out.reserve(members.size());
  switch (method) {
    case Method::l2_fixed:
      for (const auto& f : members) out.push_back(rescale_domain(f, 1.0, n_max));
      break;
    case Method::elastic_fixed: {
      const auto fr = rescale_domain(members[ref], 1.0, n_max);
      const auto qr = srvf_from_function(fr);
      for (std::size_t i = 0; i < members.size(); ++i) {
        auto fi = rescale_domain(members[i], 1.0, n_max);
        if (i == ref) {
          out.push_back(std::move(fi));
          continue;
        }
        const MatchResult m = elastic_fixed_match(qr, srvf_from_function(fi), cfg);
        out.push_back(warp_function(fi, m.group_element));
      }
      break;
    }
    case Method::elastic_partial:
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (i == ref) {
          out.push_back(members[i]);
          continue;
        }
        out.push_back(*shape_match(members[ref], members[i], cfg).aligned_function);
      }
      break;
  }
  return out;
}

inline std::vector<CensoredFunction> mutual_align(const std::vector<CensoredFunction>& members,
                                                  const MatchConfig& cfg) {
  return mutual_align(members, Method::elastic_partial, cfg);
}

// Similarities lie in [0, 1]; narrower kernels are not resolved on the evaluation grid.
inline constexpr double kMinBandwidth = 1e-3;

// Silverman's rule of thumb; falls back to whichever spread estimate is nonzero, and
// never goes below kMinBandwidth.
inline double silverman_bandwidth(std::vector<double> v) {
  const std::size_t n = v.size();
  if (n < 2) return kMinBandwidth;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::sort(v.begin(), v.end());
  const auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(i);
    return i + 1 < n ? v[i] + w * (v[i + 1] - v[i]) : v[i];
  };
  const double iqr = (quantile(0.75) - quantile(0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (!(spread > 0.0)) spread = std::max(sd, iqr);
  if (!(spread > 0.0)) return kMinBandwidth;
  return std::max(kMinBandwidth, 0.9 * spread * std::pow(static_cast<double>(n), -0.2));
}

inline std::vector<double> gaussian_kde(const std::vector<double>& values, double h,
                                        const std::vector<double>& grid) {
  std::vector<double> f(grid.size(), 0.0);
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double s = 0.0;
    for (double v : values) {
      const double u = (grid[i] - v) / h;
      s += std::exp(-0.5 * u * u);
    }
    f[i] = s * norm;
  }
  return f;
}

// arccos of the inner product of the half-densities of within-class and across-class
// similarity values (upper triangle), each density renormalized on a shared 512-point grid.
inline double separability(const SimilarityMatrix& s, const std::vector<int>& labels) {
  const std::size_t n = s.size();
  if (labels.size() != n) throw invalid_input("separability: labels/matrix size mismatch");
  std::vector<double> in;
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) (labels[i] == labels[j] ? in : out).push_back(s(i, j));
  if (in.empty() || out.empty()) throw invalid_input("separability: a class set is empty");
  const double h_in = silverman_bandwidth(in);
  const double h_out = silverman_bandwidth(out);
  const double h = std::max(h_in, h_out);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* set : {&in, &out})
    for (double v : *set) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const std::size_t m = 512;
  const double a = lo - 3.0 * h;
  const double b = hi + 3.0 * h;
  std::vector<double> grid(m);
  for (std::size_t i = 0; i < m; ++i) grid[i] = a + (b - a) * static_cast<double>(i) / (m - 1);
  auto f_in = gaussian_kde(in, h_in, grid);
  auto f_out = gaussian_kde(out, h_out, grid);
  const double z_in = detail::trapezoid(f_in, b - a);
  const double z_out = detail::trapezoid(f_out, b - a);
  std::vector<double> prod(m);
  for (std::size_t i = 0; i < m; ++i) prod[i] = std::sqrt(f_in[i] / z_in * f_out[i] / z_out);
  const double ip = std::clamp(detail::trapezoid(prod, b - a), 0.0, 1.0);
  return std::acos(ip);
}

struct ClusterSummary {
  std::vector<std::size_t> members;
  CrossSectionalStats stats;
};

struct ClusterReport {
  Method method = Method::elastic_partial;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<ClusterSummary> clusters;
  double separability = 0.0;
};

// Similarity conversion, clustering, per-cluster mutual alignment and statistics, and
// separability. Separability uses class_labels when given, otherwise the cluster labels.
inline ClusterReport cluster_report(const std::vector<CensoredFunction>& functions,
                                    const DissimilarityMatrix& d, Method method,
                                    const MatchConfig& cfg, std::size_t k_hint = 3,
                                    const std::optional<std::vector<int>>& class_labels = {}) {
  if (functions.size() != d.size()) throw invalid_input("cluster_report: size mismatch");
  const SimilarityMatrix s = similarity_from_dissimilarity(d);
  ClusterReport r;
  r.method = method;
  r.ids = d.ids;
  r.labels = cluster(s, k_hint);
  const int k = r.labels.empty() ? 0 : *std::max_element(r.labels.begin(), r.labels.end()) + 1;
  for (int c = 0; c < k; ++c) {
    ClusterSummary cs;
    std::vector<CensoredFunction> members;
    for (std::size_t i = 0; i < r.labels.size(); ++i)
      if (r.labels[i] == c) {
        cs.members.push_back(i);
        members.push_back(functions[i]);
      }
    cs.stats = cross_sectional_stats(mutual_align(members, method, cfg));
    r.clusters.push_back(std::move(cs));
  }
  const auto& sep_labels = class_labels ? *class_labels : r.labels;
  const bool has_two = std::any_of(sep_labels.begin(), sep_labels.end(),
                                   [&](int l) { return l != sep_labels.front(); });
  r.separability = has_two ? separability(s, sep_labels) : 0.0;
  return r;
}

// Fraction of items whose label matches the truth under the best one-to-one relabeling
// (exhaustive over permutations, so meant for a handful of clusters).
inline double label_accuracy(const std::vector<int>& truth, const std::vector<int>& found) {
  if (truth.size() != found.size() || truth.empty()) throw invalid_input("label_accuracy: size mismatch");
  const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
  const int kf = *std::max_element(found.begin(), found.end()) + 1;
  const int k = std::max(kt, kf);
  if (k > 8) throw invalid_input("label_accuracy: too many clusters");
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::size_t best = 0;
  do {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (perm[static_cast<std::size_t>(found[i])] == truth[i]) ++hit;
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace epm
