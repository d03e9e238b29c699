#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "nsgp/error.hpp"
#include "nsgp/geo.hpp"
#include "nsgp/kdtree.hpp"

namespace nsgp {

inline constexpr std::size_t kDefaultNeighbors = 15;

/// Vecchia conditioning structure. `order[p]` is the point visited at
/// position p; `cond_sets[p]` lists (as point indices) the min(p, k) nearest
/// points visited before position p, nearest first.
struct NeighborGraph {
  std::vector<std::size_t> order;
  std::vector<std::vector<std::size_t>> cond_sets;
  std::size_t k = kDefaultNeighbors;

  [[nodiscard]] std::size_t size() const { return order.size(); }

  friend bool operator==(const NeighborGraph&, const NeighborGraph&) = default;
};

/// Throws if any two points coincide exactly.
inline void check_distinct(std::span<const XyzPoint> points) {
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto key = [&](std::size_t i) { return std::tie(points[i].x, points[i].y, points[i].z); };
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return key(a) < key(b) || (key(a) == key(b) && a < b);
  });
  std::ostringstream dups;
  std::size_t count = 0;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (points[idx[i]] == points[idx[i - 1]]) {
      if (count < 20) dups << " (" << idx[i - 1] << ", " << idx[i] << ")";
      ++count;
    }
  }
  if (count > 0)
    throw DataError("duplicate locations after rounding:" + dups.str());
}

/// Exact maxmin ordering. The first point is the one closest to the centroid;
/// each following point maximizes its minimum distance to the points already
/// chosen. Ties go to the lowest input index.
inline std::vector<std::size_t> maxmin_order(std::span<const XyzPoint> points) {
  const std::size_t n = points.size();
  if (n == 0) throw DataError("maxmin ordering needs at least one point");
  check_distinct(points);

  XyzPoint centroid;
  for (const auto& p : points) {
    centroid.x += p.x;
    centroid.y += p.y;
    centroid.z += p.z;
  }
  centroid.x /= static_cast<double>(n);
  centroid.y /= static_cast<double>(n);
  centroid.z /= static_cast<double>(n);

  std::size_t first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = squared_distance(points[i], centroid);
    if (d2 < best) {
      best = d2;
      first = i;
    }
  }

  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  std::size_t next = first;
  for (std::size_t step = 0; step < n; ++step) {
    order.push_back(next);
    chosen[next] = 1;
    const XyzPoint& p = points[next];
    std::size_t arg = n;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      const double d2 = squared_distance(points[i], p);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > far) {
        far = min_d2[i];
        arg = i;
      }
    }
    next = arg;
  }
  return order;
}

/// Conditioning sets of size min(p, k) among earlier positions, nearest first,
/// ties broken by the earlier position.
inline NeighborGraph build_cond_sets(std::span<const XyzPoint> points,
                                     const std::vector<std::size_t>& order, std::size_t k) {
  if (k < 1) throw ConfigError("neighbor count k must be at least 1");
  const std::size_t n = points.size();
  if (order.size() != n) throw DataError("ordering does not match the number of points");
  std::vector<std::size_t> position(n, n);
  for (std::size_t p = 0; p < n; ++p) {
    if (order[p] >= n || position[order[p]] != n) throw DataError("ordering is not a permutation");
    position[order[p]] = p;
  }

  NeighborGraph g;
  g.order = order;
  g.k = k;
  g.cond_sets.resize(n);

  // Early positions have few predecessors and are cheapest by brute force.
  constexpr std::size_t kBruteLimit = 1024;
  const KdTree tree(points, position);
  std::vector<NeighborCandidate> cands;
  for (std::size_t p = 1; p < n; ++p) {
    const XyzPoint& q = points[order[p]];
    const std::size_t m = std::min(p, k);
    if (p <= kBruteLimit) {
      cands.clear();
      for (std::size_t j = 0; j < p; ++j)
        cands.push_back({squared_distance(q, points[order[j]]), j, order[j]});
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(m), cands.end());
      cands.resize(m);
    } else {
      cands = tree.knn(q, m, [&](std::size_t i) { return position[i] < p; });
    }
    auto& set = g.cond_sets[p];
    set.reserve(m);
    for (const auto& c : cands) set.push_back(c.index);
  }
  return g;
}

inline NeighborGraph build_neighbor_graph(std::span<const XyzPoint> points,
                                          std::size_t k = kDefaultNeighbors) {
  return build_cond_sets(points, maxmin_order(points), k);
}

/// For every prediction point, the k nearest observed points (nearest first,
/// ties to the lower observed index).
inline std::vector<std::vector<std::size_t>> knn_predict_sets(std::span<const XyzPoint> obs,
                                                              std::span<const XyzPoint> pred,
                                                              std::size_t k) {
  if (k < 1) throw ConfigError("neighbor count k must be at least 1");
  if (k > obs.size()) {
    throw ConfigError("prediction neighbor count k=" + std::to_string(k) +
                      " exceeds the number of observed points (" + std::to_string(obs.size()) + ")");
  }
  const KdTree tree(obs);
  std::vector<std::vector<std::size_t>> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto cands = tree.knn(pred[i], k);
    out[i].reserve(k);
    for (const auto& c : cands) out[i].push_back(c.index);
  }
  return out;
}

/// FNV-1a hash of the coordinates (at 4-decimal resolution) and k; names the
/// neighbor cache file shared between subcommands.
inline std::uint64_t neighbor_cache_key(std::span<const XyzPoint> points, std::size_t k) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(points.size());
  mix(k);
  for (const auto& p : points) {
    for (double c : {p.x, p.y, p.z}) mix(static_cast<std::uint64_t>(std::llround(c * 1e4)));
  }
  return h;
}

/// Text format: a `# nsgp-neighbors k=<k> n=<n> key=<hex>` line, then one line
/// per position: `<point> <neighbor> <neighbor> ...`.
inline void write_neighbor_graph(std::ostream& os, const NeighborGraph& g, std::uint64_t key) {
  os << "# nsgp-neighbors k=" << g.k << " n=" << g.size() << " key=" << std::hex << key << std::dec
     << '\n';
  for (std::size_t p = 0; p < g.size(); ++p) {
    os << g.order[p];
    for (std::size_t j : g.cond_sets[p]) os << ' ' << j;
    os << '\n';
  }
}

/// Returns false when the stream does not hold a graph with the expected key.
inline bool read_neighbor_graph(std::istream& is, std::uint64_t expected_key, NeighborGraph& g) {
  std::string line;
  if (!std::getline(is, line)) return false;
  std::istringstream head(line);
  std::string tag, kf, nf, keyf;
  head >> tag >> tag >> kf >> nf >> keyf;
  if (tag != "nsgp-neighbors" || kf.rfind("k=", 0) != 0 || nf.rfind("n=", 0) != 0 ||
      keyf.rfind("key=", 0) != 0)
    return false;
  if (std::stoull(keyf.substr(4), nullptr, 16) != expected_key) return false;
  NeighborGraph out;
  out.k = std::stoull(kf.substr(2));
  const std::size_t n = std::stoull(nf.substr(2));
  out.order.reserve(n);
  out.cond_sets.reserve(n);
  while (out.order.size() < n && std::getline(is, line)) {
    std::istringstream row(line);
    std::size_t v = 0;
    if (!(row >> v)) return false;
    out.order.push_back(v);
    auto& set = out.cond_sets.emplace_back();
    while (row >> v) set.push_back(v);
  }
  if (out.order.size() != n) return false;
  g = std::move(out);
  return true;
}

}  // namespace nsgp
