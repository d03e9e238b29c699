#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "nsgp/geo.hpp"

namespace nsgp {

/// Candidate in a k-nearest query. Ordering is lexicographic on
/// (squared distance, key), which makes every query result unique even with
/// exact ties.
struct NeighborCandidate {
  double d2 = 0.0;
  std::size_t key = 0;
  std::size_t index = 0;

  friend bool operator<(const NeighborCandidate& a, const NeighborCandidate& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.key < b.key);
  }
};

/// Static 3-D kd-tree. Leaves hold up to kLeafSize points; small point sets
/// are answered by brute force.
class KdTree {
 public:
  static constexpr std::size_t kLeafSize = 16;
  static constexpr std::size_t kBruteForceBelow = 64;

  KdTree() = default;

  /// `keys[i]` is the tie-break key of point i (defaults to i).
  explicit KdTree(std::span<const XyzPoint> points, std::vector<std::size_t> keys = {})
      : points_(points.begin(), points.end()), keys_(std::move(keys)) {
    if (keys_.empty()) {
      keys_.resize(points_.size());
      std::iota(keys_.begin(), keys_.end(), std::size_t{0});
    }
    perm_.resize(points_.size());
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    if (points_.size() >= kBruteForceBelow) {
      nodes_.reserve(2 * points_.size() / kLeafSize + 2);
      build(0, points_.size());
    }
  }

  [[nodiscard]] std::size_t size() const { return points_.size(); }

  /// The k smallest candidates (under NeighborCandidate ordering) among points
  /// accepted by `accept`, sorted ascending.
  template <typename Accept>
  [[nodiscard]] std::vector<NeighborCandidate> knn(const XyzPoint& q, std::size_t k,
                                                   Accept&& accept) const {
    std::priority_queue<NeighborCandidate> heap;
    auto offer = [&](std::size_t i) {
      if (!accept(i)) return;
      NeighborCandidate c{squared_distance(q, points_[i]), keys_[i], i};
      if (heap.size() < k) {
        heap.push(c);
      } else if (c < heap.top()) {
        heap.pop();
        heap.push(c);
      }
    };
    if (k > 0) {
      if (nodes_.empty()) {
        for (std::size_t i = 0; i < points_.size(); ++i) offer(i);
      } else {
        search(0, q, k, heap, offer);
      }
    }
    std::vector<NeighborCandidate> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

  [[nodiscard]] std::vector<NeighborCandidate> knn(const XyzPoint& q, std::size_t k) const {
    return knn(q, k, [](std::size_t) { return true; });
  }

 private:
  struct Node {
    std::array<double, 3> lo{};
    std::array<double, 3> hi{};
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t left = 0;  // 0 for leaves (the root is never a child)
    std::size_t right = 0;
  };

  static double coord(const XyzPoint& p, int axis) {
    return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
  }

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo.fill(std::numeric_limits<double>::infinity());
    node.hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      for (int a = 0; a < 3; ++a) {
        const double v = coord(points_[perm_[i]], a);
        node.lo[a] = std::min(node.lo[a], v);
        node.hi[a] = std::max(node.hi[a], v);
      }
    }
    if (end - begin > kLeafSize) {
      int axis = 0;
      for (int a = 1; a < 3; ++a)
        if (node.hi[a] - node.lo[a] > node.hi[axis] - node.lo[axis]) axis = a;
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin),
                       perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                       perm_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) {
                         const double ca = coord(points_[a], axis);
                         const double cb = coord(points_[b], axis);
                         return ca < cb || (ca == cb && a < b);
                       });
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
    nodes_[id] = node;
    return id;
  }

  static double box_d2(const Node& n, const XyzPoint& q) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double v = coord(q, a);
      double d = 0.0;
      if (v < n.lo[a]) d = n.lo[a] - v;
      else if (v > n.hi[a]) d = v - n.hi[a];
      d2 += d * d;
    }
    return d2;
  }

  template <typename Offer>
  void search(std::size_t id, const XyzPoint& q, std::size_t k,
              const std::priority_queue<NeighborCandidate>& heap, Offer& offer) const {
    const Node& n = nodes_[id];
    // Equal distance may still win on the key, so prune only strictly farther boxes.
    if (heap.size() == k && box_d2(n, q) > heap.top().d2) return;
    if (n.left == 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) offer(perm_[i]);
      return;
    }
    const double dl = box_d2(nodes_[n.left], q);
    const double dr = box_d2(nodes_[n.right], q);
    if (dl <= dr) {
      search(n.left, q, k, heap, offer);
      search(n.right, q, k, heap, offer);
    } else {
      search(n.right, q, k, heap, offer);
      search(n.left, q, k, heap, offer);
    }
  }

  std::vector<XyzPoint> points_;
  std::vector<std::size_t> keys_;
  std::vector<std::size_t> perm_;
  std::vector<Node> nodes_;
};

}  // namespace nsgp
