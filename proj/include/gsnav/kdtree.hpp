#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "gsnav/math.hpp"

namespace gsnav::spatial {

/// Static median-split KD-tree over 3-D points.  Built once, queried many
/// times; queries return indices into the original point array in ascending
/// order so downstream consumers are deterministic.
class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(std::vector<Vec3> points) : pts_(std::move(points)) {
    order_.resize(pts_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(pts_.size());
    if (!pts_.empty()) root_ = build(0, static_cast<int>(pts_.size()));
  }

  std::size_t size() const { return pts_.size(); }
  const Vec3& point(int i) const { return pts_[static_cast<std::size_t>(i)]; }

  /// All indices with ||p - center|| <= radius, ascending.
  std::vector<int> radius_query(const Vec3& center, double radius) const {
    std::vector<int> out;
    if (root_ >= 0 && radius >= 0.0) {
      radius_rec(root_, center, radius * radius, out);
      std::sort(out.begin(), out.end());
    }
    return out;
  }

  /// Indices of the k nearest points (ties broken toward lower index),
  /// sorted by distance then index.
  std::vector<int> knn(const Vec3& center, int k) const {
    std::vector<int> out;
    if (root_ < 0 || k <= 0) return out;
    // max-heap of (dist2, index) keeping the k best.
    std::priority_queue<std::pair<double, int>> heap;
    knn_rec(root_, center, k, heap);
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top().second);
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    int axis = 0;
    int index = -1;  // point stored at this node
    int left = -1;
    int right = -1;
  };

  int build(int lo, int hi) {
    if (lo >= hi) return -1;
    // Split along the widest axis of this subset's bounding box.
    Vec3 mn = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 mx = -mn;
    for (int i = lo; i < hi; ++i) {
      mn = mn.cwiseMin(pts_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
      mx = mx.cwiseMax(pts_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
    }
    int axis = 0;
    (mx - mn).maxCoeff(&axis);
    const int mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) {
                       const double pa = pts_[static_cast<std::size_t>(a)][axis];
                       const double pb = pts_[static_cast<std::size_t>(b)][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    Node node;
    node.axis = axis;
    node.index = order_[static_cast<std::size_t>(mid)];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(lo, mid);
    const int right = build(mid + 1, hi);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  void radius_rec(int ni, const Vec3& c, double r2, std::vector<int>& out) const {
    const Node& n = nodes_[static_cast<std::size_t>(ni)];
    const Vec3& p = pts_[static_cast<std::size_t>(n.index)];
    if ((p - c).squaredNorm() <= r2) out.push_back(n.index);
    const double d = c[n.axis] - p[n.axis];
    if (n.left >= 0 && (d < 0.0 || d * d <= r2)) radius_rec(n.left, c, r2, out);
    if (n.right >= 0 && (d > 0.0 || d * d <= r2)) radius_rec(n.right, c, r2, out);
  }

  void knn_rec(int ni, const Vec3& c, int k,
               std::priority_queue<std::pair<double, int>>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(ni)];
    const Vec3& p = pts_[static_cast<std::size_t>(n.index)];
    const double d2 = (p - c).squaredNorm();
    if (static_cast<int>(heap.size()) < k) {
      heap.emplace(d2, n.index);
    } else if (d2 < heap.top().first ||
               (d2 == heap.top().first && n.index < heap.top().second)) {
      heap.pop();
      heap.emplace(d2, n.index);
    }
    const double d = c[n.axis] - p[n.axis];
    const int near = d <= 0.0 ? n.left : n.right;
    const int far = d <= 0.0 ? n.right : n.left;
    if (near >= 0) knn_rec(near, c, k, heap);
    const bool cross = static_cast<int>(heap.size()) < k || d * d <= heap.top().first;
    if (far >= 0 && cross) knn_rec(far, c, k, heap);
  }

  std::vector<Vec3> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace gsnav::spatial
