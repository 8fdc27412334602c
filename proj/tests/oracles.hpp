#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <span>
#include <vector>

#include "semfusion/evaluation.hpp"
#include "semfusion/instance_fusion.hpp"
#include "semfusion/registration.hpp"

namespace oracle {

using namespace semfusion;

struct JacobianCheck {
  double max_abs_diff = 0;
  std::size_t rows = 0;
};

/// Central differences of the point-to-plane residuals over the six twist
/// coordinates, correspondences held fixed.
inline JacobianCheck icp_fd_check(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                                  std::span<const IcpPair> pairs, double h = 1e-6) {
  const auto base = icp_evaluate(frame, view, pose, pairs);
  JacobianCheck out;
  out.rows = base.size();
  for (int k = 0; k < 6; ++k) {
    Vec6 e = Vec6::Zero();
    e[k] = h;
    const auto plus = icp_evaluate(frame, view, pose.applied(e), pairs);
    const auto minus = icp_evaluate(frame, view, pose.applied(-e), pairs);
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double fd = (plus.r[i] - minus.r[i]) / (2 * h);
      out.max_abs_diff = std::max(out.max_abs_diff, std::abs(fd - base.J(i, k)));
    }
  }
  return out;
}

/// Same for the photometric residuals. A sample whose +-h positions land in
/// different bilinear cells is skipped: the interpolant has a kink there.
inline JacobianCheck rgb_fd_check(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                                  std::span<const int> pixels, double h = 1e-6) {
  const auto base = rgb_evaluate(frame, view, pose, pixels);
  JacobianCheck out;
  std::vector<char> usable(base.size(), 1);
  std::vector<Eigen::Matrix<double, 6, 1>> fd(base.size());
  for (int k = 0; k < 6; ++k) {
    Vec6 e = Vec6::Zero();
    e[k] = h;
    const auto plus = rgb_evaluate(frame, view, pose.applied(e), pixels);
    const auto minus = rgb_evaluate(frame, view, pose.applied(-e), pixels);
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (!base.valid[i] || !plus.valid[i] || !minus.valid[i]) {
        usable[i] = 0;
        continue;
      }
      const auto& a = plus.samples[i];
      const auto& b = minus.samples[i];
      if (std::floor(a.x()) != std::floor(b.x()) || std::floor(a.y()) != std::floor(b.y())) usable[i] = 0;
      fd[i][k] = (plus.r[i] - minus.r[i]) / (2 * h);
    }
  }
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!usable[i]) continue;
    ++out.rows;
    for (int k = 0; k < 6; ++k) out.max_abs_diff = std::max(out.max_abs_diff, std::abs(fd[i][k] - base.J(i, k)));
  }
  return out;
}

// ---- mask association ----

struct AssocProblem {
  std::vector<InstanceMask> masks;
  std::map<int, MaskImage> predicted;
};

/// Random disjoint masks and disjoint predicted instances on a small image.
/// With `boundary`, the first mask covers exactly 3 of 10 pixels of the first
/// predicted instance, so U = 0.3 exactly for that pair.
inline AssocProblem random_assoc_problem(std::mt19937_64& rng, bool boundary) {
  const int w = 10, h = 10;
  std::uniform_int_distribution<int> count(1, 4), ids(1, 9);
  AssocProblem p;
  const int n_pred = count(rng), n_mask = count(rng);
  std::set<int> used;
  std::vector<int> pred_ids;
  while (static_cast<int>(pred_ids.size()) < n_pred) {
    const int id = ids(rng);
    if (used.insert(id).second) pred_ids.push_back(id);
  }
  // pixel owners: -1 none, else index
  Image<int> pred_owner(w, h, -1), mask_owner(w, h, -1);
  std::uniform_int_distribution<int> pick_pred(-1, n_pred - 1), pick_mask(-1, n_mask - 1);
  std::bernoulli_distribution follow(0.6);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      pred_owner(x, y) = pick_pred(rng);
      // masks loosely follow predicted instances so overlaps are sizeable
      const int po = pred_owner(x, y);
      mask_owner(x, y) = (po >= 0 && po < n_mask && follow(rng)) ? po : pick_mask(rng);
    }
  if (boundary) {
    // instance 0 owns exactly row 0, pixels 0..9; mask 0 covers 3 of them
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (pred_owner(x, y) == 0) pred_owner(x, y) = n_pred > 1 ? 1 : -1;
        if (mask_owner(x, y) == 0) mask_owner(x, y) = -1;
      }
    for (int x = 0; x < w; ++x) {
      pred_owner(x, 0) = 0;
      mask_owner(x, 0) = x < 3 ? 0 : -1;
    }
    mask_owner(0, 1) = 0;  // mask 0 also has pixels outside instance 0
    mask_owner(1, 1) = 0;
  }
  for (int k = 0; k < n_pred; ++k) {
    MaskImage m(w, h, 0);
    bool any = false;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (pred_owner[i] == k) m[i] = 1, any = true;
    if (any) p.predicted[pred_ids[k]] = std::move(m);
  }
  for (int k = 0; k < n_mask; ++k) {
    InstanceMask im;
    im.mask = MaskImage(w, h, 0);
    im.class_probs = {0.5, 0.5};
    bool any = false;
    for (std::size_t i = 0; i < im.mask.size(); ++i)
      if (mask_owner[i] == k) im.mask[i] = 1, any = true;
    if (any) p.masks.push_back(std::move(im));
  }
  return p;
}

struct OverlapTable {
  std::vector<int> ids;                   // predicted instance ids
  std::vector<std::vector<long>> inter;   // [mask][instance]
  std::vector<long> area;                 // predicted areas
  bool eligible(std::size_t m, std::size_t j) const { return area[j] > 0 && 10 * inter[m][j] > 3 * area[j]; }
  double U(std::size_t m, std::size_t j) const { return static_cast<double>(inter[m][j]) / area[j]; }
};

inline OverlapTable overlaps(const AssocProblem& p) {
  OverlapTable t;
  for (const auto& [id, m] : p.predicted) {
    t.ids.push_back(id);
    long a = 0;
    for (auto v : m.pixels()) a += v != 0;
    t.area.push_back(a);
  }
  for (const auto& mk : p.masks) {
    std::vector<long> row;
    for (const auto& [id, m] : p.predicted) {
      long c = 0;
      for (std::size_t i = 0; i < m.size(); ++i) c += (m[i] != 0 && mk.mask[i] != 0);
      row.push_back(c);
    }
    t.inter.push_back(row);
  }
  return t;
}

struct AssocVerdict {
  bool ok = true;
  bool compared_exactly = false;  // all candidate U distinct, so the optimum is unique
  std::string why;
};

/// Checks `result` against every valid assignment. Always: validity and
/// stability (no mask and instance both preferring each other over their
/// partners). When candidate overlaps are distinct: equality with the
/// assignment whose descending per-mask U vector is lexicographically largest.
inline AssocVerdict check_association(const AssocProblem& p, const std::vector<int>& result) {
  const auto t = overlaps(p);
  const std::size_t M = p.masks.size(), N = t.ids.size();
  AssocVerdict v;
  auto fail = [&](std::string s) {
    v.ok = false;
    v.why = std::move(s);
    return v;
  };
  if (result.size() != M) return fail("size");
  std::vector<int> col(M, -1);
  std::vector<int> owner(N, -1);
  for (std::size_t m = 0; m < M; ++m) {
    if (result[m] == kNewInstance) continue;
    const auto it = std::find(t.ids.begin(), t.ids.end(), result[m]);
    if (it == t.ids.end()) return fail("unknown instance");
    const auto j = static_cast<std::size_t>(it - t.ids.begin());
    if (!t.eligible(m, j)) return fail("pair with U <= 0.3 associated");
    if (owner[j] >= 0) return fail("instance absorbed two masks");
    owner[j] = static_cast<int>(m);
    col[m] = static_cast<int>(j);
  }
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t j = 0; j < N; ++j) {
      if (!t.eligible(m, j) || col[m] == static_cast<int>(j)) continue;
      const bool mask_prefers = col[m] < 0 || t.U(m, j) > t.U(m, col[m]);
      const bool inst_prefers = owner[j] < 0 || t.U(m, j) > t.U(owner[j], j);
      if (mask_prefers && inst_prefers) return fail("unstable pair");
    }

  std::vector<double> cand;
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t j = 0; j < N; ++j)
      if (t.eligible(m, j)) cand.push_back(t.U(m, j));
  std::sort(cand.begin(), cand.end());
  if (std::adjacent_find(cand.begin(), cand.end()) != cand.end()) return v;
  v.compared_exactly = true;

  // exhaustive enumeration
  std::vector<int> cur(M, -1), best;
  std::vector<double> best_key;
  std::vector<char> taken(N, 0);
  auto key_of = [&](const std::vector<int>& a) {
    std::vector<double> k;
    for (std::size_t m = 0; m < M; ++m) k.push_back(a[m] < 0 ? 0.0 : t.U(m, a[m]));
    std::sort(k.rbegin(), k.rend());
    return k;
  };
  auto rec = [&](auto&& self, std::size_t m) -> void {
    if (m == M) {
      auto k = key_of(cur);
      if (best.empty() || k > best_key) best = cur, best_key = std::move(k);
      return;
    }
    cur[m] = -1;
    self(self, m + 1);
    for (std::size_t j = 0; j < N; ++j) {
      if (taken[j] || !t.eligible(m, j)) continue;
      taken[j] = 1;
      cur[m] = static_cast<int>(j);
      self(self, m + 1);
      taken[j] = 0;
      cur[m] = -1;
    }
  };
  rec(rec, 0);
  for (std::size_t m = 0; m < M; ++m)
    if (best[m] != col[m]) return fail("differs from the exhaustive optimum");
  return v;
}

// ---- trajectory alignment ----

/// Least-squares rigid alignment RMSE found without SVD: a grid over
/// axis-angle vectors in the ball of radius pi, then a shrinking pattern
/// search around the best sample. For a rotation R the optimal translation is
/// the centroid difference.
inline double alignment_rmse_by_sampling(std::span<const Vec3> src, std::span<const Vec3> dst) {
  const std::size_t n = src.size();
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) cs += src[i], cd += dst[i];
  cs /= double(n);
  cd /= double(n);
  auto cost = [&](const Vec3& w) {
    const double a = w.norm();
    const Mat3 R = a > 0 ? Eigen::AngleAxisd(a, w / a).toRotationMatrix() : Mat3::Identity();
    double c = 0;
    for (std::size_t i = 0; i < n; ++i) c += (R * (src[i] - cs) - (dst[i] - cd)).squaredNorm();
    return c;
  };
  const double pi = 3.14159265358979323846;
  const int g = 24;
  Vec3 best = Vec3::Zero();
  double best_c = cost(best);
  for (int i = 0; i <= g; ++i)
    for (int j = 0; j <= g; ++j)
      for (int k = 0; k <= g; ++k) {
        const Vec3 w(-pi + 2 * pi * i / g, -pi + 2 * pi * j / g, -pi + 2 * pi * k / g);
        if (w.norm() > pi) continue;
        const double c = cost(w);
        if (c < best_c) best_c = c, best = w;
      }
  for (double step = 2 * pi / g; step > 1e-12; step *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (int axis = 0; axis < 3; ++axis)
        for (double sgn : {-1.0, 1.0}) {
          Vec3 w = best;
          w[axis] += sgn * step;
          const double c = cost(w);
          if (c < best_c) best_c = c, best = w, moved = true;
        }
    }
  }
  return std::sqrt(best_c / double(n));
}

}  // namespace oracle
