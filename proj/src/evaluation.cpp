#include "semfusion/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

#include <Eigen/Dense>

#include "semfusion/errors.hpp"
#include "semfusion/point_grid.hpp"

namespace semfusion {

MatchedPositions match_trajectories(const Trajectory& estimated, const Trajectory& truth, double max_gap) {
  std::vector<double> a, b;
  for (const auto& p : estimated) a.push_back(p.timestamp);
  for (const auto& p : truth) b.push_back(p.timestamp);
  MatchedPositions m;
  for (auto [i, j] : associate_timestamps(a, b, max_gap)) {
    m.estimated.push_back(estimated[i].pose.translation());
    m.truth.push_back(truth[j].pose.translation());
  }
  return m;
}

Pose align_rigid(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size() || src.empty()) throw DimensionError("align_rigid: point sets differ in size or are empty");
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Mat3 S = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) S += (dst[i] - cd) * (src[i] - cs).transpose();
  Eigen::JacobiSVD<Mat3> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) D(2, 2) = -1;
  const Mat3 R = svd.matrixU() * D * svd.matrixV().transpose();
  return Pose::projected(R, cd - R * cs);
}

AteResult ate(const Trajectory& estimated, const Trajectory& truth, double max_gap) {
  const auto m = match_trajectories(estimated, truth, max_gap);
  if (m.estimated.size() < 2)
    throw InsufficientOverlapError("ate: " + std::to_string(m.estimated.size()) + " timestamp-matched pairs");
  AteResult r;
  r.pairs = m.estimated.size();
  r.alignment = align_rigid(m.estimated, m.truth);
  double ss = 0;
  for (std::size_t i = 0; i < r.pairs; ++i) ss += (r.alignment * m.estimated[i] - m.truth[i]).squaredNorm();
  r.rmse = std::sqrt(ss / static_cast<double>(r.pairs));
  return r;
}

double ate_rmse(const Trajectory& estimated, const Trajectory& truth, double max_gap) {
  return ate(estimated, truth, max_gap).rmse;
}

namespace {

class ClosestPoint {
 public:
  explicit ClosestPoint(const ReconstructionTruth& t) : truth_(t) {
    if (!t.points.empty()) {
      Eigen::AlignedBox3d box;
      for (const auto& p : t.points) box.extend(p);
      const double vol = std::max(box.volume(), 1e-12);
      const double cell = std::max(std::cbrt(vol / static_cast<double>(t.points.size())) * 2.0, 1e-4);
      grid_ = PointGrid(t.points, cell);
    }
  }

  Vec3 operator()(const Vec3& p) const {
    Vec3 best = p;
    double bd = std::numeric_limits<double>::infinity();
    if (!grid_.empty()) {
      best = grid_.point(*grid_.nearest(p));
      bd = (best - p).squaredNorm();
    }
    for (const auto& s : truth_.shapes) {
      const Vec3 c = synth::closest_point(s, p);
      const double d = (c - p).squaredNorm();
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    return best;
  }

 private:
  const ReconstructionTruth& truth_;
  PointGrid grid_;
};

double mean_distance(const std::vector<Vec3>& model, const Pose& T, const ClosestPoint& cp, std::vector<Vec3>* closest) {
  double sum = 0;
  if (closest) closest->resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Vec3 p = T * model[i];
    const Vec3 c = cp(p);
    sum += (c - p).norm();
    if (closest) (*closest)[i] = c;
  }
  return sum / static_cast<double>(model.size());
}

// Points standing in for the truth when computing its centroid and axes.
std::vector<Vec3> truth_samples(const ReconstructionTruth& t) {
  std::vector<Vec3> pts = t.points;
  for (const auto& shape : t.shapes) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, synth::Sphere>) {
            const int n = 2000;
            for (int i = 0; i < n; ++i) {  // Fibonacci sphere
              const double z = 1.0 - (2.0 * i + 1.0) / n;
              const double r = std::sqrt(1 - z * z);
              const double phi = i * std::numbers::pi * (3.0 - std::sqrt(5.0));
              pts.push_back(s.center + s.radius * Vec3(r * std::cos(phi), r * std::sin(phi), z));
            }
          } else if constexpr (std::is_same_v<T, synth::Plane>) {
            for (int i = -20; i <= 20; ++i)
              for (int j = -20; j <= 20; ++j)
                pts.push_back(synth::closest_point(
                    s, s.point + Vec3(i, j, 0) * (s.extent / 20.0) + Vec3(0, i, j) * (s.extent / 20.0)));
          } else {
            for (int i = 0; i < 3000; ++i) {
              const Vec3 u(std::sin(i * 1.1), std::sin(i * 2.3), std::sin(i * 3.7));
              pts.push_back(synth::closest_point(s, s.center + u.cwiseProduct(s.half_extents)));
            }
          }
        },
        shape);
  }
  return pts;
}

std::pair<Vec3, Mat3> centroid_axes(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Mat3 C = Mat3::Zero();
  for (const auto& p : pts) C += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(C);
  Mat3 axes = es.eigenvectors();
  if (axes.determinant() < 0) axes.col(0) *= -1;
  return {c, axes};
}

}  // namespace

ReconstructionResult reconstruction_error(const std::vector<Vec3>& model, const ReconstructionTruth& truth,
                                          const ReconstructionOptions& opts) {
  if (model.empty() || truth.empty()) throw RegistrationFailureError("reconstruction_error: empty input");
  const ClosestPoint cp(truth);

  std::vector<Pose> inits{Pose::identity()};
  const auto [cm, am] = centroid_axes(model);
  const auto [ct, at] = centroid_axes(truth_samples(truth));
  inits.push_back(Pose(Mat3::Identity(), ct - cm));
  // the four proper sign patterns of the axes
  for (const Vec3& d : {Vec3(1, 1, 1), Vec3(-1, 1, -1), Vec3(1, -1, -1), Vec3(-1, -1, 1)}) {
    const Mat3 R = at * d.asDiagonal() * am.transpose();
    inits.push_back(Pose::projected(R, ct - R * cm));
  }

  std::optional<ReconstructionResult> best;
  std::vector<Vec3> closest;
  for (const auto& init : inits) {
    Pose T = init;
    double prev = mean_distance(model, T, cp, &closest);
    if (!std::isfinite(prev)) continue;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
      const Pose next = align_rigid(model, closest);
      std::vector<Vec3> next_closest;
      const double d = mean_distance(model, next, cp, &next_closest);
      if (!std::isfinite(d) || !next.is_finite()) break;
      if (d > prev) break;  // keep the last non-increasing iterate
      T = next;
      closest.swap(next_closest);
      const bool done = prev - d <= opts.tolerance;
      prev = d;
      if (done) break;
    }
    if (!best || prev < best->mean_distance) best = ReconstructionResult{prev, T, it};
  }
  if (!best) throw RegistrationFailureError("reconstruction_error: registration diverged from every initialisation");
  return *best;
}

double iou(const MaskImage& a, const MaskImage& b) {
  if (!a.same_shape(b)) throw DimensionError("iou: masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double instance_iou(const LabelImage& predicted, const LabelImage& truth) {
  if (!predicted.same_shape(truth)) throw DimensionError("instance_iou: label maps differ in size");
  std::set<int> ids;
  for (int v : truth.pixels())
    if (v > 0) ids.insert(v);
  auto mask_of = [](const LabelImage& l, auto pred) {
    MaskImage m(l.width(), l.height(), 0);
    for (std::size_t i = 0; i < l.size(); ++i) m[i] = pred(l[i]) ? 1 : 0;
    return m;
  };
  if (ids.empty())
    return iou(mask_of(predicted, [](int v) { return v > 0; }), mask_of(truth, [](int v) { return v > 0; }));
  double sum = 0;
  for (int id : ids) {
    std::map<int, std::size_t> overlap;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (truth[i] == id && predicted[i] > 0) ++overlap[predicted[i]];
    int best = -1;
    std::size_t best_n = 0;
    for (auto [p, n] : overlap)
      if (n > best_n) best = p, best_n = n;
    const auto tm = mask_of(truth, [id](int v) { return v == id; });
    sum += best < 0 ? 0.0 : iou(mask_of(predicted, [best](int v) { return v == best; }), tm);
  }
  return sum / static_cast<double>(ids.size());
}

MemoryReport memory_report(std::uint64_t surfels, std::uint64_t instances, std::uint64_t class_count) {
  MemoryReport r;
  r.instance_bytes = instances * class_count * 4 + surfels * (4 + 4);
  r.per_element_bytes = surfels * class_count * 4;
  r.ratio = r.per_element_bytes ? static_cast<double>(r.instance_bytes) / static_cast<double>(r.per_element_bytes) : 0.0;
  return r;
}

MemoryReport memory_report(const SurfelMap& map, const InstanceTable& table) {
  return memory_report(map.size(), table.size(), table.class_count());
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::string s;
  if (ate) s += "ATE RMSE: " + num(ate->rmse) + " m over " + std::to_string(ate->pairs) + " poses\n";
  if (recon_overall) s += "Reconstruction mean distance: " + num(*recon_overall) + " m\n";
  for (const auto& [id, d] : recon_per_object) s += "  object " + std::to_string(id) + ": " + num(d) + " m\n";
  if (iou_mean) s += "Reprojected IoU: " + num(*iou_mean) + " mean over " + std::to_string(iou_per_frame.size()) + " frames\n";
  if (memory)
    s += "Memory: instance-based " + std::to_string(memory->instance_bytes) + " B, per-element " +
         std::to_string(memory->per_element_bytes) + " B, ratio " + num(memory->ratio) + "\n";
  for (const auto& n : notes) s += "Note: " + n + "\n";
  return s;
}

std::string EvalReport::to_kv() const {
  std::string s;
  if (ate) s += "ate_rmse=" + num(ate->rmse) + "\nate_pairs=" + std::to_string(ate->pairs) + "\n";
  if (recon_overall) s += "recon_mean=" + num(*recon_overall) + "\n";
  for (const auto& [id, d] : recon_per_object) s += "recon_object_" + std::to_string(id) + "=" + num(d) + "\n";
  if (iou_mean) {
    s += "iou_mean=" + num(*iou_mean) + "\niou_frames=";
    for (std::size_t i = 0; i < iou_per_frame.size(); ++i) s += (i ? "," : "") + num(iou_per_frame[i]);
    s += "\n";
  }
  if (memory)
    s += "memory_instance_bytes=" + std::to_string(memory->instance_bytes) +
         "\nmemory_per_element_bytes=" + std::to_string(memory->per_element_bytes) + "\nmemory_ratio=" + num(memory->ratio) + "\n";
  return s;
}

}  // namespace semfusion
