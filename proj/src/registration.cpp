#include "semfusion/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "semfusion/errors.hpp"

namespace semfusion {

void RegistrationConfig::validate() const {
  if (levels < 1) throw std::invalid_argument("RegistrationConfig: levels must be >= 1");
  if (static_cast<int>(iterations.size()) != levels)
    throw std::invalid_argument("RegistrationConfig: one iteration count per level required");
  for (int it : iterations)
    if (it < 1) throw std::invalid_argument("RegistrationConfig: iteration counts must be positive");
  if (!(convergence_eps > 0) || !(huber_delta_icp > 0) || !(huber_delta_rgb > 0) ||
      min_valid_correspondences <= 0 || !(max_correspondence_distance > 0) || !(max_normal_angle_deg > 0))
    throw std::invalid_argument("RegistrationConfig: thresholds must be positive");
  if (!(omega_rgb_default >= 0 && omega_rgb_default <= 1))
    throw std::invalid_argument("RegistrationConfig: omega_rgb_default outside [0, 1]");
}

FrameLevel make_frame_level(const RgbdFrame& frame, const Intrinsics& K) {
  auto vn = compute_vertex_normals(frame.depth, K);
  return {K, frame.depth, to_intensity(frame.color), std::move(vn.vertices), std::move(vn.normals)};
}

std::vector<FrameLevel> make_frame_pyramid(const RgbdFrame& frame, const Intrinsics& K, int levels) {
  const auto frames = build_pyramid(frame, levels);
  const auto ks = pyramid_intrinsics(K, levels);
  std::vector<FrameLevel> out;
  for (int l = 0; l < levels; ++l) out.push_back(make_frame_level(frames[l], ks[l]));
  return out;
}

std::vector<ModelView> render_model_pyramid(const SurfelMap& map, const Pose& pose, const Intrinsics& K,
                                            int levels) {
  std::vector<ModelView> out;
  for (const auto& k : pyramid_intrinsics(K, levels)) out.push_back(render_model(map, pose, k, true));
  return out;
}

std::vector<IcpPair> icp_associate(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                                   const RegistrationConfig& cfg) {
  const Pose world_to_view = view.pose.inverse();
  const double cos_max = std::cos(cfg.max_normal_angle_deg * std::numbers::pi / 180.0);
  const auto& Kv = view.K;
  std::vector<IcpPair> pairs;
  for (std::size_t i = 0; i < frame.vertices.size(); ++i) {
    const Vec3& pc = frame.vertices[i];
    const Vec3& nc = frame.normals[i];
    if (!pc.allFinite() || !nc.allFinite()) continue;
    const Vec3 pw = pose * pc;
    const Vec3 q = world_to_view * pw;
    if (!(q.z() > 0)) continue;
    const int x = static_cast<int>(std::lround(Kv.fx * q.x() / q.z() + Kv.cx));
    const int y = static_cast<int>(std::lround(Kv.fy * q.y() / q.z() + Kv.cy));
    if (!view.index.contains(x, y) || !view.valid(x, y)) continue;
    const Vec3& pm = view.vertex(x, y);
    const Vec3& nm = view.normal(x, y);
    if ((pw - pm).norm() > cfg.max_correspondence_distance) continue;
    if ((pose.rotation() * nc).dot(nm) < cos_max) continue;
    pairs.push_back({static_cast<int>(i), static_cast<int>(view.index.index(x, y))});
  }
  return pairs;
}

ResidualSet icp_evaluate(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                         std::span<const IcpPair> pairs) {
  ResidualSet rs;
  rs.r.resize(static_cast<Eigen::Index>(pairs.size()));
  rs.J.resize(static_cast<Eigen::Index>(pairs.size()), 6);
  rs.valid.assign(pairs.size(), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Vec3 a = pose * frame.vertices[pairs[k].frame_pixel];
    const Vec3& pm = view.vertex[pairs[k].model_pixel];
    const Vec3& n = view.normal[pairs[k].model_pixel];
    const auto row = static_cast<Eigen::Index>(k);
    rs.r[row] = n.dot(a - pm);
    // d(exp(xi) a)/dxi = [I, -[a]x]  =>  n^T [I, -[a]x] = [n^T, (a x n)^T]
    rs.J.row(row).head<3>() = n.transpose();
    rs.J.row(row).tail<3>() = a.cross(n).transpose();
  }
  return rs;
}

ResidualSet icp_residuals(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                          const RegistrationConfig& cfg) {
  const auto pairs = icp_associate(frame, view, pose, cfg);
  if (static_cast<int>(pairs.size()) < cfg.min_valid_correspondences)
    throw InsufficientCorrespondencesError("icp: " + std::to_string(pairs.size()) + " correspondences");
  return icp_evaluate(frame, view, pose, pairs);
}

std::vector<int> rgb_select(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                            const RegistrationConfig& cfg) {
  const Pose world_to_cam = pose.inverse();
  const auto& K = frame.K;
  const double cos_normal = std::cos(cfg.max_normal_angle_deg * std::numbers::pi / 180.0);
  std::vector<int> ids;
  for (std::size_t i = 0; i < view.index.size(); ++i) {
    if (view.index[i] < 0) continue;
    const Vec3 q = world_to_cam * view.vertex[i];
    if (!(q.z() > 0)) continue;
    const double u = K.fx * q.x() / q.z() + K.cx;
    const double v = K.fy * q.y() / q.z() + K.cy;
    double value;
    if (!sample_bilinear(frame.intensity, u, v, value)) continue;
    // every bilinear tap and its neighbours (the reach of the optical blur)
    // must see the same surface, otherwise the sample mixes intensities
    // across a silhouette or a shading crease
    const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
    const Vec3 n = world_to_cam.rotation() * view.normal[i];
    bool consistent = true;
    for (int dy = -1; dy <= 2 && consistent; ++dy)
      for (int dx = -1; dx <= 2 && consistent; ++dx) {
        const int xx = std::clamp(x0 + dx, 0, K.width - 1), yy = std::clamp(y0 + dy, 0, K.height - 1);
        const double d = frame.depth(xx, yy);
        const Vec3& nl = frame.normals(xx, yy);
        consistent = d > 0 && std::abs(d - q.z()) <= cfg.max_correspondence_distance && nl.allFinite() &&
                     nl.dot(n) >= cos_normal;
      }
    if (consistent) ids.push_back(static_cast<int>(i));
  }
  return ids;
}

ResidualSet rgb_evaluate(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                         std::span<const int> model_pixels) {
  const Pose world_to_cam = pose.inverse();
  const Mat3 Rt = world_to_cam.rotation();
  const auto& K = frame.K;
  ResidualSet rs;
  const auto n = static_cast<Eigen::Index>(model_pixels.size());
  rs.r = Eigen::VectorXd::Zero(n);
  rs.J = JacobianRows::Zero(n, 6);
  rs.valid.assign(model_pixels.size(), 0);
  rs.samples.resize(model_pixels.size());
  for (std::size_t k = 0; k < model_pixels.size(); ++k) {
    const int m = model_pixels[k];
    const Vec3& p = view.vertex[m];
    const Vec3 q = world_to_cam * p;
    if (!(q.z() > 0)) continue;
    const double iz = 1.0 / q.z();
    const double u = K.fx * q.x() * iz + K.cx;
    const double v = K.fy * q.y() * iz + K.cy;
    rs.samples[k] = {u, v};
    double value;
    Eigen::Vector2d grad;
    if (!sample_bilinear(frame.intensity, u, v, value, &grad)) continue;
    const auto row = static_cast<Eigen::Index>(k);
    rs.valid[k] = 1;
    rs.r[row] = value - view.intensity[m];
    Eigen::Matrix<double, 2, 3> dpi;
    dpi << K.fx * iz, 0, -K.fx * q.x() * iz * iz, 0, K.fy * iz, -K.fy * q.y() * iz * iz;
    // q = R^T (exp(-xi) p - t):  dq/drho = -R^T,  dq/domega = R^T [p]x
    Eigen::Matrix<double, 3, 6> dq;
    dq.leftCols<3>() = -Rt;
    dq.rightCols<3>() = Rt * skew(p);
    rs.J.row(row) = grad.transpose() * dpi * dq;
  }
  return rs;
}

ResidualSet rgb_residuals(const FrameLevel& frame, const ModelView& view, const Pose& pose,
                          const RegistrationConfig& cfg) {
  const auto ids = rgb_select(frame, view, pose, cfg);
  if (static_cast<int>(ids.size()) < cfg.min_valid_correspondences)
    throw InsufficientCorrespondencesError("rgb: " + std::to_string(ids.size()) + " correspondences");
  return rgb_evaluate(frame, view, pose, ids);
}

namespace {

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? r * r : 2.0 * delta * a - delta * delta;
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

}  // namespace

double robust_mean_cost(const ResidualSet& rs, double delta) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (!rs.valid.empty() && !rs.valid[i]) continue;
    sum += huber(rs.r[static_cast<Eigen::Index>(i)], delta);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

namespace {

struct TermUse {
  bool icp = false;
  bool rgb = false;
};

struct Evaluation {
  bool ok = false;  // every term in use had enough correspondences
  double icp_cost = 0, rgb_cost = 0, cost = 0;
  std::size_t icp_count = 0, rgb_count = 0;
  ResidualSet icp, rgb;
  std::vector<IcpPair> pairs;
  std::vector<int> ids;
};

Evaluation evaluate(const FrameLevel& frame, const ModelView& view, const Pose& pose, double omega,
                    TermUse use, const RegistrationConfig& cfg) {
  Evaluation e;
  e.ok = true;
  if (use.icp) {
    e.pairs = icp_associate(frame, view, pose, cfg);
    e.icp_count = e.pairs.size();
    if (static_cast<int>(e.pairs.size()) < cfg.min_valid_correspondences) {
      e.ok = false;
    } else {
      e.icp = icp_evaluate(frame, view, pose, e.pairs);
      e.icp_cost = robust_mean_cost(e.icp, cfg.huber_delta_icp);
    }
  }
  if (use.rgb) {
    e.ids = rgb_select(frame, view, pose, cfg);
    e.rgb_count = e.ids.size();
    if (static_cast<int>(e.ids.size()) < cfg.min_valid_correspondences) {
      e.ok = false;
    } else {
      e.rgb = rgb_evaluate(frame, view, pose, e.ids);
      e.rgb_cost = robust_mean_cost(e.rgb, cfg.huber_delta_rgb);
    }
  }
  e.cost = e.icp_cost + omega * e.rgb_cost;
  if (!std::isfinite(e.cost)) e.ok = false;
  return e;
}

// Cost of the correspondences in `at`, re-evaluated at `pose`.
double fixed_cost(const FrameLevel& frame, const ModelView& view, const Pose& pose, double omega,
                  const Evaluation& at, const RegistrationConfig& cfg) {
  double c = 0;
  if (at.icp.size()) c += robust_mean_cost(icp_evaluate(frame, view, pose, at.pairs), cfg.huber_delta_icp);
  if (at.rgb.size()) c += omega * robust_mean_cost(rgb_evaluate(frame, view, pose, at.ids), cfg.huber_delta_rgb);
  return c;
}

void accumulate(const ResidualSet& rs, double delta, double scale, Mat6& H, Vec6& g) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < rs.size(); ++i) n += rs.valid[i] ? 1 : 0;
  if (n == 0) return;
  const double s = scale / static_cast<double>(n);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (!rs.valid[i]) continue;
    const auto row = static_cast<Eigen::Index>(i);
    const double r = rs.r[row];
    const double w = s * huber_weight(r, delta);
    const auto j = rs.J.row(row);
    H.noalias() += w * j.transpose() * j;
    g.noalias() += w * r * j.transpose();
  }
}

// Minimum-norm solution of H x = b; directions the data does not constrain
// get no update.
Vec6 pseudo_solve(const Mat6& H, const Vec6& b) {
  Eigen::SelfAdjointEigenSolver<Mat6> es(H);
  const auto& ev = es.eigenvalues();
  const double tol = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-10;
  Vec6 y = es.eigenvectors().transpose() * b;
  for (int i = 0; i < 6; ++i) y[i] = ev[i] > tol ? y[i] / ev[i] : 0.0;
  return es.eigenvectors() * y;
}

TermUse choose_terms(const FrameLevel& frame, const ModelView& view, const Pose& pose, double omega,
                     const RegistrationConfig& cfg) {
  TermUse use;
  use.icp = static_cast<int>(icp_associate(frame, view, pose, cfg).size()) >= cfg.min_valid_correspondences;
  use.rgb = omega > 0 &&
            static_cast<int>(rgb_select(frame, view, pose, cfg).size()) >= cfg.min_valid_correspondences;
  return use;
}

RegistrationResult solve_impl(std::span<const FrameLevel> frame, std::span<const ModelView> views,
                              const Pose& prev_pose, double omega, bool allow_rgb,
                              const RegistrationConfig& cfg) {
  cfg.validate();
  if (!(omega >= 0 && omega <= 1)) throw std::invalid_argument("solve: omega_rgb outside [0, 1]");
  if (static_cast<int>(frame.size()) != cfg.levels || static_cast<int>(views.size()) != cfg.levels)
    throw std::invalid_argument("solve: pyramid depth does not match the configuration");
  if (!prev_pose.is_finite()) throw std::invalid_argument("solve: non-finite initial pose");
  if (!allow_rgb) omega = 0.0;

  RegistrationResult res;
  res.omega_rgb = omega;
  Pose pose = prev_pose;
  bool any_level = false;

  for (int l = cfg.levels - 1; l >= 0; --l) {
    const auto& fl = frame[l];
    const auto& vw = views[l];
    const int max_it = cfg.iterations[cfg.levels - 1 - l];
    const TermUse use = choose_terms(fl, vw, pose, omega, cfg);
    if (!use.icp && !use.rgb) continue;
    any_level = true;

    Evaluation cur = evaluate(fl, vw, pose, omega, use, cfg);
    if (!cur.ok) continue;
    bool converged = false;
    int it = 0;
    for (; it < max_it; ++it) {
      Mat6 H = Mat6::Zero();
      Vec6 g = Vec6::Zero();
      if (use.icp) accumulate(cur.icp, cfg.huber_delta_icp, 1.0, H, g);
      if (use.rgb) accumulate(cur.rgb, cfg.huber_delta_rgb, omega, H, g);
      if (l == 0 && it == 0) res.initial_gradient_norm = g.norm();
      const Vec6 step = -pseudo_solve(H, g);
      if (!step.allFinite()) break;

      // Step halving on the linearised correspondence set; association is
      // redone once a step is taken.
      bool accepted = false;
      double scale = 1.0;
      for (int k = 0; k <= cfg.max_step_halvings; ++k, scale *= 0.5) {
        const Pose cand = pose.applied(scale * step);
        const double c = fixed_cost(fl, vw, cand, omega, cur, cfg);
        if (std::isfinite(c) && c <= cur.cost) {
          Evaluation e = evaluate(fl, vw, cand, omega, use, cfg);
          if (!e.ok) break;
          pose = cand;
          cur = std::move(e);
          accepted = true;
          break;
        }
      }
      ++res.iterations;
      if (!accepted) {
        converged = true;  // no descent direction left at this resolution
        break;
      }
      if ((scale * step).norm() < cfg.convergence_eps) {
        converged = true;
        break;
      }
    }
    if (l == 0) {
      res.converged = converged;
      res.hit_iteration_cap = !converged && it >= max_it;
    }
  }
  if (!any_level) throw TrackingLostError("insufficient correspondences at every pyramid level");

  // Final bookkeeping at the returned pose, finest level, all applicable terms.
  TermUse use;
  use.icp = true;
  use.rgb = omega > 0;
  const Evaluation fin = evaluate(frame[0], views[0], pose, omega, use, cfg);
  if (static_cast<int>(fin.icp_count) < cfg.min_valid_correspondences &&
      (omega == 0 || static_cast<int>(fin.rgb_count) < cfg.min_valid_correspondences))
    throw TrackingLostError("insufficient correspondences at the final pose");
  if (!std::isfinite(fin.icp_cost) || !std::isfinite(fin.rgb_cost) || !pose.is_finite())
    throw TrackingLostError("registration cost diverged");
  res.pose = pose;
  res.icp_cost = fin.icp_cost;
  res.rgb_cost = fin.rgb_cost;
  res.final_cost = res.icp_cost + omega * res.rgb_cost;
  res.correspondence_count = fin.icp_count;
  res.photometric_count = fin.rgb_count;
  Mat6 H = Mat6::Zero();
  Vec6 g = Vec6::Zero();
  if (fin.icp.size()) accumulate(fin.icp, cfg.huber_delta_icp, 1.0, H, g);
  if (fin.rgb.size()) accumulate(fin.rgb, cfg.huber_delta_rgb, omega, H, g);
  res.gradient_norm = g.norm();
  return res;
}

}  // namespace

RegistrationResult solve(std::span<const FrameLevel> frame, std::span<const ModelView> views,
                         const Pose& prev_pose, double omega_rgb, const RegistrationConfig& cfg) {
  return solve_impl(frame, views, prev_pose, omega_rgb, true, cfg);
}

RegistrationResult solve(const RgbdFrame& frame, const SurfelMap& map, const Intrinsics& K,
                         const Pose& prev_pose, double omega_rgb, const RegistrationConfig& cfg) {
  if (map.empty()) throw TrackingLostError("solve: the map is empty");
  const auto levels = make_frame_pyramid(frame, K, cfg.levels);
  const auto views = render_model_pyramid(map, prev_pose, K, cfg.levels);
  return solve(levels, views, prev_pose, omega_rgb, cfg);
}

RegistrationResult solve_icp_only(std::span<const FrameLevel> frame, std::span<const ModelView> views,
                                  const Pose& prev_pose, const RegistrationConfig& cfg) {
  return solve_impl(frame, views, prev_pose, 0.0, false, cfg);
}

}  // namespace semfusion
