#include "semfusion/seg_refine.hpp"

#include <cmath>
#include <stdexcept>

#include "semfusion/point_grid.hpp"

namespace semfusion {

void RefineConfig::validate() const {
  if (window < 1) throw std::invalid_argument("RefineConfig: window must be >= 1");
  if (threshold < 0 || threshold > window) throw std::invalid_argument("RefineConfig: need 0 <= threshold <= window");
  if (!(p_low >= 0 && p_low < p_high && p_high <= 1)) throw std::invalid_argument("RefineConfig: need 0 <= p_low < p_high <= 1");
  if (!(max_distance > 0)) throw std::invalid_argument("RefineConfig: max_distance must be positive");
}

namespace {

bool in_band(const Surfel& s, const RefineConfig& cfg) {
  return !s.is_object() && s.p_object > cfg.p_low && s.p_object < cfg.p_high;
}

}  // namespace

RefineStepReport refine_step(SurfelMap& map, const ModelView& view, const SegmentationFrame& seg,
                             const RefineConfig& cfg) {
  cfg.validate();
  RefineStepReport rep;
  if (!seg.has_soft_prob()) return rep;
  const auto& K = view.K;

  MaskImage object(K.width, K.height, 0);
  for (const auto& m : seg.masks)
    for (std::size_t i = 0; i < m.mask.size(); ++i)
      if (m.mask[i]) object[i] = 1;
  for (std::size_t i = 0; i < view.instance.size(); ++i)
    if (view.instance[i] > kBackground) object[i] = 1;

  auto near_object = [&](int x, int y) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (cfg.adjacency == Adjacency::Four && dx != 0 && dy != 0) continue;
        if (object.contains(x + dx, y + dy) && object(x + dx, y + dy)) return true;
      }
    return false;
  };

  const Pose world_to_cam = view.pose.inverse();
  const double delta = map.params().delta_depth;
  for (auto& s : map.surfels()) {
    if (!in_band(s, cfg)) continue;
    const Vec3 q = world_to_cam * s.position;
    if (!(q.z() > 0)) continue;
    const int x = static_cast<int>(std::lround(K.fx * q.x() / q.z() + K.cx));
    const int y = static_cast<int>(std::lround(K.fy * q.y() / q.z() + K.cy));
    if (!view.index.contains(x, y) || view.index(x, y) < 0 || std::abs(view.depth(x, y) - q.z()) >= delta) continue;
    ++rep.candidates;
    if (seg.soft_prob(x, y) > cfg.pixel_prob_min && near_object(x, y) && s.confidence < cfg.window) {
      ++s.confidence;
      ++rep.incremented;
    }
  }
  return rep;
}

PromotionReport refine_commit(SurfelMap& map, InstanceTable& table, const RefineConfig& cfg, int frames_elapsed,
                              int frame_index) {
  cfg.validate();
  if (frames_elapsed <= 0 || frames_elapsed % cfg.window != 0)
    throw std::invalid_argument("refine_commit: frames_elapsed must be a positive multiple of the window");
  PromotionReport rep;
  rep.frame_index = frame_index;

  // targets are the object surfels as they stand before this commit
  PointGrid grid(cfg.max_distance);
  std::vector<int> owner;
  for (const auto& s : map.surfels())
    if (s.is_object()) {
      grid.insert(s.position);
      owner.push_back(s.label);
    }

  auto& surfels = map.surfels();
  std::vector<std::pair<std::size_t, int>> promote;
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    auto& s = surfels[i];
    if (s.is_object()) continue;
    if (in_band(s, cfg) && s.confidence >= cfg.threshold) {
      if (auto j = grid.nearest(s.position, cfg.max_distance)) {
        promote.emplace_back(i, owner[*j]);
        continue;
      }
    }
    if (s.confidence != 0) ++rep.reset;
    s.confidence = 0;
  }
  for (auto [i, label] : promote) {
    map.set_label(i, label);
    surfels[i].promoted = true;
    surfels[i].confidence = 0;
    ++rep.per_instance[label];
    ++rep.total;
  }
  table.recount(map);
  return rep;
}

std::string format_promotion(const PromotionReport& rep) {
  std::string s = "frame " + std::to_string(rep.frame_index) + " promoted " + std::to_string(rep.total);
  for (const auto& [id, n] : rep.per_instance) s += " " + std::to_string(id) + ":" + std::to_string(n);
  return s;
}

}  // namespace semfusion
