#include "semfusion/instance_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "semfusion/errors.hpp"

namespace semfusion {

int ObjectInstance::argmax_class() const {
  if (class_probs.empty()) return -1;
  return static_cast<int>(std::max_element(class_probs.begin(), class_probs.end()) - class_probs.begin());
}

namespace {

void check_distribution(const std::vector<double>& p, std::size_t expected) {
  if (p.empty() || (expected && p.size() != expected))
    throw InvalidDistributionError("class distribution has " + std::to_string(p.size()) + " entries, expected " +
                                   std::to_string(expected));
  double sum = 0;
  for (double v : p) {
    if (!(v >= 0 && v <= 1)) throw InvalidDistributionError("class probability outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvalidDistributionError("class probabilities sum to " + std::to_string(sum));
}

}  // namespace

ObjectInstance& InstanceTable::create(const std::vector<double>& class_probs) {
  check_distribution(class_probs, classes_.size());
  ObjectInstance inst;
  inst.id = next_id_++;
  inst.class_probs = class_probs;
  inst.obs_count = 1;
  instances_.push_back(std::move(inst));
  return instances_.back();
}

ObjectInstance* InstanceTable::find(int id) {
  auto it = std::find_if(instances_.begin(), instances_.end(), [id](const auto& i) { return i.id == id; });
  return it == instances_.end() ? nullptr : &*it;
}

const ObjectInstance* InstanceTable::find(int id) const {
  return const_cast<InstanceTable*>(this)->find(id);
}

void InstanceTable::recount(const SurfelMap& map) {
  std::map<int, std::size_t> counts;
  for (const auto& s : map.surfels())
    if (s.is_object()) ++counts[s.label];
  for (auto& inst : instances_) inst.surfel_count = counts[inst.id];
}

void update_class_distribution(ObjectInstance& instance, const std::vector<double>& new_probs) {
  check_distribution(new_probs, instance.class_probs.size());
  const double t = instance.obs_count;
  for (std::size_t i = 0; i < new_probs.size(); ++i)
    instance.class_probs[i] += (new_probs[i] - instance.class_probs[i]) / (t + 1.0);  // exact at fixed points
  ++instance.obs_count;
}

void update_nonbackground(double& p_object, int& count, double p_new) {
  if (!(p_new >= 0 && p_new <= 1))
    throw ProbabilityRangeError("non-background probability " + std::to_string(p_new) + " outside [0, 1]");
  const double t = count;
  p_object = count == 0 ? p_new : p_object + (p_new - p_object) / (t + 1.0);
  ++count;
}

void update_nonbackground(Surfel& s, double p_new) { update_nonbackground(s.p_object, s.p_count, p_new); }

std::map<int, MaskImage> predict_instance_masks(const ModelView& view) {
  std::map<int, MaskImage> out;
  for (int y = 0; y < view.instance.height(); ++y)
    for (int x = 0; x < view.instance.width(); ++x) {
      const int id = view.instance(x, y);
      if (id <= kBackground) continue;
      auto [it, inserted] = out.try_emplace(id);
      if (inserted) it->second = MaskImage(view.instance.width(), view.instance.height(), 0);
      it->second(x, y) = 1;
    }
  return out;
}

std::map<int, MaskImage> predict_instance_masks(const SurfelMap& map, const Pose& pose, const Intrinsics& K) {
  return predict_instance_masks(render_model(map, pose, K, false));
}

MaskAssociation associate_masks(std::span<const InstanceMask> masks, const std::map<int, MaskImage>& predicted) {
  MaskAssociation out;
  out.instance.assign(masks.size(), kNewInstance);
  out.overlap.assign(masks.size(), 0.0);
  if (masks.empty()) return out;

  const int w = masks.front().mask.width(), h = masks.front().mask.height();
  LabelImage owner(w, h, 0);
  std::map<int, std::uint64_t> pred_area;
  for (const auto& [id, m] : predicted) {
    if (m.width() != w || m.height() != h) throw ShapeMismatchError("predicted mask size differs from the frame");
    std::uint64_t a = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) {
        owner[i] = id;
        ++a;
      }
    if (a) pred_area[id] = a;  // empty predictions take no part
  }

  struct Candidate {
    std::size_t mask;
    int id;
    std::uint64_t inter, pred_area, mask_area, first_pixel;
  };
  std::vector<Candidate> cands;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const auto& m = masks[k].mask;
    if (m.width() != w || m.height() != h) throw ShapeMismatchError("instance masks differ in size");
    std::map<int, std::uint64_t> inter;
    std::uint64_t area = 0, first = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) continue;
      ++area;
      first = std::min<std::uint64_t>(first, i);
      if (owner[i] > 0) ++inter[owner[i]];
    }
    for (const auto& [id, n] : inter) {
      const auto pa = pred_area.at(id);
      if (10 * n > 3 * pa) cands.push_back({k, id, n, pa, area, first});
    }
  }

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    const auto ua = a.inter * b.pred_area, ub = b.inter * a.pred_area;
    if (ua != ub) return ua > ub;
    if (a.inter != b.inter) return a.inter > b.inter;
    if (a.mask_area != b.mask_area) return a.mask_area > b.mask_area;
    if (a.first_pixel != b.first_pixel) return a.first_pixel < b.first_pixel;
    return a.id < b.id;
  });

  std::map<int, bool> taken;
  for (const auto& c : cands) {
    if (out.instance[c.mask] != kNewInstance || taken[c.id]) continue;
    out.instance[c.mask] = c.id;
    out.overlap[c.mask] = static_cast<double>(c.inter) / static_cast<double>(c.pred_area);
    taken[c.id] = true;
  }
  return out;
}

SemanticReport fuse_semantic_frame(SurfelMap& map, InstanceTable& table, const SegmentationFrame& seg,
                                   const Pose& pose, const Intrinsics& K, int frame_index,
                                   const SemanticParams& params) {
  SemanticReport rep;
  if (table.classes().empty() && !seg.classes.empty()) table.set_classes(seg.classes);

  const ModelView view = render_model(map, pose, K, false);
  const auto predicted = predict_instance_masks(view);
  const auto assoc = associate_masks(seg.masks, predicted);

  // new instances get ids in raster order of their first pixel
  std::vector<std::size_t> order(seg.masks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> first(seg.masks.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t k = 0; k < seg.masks.size(); ++k) {
    const auto px = seg.masks[k].mask.pixels();
    auto it = std::find_if(px.begin(), px.end(), [](unsigned char v) { return v != 0; });
    if (it != px.end()) first[k] = static_cast<std::size_t>(it - px.begin());
  }
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return first[a] < first[b]; });

  rep.mask_instance.assign(seg.masks.size(), -1);
  for (std::size_t k : order) {
    const auto& m = seg.masks[k];
    if (assoc.instance[k] != kNewInstance) {
      update_class_distribution(*table.find(assoc.instance[k]), m.class_probs);
      rep.mask_instance[k] = assoc.instance[k];
    } else if (m.area() >= params.min_new_instance_area) {
      rep.mask_instance[k] = table.create(m.class_probs).id;
      ++rep.new_instances;
    }
  }

  LabelImage frame_labels(K.width, K.height, kBackground);
  for (std::size_t k = 0; k < seg.masks.size(); ++k) {
    if (rep.mask_instance[k] < 0) continue;
    const auto& m = seg.masks[k].mask;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) frame_labels[i] = rep.mask_instance[k];
  }

  const Pose world_to_cam = pose.inverse();
  const double delta = map.params().delta_depth;
  auto& surfels = map.surfels();
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    auto& s = surfels[i];
    const Vec3 q = world_to_cam * s.position;
    if (!(q.z() > 0)) continue;
    const int x = static_cast<int>(std::lround(K.fx * q.x() / q.z() + K.cx));
    const int y = static_cast<int>(std::lround(K.fy * q.y() / q.z() + K.cy));
    if (!frame_labels.contains(x, y)) continue;
    if (s.t0 == frame_index && !s.is_object() && frame_labels(x, y) != kBackground) {
      map.set_label(i, frame_labels(x, y));
      ++rep.relabeled;
    }
    if (view.index(x, y) < 0 || std::abs(view.depth(x, y) - q.z()) >= delta) continue;
    double p;
    if (seg.has_soft_prob())
      p = seg.soft_prob(x, y);
    else
      p = frame_labels(x, y) != kBackground ? 1.0 : 0.0;
    update_nonbackground(s, p);
    ++rep.p_updates;
  }
  table.recount(map);
  return rep;
}

void write_instance_table(const InstanceTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# id obs_count argmax_class";
  for (const auto& c : table.classes()) out << ' ' << c;
  out << '\n';
  char buf[32];
  for (const auto& inst : table.instances()) {
    const int a = inst.argmax_class();
    out << inst.id << ' ' << inst.obs_count << ' '
        << (a >= 0 && a < static_cast<int>(table.classes().size()) ? table.classes()[a] : std::to_string(a));
    for (double p : inst.class_probs) {
      std::snprintf(buf, sizeof buf, " %.6f", p);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace semfusion
