#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semfusion/dataset.hpp"
#include "semfusion/surfel_map.hpp"

namespace semfusion {

/// A 3D object: one label shared by many surfels plus a single class
/// distribution for all of them.
struct ObjectInstance {
  int id = 0;
  std::vector<double> class_probs;
  int obs_count = 0;
  std::size_t surfel_count = 0;

  int argmax_class() const;
};

class InstanceTable {
 public:
  InstanceTable() = default;
  explicit InstanceTable(std::vector<std::string> classes) : classes_(std::move(classes)) {}

  const std::vector<std::string>& classes() const { return classes_; }
  void set_classes(std::vector<std::string> classes) { classes_ = std::move(classes); }
  std::size_t class_count() const { return classes_.size(); }

  const std::vector<ObjectInstance>& instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }

  /// New instance with obs_count 1. Throws InvalidDistributionError.
  ObjectInstance& create(const std::vector<double>& class_probs);
  ObjectInstance* find(int id);
  const ObjectInstance* find(int id) const;
  int next_id() const { return next_id_; }

  /// Recomputes surfel_count from the map labels.
  void recount(const SurfelMap& map);

 private:
  std::vector<std::string> classes_;
  std::vector<ObjectInstance> instances_;
  int next_id_ = 1;
};

/// Streaming average: class_probs <- (t * class_probs + new) / (t + 1).
/// Throws InvalidDistributionError unless `new_probs` is a distribution of
/// matching size.
void update_class_distribution(ObjectInstance& instance, const std::vector<double>& new_probs);

/// Same running average for the non-background probability. A surfel never
/// observed takes `p_new` directly. Throws ProbabilityRangeError.
void update_nonbackground(double& p_object, int& count, double p_new);
void update_nonbackground(Surfel& s, double p_new);

/// One binary mask per instance id visible in `view` (nearest surfel wins).
std::map<int, MaskImage> predict_instance_masks(const ModelView& view);
std::map<int, MaskImage> predict_instance_masks(const SurfelMap& map, const Pose& pose, const Intrinsics& K);

inline constexpr int kNewInstance = -1;

struct MaskAssociation {
  std::vector<int> instance;  // per input mask: existing id or kNewInstance
  std::vector<double> overlap; // U of the chosen pair, 0 for new
};

/// Overlap U(M, P) = |M n P| / |P|. Pairs with U > 0.3 are matched greedily by
/// decreasing U; every instance absorbs at most one mask. The result does not
/// depend on the order of `masks`.
MaskAssociation associate_masks(std::span<const InstanceMask> masks, const std::map<int, MaskImage>& predicted);

struct SemanticParams {
  std::size_t min_new_instance_area = 50;  // pixels
  double association_threshold = 0.3;      // informational; the rule is fixed at U > 0.3
};

struct SemanticReport {
  std::vector<int> mask_instance;  // per input mask: instance id, or -1 if ignored
  std::size_t new_instances = 0;
  std::size_t relabeled = 0;
  std::size_t p_updates = 0;
};

/// Predict -> associate -> update distributions -> label this frame's new
/// surfels -> update p_o of every depth-consistent visible surfel.
SemanticReport fuse_semantic_frame(SurfelMap& map, InstanceTable& table, const SegmentationFrame& seg,
                                   const Pose& pose, const Intrinsics& K, int frame_index,
                                   const SemanticParams& params = {});

/// "id obs_count argmax_class probs..." per line, after a comment header.
void write_instance_table(const InstanceTable& table, const std::filesystem::path& path);

}  // namespace semfusion
