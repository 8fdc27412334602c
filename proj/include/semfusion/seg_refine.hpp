#pragma once

#include <map>
#include <string>

#include "semfusion/dataset.hpp"
#include "semfusion/instance_fusion.hpp"
#include "semfusion/surfel_map.hpp"

namespace semfusion {

enum class Adjacency { Four, Eight };

struct RefineConfig {
  int window = 10;      // n, frames between commits
  int threshold = 10;   // sigma_object, promotion needs confidence >= threshold
  double p_low = 0.4;   // candidate band on p_o, exclusive
  double p_high = 0.5;
  double pixel_prob_min = 0.4;  // the pixel's soft probability must exceed this
  Adjacency adjacency = Adjacency::Eight;
  double max_distance = 0.1;  // metres to the nearest instance surfel

  /// Throws std::invalid_argument.
  void validate() const;
};

struct RefineStepReport {
  std::size_t candidates = 0;
  std::size_t incremented = 0;
};

/// One confidence update. `view` is the map rendered at this frame's pose
/// (its instance channel contributes object pixels alongside the masks).
RefineStepReport refine_step(SurfelMap& map, const ModelView& view, const SegmentationFrame& seg,
                             const RefineConfig& cfg);

struct PromotionReport {
  int frame_index = 0;
  std::map<int, std::size_t> per_instance;
  std::size_t total = 0;
  std::size_t reset = 0;
};

/// Promotes candidates whose confidence reached the threshold to their
/// nearest instance; every other background surfel restarts at zero.
/// Throws std::invalid_argument unless frames_elapsed is a positive multiple
/// of the window.
PromotionReport refine_commit(SurfelMap& map, InstanceTable& table, const RefineConfig& cfg, int frames_elapsed,
                              int frame_index = 0);

/// "frame <i> promoted <total> [<id>:<count> ...]"
std::string format_promotion(const PromotionReport& rep);

}  // namespace semfusion
