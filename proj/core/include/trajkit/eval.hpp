#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "trajkit/types.hpp"

namespace trajkit {

/// Intersection over union of two boxes; 0 when either box has no area.
double iou(const BBox& a, const BBox& b);

/// Maximum-weight one-to-one assignment on a rows×cols weight table
/// (row-major). Returns, per row, the assigned column or -1. Works for any
/// rectangular shape.
std::vector<int> max_weight_assignment(std::span<const double> weights, std::size_t rows, std::size_t cols);

struct FrameMatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  ///< (pred, gt), ascending pred
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

/// Maximum total IoU matching restricted to pairs with IoU >= threshold.
FrameMatch frame_matching(std::span<const BBox> preds, std::span<const BBox> gts, double iou_threshold);

enum class ClassLabelMode {
  track,  ///< the trajectory's final label
  frame,  ///< each observation's own category (per-frame classification)
};

struct EvalConfig {
  double iou_threshold = 0.5;
  std::map<CategoryId, Split> splits;  ///< categories not listed count only in "overall"
  ClassLabelMode label_mode = ClassLabelMode::track;

  void validate() const;
};

struct EvalScores {
  double loc_a = 0.0;
  double ass_a = 0.0;
  double cls_a = 0.0;
  double teta = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// False when the split has neither ground truth nor predictions.
  bool valid = false;
};

struct EvalReport {
  EvalScores overall;
  EvalScores base;
  EvalScores novel;
  /// Changes of the matched prediction id along each ground-truth track.
  std::size_t id_switches = 0;
};

/// LocA / AssA / ClsA / TETA over all frames. Unmatched predictions count as
/// false positives in the split of their label.
EvalReport evaluate(std::span<const OutputTrack> predictions, std::span<const GroundTruthTrack> ground_truth,
                    const EvalConfig& cfg);

}  // namespace trajkit
