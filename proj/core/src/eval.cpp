#include "trajkit/eval.hpp"

#include <algorithm>
#include <limits>

#include "trajkit/error.hpp"

namespace trajkit {

double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

// Shortest augmenting path Hungarian method; rows <= cols, minimises cost.
std::vector<int> hungarian_min(const std::vector<double>& cost, std::size_t n, std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) assign[p[j] - 1] = static_cast<int>(j - 1);
  }
  return assign;
}

}  // namespace

std::vector<int> max_weight_assignment(std::span<const double> weights, std::size_t rows, std::size_t cols) {
  if (weights.size() != rows * cols) throw Error(ErrorCode::ShapeMismatch, "assignment table size mismatch");
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  if (rows <= cols) {
    std::vector<double> cost(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) cost[i] = -weights[i];
    return hungarian_min(cost, rows, cols);
  }
  std::vector<double> cost(weights.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) cost[c * rows + r] = -weights[r * cols + c];
  }
  const std::vector<int> by_col = hungarian_min(cost, cols, rows);
  std::vector<int> assign(rows, -1);
  for (std::size_t c = 0; c < cols; ++c) {
    if (by_col[c] >= 0) assign[static_cast<std::size_t>(by_col[c])] = static_cast<int>(c);
  }
  return assign;
}

FrameMatch frame_matching(std::span<const BBox> preds, std::span<const BBox> gts, double iou_threshold) {
  const std::size_t np = preds.size();
  const std::size_t ng = gts.size();
  std::vector<double> w(np * ng, 0.0);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < ng; ++j) {
      const double v = iou(preds[i], gts[j]);
      if (v >= iou_threshold && v > 0.0) w[i * ng + j] = v;
    }
  }
  const std::vector<int> assign = max_weight_assignment(w, np, ng);
  FrameMatch out;
  std::vector<char> gt_used(ng, 0);
  for (std::size_t i = 0; i < np; ++i) {
    const int j = assign[i];
    if (j >= 0 && w[i * ng + static_cast<std::size_t>(j)] > 0.0) {
      out.pairs.emplace_back(i, static_cast<std::size_t>(j));
      gt_used[static_cast<std::size_t>(j)] = 1;
    } else {
      out.unmatched_preds.push_back(i);
    }
  }
  for (std::size_t j = 0; j < ng; ++j) {
    if (!gt_used[j]) out.unmatched_gts.push_back(j);
  }
  return out;
}

void EvalConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "iou_threshold must lie in (0, 1]");
  }
}

namespace {

struct PredBox {
  std::size_t track;
  BBox box;
  CategoryId label;
};

struct GtBox {
  std::size_t track;
  BBox box;
};

struct TpRecord {
  std::size_t pred;
  std::size_t gt;
  bool label_correct;
};

enum SplitSlot { kOverall = 0, kBase = 1, kNovel = 2 };

struct Tally {
  std::size_t tp = 0, fp = 0, fn = 0;
  double ass_sum = 0.0;
  std::size_t cls_correct = 0;
  bool seen = false;
};

EvalScores finish(const Tally& t) {
  EvalScores s;
  s.tp = t.tp;
  s.fp = t.fp;
  s.fn = t.fn;
  const std::size_t denom = t.tp + t.fp + t.fn;
  s.valid = t.seen || denom > 0;
  if (denom > 0) s.loc_a = 100.0 * static_cast<double>(t.tp) / static_cast<double>(denom);
  if (t.tp > 0) {
    s.ass_a = 100.0 * t.ass_sum / static_cast<double>(t.tp);
    s.cls_a = 100.0 * static_cast<double>(t.cls_correct) / static_cast<double>(t.tp);
  }
  s.teta = (s.loc_a + s.ass_a + s.cls_a) / 3.0;
  return s;
}

}  // namespace

EvalReport evaluate(std::span<const OutputTrack> predictions, std::span<const GroundTruthTrack> ground_truth,
                    const EvalConfig& cfg) {
  cfg.validate();
  auto split_of = [&](CategoryId c) -> int {
    const auto it = cfg.splits.find(c);
    if (it == cfg.splits.end()) return -1;
    return it->second == Split::base ? kBase : kNovel;
  };

  std::map<FrameIndex, std::vector<PredBox>> pred_frames;
  std::vector<std::size_t> pred_len(predictions.size(), 0);
  for (std::size_t t = 0; t < predictions.size(); ++t) {
    for (const auto& obs : predictions[t].observations) {
      const CategoryId label = cfg.label_mode == ClassLabelMode::track ? predictions[t].label : obs.category_id;
      pred_frames[obs.frame].push_back({t, obs.bbox, label});
      ++pred_len[t];
    }
  }
  std::map<FrameIndex, std::vector<GtBox>> gt_frames;
  std::vector<std::size_t> gt_len(ground_truth.size(), 0);
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    for (const auto& [frame, box] : ground_truth[g].boxes) {
      gt_frames[frame].push_back({g, box});
      ++gt_len[g];
    }
  }
  std::vector<FrameIndex> frames;
  for (const auto& kv : pred_frames) frames.push_back(kv.first);
  for (const auto& kv : gt_frames) frames.push_back(kv.first);
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

  Tally tally[3];
  for (const auto& p : predictions) {
    tally[kOverall].seen = true;
    if (const int s = split_of(p.label); s >= 0) tally[s].seen = true;
  }
  for (const auto& g : ground_truth) {
    tally[kOverall].seen = true;
    if (const int s = split_of(g.category_id); s >= 0) tally[s].seen = true;
  }

  std::vector<TpRecord> tps;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> tpa;
  std::vector<std::vector<std::size_t>> gt_history(ground_truth.size());
  static const std::vector<PredBox> kNoPreds;
  static const std::vector<GtBox> kNoGts;

  for (const FrameIndex f : frames) {
    const auto pit = pred_frames.find(f);
    const auto git = gt_frames.find(f);
    const auto& pb = pit == pred_frames.end() ? kNoPreds : pit->second;
    const auto& gb = git == gt_frames.end() ? kNoGts : git->second;
    std::vector<BBox> pboxes, gboxes;
    for (const auto& p : pb) pboxes.push_back(p.box);
    for (const auto& g : gb) gboxes.push_back(g.box);
    const FrameMatch m = frame_matching(pboxes, gboxes, cfg.iou_threshold);

    for (const auto& [pi, gi] : m.pairs) {
      const std::size_t pt = pb[pi].track;
      const std::size_t gt = gb[gi].track;
      tps.push_back({pt, gt, pb[pi].label == ground_truth[gt].category_id});
      ++tpa[{pt, gt}];
      gt_history[gt].push_back(pt);
    }
    for (const std::size_t pi : m.unmatched_preds) {
      ++tally[kOverall].fp;
      if (const int s = split_of(pb[pi].label); s >= 0) ++tally[s].fp;
    }
    for (const std::size_t gi : m.unmatched_gts) {
      ++tally[kOverall].fn;
      if (const int s = split_of(ground_truth[gb[gi].track].category_id); s >= 0) ++tally[s].fn;
    }
  }

  for (const auto& tp : tps) {
    const double both = static_cast<double>(tpa[{tp.pred, tp.gt}]);
    const double a = both / (static_cast<double>(gt_len[tp.gt] + pred_len[tp.pred]) - both);
    const int s = split_of(ground_truth[tp.gt].category_id);
    for (const int slot : {static_cast<int>(kOverall), s}) {
      if (slot < 0) continue;
      ++tally[slot].tp;
      tally[slot].ass_sum += a;
      if (tp.label_correct) ++tally[slot].cls_correct;
    }
  }

  EvalReport report;
  report.overall = finish(tally[kOverall]);
  report.base = finish(tally[kBase]);
  report.novel = finish(tally[kNovel]);
  for (const auto& hist : gt_history) {
    for (std::size_t i = 1; i < hist.size(); ++i) {
      if (hist[i] != hist[i - 1]) ++report.id_switches;
    }
  }
  return report;
}

}  // namespace trajkit
