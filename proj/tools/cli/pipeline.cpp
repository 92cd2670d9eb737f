#include "cli/pipeline.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "trajkit/error.hpp"
#include "trajkit/eval.hpp"

namespace trajkit::cli {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

std::size_t visual_width(const FrameMap& detections, const Vocabulary& vocabulary) {
  for (const auto& [frame, dets] : detections) {
    if (!dets.empty()) return dets.front().embedding.size();
  }
  return vocabulary.dim_text();
}

}  // namespace

PipelineResult run_pipeline(const FrameMap& detections, const Vocabulary& vocabulary, const FusionWeights& weights,
                            const TrackerConfig& tracker_cfg, const ClassifyConfig& classify_cfg,
                            std::size_t threads, bool keep_scores) {
  // Built first so a missing weight group fails before any work is done.
  const TrajectoryClassifier classifier(vocabulary, weights, classify_cfg, visual_width(detections, vocabulary));

  PipelineResult result;
  Tracker tracker(tracker_cfg);
  for (const auto& [frame, dets] : detections) {
    auto events = tracker.step(frame, dets);
    result.events.insert(result.events.end(), events.begin(), events.end());
    if (keep_scores) {
      const Matrix& s = tracker.last_scores();
      const auto& ids = tracker.last_candidates();
      for (std::size_t r = 0; r < s.rows(); ++r) {
        for (std::size_t c = 0; c < s.cols(); ++c) result.scores.push_back({frame, ids[r], c, s(r, c)});
      }
    }
  }
  const std::vector<Track> tracks = tracker.release_tracks();
  result.tracks.resize(tracks.size());
  parallel_for(tracks.size(), threads, [&](std::size_t i) {
    result.tracks[i] = to_output_track(tracks[i], classifier.classify(tracks[i]));
  });
  return result;
}

std::vector<OutputTrack> classify_tracks(const std::vector<OutputTrack>& tracks, const FrameMap& detections,
                                         const Vocabulary& vocabulary, const FusionWeights& weights,
                                         const ClassifyConfig& classify_cfg, std::size_t threads) {
  const TrajectoryClassifier classifier(vocabulary, weights, classify_cfg, visual_width(detections, vocabulary));
  std::vector<OutputTrack> out(tracks.size());
  parallel_for(tracks.size(), threads, [&](std::size_t i) {
    const OutputTrack& t = tracks[i];
    std::vector<Observation> observations;
    std::vector<RetainedPrediction> retained;
    for (const auto& o : t.observations) {
      const auto it = detections.find(o.frame);
      if (it == detections.end() || o.det_index >= it->second.size()) {
        throw Error(ErrorCode::MissingEmbedding, "track " + std::to_string(t.track_id) + " refers to frame " +
                                                     std::to_string(o.frame) + " det " + std::to_string(o.det_index) +
                                                     ", absent from the detections");
      }
      observations.push_back({o.frame, o.bbox, o.confidence, o.det_index, it->second[o.det_index].embedding});
      retained.push_back({o.frame, o.category_id, o.confidence});
    }
    const TrajectoryClassification c = classifier.classify(TrajectoryView{observations, retained});
    OutputTrack labelled = t;
    labelled.label = c.final_label;
    labelled.label_source = c.final_source;
    labelled.scores = c.scores();
    out[i] = std::move(labelled);
  });
  return out;
}

SynthScene scene_from_files(const FrameMap& detections, const std::vector<GroundTruthTrack>& ground_truth) {
  SynthScene scene;
  scene.detections = detections;
  scene.gt_tracks = ground_truth;
  scene.prototypes.resize(ground_truth.size());
  for (const auto& g : ground_truth) scene.identity_category.push_back(g.category_id);
  for (const auto& [frame, dets] : detections) {
    std::vector<BBox> pred_boxes, gt_boxes;
    std::vector<std::size_t> gt_index;
    for (const auto& d : dets) pred_boxes.push_back(d.bbox);
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const auto it = ground_truth[g].boxes.find(frame);
      if (it == ground_truth[g].boxes.end()) continue;
      gt_boxes.push_back(it->second);
      gt_index.push_back(g);
    }
    auto& src = scene.sources[frame];
    src.assign(dets.size(), std::nullopt);
    for (const auto& [p, g] : frame_matching(pred_boxes, gt_boxes, 0.5).pairs) src[p] = gt_index[g];
  }
  return scene;
}

}  // namespace trajkit::cli
