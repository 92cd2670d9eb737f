#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "trajkit/classify.hpp"
#include "trajkit/synth.hpp"
#include "trajkit/tcr.hpp"

namespace trajkit::cli {

/// Runs fn(0..n-1) on up to `threads` workers. Each index is handled exactly
/// once; callers store results by index so the outcome is order-independent.
/// The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct ScoreRow {
  FrameIndex frame = 0;
  TrackId track_id = 0;
  std::size_t det_index = 0;
  double score = 0.0;
};

struct PipelineResult {
  std::vector<OutputTrack> tracks;
  std::vector<AssociationEvent> events;
  std::vector<ScoreRow> scores;  ///< filled only when requested
};

/// Association over the whole sequence, then classification of every track.
PipelineResult run_pipeline(const FrameMap& detections, const Vocabulary& vocabulary, const FusionWeights& weights,
                            const TrackerConfig& tracker_cfg, const ClassifyConfig& classify_cfg,
                            std::size_t threads, bool keep_scores = false);

/// Classifies already associated tracks; embeddings are looked up through
/// (frame, det_index) in `detections`.
std::vector<OutputTrack> classify_tracks(const std::vector<OutputTrack>& tracks, const FrameMap& detections,
                                         const Vocabulary& vocabulary, const FusionWeights& weights,
                                         const ClassifyConfig& classify_cfg, std::size_t threads);

/// Scene view of real files for pair construction: each detection is tied to
/// the ground-truth identity it overlaps (IoU >= 0.5), if any.
SynthScene scene_from_files(const FrameMap& detections, const std::vector<GroundTruthTrack>& ground_truth);

}  // namespace trajkit::cli
