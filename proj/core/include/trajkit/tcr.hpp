#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "trajkit/linalg.hpp"
#include "trajkit/types.hpp"

namespace trajkit {

enum class SimMode { cosine_only, cosine_plus_bisoftmax };

const char* to_string(SimMode mode);

struct TrackerConfig {
  double alpha_mem = 0.25;  ///< EMA weight of the new observation in the memory update
  double alpha_sim = 0.25;  ///< weight of the memory term in the similarity blend
  double tau_match = 0.4;
  double tau_new = 0.3;     ///< defaults to tau_high
  double tau_high = 0.3;
  double tau_low = 0.1;
  std::size_t n_bank = 15;
  std::size_t n_cat_bank = 5;
  std::uint64_t max_age = 30;
  SimMode sim_mode = SimMode::cosine_plus_bisoftmax;
  double softmax_temperature = 1.0;

  /// Throws Error(InvalidConfig) when a field is out of range.
  void validate() const;
};

enum class TrackState { active, lost, dead };

const char* to_string(TrackState state);

struct RetainedPrediction {
  FrameIndex frame = 0;
  CategoryId category_id = 0;
  double confidence = 0.0;
};

struct Observation {
  FrameIndex frame = 0;
  BBox bbox;
  double confidence = 0.0;
  std::uint32_t det_index = 0;
  Embedding embedding;
};

/// A live trajectory. Stored embeddings keep their raw values; unit-norm
/// copies are cached only for similarity computation.
struct Track {
  TrackId id = 0;
  TrackState state = TrackState::active;
  Vec memory;
  std::deque<Vec> feature_bank;
  std::deque<CategoryId> category_bank;
  std::vector<RetainedPrediction> retained_preds;
  std::vector<Observation> observations;
  FrameIndex last_matched_frame = 0;

  /// Pushes an embedding into the FIFO feature bank (evicting beyond capacity).
  void push_feature(Vec embedding, std::size_t capacity);
  void push_category(CategoryId category, std::size_t capacity);

  /// Sum of the unit-normalised bank entries; kept in step with feature_bank.
  const Vec& bank_unit_sum() const { return bank_unit_sum_; }

 private:
  Vec bank_unit_sum_;
};

struct AssociationEvent {
  enum class Kind { matched, born, discarded, died };

  FrameIndex frame = 0;
  Kind kind = Kind::discarded;
  TrackId track_id = 0;       ///< matched / born / died
  std::uint32_t det_index = 0;  ///< matched / born / discarded
  double score = 0.0;         ///< matched: association score; otherwise the best score seen (or 0)
};

const char* to_string(AssociationEvent::Kind kind);

// Pure helpers --------------------------------------------------------------

/// alpha·det + (1−alpha)·memory, elementwise.
Vec update_memory(std::span<const double> memory, std::span<const double> det_emb, double alpha_mem);

/// a·b / (‖a‖‖b‖). Throws ZeroNorm on a zero vector, LengthMismatch on sizes.
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const float> a, std::span<const float> b);

/// ½·(row-softmax + column-softmax) of logits/temperature.
Matrix bisoftmax(const Matrix& logits, double temperature);

/// Most frequent id and its share; ties go to the id occurring latest in the list.
std::pair<CategoryId, double> majority_vote(std::span<const CategoryId> items);

// Association ---------------------------------------------------------------

/// Track×detection association scores (memory + bank cosine blend, optionally
/// averaged with its bi-directional softmax).
Matrix score_matrix(std::span<const Track* const> tracks, std::span<const DetectionRecord> dets,
                    const TrackerConfig& cfg);
Matrix score_matrix(std::span<const Track> tracks, std::span<const DetectionRecord> dets,
                    const TrackerConfig& cfg);

/// Greedy, confidence-ordered matching. Born events receive consecutive ids
/// starting at first_new_id. `tracks[i]` must be the candidate behind row i of
/// `scores`; dead tracks are never matched.
std::vector<AssociationEvent> associate_frame(std::span<const Track* const> tracks,
                                              std::span<const DetectionRecord> dets, const Matrix& scores,
                                              const TrackerConfig& cfg, TrackId first_new_id = 0,
                                              FrameIndex frame = 0);

/// Category retained for a detection matched to `track` this frame; updates
/// the category bank and the retained predictions.
CategoryId retain_category(Track& track, const DetectionRecord& matched_det, const TrackerConfig& cfg);

/// Frame-by-frame tracker state for one sequence. Not thread-safe; distinct
/// sequences use distinct instances.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg);

  /// Processes one frame; frames must be strictly increasing.
  std::vector<AssociationEvent> step(FrameIndex frame, std::span<const DetectionRecord> dets);

  const std::vector<Track>& tracks() const { return tracks_; }
  std::vector<Track> release_tracks() { return std::move(tracks_); }
  const TrackerConfig& config() const { return cfg_; }

  /// Row-aligned candidates and scores of the most recent step (for debugging dumps).
  const Matrix& last_scores() const { return last_scores_; }
  const std::vector<TrackId>& last_candidates() const { return last_candidates_; }

 private:
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  TrackId next_id_ = 1;
  bool started_ = false;
  FrameIndex last_frame_ = 0;
  Matrix last_scores_;
  std::vector<TrackId> last_candidates_;
};

struct SequenceResult {
  std::vector<Track> tracks;
  std::vector<AssociationEvent> events;
};

/// Runs the tracker over every frame in order and returns all tracks ever born.
SequenceResult run_sequence_with_events(const FrameMap& dets_by_frame, const TrackerConfig& cfg);
std::vector<Track> run_sequence(const FrameMap& dets_by_frame, const TrackerConfig& cfg);

}  // namespace trajkit
