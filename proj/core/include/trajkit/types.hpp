#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace trajkit {

using FrameIndex = std::uint64_t;
using CategoryId = std::uint32_t;
using TrackId = std::uint64_t;

/// Appearance embedding as delivered by the detector (f32 on disk).
using Embedding = std::vector<float>;

/// Axis-aligned box in pixels, top-left corner plus size.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool valid() const;
  double area() const { return w * h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct DetectionRecord {
  FrameIndex frame = 0;
  BBox bbox;
  double confidence = 0.0;
  CategoryId category_id = 0;
  double category_score = 0.0;
  Embedding embedding;
};

/// Detections grouped per frame; std::map keeps frames ascending.
using FrameMap = std::map<FrameIndex, std::vector<DetectionRecord>>;

enum class Split { base, novel };

const char* to_string(Split split);
std::optional<Split> parse_split(const std::string& text);

struct VocabularyEntry {
  CategoryId category_id = 0;
  std::string name;
  Split split = Split::base;
  std::string description;
  std::vector<float> cate_embedding;
  std::vector<float> attr_embedding;
};

/// Validated category list with O(1) id lookup.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Validates ids, embedding widths and finiteness; throws trajkit::Error.
  static Vocabulary from_entries(std::vector<VocabularyEntry> entries, std::size_t dim_text);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t dim_text() const { return dim_text_; }
  const std::vector<VocabularyEntry>& entries() const { return entries_; }
  const VocabularyEntry& operator[](std::size_t i) const { return entries_[i]; }

  bool contains(CategoryId id) const { return index_.count(id) != 0; }
  const VocabularyEntry* find(CategoryId id) const;

  /// Category → split map, used by the evaluator.
  std::map<CategoryId, Split> splits() const;

 private:
  std::vector<VocabularyEntry> entries_;
  std::unordered_map<CategoryId, std::size_t> index_;
  std::size_t dim_text_ = 0;
};

struct GroundTruthTrack {
  TrackId track_id = 0;
  CategoryId category_id = 0;
  std::map<FrameIndex, BBox> boxes;
};

/// One per-frame observation of a finished trajectory, as written to tracks.jsonl.
struct TrackObservation {
  FrameIndex frame = 0;
  BBox bbox;
  double confidence = 0.0;
  /// Category retained by the association step for this frame.
  CategoryId category_id = 0;
  /// Index of the source detection within its frame of the detection stream.
  std::uint32_t det_index = 0;

  friend bool operator==(const TrackObservation&, const TrackObservation&) = default;
};

enum class LabelSource { cate, attr, det };

const char* to_string(LabelSource source);
std::optional<LabelSource> parse_label_source(const std::string& text);

struct TrackScores {
  CategoryId v_cate = 0;
  double s_cate = 0.0;
  CategoryId v_attr = 0;
  double s_attr = 0.0;
  CategoryId v_det = 0;
  double s_det = 0.0;

  friend bool operator==(const TrackScores&, const TrackScores&) = default;
};

/// Finalized, labelled trajectory: the logical content of tracks.jsonl.
struct OutputTrack {
  TrackId track_id = 0;
  CategoryId label = 0;
  LabelSource label_source = LabelSource::det;
  std::optional<TrackScores> scores;
  std::vector<TrackObservation> observations;

  friend bool operator==(const OutputTrack&, const OutputTrack&) = default;
};

}  // namespace trajkit
