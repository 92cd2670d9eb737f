#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajkit/types.hpp"

namespace trajkit {

// ---------------------------------------------------------------------------
// Detection stream (detections.jsonl, optional .embin sidecar)
// ---------------------------------------------------------------------------

struct DetectionLoadOptions {
  /// Multiplier applied to every raw confidence before clamping to [0,1].
  double score_scale = 1.0;
  /// When set, every category id must exist in this vocabulary.
  const Vocabulary* vocabulary = nullptr;
  /// Sidecar used by lines carrying "emb_ref". Defaults to the detections
  /// path with its extension replaced by ".embin".
  std::optional<std::filesystem::path> sidecar;
};

/// Records are grouped by frame (ascending). Within a frame the records are put
/// in a canonical order (confidence descending, then box, category, embedding)
/// so the result does not depend on line order; det indices refer to it.
FrameMap load_detections(const std::filesystem::path& path, const DetectionLoadOptions& options = {});
FrameMap load_detections(const std::filesystem::path& path, double score_scale,
                         const Vocabulary* vocabulary = nullptr);

/// Writes one line per record in frame order. With a sidecar path, embeddings
/// go to the sidecar and lines carry "emb_ref" instead of inline arrays.
void write_detections(const FrameMap& detections, const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& sidecar = std::nullopt);

/// Strict weak order used by canonicalize_frame.
bool canonical_less(const DetectionRecord& a, const DetectionRecord& b);
void canonicalize_frame(std::vector<DetectionRecord>& records);

struct EmbeddingTable {
  std::uint32_t dim = 0;
  /// count × dim, row-major.
  std::vector<float> values;

  std::size_t count() const { return dim == 0 ? 0 : values.size() / dim; }
};

inline constexpr std::uint16_t kEmbinVersion = 1;

EmbeddingTable read_embin(const std::filesystem::path& path);
void write_embin(const EmbeddingTable& table, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Vocabulary (vocabulary.json)
// ---------------------------------------------------------------------------

Vocabulary load_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const Vocabulary& vocabulary, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Weight bundle (.twb)
// ---------------------------------------------------------------------------

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t numel() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct WeightBundle {
  std::uint16_t version = 1;
  /// Embedding width every named tensor is consistent with (0 when no
  /// width-carrying tensor is present).
  std::uint32_t d = 0;
  std::map<std::string, Tensor> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
};

inline constexpr std::uint16_t kWeightBundleVersion = 1;

/// Checks every recognised tensor name against the shape it must have for a
/// common width d (and MLP hidden width / text width); sets bundle.d.
void validate_bundle(WeightBundle& bundle);

WeightBundle load_weights(const std::filesystem::path& path);
void save_weights(const WeightBundle& bundle, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Ground truth (groundtruth.jsonl)
// ---------------------------------------------------------------------------

std::vector<GroundTruthTrack> load_groundtruth(const std::filesystem::path& path);
void write_groundtruth(const std::vector<GroundTruthTrack>& tracks, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Trajectory output (tracks.jsonl)
// ---------------------------------------------------------------------------

/// One line per (track, frame) observation, ordered by track id then frame.
void write_tracks(const std::vector<OutputTrack>& tracks, const std::filesystem::path& path);
std::vector<OutputTrack> read_tracks(const std::filesystem::path& path);

/// Shortest round-tripping decimal text for a float / double.
std::string format_number(float value);
std::string format_number(double value);

}  // namespace trajkit
