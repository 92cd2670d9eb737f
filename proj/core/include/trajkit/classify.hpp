#pragma once

#include <string>
#include <utility>
#include <vector>

#include "trajkit/fusion.hpp"
#include "trajkit/tcr.hpp"
#include "trajkit/types.hpp"

namespace trajkit {

struct ClipSample {
  FeatureClip rows;
  std::vector<FrameIndex> source_frames;  ///< chronological
};

/// The n_clip highest-confidence observations (ties → earlier frame) in
/// chronological order; short trajectories are returned whole.
ClipSample sample_clip(std::span<const Observation> observations, std::size_t n_clip);
ClipSample sample_clip(const Track& track, std::size_t n_clip);

struct LanguageFeatures {
  Matrix cate;  ///< |V|×d
  Matrix attr;  ///< |V|×d
};

/// Projects both text embedding sets into the visual width: row k of each
/// output is embedding_k · lang_proj.
LanguageFeatures project_language(const Vocabulary& vocab, const Matrix& lang_proj);

/// Cosine of the trajectory feature against every row of F.
Vec affinity(std::span<const double> f_traj, const Matrix& features);

struct ClassifyConfig {
  FusionMechanism fusion = FusionMechanism::average;
  std::size_t n_clip = 5;
  std::size_t heads = 1;
  /// Map cosine scores through (1 + cos) / 2 before triplet selection.
  bool calibrate_scores = false;

  void validate() const;
};

struct TrajectoryClassification {
  std::pair<CategoryId, double> v_cate;
  std::pair<CategoryId, double> v_attr;
  std::pair<CategoryId, double> v_det;
  CategoryId final_label = 0;
  LabelSource final_source = LabelSource::det;

  double final_score() const;
  TrackScores scores() const;
};

/// Inputs of one trajectory as seen by the classifier.
struct TrajectoryView {
  std::span<const Observation> observations;
  std::span<const RetainedPrediction> retained_preds;
};

/// Classifier bound to a vocabulary and weights; language features are
/// projected once at construction. Thread-safe for concurrent classify calls.
class TrajectoryClassifier {
 public:
  /// Throws MissingWeights when the mechanism needs tensors that are absent, or
  /// when no lang_proj is given and the text width differs from `visual_dim`.
  TrajectoryClassifier(const Vocabulary& vocab, const FusionWeights& weights, ClassifyConfig cfg,
                       std::size_t visual_dim);

  TrajectoryClassification classify(const TrajectoryView& trajectory) const;
  TrajectoryClassification classify(const Track& track) const;

  const LanguageFeatures& language() const { return language_; }
  const ClassifyConfig& config() const { return cfg_; }

 private:
  const Vocabulary* vocab_;
  const FusionWeights* weights_;
  ClassifyConfig cfg_;
  LanguageFeatures language_;
};

TrajectoryClassification classify_trajectory(const Track& track, const Vocabulary& vocab,
                                             const FusionWeights& weights, const ClassifyConfig& cfg);

/// "{name}: {description}", the attribute-enriched text used when preparing
/// attr embeddings offline.
std::string build_attribute_text(const std::string& name, const std::string& description);

double logistic(double x);

/// Output form of a finished track: one observation per match carrying the
/// retained category, labelled with the classification result.
OutputTrack to_output_track(const Track& track, const TrajectoryClassification& result, bool with_scores = true);

}  // namespace trajkit
