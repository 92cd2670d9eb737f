#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "trajkit/random.hpp"
#include "trajkit/train.hpp"
#include "trajkit/types.hpp"

namespace trajkit {

struct OcclusionWindow {
  std::size_t identity = 0;
  FrameIndex start = 0;  ///< first hidden frame
  FrameIndex end = 0;    ///< one past the last hidden frame
};

struct SynthConfig {
  std::size_t n_identities = 10;
  std::size_t n_frames = 50;
  std::size_t n_categories = 4;
  std::size_t d = 32;
  /// Per-coordinate standard deviation of the embedding noise.
  double noise_sigma = 0.0;
  std::vector<OcclusionWindow> occlusions;
  double miss_rate = 0.0;
  double fp_rate = 0.0;  ///< mean false positives per frame
  double label_flip_prob = 0.0;
  /// Beta(conf_alpha, conf_beta) confidence of true detections.
  double conf_alpha = 8.0;
  double conf_beta = 2.0;
  /// Beta parameters of false-positive confidences.
  double fp_conf_alpha = 2.0;
  double fp_conf_beta = 8.0;
  /// Weight of the category prototype inside each identity prototype; 0 gives
  /// identities drawn uniformly on the sphere, unrelated to their class.
  double category_pull = 0.5;
  double scene_width = 1920.0;
  double scene_height = 1080.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthScene {
  std::vector<GroundTruthTrack> gt_tracks;
  FrameMap detections;
  /// Per frame, aligned with `detections`: source identity, or nullopt for a false positive.
  std::map<FrameIndex, std::vector<std::optional<std::size_t>>> sources;
  std::vector<std::vector<double>> prototypes;           ///< per identity, unit norm
  std::vector<std::vector<double>> category_prototypes;  ///< per category, unit norm
  std::vector<CategoryId> identity_category;
  Vocabulary vocabulary;
};

/// Fully determined by cfg (including cfg.seed).
SynthScene gen_scene(const SynthConfig& cfg);

/// Unit vector drawn uniformly on the sphere of dimension d.
Vec random_unit(Rng& rng, std::size_t d);

/// normalize(prototype + sigma·N(0, I)).
Vec noisy_embedding(Rng& rng, std::span<const double> prototype, double sigma);

struct Augmentations {
  bool rotation = false;
  double erase_fraction = 0.0;  ///< share of coordinates zeroed
  double scale_min = 1.0;       ///< scaling factor range; both 1 disables it
  double scale_max = 1.0;
};

/// Rotation in a random coordinate plane by a random angle, applied to every row.
Matrix rotate_clip(const Matrix& clip, Rng& rng);
/// Zeroes round(fraction·d) randomly chosen coordinates in every row.
Matrix erase_clip(const Matrix& clip, double fraction, Rng& rng);
/// Multiplies by a uniform factor then renormalises each row.
Matrix scale_clip(const Matrix& clip, double lo, double hi, Rng& rng);

/// Alternating positive (same category, distinct identities when possible)
/// and negative (different categories) clip pairs sampled from the scene's
/// true detections.
std::vector<TrainPair> make_train_pairs(const SynthScene& scene, std::size_t n_clip, const Augmentations& aug,
                                        std::size_t n_pairs, std::uint64_t seed);

}  // namespace trajkit
