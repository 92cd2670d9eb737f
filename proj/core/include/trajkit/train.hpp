#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajkit/fusion.hpp"

namespace trajkit {

enum class Distance { euclidean, cosine_distance };

const char* to_string(Distance d);
std::optional<Distance> parse_distance(const std::string& text);

struct TrainPair {
  FeatureClip clip_a;
  FeatureClip clip_b;
  int y = 0;  ///< 1 = same class
};

struct TrainConfig {
  double margin = 0.5;
  Distance distance = Distance::euclidean;
  double learning_rate = 0.05;
  std::size_t steps = 500;
  std::size_t batch_size = 16;  ///< 0 or >= #pairs → full batch
  std::uint64_t seed = 0;
  std::size_t heads = 1;

  void validate() const;
};

/// ½(y·D² + (1−y)·max(0, m−D)²) with D euclidean or 1 − cosine.
double contrastive_loss(std::span<const double> fa, std::span<const double> fb, int y, double margin,
                        Distance distance);

/// Central differences per coordinate, in double precision.
Vec numeric_gradient(const std::function<double(std::span<const double>)>& f, std::span<const double> theta,
                     double eps);

/// Loss of one pair: both clips go through fuse_self, are L2-normalised, and
/// are compared with contrastive_loss.
double pair_loss(const TrainPair& pair, const SelfFusionParams& params, const TrainConfig& cfg);
double mean_loss(std::span<const TrainPair> pairs, const SelfFusionParams& params, const TrainConfig& cfg);

struct LossGradient {
  double loss = 0.0;
  SelfFusionParams grad;  ///< same shapes as the parameters
};

/// Exact reverse-mode derivatives of pair_loss w.r.t. every tensor on the
/// self-fusion path.
LossGradient analytic_gradients(const TrainPair& pair, const SelfFusionParams& params, const TrainConfig& cfg);

struct TrainResult {
  SelfFusionParams params;
  std::vector<double> loss_curve;  ///< mean batch loss before each update
};

/// Plain gradient descent; deterministic for a fixed seed. Throws
/// Error(Diverged) when the loss becomes non-finite.
TrainResult train_fusion(std::span<const TrainPair> pairs, SelfFusionParams init, const TrainConfig& cfg);

}  // namespace trajkit
