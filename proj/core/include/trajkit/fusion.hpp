#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "trajkit/io.hpp"
#include "trajkit/linalg.hpp"

namespace trajkit {

/// A sampled trajectory clip: n×d, one embedding per row.
using FeatureClip = Matrix;

struct LayerNormParams {
  Vec gamma;
  Vec beta;
  double eps = 1e-5;

  static LayerNormParams identity(std::size_t d);
};

/// Row-vector convention throughout: Q = X·W_Q + b_Q.
struct AttentionParams {
  Matrix wq, wk, wv, wo;
  Vec bq, bk, bv, bo;

  std::size_t width() const { return wq.rows(); }
  static AttentionParams zeros(std::size_t d);
};

struct MlpParams {
  Matrix w1;  ///< d×h
  Vec b1;
  Matrix w2;  ///< h×d
  Vec b2;

  static MlpParams zeros(std::size_t d, std::size_t hidden);
};

struct ConcatScorerParams {
  Matrix pool_w;  ///< d×d
  Vec pool_b;
  Vec fc_w;       ///< d
  double fc_b = 0.0;
};

/// Parameters on the trainable self-fusion path; also used as its gradient.
struct SelfFusionParams {
  LayerNormParams ln1;
  AttentionParams attn;
  LayerNormParams ln2;
  MlpParams mlp;

  std::size_t width() const { return attn.width(); }
  std::size_t parameter_count() const;
  Vec flatten() const;
  /// Inverse of flatten() using this object's shapes as the template.
  void assign(std::span<const double> flat);
};

struct FusionWeights {
  std::size_t d = 0;
  std::optional<LayerNormParams> ln1, ln2;
  std::optional<AttentionParams> attn, cross;
  std::optional<MlpParams> mlp;
  std::optional<ConcatScorerParams> concat;
  std::optional<Matrix> lang_proj;  ///< d_text×d

  /// Throws MissingWeights when a group on the self-fusion path is absent.
  SelfFusionParams self_params() const;
  void set_self_params(const SelfFusionParams& p);
};

FusionWeights fusion_weights_from_bundle(const WeightBundle& bundle);
WeightBundle to_bundle(const FusionWeights& weights);

struct FusionInitOptions {
  std::size_t d = 16;
  std::size_t hidden = 0;  ///< 0 → 4·d
  std::size_t d_text = 0;  ///< 0 → d; lang_proj starts as identity when equal
  std::uint64_t seed = 0;
  /// Zero W_O and W_2 so the untrained self path equals average fusion.
  bool zero_residual_outputs = true;
  /// Identity value/output maps for attention and cross (used by bench-fusion
  /// so untrained attention fusions stay close to averaging).
  bool identity_values = false;
};

/// Uniform(−1/√fan_in, 1/√fan_in) weights, LN at identity, zero biases.
FusionWeights init_fusion_weights(const FusionInitOptions& options);

// Inference-time operations -------------------------------------------------

Matrix layer_norm(const Matrix& x, const LayerNormParams& p);
Matrix layer_norm(const Matrix& x, std::span<const double> gamma, std::span<const double> beta, double eps);

Matrix self_attention(const Matrix& x, const AttentionParams& w, std::size_t heads);
/// Attention with queries from `q_in` and keys/values from `kv_in`.
Matrix cross_attention(const Matrix& q_in, const Matrix& kv_in, const AttentionParams& w, std::size_t heads);

double gelu(double x);
Matrix mlp_block(const Matrix& x, const MlpParams& w);

Vec fuse_average(const FeatureClip& x);
Vec fuse_attention(const FeatureClip& x, const AttentionParams& w, std::size_t heads);
/// Pre-LN residual block (attention then MLP) followed by mean pooling; with
/// residual = false the literal Avg(MLP(SA(X))) variant is used.
Vec fuse_self(const FeatureClip& x, const SelfFusionParams& w, std::size_t heads, bool residual = true);
Vec fuse_cross(const FeatureClip& x, const AttentionParams& w, std::size_t heads);
double concat_score(const FeatureClip& x, std::span<const double> lang, const AttentionParams& attn,
                    const ConcatScorerParams& scorer, std::size_t heads);

enum class FusionMechanism { average, attention, self, self_noresidual, cross, concat };

const char* to_string(FusionMechanism m);
std::optional<FusionMechanism> parse_fusion(const std::string& text);
/// Whether the mechanism needs a weight bundle at all.
bool needs_weights(FusionMechanism m);

/// Fuses a clip into one embedding; concat has no single embedding and throws.
Vec fuse(FusionMechanism m, const FeatureClip& x, const FusionWeights& w, std::size_t heads);

}  // namespace trajkit
