#include "trajkit/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trajkit/error.hpp"

namespace trajkit {

ClipSample sample_clip(std::span<const Observation> observations, std::size_t n_clip) {
  if (observations.empty()) throw Error(ErrorCode::EmptyInput, "sample_clip on an empty trajectory");
  if (n_clip == 0) throw Error(ErrorCode::InvalidConfig, "n_clip must be positive");
  std::vector<std::size_t> idx(observations.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (observations.size() > n_clip) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (observations[a].confidence != observations[b].confidence) {
        return observations[a].confidence > observations[b].confidence;
      }
      return observations[a].frame < observations[b].frame;
    });
    idx.resize(n_clip);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return observations[a].frame < observations[b].frame; });
  }
  const std::size_t d = observations[idx.front()].embedding.size();
  ClipSample clip{Matrix(idx.size(), d), {}};
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& obs = observations[idx[r]];
    if (obs.embedding.size() != d) throw Error(ErrorCode::DimMismatch, "sample_clip: ragged embeddings");
    std::copy(obs.embedding.begin(), obs.embedding.end(), clip.rows.row(r).begin());
    clip.source_frames.push_back(obs.frame);
  }
  return clip;
}

ClipSample sample_clip(const Track& track, std::size_t n_clip) { return sample_clip(track.observations, n_clip); }

LanguageFeatures project_language(const Vocabulary& vocab, const Matrix& lang_proj) {
  if (lang_proj.rows() != vocab.dim_text()) {
    throw Error(ErrorCode::DimMismatch, "lang_proj has " + std::to_string(lang_proj.rows()) +
                                            " rows, vocabulary text width is " + std::to_string(vocab.dim_text()));
  }
  LanguageFeatures out{Matrix(vocab.size(), lang_proj.cols()), Matrix(vocab.size(), lang_proj.cols())};
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const Vec cate = vec_mat(to_double(vocab[k].cate_embedding), lang_proj);
    const Vec attr = vec_mat(to_double(vocab[k].attr_embedding), lang_proj);
    std::copy(cate.begin(), cate.end(), out.cate.row(k).begin());
    std::copy(attr.begin(), attr.end(), out.attr.row(k).begin());
  }
  return out;
}

Vec affinity(std::span<const double> f_traj, const Matrix& features) {
  Vec out(features.rows());
  for (std::size_t k = 0; k < features.rows(); ++k) out[k] = cosine(f_traj, features.row(k));
  return out;
}

void ClassifyConfig::validate() const {
  if (n_clip == 0) throw Error(ErrorCode::InvalidConfig, "n_clip must be positive");
  if (heads == 0) throw Error(ErrorCode::InvalidConfig, "heads must be positive");
}

double TrajectoryClassification::final_score() const {
  switch (final_source) {
    case LabelSource::cate: return v_cate.second;
    case LabelSource::attr: return v_attr.second;
    case LabelSource::det: return v_det.second;
  }
  return v_det.second;
}

TrackScores TrajectoryClassification::scores() const {
  return {v_cate.first, v_cate.second, v_attr.first, v_attr.second, v_det.first, v_det.second};
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void require_weights(FusionMechanism m, const FusionWeights& w) {
  switch (m) {
    case FusionMechanism::average: return;
    case FusionMechanism::attention:
      if (!w.attn) throw Error(ErrorCode::MissingWeights, "fusion=attention needs attn.* tensors");
      return;
    case FusionMechanism::self: (void)w.self_params(); return;
    case FusionMechanism::self_noresidual:
      if (!w.attn || !w.mlp) throw Error(ErrorCode::MissingWeights, "fusion=self_noresidual needs attn.*, mlp.*");
      return;
    case FusionMechanism::cross:
      if (!w.cross) throw Error(ErrorCode::MissingWeights, "fusion=cross needs cross.* tensors");
      return;
    case FusionMechanism::concat:
      if (!w.attn || !w.concat) throw Error(ErrorCode::MissingWeights, "fusion=concat needs attn.*, concat.*");
      return;
  }
}

std::pair<CategoryId, double> best_of(const Vocabulary& vocab, const Vec& scores) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return {vocab[best].category_id, scores[best]};
}

}  // namespace

TrajectoryClassifier::TrajectoryClassifier(const Vocabulary& vocab, const FusionWeights& weights,
                                           ClassifyConfig cfg, std::size_t visual_dim)
    : vocab_(&vocab), weights_(&weights), cfg_(cfg) {
  cfg_.validate();
  if (vocab.empty()) throw Error(ErrorCode::EmptyInput, "classification needs a nonempty vocabulary");
  require_weights(cfg_.fusion, weights);
  if (weights.lang_proj) {
    language_ = project_language(vocab, *weights.lang_proj);
  } else if (vocab.dim_text() == visual_dim) {
    language_ = project_language(vocab, Matrix::identity(visual_dim));
  } else {
    throw Error(ErrorCode::MissingWeights, "text width " + std::to_string(vocab.dim_text()) +
                                               " differs from visual width " + std::to_string(visual_dim) +
                                               " and no lang_proj.w was supplied");
  }
  if (language_.cate.cols() != visual_dim) {
    throw Error(ErrorCode::DimMismatch, "projected language width differs from visual width");
  }
}

TrajectoryClassification TrajectoryClassifier::classify(const TrajectoryView& trajectory) const {
  const ClipSample clip = sample_clip(trajectory.observations, cfg_.n_clip);
  const Vocabulary& vocab = *vocab_;
  TrajectoryClassification out;

  Vec z_cate(vocab.size());
  Vec z_attr(vocab.size());
  if (cfg_.fusion == FusionMechanism::concat) {
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      z_cate[k] = logistic(concat_score(clip.rows, language_.cate.row(k), *weights_->attn, *weights_->concat, cfg_.heads));
      z_attr[k] = logistic(concat_score(clip.rows, language_.attr.row(k), *weights_->attn, *weights_->concat, cfg_.heads));
    }
  } else {
    const Vec f_traj = fuse(cfg_.fusion, clip.rows, *weights_, cfg_.heads);
    z_cate = affinity(f_traj, language_.cate);
    z_attr = affinity(f_traj, language_.attr);
    if (cfg_.calibrate_scores) {
      for (double& z : z_cate) z = 0.5 * (1.0 + z);
      for (double& z : z_attr) z = 0.5 * (1.0 + z);
    }
  }
  out.v_cate = best_of(vocab, z_cate);
  out.v_attr = best_of(vocab, z_attr);

  if (trajectory.retained_preds.empty()) {
    throw Error(ErrorCode::EmptyInput, "trajectory has no retained category predictions");
  }
  std::vector<CategoryId> retained;
  retained.reserve(trajectory.retained_preds.size());
  for (const auto& r : trajectory.retained_preds) retained.push_back(r.category_id);
  out.v_det = majority_vote(retained);

  // Ties prefer the online vote, then name matching, then attribute matching.
  out.final_label = out.v_det.first;
  out.final_source = LabelSource::det;
  double best = out.v_det.second;
  if (out.v_cate.second > best) {
    best = out.v_cate.second;
    out.final_label = out.v_cate.first;
    out.final_source = LabelSource::cate;
  }
  if (out.v_attr.second > best) {
    out.final_label = out.v_attr.first;
    out.final_source = LabelSource::attr;
  }
  return out;
}

TrajectoryClassification TrajectoryClassifier::classify(const Track& track) const {
  return classify(TrajectoryView{track.observations, track.retained_preds});
}

TrajectoryClassification classify_trajectory(const Track& track, const Vocabulary& vocab,
                                             const FusionWeights& weights, const ClassifyConfig& cfg) {
  if (track.observations.empty()) throw Error(ErrorCode::EmptyInput, "classify_trajectory on an empty track");
  const TrajectoryClassifier classifier(vocab, weights, cfg, track.observations.front().embedding.size());
  return classifier.classify(track);
}

std::string build_attribute_text(const std::string& name, const std::string& description) {
  if (name.empty()) throw Error(ErrorCode::InvalidConfig, "category name must be nonempty");
  return name + ": " + description;
}

OutputTrack to_output_track(const Track& track, const TrajectoryClassification& result, bool with_scores) {
  if (track.retained_preds.size() != track.observations.size()) {
    throw Error(ErrorCode::LengthMismatch, "track observations and retained predictions differ in length");
  }
  OutputTrack out;
  out.track_id = track.id;
  out.label = result.final_label;
  out.label_source = result.final_source;
  if (with_scores) out.scores = result.scores();
  out.observations.reserve(track.observations.size());
  for (std::size_t k = 0; k < track.observations.size(); ++k) {
    const auto& o = track.observations[k];
    out.observations.push_back({o.frame, o.bbox, o.confidence, track.retained_preds[k].category_id, o.det_index});
  }
  return out;
}

}  // namespace trajkit
