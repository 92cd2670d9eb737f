#include "trajkit/tcr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "trajkit/error.hpp"

namespace trajkit {

const char* to_string(SimMode mode) {
  return mode == SimMode::cosine_only ? "cosine_only" : "cosine_plus_bisoftmax";
}

const char* to_string(TrackState state) {
  switch (state) {
    case TrackState::active: return "active";
    case TrackState::lost: return "lost";
    case TrackState::dead: return "dead";
  }
  return "dead";
}

const char* to_string(AssociationEvent::Kind kind) {
  switch (kind) {
    case AssociationEvent::Kind::matched: return "matched";
    case AssociationEvent::Kind::born: return "born";
    case AssociationEvent::Kind::discarded: return "discarded";
    case AssociationEvent::Kind::died: return "died";
  }
  return "discarded";
}

void TrackerConfig::validate() const {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!in_unit(alpha_mem)) throw Error(ErrorCode::InvalidConfig, "alpha_mem must lie in [0,1]");
  if (!in_unit(alpha_sim)) throw Error(ErrorCode::InvalidConfig, "alpha_sim must lie in [0,1]");
  for (double tau : {tau_match, tau_new, tau_high, tau_low}) {
    if (!std::isfinite(tau)) throw Error(ErrorCode::InvalidConfig, "thresholds must be finite");
  }
  if (tau_low > tau_high) throw Error(ErrorCode::InvalidConfig, "tau_low must not exceed tau_high");
  if (n_bank == 0) throw Error(ErrorCode::InvalidConfig, "n_bank must be positive");
  if (n_cat_bank == 0) throw Error(ErrorCode::InvalidConfig, "n_cat_bank must be positive");
  if (max_age == 0) throw Error(ErrorCode::InvalidConfig, "max_age must be positive");
  if (!(softmax_temperature > 0.0) || !std::isfinite(softmax_temperature)) {
    throw Error(ErrorCode::InvalidConfig, "softmax_temperature must be positive");
  }
}

namespace {

Vec unit(std::span<const double> v) {
  const double n = l2_norm(v);
  if (!(n > 0.0)) throw Error(ErrorCode::ZeroNorm, "zero-norm embedding");
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

}  // namespace

void Track::push_feature(Vec embedding, std::size_t capacity) {
  feature_bank.push_back(std::move(embedding));
  while (feature_bank.size() > capacity) feature_bank.pop_front();
  bank_unit_sum_.assign(feature_bank.front().size(), 0.0);
  for (const auto& e : feature_bank) {
    const Vec u = unit(e);
    for (std::size_t i = 0; i < u.size(); ++i) bank_unit_sum_[i] += u[i];
  }
}

void Track::push_category(CategoryId category, std::size_t capacity) {
  category_bank.push_back(category);
  while (category_bank.size() > capacity) category_bank.pop_front();
}

Vec update_memory(std::span<const double> memory, std::span<const double> det_emb, double alpha_mem) {
  if (memory.size() != det_emb.size()) {
    throw Error(ErrorCode::LengthMismatch, "update_memory: memory and detection widths differ");
  }
  Vec out(memory.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha_mem * det_emb[i] + (1.0 - alpha_mem) * memory[i];
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "cosine: widths differ");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ZeroNorm, "cosine of a zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double cosine(std::span<const float> a, std::span<const float> b) {
  const Vec da = to_double(a);
  const Vec db = to_double(b);
  return cosine(da, db);
}

Matrix bisoftmax(const Matrix& logits, double temperature) {
  const std::size_t T = logits.rows();
  const std::size_t D = logits.cols();
  Matrix row_sm(T, D);
  Matrix col_sm(T, D);
  for (std::size_t t = 0; t < T; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < D; ++d) mx = std::max(mx, logits(t, d) / temperature);
    double sum = 0.0;
    for (std::size_t d = 0; d < D; ++d) sum += row_sm(t, d) = std::exp(logits(t, d) / temperature - mx);
    for (std::size_t d = 0; d < D; ++d) row_sm(t, d) /= sum;
  }
  for (std::size_t d = 0; d < D; ++d) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < T; ++t) mx = std::max(mx, logits(t, d) / temperature);
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) sum += col_sm(t, d) = std::exp(logits(t, d) / temperature - mx);
    for (std::size_t t = 0; t < T; ++t) col_sm(t, d) /= sum;
  }
  Matrix out(T, D);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = 0.5 * (row_sm.data()[i] + col_sm.data()[i]);
  return out;
}

std::pair<CategoryId, double> majority_vote(std::span<const CategoryId> items) {
  if (items.empty()) throw Error(ErrorCode::EmptyInput, "majority_vote of an empty list");
  std::map<CategoryId, std::pair<std::size_t, std::size_t>> tally;  // id -> (count, last position)
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& entry = tally[items[i]];
    ++entry.first;
    entry.second = i;
  }
  auto best = tally.begin();
  for (auto it = tally.begin(); it != tally.end(); ++it) {
    if (it->second.first > best->second.first ||
        (it->second.first == best->second.first && it->second.second > best->second.second)) {
      best = it;
    }
  }
  return {best->first, static_cast<double>(best->second.first) / static_cast<double>(items.size())};
}

Matrix score_matrix(std::span<const Track* const> tracks, std::span<const DetectionRecord> dets,
                    const TrackerConfig& cfg) {
  const std::size_t T = tracks.size();
  const std::size_t D = dets.size();
  Matrix raw(T, D);
  if (T == 0 || D == 0) return raw;

  std::vector<Vec> det_units;
  det_units.reserve(D);
  for (const auto& det : dets) det_units.push_back(unit(to_double(det.embedding)));

  for (std::size_t t = 0; t < T; ++t) {
    const Track& track = *tracks[t];
    if (track.feature_bank.empty()) {
      throw Error(ErrorCode::EmptyInput, "track " + std::to_string(track.id) + " has an empty feature bank");
    }
    const Vec mem_unit = unit(track.memory);
    // mean_j cos(det, bank_j) == det_unit · (Σ_j bank_unit_j) / |bank|
    Vec bank_mean = track.bank_unit_sum();
    const double inv = 1.0 / static_cast<double>(track.feature_bank.size());
    for (double& v : bank_mean) v *= inv;
    for (std::size_t d = 0; d < D; ++d) {
      if (det_units[d].size() != mem_unit.size()) {
        throw Error(ErrorCode::LengthMismatch, "score_matrix: detection width differs from track memory");
      }
      const double c_mem = std::clamp(dot(det_units[d], mem_unit), -1.0, 1.0);
      const double c_bank = dot(det_units[d], bank_mean);
      raw(t, d) = cfg.alpha_sim * c_mem + (1.0 - cfg.alpha_sim) * c_bank;
    }
  }
  if (cfg.sim_mode == SimMode::cosine_only) return raw;

  // The dot-product logits of unit-normalised embeddings coincide with the
  // cosine blend, so the softmax runs on the same matrix.
  const Matrix soft = bisoftmax(raw, cfg.softmax_temperature);
  Matrix out(T, D);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = 0.5 * (raw.data()[i] + soft.data()[i]);
  return out;
}

Matrix score_matrix(std::span<const Track> tracks, std::span<const DetectionRecord> dets,
                    const TrackerConfig& cfg) {
  std::vector<const Track*> ptrs;
  ptrs.reserve(tracks.size());
  for (const auto& t : tracks) ptrs.push_back(&t);
  return score_matrix(std::span<const Track* const>(ptrs), dets, cfg);
}

std::vector<AssociationEvent> associate_frame(std::span<const Track* const> tracks,
                                              std::span<const DetectionRecord> dets, const Matrix& scores,
                                              const TrackerConfig& cfg, TrackId first_new_id, FrameIndex frame) {
  if (scores.rows() != tracks.size() || (scores.cols() != dets.size() && !tracks.empty())) {
    throw Error(ErrorCode::ShapeMismatch, "associate_frame: score matrix must be tracks × detections");
  }
  std::vector<std::uint32_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return dets[a].confidence > dets[b].confidence; });

  std::vector<bool> taken(tracks.size(), false);
  std::vector<AssociationEvent> events;
  events.reserve(dets.size());
  TrackId next_id = first_new_id;
  for (std::uint32_t d : order) {
    std::ptrdiff_t best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (taken[t] || tracks[t]->state == TrackState::dead) continue;
      if (scores(t, d) > best_score) {
        best_score = scores(t, d);
        best = static_cast<std::ptrdiff_t>(t);
      }
    }
    AssociationEvent ev;
    ev.frame = frame;
    ev.det_index = d;
    if (best >= 0 && best_score >= cfg.tau_match) {
      taken[static_cast<std::size_t>(best)] = true;
      ev.kind = AssociationEvent::Kind::matched;
      ev.track_id = tracks[static_cast<std::size_t>(best)]->id;
      ev.score = best_score;
    } else if (dets[d].confidence >= cfg.tau_new) {
      ev.kind = AssociationEvent::Kind::born;
      ev.track_id = next_id++;
      ev.score = best >= 0 ? best_score : 0.0;
    } else {
      ev.kind = AssociationEvent::Kind::discarded;
      ev.score = best >= 0 ? best_score : 0.0;
    }
    events.push_back(ev);
  }
  return events;
}

CategoryId retain_category(Track& track, const DetectionRecord& matched_det, const TrackerConfig& cfg) {
  const double p = matched_det.confidence;
  const CategoryId c = matched_det.category_id;
  CategoryId retained = c;
  if (p >= cfg.tau_high) {
    retained = c;
  } else if (p >= cfg.tau_low) {
    std::vector<CategoryId> pool(track.category_bank.begin(), track.category_bank.end());
    pool.push_back(c);
    retained = majority_vote(pool).first;
  } else if (!track.category_bank.empty()) {
    std::vector<CategoryId> pool(track.category_bank.begin(), track.category_bank.end());
    retained = majority_vote(pool).first;
  }
  track.push_category(retained, cfg.n_cat_bank);
  track.retained_preds.push_back({matched_det.frame, retained, p});
  return retained;
}

// ---------------------------------------------------------------------------

Tracker::Tracker(TrackerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<AssociationEvent> Tracker::step(FrameIndex frame, std::span<const DetectionRecord> dets) {
  if (started_ && frame <= last_frame_) {
    throw Error(ErrorCode::NonMonotonicFrame,
                "frame " + std::to_string(frame) + " after " + std::to_string(last_frame_));
  }
  started_ = true;
  last_frame_ = frame;

  std::vector<AssociationEvent> events;
  // Tracks that would have aged out on a skipped (detection-free) frame die
  // before they can be matched again.
  for (auto& track : tracks_) {
    if (track.state != TrackState::dead && frame - 1 - track.last_matched_frame > cfg_.max_age) {
      track.state = TrackState::dead;
      events.push_back({frame, AssociationEvent::Kind::died, track.id, 0, 0.0});
    }
  }

  std::vector<Track*> candidates;
  for (auto& track : tracks_) {
    if (track.state != TrackState::dead) candidates.push_back(&track);
  }
  std::vector<const Track*> const_candidates(candidates.begin(), candidates.end());
  last_scores_ = score_matrix(std::span<const Track* const>(const_candidates), dets, cfg_);
  last_candidates_.clear();
  for (const auto* t : candidates) last_candidates_.push_back(t->id);

  auto frame_events =
      associate_frame(const_candidates, dets, last_scores_, cfg_, next_id_, frame);

  std::vector<bool> matched(candidates.size(), false);
  std::map<TrackId, std::size_t> row_of;
  for (std::size_t i = 0; i < candidates.size(); ++i) row_of[candidates[i]->id] = i;

  std::vector<Track> born;
  for (const auto& ev : frame_events) {
    const DetectionRecord& det = dets[ev.det_index];
    if (ev.kind == AssociationEvent::Kind::matched) {
      const std::size_t row = row_of.at(ev.track_id);
      matched[row] = true;
      Track& track = *candidates[row];
      Vec emb = to_double(det.embedding);
      track.memory = update_memory(track.memory, emb, cfg_.alpha_mem);
      track.push_feature(std::move(emb), cfg_.n_bank);
      retain_category(track, det, cfg_);
      track.state = TrackState::active;
      track.observations.push_back({frame, det.bbox, det.confidence, ev.det_index, det.embedding});
      track.last_matched_frame = frame;
    } else if (ev.kind == AssociationEvent::Kind::born) {
      Track track;
      track.id = ev.track_id;
      track.state = TrackState::active;
      track.memory = to_double(det.embedding);
      track.push_feature(track.memory, cfg_.n_bank);
      retain_category(track, det, cfg_);
      track.observations.push_back({frame, det.bbox, det.confidence, ev.det_index, det.embedding});
      track.last_matched_frame = frame;
      next_id_ = std::max(next_id_, ev.track_id + 1);
      born.push_back(std::move(track));
    }
  }
  events.insert(events.end(), frame_events.begin(), frame_events.end());

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (matched[i]) continue;
    Track& track = *candidates[i];
    track.state = TrackState::lost;
    if (frame - track.last_matched_frame > cfg_.max_age) {
      track.state = TrackState::dead;
      events.push_back({frame, AssociationEvent::Kind::died, track.id, 0, 0.0});
    }
  }
  for (auto& t : born) tracks_.push_back(std::move(t));
  return events;
}

SequenceResult run_sequence_with_events(const FrameMap& dets_by_frame, const TrackerConfig& cfg) {
  Tracker tracker(cfg);
  SequenceResult result;
  for (const auto& [frame, dets] : dets_by_frame) {
    auto events = tracker.step(frame, dets);
    result.events.insert(result.events.end(), events.begin(), events.end());
  }
  result.tracks = tracker.release_tracks();
  return result;
}

std::vector<Track> run_sequence(const FrameMap& dets_by_frame, const TrackerConfig& cfg) {
  return run_sequence_with_events(dets_by_frame, cfg).tracks;
}

}  // namespace trajkit
