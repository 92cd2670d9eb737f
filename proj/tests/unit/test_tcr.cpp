#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracle.hpp"
#include "trajkit/error.hpp"
#include "trajkit/eval.hpp"
#include "trajkit/synth.hpp"
#include "trajkit/tcr.hpp"

using namespace trajkit;

namespace {

DetectionRecord det(FrameIndex f, std::vector<float> emb, double conf = 0.9, CategoryId cat = 0, double x = 0.0) {
  DetectionRecord r;
  r.frame = f;
  r.bbox = {x, 0.0, 10.0, 10.0};
  r.confidence = conf;
  r.category_id = cat;
  r.category_score = conf;
  r.embedding = std::move(emb);
  return r;
}

Track make_track(TrackId id, const Vec& memory, const std::vector<Vec>& bank, std::size_t cap = 15) {
  Track t;
  t.id = id;
  t.memory = memory;
  for (const auto& b : bank) t.push_feature(b, cap);
  return t;
}

}  // namespace

TEST(UpdateMemory, Examples) {
  const Vec m{1, 0}, d{0, 1};
  EXPECT_EQ(update_memory(m, d, 0.0), m);
  EXPECT_EQ(update_memory(m, d, 1.0), d);
  const Vec r = update_memory(m, d, 0.25);
  EXPECT_DOUBLE_EQ(r[0], 0.75);
  EXPECT_DOUBLE_EQ(r[1], 0.25);
  EXPECT_THROW(update_memory(Vec{1, 2}, Vec{1}, 0.5), Error);
}

TEST(UpdateMemory, ConvexCombinationProperty) {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> a(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec m = oracle::random_vector(g, 8), d = oracle::random_vector(g, 8);
    const double alpha = a(g);
    const Vec r = update_memory(m, d, alpha);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_GE(r[i], std::min(m[i], d[i]) - 1e-15);
      EXPECT_LE(r[i], std::max(m[i], d[i]) + 1e-15);
    }
  }
}

TEST(Cosine, Examples) {
  EXPECT_NEAR(cosine(Vec{3, 4}, Vec{3, 4}), 1.0, 1e-15);
  EXPECT_NEAR(cosine(Vec{1, 0}, Vec{0, 1}), 0.0, 1e-15);
  EXPECT_NEAR(cosine(Vec{1, 1}, Vec{1, 0}), 0.7071068, 1e-6);
  try {
    cosine(Vec{0, 0}, Vec{1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroNorm);
  }
}

TEST(Bisoftmax, Examples) {
  Matrix one(1, 1);
  one(0, 0) = 37.0;
  EXPECT_NEAR(bisoftmax(one, 1.0)(0, 0), 1.0, 1e-15);
  const Matrix eq = Matrix::from_rows({{0.3, 0.3}, {0.3, 0.3}});
  for (double v : testing_support::values(bisoftmax(eq, 1.0))) EXPECT_NEAR(v, 0.5, 1e-15);
  const Matrix diag = bisoftmax(Matrix::from_rows({{2, 0}, {0, 2}}), 1.0);
  EXPECT_NEAR(diag(0, 0), 0.8808, 1e-4);
  EXPECT_NEAR(diag(0, 1), 0.1192, 1e-4);
  EXPECT_NEAR(diag(0, 0), 1.0 / (1.0 + std::exp(-2.0)), 1e-12);
}

TEST(Bisoftmax, RowAndColumnPartsSumToOne) {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 50; ++trial) {
    const oracle::M logits = oracle::random_matrix(g, 1 + trial % 4, 1 + trial % 3, 3.0);
    const Matrix b = bisoftmax(testing_support::from_oracle(logits), 0.7);
    // Sum over all entries: T/2 from the row part plus D/2 from the column part.
    double total = 0.0;
    for (double v : testing_support::values(b)) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
      total += v;
    }
    EXPECT_NEAR(total, 0.5 * (b.rows() + b.cols()), 1e-12);
    EXPECT_LT(oracle::max_rel_error(testing_support::to_oracle(b), oracle::bisoftmax(logits, 0.7)), 1e-12);
  }
}

TEST(MajorityVote, Examples) {
  EXPECT_EQ(majority_vote(std::vector<CategoryId>{5, 5, 5}), std::make_pair(CategoryId{5}, 1.0));
  EXPECT_EQ(majority_vote(std::vector<CategoryId>{1, 2, 2, 1}), std::make_pair(CategoryId{1}, 0.5));
  EXPECT_EQ(majority_vote(std::vector<CategoryId>{9}), std::make_pair(CategoryId{9}, 1.0));
  EXPECT_THROW(majority_vote(std::vector<CategoryId>{}), Error);
}

TEST(MajorityVote, MatchesOracle) {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<CategoryId> items(1 + g() % 9);
    for (auto& v : items) v = static_cast<CategoryId>(g() % 4);
    EXPECT_EQ(majority_vote(items), oracle::majority_vote(items));
  }
}

TEST(ScoreMatrix, Examples) {
  TrackerConfig cfg;
  cfg.sim_mode = SimMode::cosine_only;
  const Vec e{0.6, 0.8};
  const std::vector<Track> tracks{make_track(1, e, {e, e, e})};
  const std::vector<DetectionRecord> dets{det(0, {0.6f, 0.8f})};
  EXPECT_NEAR(score_matrix(tracks, dets, cfg)(0, 0), 1.0, 1e-7);

  cfg.alpha_sim = 1.0;
  const std::vector<Track> t2{make_track(1, Vec{1, 0}, {Vec{0, 1}})};
  const std::vector<DetectionRecord> d2{det(0, {1.0f, 1.0f})};
  EXPECT_NEAR(score_matrix(t2, d2, cfg)(0, 0), cosine(Vec{1, 1}, Vec{1, 0}), 1e-12);
}

TEST(ScoreMatrix, MatchesBruteForceOracle) {
  std::mt19937_64 g(17);
  for (int trial = 0; trial < 60; ++trial) {
    TrackerConfig cfg;
    cfg.sim_mode = trial % 2 ? SimMode::cosine_only : SimMode::cosine_plus_bisoftmax;
    cfg.softmax_temperature = 0.5 + (trial % 3) * 0.5;
    const std::size_t d = 2 + trial % 5;
    const std::size_t nt = 1 + trial % 3, nd = 1 + (trial / 3) % 3;
    std::vector<Track> tracks;
    std::vector<Vec> mems;
    std::vector<std::vector<Vec>> banks;
    for (std::size_t t = 0; t < nt; ++t) {
      std::vector<Vec> bank;
      for (std::size_t k = 0; k < 1 + (t + trial) % 4; ++k) bank.push_back(oracle::random_vector(g, d));
      mems.push_back(oracle::random_vector(g, d));
      banks.push_back(bank);
      tracks.push_back(make_track(t + 1, mems.back(), bank));
    }
    std::vector<DetectionRecord> dets;
    std::vector<Vec> demb;
    for (std::size_t k = 0; k < nd; ++k) {
      const Vec v = oracle::random_vector(g, d);
      dets.push_back(det(0, Embedding(v.begin(), v.end())));
      demb.push_back(to_double(dets.back().embedding));
    }
    const oracle::M want = oracle::score_matrix(mems, banks, demb, cfg.alpha_sim,
                                                cfg.sim_mode == SimMode::cosine_plus_bisoftmax,
                                                cfg.softmax_temperature);
    EXPECT_LT(oracle::max_rel_error(testing_support::to_oracle(score_matrix(tracks, dets, cfg)), want), 1e-12);
  }
}

TEST(ScoreMatrix, UnitIdenticalEmbeddingsGiveOnes) {
  TrackerConfig cfg;
  cfg.sim_mode = SimMode::cosine_only;
  const Vec e{0.0, 1.0, 0.0};
  std::vector<Track> tracks{make_track(1, e, {e}), make_track(2, e, {e, e})};
  std::vector<DetectionRecord> dets{det(0, {0, 1, 0}), det(0, {0, 1, 0}), det(0, {0, 1, 0})};
  for (double v : testing_support::values(score_matrix(tracks, dets, cfg))) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(ScoreMatrix, SingleEntryBankWithFullMemoryWeightIsMemoryOnly) {
  std::mt19937_64 g(23);
  TrackerConfig cfg;
  cfg.n_bank = 1;
  cfg.alpha_sim = 1.0;
  cfg.sim_mode = SimMode::cosine_only;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec mem = oracle::random_vector(g, 6);
    std::vector<Track> tracks{make_track(1, mem, {oracle::random_vector(g, 6)}, 1)};
    const Vec v = oracle::random_vector(g, 6);
    std::vector<DetectionRecord> dets{det(0, Embedding(v.begin(), v.end()))};
    EXPECT_NEAR(score_matrix(tracks, dets, cfg)(0, 0), oracle::cosine(mem, to_double(dets[0].embedding)), 1e-12);
  }
}

TEST(FeatureBank, IsBoundedFifo) {
  Track t;
  for (int k = 0; k < 20; ++k) t.push_feature(Vec{static_cast<double>(k + 1), 1.0}, 15);
  EXPECT_EQ(t.feature_bank.size(), 15u);
  EXPECT_EQ(t.feature_bank.front()[0], 6.0);
  EXPECT_EQ(t.feature_bank.back()[0], 20.0);
  for (int k = 0; k < 9; ++k) t.push_category(static_cast<CategoryId>(k), 5);
  EXPECT_EQ(t.category_bank.size(), 5u);
  EXPECT_EQ(t.category_bank.front(), 4u);
}

TEST(AssociateFrame, Examples) {
  TrackerConfig cfg;
  Track t = make_track(1, Vec{1, 0}, {Vec{1, 0}});
  const Track* tp = &t;
  std::vector<const Track*> one{tp};

  std::vector<DetectionRecord> d1{det(0, {1, 0}, 0.5)};
  Matrix s1(1, 1);
  s1(0, 0) = 0.9;
  auto ev = associate_frame(one, d1, s1, cfg, 2);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, AssociationEvent::Kind::matched);
  EXPECT_EQ(ev[0].track_id, 1u);

  std::vector<const Track*> none;
  std::vector<DetectionRecord> d0{det(0, {1, 0}, 0.05)};
  ev = associate_frame(none, d0, Matrix(0, 1), cfg, 1);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, AssociationEvent::Kind::discarded);

  // Two detections compete for one track: the more confident one claims it.
  std::vector<DetectionRecord> d2{det(0, {1, 0}, 0.5), det(0, {1, 0}, 0.9)};
  const Matrix s2 = Matrix::from_rows({{0.9, 0.8}});
  ev = associate_frame(one, d2, s2, cfg, 7);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].det_index, 1u);
  EXPECT_EQ(ev[0].kind, AssociationEvent::Kind::matched);
  EXPECT_EQ(ev[1].det_index, 0u);
  EXPECT_EQ(ev[1].kind, AssociationEvent::Kind::born);  // 0.5 >= tau_new
  EXPECT_EQ(ev[1].track_id, 7u);
}

TEST(AssociateFrame, EveryDetectionOneEventNoTrackTwice) {
  std::mt19937_64 g(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TrackerConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nt = trial % 5, nd = 1 + trial % 6;
    std::vector<Track> store;
    for (std::size_t t = 0; t < nt; ++t) store.push_back(make_track(t + 1, Vec{1, 0}, {Vec{1, 0}}));
    std::vector<const Track*> ptrs;
    for (auto& t : store) ptrs.push_back(&t);
    std::vector<DetectionRecord> dets;
    for (std::size_t k = 0; k < nd; ++k) dets.push_back(det(0, {1, 0}, u(g)));
    Matrix s(nt, nd);
    for (double& v : s.data()) v = u(g);
    const auto ev = associate_frame(ptrs, dets, s, cfg, 100);
    ASSERT_EQ(ev.size(), nd);
    std::vector<int> seen_det(nd, 0);
    std::vector<TrackId> matched;
    for (const auto& e : ev) {
      ++seen_det[e.det_index];
      if (e.kind == AssociationEvent::Kind::matched) matched.push_back(e.track_id);
    }
    for (int c : seen_det) EXPECT_EQ(c, 1);
    std::sort(matched.begin(), matched.end());
    EXPECT_EQ(std::adjacent_find(matched.begin(), matched.end()), matched.end());
  }
}

TEST(RetainCategory, Examples) {
  TrackerConfig cfg;
  Track t;
  auto d = det(0, {1, 0}, 0.35, 4);
  EXPECT_EQ(retain_category(t, d, cfg), 4u);

  Track t2;
  for (CategoryId c : {7u, 7u, 3u}) t2.push_category(c, 5);
  auto low = det(0, {1, 0}, 0.05, 3);
  EXPECT_EQ(retain_category(t2, low, cfg), 7u);
  EXPECT_EQ(t2.category_bank.back(), 7u);
  ASSERT_EQ(t2.retained_preds.size(), 1u);
  EXPECT_EQ(t2.retained_preds[0].category_id, 7u);

  Track t3;
  for (CategoryId c : {7u, 3u}) t3.push_category(c, 5);
  auto mid = det(0, {1, 0}, 0.2, 3);
  EXPECT_EQ(retain_category(t3, mid, cfg), 3u);

  Track empty;
  EXPECT_EQ(retain_category(empty, low, cfg), 3u);
}

TEST(Tracker, FirstFrameBirths) {
  Tracker tr(TrackerConfig{});
  std::vector<DetectionRecord> dets{det(0, {1, 0, 0}, 0.9), det(0, {0, 1, 0}, 0.8), det(0, {0, 0, 1}, 0.7)};
  const auto ev = tr.step(0, dets);
  ASSERT_EQ(ev.size(), 3u);
  for (const auto& e : ev) EXPECT_EQ(e.kind, AssociationEvent::Kind::born);
  EXPECT_EQ(tr.tracks().size(), 3u);
  for (const auto& t : tr.tracks()) EXPECT_EQ(t.state, TrackState::active);
}

TEST(Tracker, LifecycleDeathAndNewIdentity) {
  TrackerConfig cfg;
  cfg.max_age = 3;
  FrameMap frames;
  frames[0] = {det(0, {1, 0}, 0.9)};
  frames[1] = {det(1, {1, 0}, 0.9)};
  // Gap of max_age + 1 frames without the identity, then it returns.
  frames[6] = {det(6, {1, 0}, 0.9)};
  const auto r = run_sequence_with_events(frames, cfg);
  ASSERT_EQ(r.tracks.size(), 2u);
  EXPECT_EQ(r.tracks[0].state, TrackState::dead);
  EXPECT_EQ(r.tracks[1].observations.front().frame, 6u);
  const bool died = std::any_of(r.events.begin(), r.events.end(), [](const AssociationEvent& e) {
    return e.kind == AssociationEvent::Kind::died && e.track_id == 1;
  });
  EXPECT_TRUE(died);

  // A gap of exactly max_age frames is survived.
  FrameMap ok;
  ok[0] = {det(0, {1, 0}, 0.9)};
  ok[4] = {det(4, {1, 0}, 0.9)};
  EXPECT_EQ(run_sequence(ok, cfg).size(), 1u);
}

TEST(Tracker, LostTrackStepsThroughEmptyFrames) {
  TrackerConfig cfg;
  cfg.max_age = 2;
  Tracker tr(cfg);
  std::vector<DetectionRecord> one{det(0, {1, 0}, 0.9)};
  tr.step(0, one);
  tr.step(1, {});
  EXPECT_EQ(tr.tracks()[0].state, TrackState::lost);
  tr.step(2, {});
  EXPECT_EQ(tr.tracks()[0].state, TrackState::lost);
  tr.step(3, {});
  EXPECT_EQ(tr.tracks()[0].state, TrackState::dead);
}

TEST(Tracker, RejectsNonMonotonicFrames) {
  Tracker tr(TrackerConfig{});
  tr.step(5, {});
  try {
    tr.step(5, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotonicFrame);
  }
}

TEST(RunSequence, SmallCases) {
  EXPECT_TRUE(run_sequence(FrameMap{}, TrackerConfig{}).empty());
  FrameMap one;
  one[3] = {det(3, {1, 2}, 0.9)};
  const auto t = run_sequence(one, TrackerConfig{});
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].observations.size(), 1u);

  const SynthScene s = gen_scene(testing_support::clean_scene(2, 10, 16, 4));
  const auto tracks = run_sequence(s.detections, TrackerConfig{});
  ASSERT_EQ(tracks.size(), 2u);
  for (const auto& tr : tracks) EXPECT_EQ(tr.observations.size(), 10u);
}

TEST(RunSequence, NoiselessSceneIsIdentityMapping) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SynthScene s = gen_scene(testing_support::clean_scene(12, 40, 32, seed));
    const auto tracks = run_sequence(s.detections, TrackerConfig{});
    ASSERT_EQ(tracks.size(), 12u);
    // Every observation of a track comes from one identity and carries its class.
    for (const auto& t : tracks) {
      std::optional<std::size_t> who;
      for (std::size_t k = 0; k < t.observations.size(); ++k) {
        const auto& o = t.observations[k];
        const auto src = s.sources.at(o.frame)[o.det_index];
        ASSERT_TRUE(src.has_value());
        if (!who) who = src;
        EXPECT_EQ(*who, *src);
        EXPECT_EQ(t.retained_preds[k].category_id, s.identity_category[*src]);
      }
      EXPECT_EQ(t.observations.size(), 40u);
    }
  }
}

TEST(RunSequence, DetectionOrderWithinFrameDoesNotMatter) {
  SynthConfig c = testing_support::clean_scene(8, 30, 16, 9);
  c.noise_sigma = 0.1;
  c.fp_rate = 1.0;
  const SynthScene s = gen_scene(c);
  FrameMap shuffled = s.detections;
  std::mt19937_64 g(1);
  for (auto& [f, d] : shuffled) {
    std::shuffle(d.begin(), d.end(), g);
  }
  const auto a = run_sequence(s.detections, TrackerConfig{});
  const auto b = run_sequence(shuffled, TrackerConfig{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].observations.size(), b[i].observations.size());
    for (std::size_t k = 0; k < a[i].observations.size(); ++k) {
      EXPECT_EQ(a[i].observations[k].frame, b[i].observations[k].frame);
      EXPECT_EQ(a[i].observations[k].bbox, b[i].observations[k].bbox);
    }
  }
}

TEST(TrackerConfig, Validation) {
  TrackerConfig c;
  c.tau_low = 0.5;
  c.tau_high = 0.3;
  EXPECT_THROW(c.validate(), Error);
  TrackerConfig z;
  z.n_bank = 0;
  EXPECT_THROW(z.validate(), Error);
}
