#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "trajkit/error.hpp"
#include "trajkit/io.hpp"
#include "trajkit/synth.hpp"
#include "trajkit/tcr.hpp"

using namespace trajkit;

TEST(GenScene, ZeroNoiseEmbeddingsEqualPrototypes) {
  const SynthScene s = gen_scene(testing_support::clean_scene(6, 12, 16, 2));
  std::size_t count = 0;
  for (const auto& [f, dets] : s.detections) {
    const auto& src = s.sources.at(f);
    ASSERT_EQ(src.size(), dets.size());
    for (std::size_t k = 0; k < dets.size(); ++k) {
      ASSERT_TRUE(src[k].has_value());
      const auto& p = s.prototypes[*src[k]];
      EXPECT_EQ(dets[k].embedding, Embedding(p.begin(), p.end()));
      EXPECT_EQ(dets[k].category_id, s.identity_category[*src[k]]);
      ++count;
    }
  }
  EXPECT_EQ(count, 6u * 12u);
  EXPECT_EQ(run_sequence(s.detections, {}).size(), 6u);
  for (const auto& p : s.prototypes) EXPECT_NEAR(l2_norm(p), 1.0, 1e-12);
}

TEST(GenScene, OcclusionLeavesExactGap) {
  for (FrameIndex k : {1, 5, 10, 15}) {
    SynthConfig c = testing_support::clean_scene(3, 40, 8, 4);
    c.occlusions.push_back({1, 10, 10 + k});
    const SynthScene s = gen_scene(c);
    std::vector<FrameIndex> seen;
    for (const auto& [f, src] : s.sources)
      for (const auto& i : src)
        if (i && *i == 1) seen.push_back(f);
    ASSERT_EQ(seen.size(), 40u - k);
    FrameIndex widest = 0;
    for (std::size_t j = 1; j < seen.size(); ++j) widest = std::max(widest, seen[j] - seen[j - 1] - 1);
    EXPECT_EQ(widest, k);
    const auto& gt = s.gt_tracks[1];
    EXPECT_EQ(gt.boxes.count(10), 0u);
    EXPECT_EQ(gt.boxes.count(10 + k), 1u);
  }
}

TEST(GenScene, DeterministicFiles) {
  SynthConfig c = testing_support::clean_scene(5, 20, 8, 11);
  c.noise_sigma = 0.1;
  c.fp_rate = 0.5;
  c.miss_rate = 0.1;
  c.label_flip_prob = 0.2;
  const auto dir = testing_support::temp_dir("synth");
  for (int run = 0; run < 2; ++run) {
    const SynthScene s = gen_scene(c);
    const std::string tag = std::to_string(run);
    write_detections(s.detections, dir / ("d" + tag + ".jsonl"));
    write_groundtruth(s.gt_tracks, dir / ("g" + tag + ".jsonl"));
    write_vocabulary(s.vocabulary, dir / ("v" + tag + ".json"));
  }
  for (const char* stem : {"d", "g"}) {
    EXPECT_EQ(testing_support::read_file(dir / (std::string(stem) + "0.jsonl")),
              testing_support::read_file(dir / (std::string(stem) + "1.jsonl")));
  }
  EXPECT_EQ(testing_support::read_file(dir / "v0.json"), testing_support::read_file(dir / "v1.json"));
  c.seed = 12;
  write_detections(gen_scene(c).detections, dir / "other.jsonl");
  EXPECT_NE(testing_support::read_file(dir / "d0.jsonl"), testing_support::read_file(dir / "other.jsonl"));
  std::filesystem::remove_all(dir);
}

TEST(GenScene, NoiseFidelityDecreasesWithSigma) {
  double previous = 1.1;
  for (double sigma : {0.0, 0.02, 0.05, 0.1, 0.3}) {
    SynthConfig c = testing_support::clean_scene(8, 20, 32, 6);
    c.noise_sigma = sigma;
    const SynthScene s = gen_scene(c);
    double total = 0;
    std::size_t n = 0;
    for (const auto& [f, dets] : s.detections) {
      for (std::size_t k = 0; k < dets.size(); ++k) {
        total += cosine(to_double(dets[k].embedding), s.prototypes[*s.sources.at(f)[k]]);
        ++n;
      }
    }
    const double mean = total / static_cast<double>(n);
    EXPECT_LT(mean, previous) << sigma;
    previous = mean;
  }
}

TEST(GenScene, FalsePositivesAreUnrelated) {
  SynthConfig c = testing_support::clean_scene(6, 60, 64, 8);
  c.fp_rate = 2.0;
  const SynthScene s = gen_scene(c);
  double total = 0;
  std::size_t n = 0;
  for (const auto& [f, dets] : s.detections) {
    for (std::size_t k = 0; k < dets.size(); ++k) {
      if (s.sources.at(f)[k]) continue;
      for (const auto& p : s.prototypes) {
        total += std::abs(cosine(to_double(dets[k].embedding), p));
        ++n;
      }
    }
  }
  ASSERT_GT(n, 0u);
  // E|cos| of random unit vectors at d=64 is about 0.1.
  EXPECT_LT(total / static_cast<double>(n), 0.2);
}

TEST(GenScene, ValidatesConfig) {
  SynthConfig c;
  c.n_categories = 0;
  EXPECT_THROW(gen_scene(c), Error);
  c = SynthConfig{};
  c.miss_rate = 1.5;
  EXPECT_THROW(gen_scene(c), Error);
}

TEST(Augment, RotationPreservesCosines) {
  Rng rng(5);
  Matrix clip(3, 8);
  for (double& x : clip.data()) x = rng.normal();
  const Matrix r = rotate_clip(clip, rng);
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_NEAR(l2_norm(r.row(a)), l2_norm(clip.row(a)), 1e-12);
    for (std::size_t b = a + 1; b < 3; ++b) EXPECT_NEAR(cosine(r.row(a), r.row(b)), cosine(clip.row(a), clip.row(b)), 1e-12);
  }
}

TEST(Augment, EraseAndScale) {
  Rng rng(6);
  Matrix clip(2, 10);
  for (double& x : clip.data()) x = 1.0 + rng.uniform();
  EXPECT_EQ(erase_clip(clip, 0.0, rng), clip);
  const Matrix e = erase_clip(clip, 0.3, rng);
  for (std::size_t r = 0; r < 2; ++r) {
    std::size_t zeros = 0;
    for (double x : e.row(r)) zeros += x == 0.0;
    EXPECT_EQ(zeros, 3u);
  }
  const Matrix s = scale_clip(clip, 0.5, 2.0, rng);
  for (std::size_t r = 0; r < 2; ++r) EXPECT_NEAR(l2_norm(s.row(r)), 1.0, 1e-12);
  EXPECT_THROW(erase_clip(clip, 1.5, rng), Error);
}

TEST(MakeTrainPairs, LabelsFollowCategories) {
  SynthConfig c = testing_support::clean_scene(8, 15, 8, 7);
  c.n_categories = 2;
  const SynthScene s = gen_scene(c);
  const auto pairs = make_train_pairs(s, 4, {}, 20, 3);
  ASSERT_EQ(pairs.size(), 20u);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    EXPECT_EQ(pairs[k].y, k % 2 == 0 ? 1 : 0);
    EXPECT_EQ(pairs[k].clip_a.rows(), 4u);
    // Noiseless clips: each row is an identity prototype; the pair's
    // categories can be read off the prototypes.
    auto category_of = [&](const Matrix& m) {
      const Vec row(m.row(0).begin(), m.row(0).end());
      for (std::size_t i = 0; i < s.prototypes.size(); ++i) {
        if (cosine(row, s.prototypes[i]) > 1 - 1e-6) return s.identity_category[i];
      }
      ADD_FAILURE();
      return CategoryId{99};
    };
    EXPECT_EQ(category_of(pairs[k].clip_a) == category_of(pairs[k].clip_b), pairs[k].y == 1);
  }
  const auto again = make_train_pairs(s, 4, {}, 20, 3);
  for (std::size_t k = 0; k < pairs.size(); ++k) EXPECT_EQ(again[k].clip_a, pairs[k].clip_a);

  SynthConfig one = c;
  one.n_categories = 1;
  EXPECT_THROW(make_train_pairs(gen_scene(one), 4, {}, 4, 1), Error);
}
