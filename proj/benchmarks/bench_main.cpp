#include <benchmark/benchmark.h>

#include <cmath>

#include "trajkit/classify.hpp"
#include "trajkit/eval.hpp"
#include "trajkit/fusion.hpp"
#include "trajkit/synth.hpp"
#include "trajkit/tcr.hpp"

using namespace trajkit;

namespace {

// Per-component noise scaled so the embedding cosine is about the same at every width.
SynthScene scene(std::size_t ids, std::size_t frames, std::size_t d, double sigma = 0.4) {
  SynthConfig c;
  c.n_identities = ids;
  c.n_frames = frames;
  c.d = d;
  c.noise_sigma = sigma / std::sqrt(static_cast<double>(d));
  c.seed = 42;
  return gen_scene(c);
}

Matrix clip(std::size_t n, std::size_t d) {
  Rng rng(7);
  Matrix m(n, d);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

void BM_ScoreMatrix(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const SynthScene s = scene(20, 40, d);
  const auto tracks = run_sequence(s.detections, {});
  const auto& dets = s.detections.rbegin()->second;
  state.counters["tracks"] = static_cast<double>(tracks.size());
  TrackerConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(score_matrix(std::span<const Track>(tracks), dets, cfg));
}
BENCHMARK(BM_ScoreMatrix)->Arg(64)->Arg(768);

void BM_RunSequence(benchmark::State& state) {
  const SynthScene s = scene(20, 100, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_sequence(s.detections, {}));
}
BENCHMARK(BM_RunSequence)->Arg(64)->Arg(768)->Unit(benchmark::kMillisecond);

void BM_FuseSelf(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  FusionInitOptions o;
  o.d = d;
  o.seed = 1;
  o.zero_residual_outputs = false;
  const SelfFusionParams p = init_fusion_weights(o).self_params();
  const Matrix x = clip(5, d);
  for (auto _ : state) benchmark::DoNotOptimize(fuse_self(x, p, 1));
}
BENCHMARK(BM_FuseSelf)->Arg(64)->Arg(768)->Unit(benchmark::kMicrosecond);

void BM_FuseAverage(benchmark::State& state) {
  const Matrix x = clip(5, 768);
  for (auto _ : state) benchmark::DoNotOptimize(fuse_average(x));
}
BENCHMARK(BM_FuseAverage);

void BM_Classify(benchmark::State& state) {
  const SynthScene s = scene(20, 100, 64);
  const auto tracks = run_sequence(s.detections, {});
  const TrajectoryClassifier classifier(s.vocabulary, FusionWeights{}, {}, 64);
  for (auto _ : state)
    for (const auto& t : tracks) benchmark::DoNotOptimize(classifier.classify(t));
}
BENCHMARK(BM_Classify)->Unit(benchmark::kMicrosecond);

void BM_Evaluate(benchmark::State& state) {
  const SynthScene s = scene(20, 100, 32, 0.6);
  const auto tracks = run_sequence(s.detections, {});
  const TrajectoryClassifier classifier(s.vocabulary, FusionWeights{}, {}, 32);
  std::vector<OutputTrack> out;
  for (const auto& t : tracks) out.push_back(to_output_track(t, classifier.classify(t)));
  EvalConfig cfg;
  cfg.splits = s.vocabulary.splits();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(out, s.gt_tracks, cfg));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
