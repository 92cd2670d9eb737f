#include "cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli/json_config.hpp"
#include "cli/pipeline.hpp"
#include "trajkit/error.hpp"
#include "trajkit/eval.hpp"
#include "trajkit/io.hpp"
#include "trajkit/synth.hpp"
#include "trajkit/train.hpp"

namespace trajkit::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out_dir = ".";
};

struct TrackerFlags {
  TrackerConfig cfg;
  std::string sim_mode = "cosine_plus_bisoftmax";
  double tau_new = -1.0;

  void add(CLI::App& app) {
    app.add_option("--alpha-mem", cfg.alpha_mem, "EMA weight of the new observation");
    app.add_option("--alpha-sim", cfg.alpha_sim, "weight of the memory term in the score");
    app.add_option("--tau-match", cfg.tau_match, "association threshold");
    app.add_option("--tau-new", tau_new, "birth threshold (negative: same as --tau-high)");
    app.add_option("--tau-high", cfg.tau_high, "keep the detector label above this score");
    app.add_option("--tau-low", cfg.tau_low, "below this score vote over the bank only");
    app.add_option("--n-bank", cfg.n_bank, "feature bank size");
    app.add_option("--n-cat-bank", cfg.n_cat_bank, "category bank size");
    app.add_option("--max-age", cfg.max_age, "frames a lost track survives");
    app.add_option("--sim-mode", sim_mode, "cosine_only | cosine_plus_bisoftmax")
        ->check(CLI::IsMember({"cosine_only", "cosine_plus_bisoftmax"}));
    app.add_option("--temperature", cfg.softmax_temperature, "bi-directional softmax temperature");
  }

  TrackerConfig resolve() const {
    TrackerConfig out = cfg;
    out.sim_mode = sim_mode == "cosine_only" ? SimMode::cosine_only : SimMode::cosine_plus_bisoftmax;
    out.tau_new = tau_new < 0.0 ? out.tau_high : tau_new;
    out.validate();
    return out;
  }
};

struct ClassifyFlags {
  std::string fusion = "average";
  ClassifyConfig cfg;
  std::string weights;

  void add(CLI::App& app) {
    app.add_option("--fusion", fusion, "average | attention | self | self_noresidual | cross | concat")
        ->check(CLI::IsMember({"average", "attention", "self", "self_noresidual", "cross", "concat"}));
    app.add_option("--n-clip", cfg.n_clip, "observations sampled per trajectory");
    app.add_option("--heads", cfg.heads, "attention heads");
    app.add_flag("--calibrate", cfg.calibrate_scores, "map cosines to (1+cos)/2 before selection");
    app.add_option("--weights", weights, "fusion weight bundle (.twb)")->check(CLI::ExistingFile);
  }

  ClassifyConfig resolve() const {
    ClassifyConfig out = cfg;
    out.fusion = *parse_fusion(fusion);
    out.validate();
    return out;
  }

  FusionWeights load() const {
    if (weights.empty()) return {};
    return fusion_weights_from_bundle(load_weights(weights));
  }
};

struct SceneFlags {
  SynthConfig cfg;
  std::vector<std::string> occlusions;

  void add(CLI::App& app) {
    app.add_option("--identities", cfg.n_identities, "number of identities");
    app.add_option("--frames", cfg.n_frames, "number of frames");
    app.add_option("--categories", cfg.n_categories, "number of categories");
    app.add_option("--dim", cfg.d, "embedding width");
    app.add_option("--sigma", cfg.noise_sigma, "per-coordinate embedding noise");
    app.add_option("--miss-rate", cfg.miss_rate, "probability a visible object is not detected");
    app.add_option("--fp-rate", cfg.fp_rate, "mean false positives per frame");
    app.add_option("--flip-prob", cfg.label_flip_prob, "probability of a wrong detector label");
    app.add_option("--pull", cfg.category_pull, "category share of each identity prototype");
    app.add_option("--occlude", occlusions, "identity:start:end hidden window (repeatable)");
  }

  SynthConfig resolve(std::uint64_t seed) const {
    SynthConfig out = cfg;
    out.seed = seed;
    for (const auto& text : occlusions) {
      OcclusionWindow w;
      char c1 = 0, c2 = 0;
      std::istringstream in(text);
      if (!(in >> w.identity >> c1 >> w.start >> c2 >> w.end) || c1 != ':' || c2 != ':' || !in.eof()) {
        throw CLI::ValidationError("--occlude", "expected identity:start:end, got '" + text + "'");
      }
      out.occlusions.push_back(w);
    }
    out.validate();
    return out;
  }
};

// Relative output paths land inside --out-dir.
fs::path in_out_dir(const GlobalOptions& g, const std::string& path, const char* fallback) {
  if (path.empty()) return fs::path(g.out_dir) / fallback;
  const fs::path p(path);
  return p.is_absolute() ? p : fs::path(g.out_dir) / p;
}

void write_json(const ojson& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

void write_manifest(const CLI::App& root, const CLI::App& sub, const GlobalOptions& g) {
  ojson m = resolved_options(root);
  m["seed"] = std::to_string(g.seed);
  m["threads"] = std::to_string(g.threads);
  m["out-dir"] = g.out_dir;
  m["command"] = sub.get_name();
  m[sub.get_name()] = resolved_options(sub);
  write_json(m, fs::path(g.out_dir) / "manifest.json");
}

// track ---------------------------------------------------------------------

struct TrackCommand {
  std::string detections, vocabulary, sidecar, out, events, dump_csv;
  double score_scale = 1.0;
  TrackerFlags tracker;
  ClassifyFlags classify;

  void add(CLI::App& app) {
    app.add_option("--detections", detections, "detections.jsonl")->required()->check(CLI::ExistingFile);
    app.add_option("--vocabulary", vocabulary, "vocabulary.json")->required()->check(CLI::ExistingFile);
    app.add_option("--sidecar", sidecar, "embedding sidecar (.embin)")->check(CLI::ExistingFile);
    app.add_option("--score-scale", score_scale, "multiplier applied to detector confidences");
    app.add_option("--out", out, "tracks output (default <out-dir>/tracks.jsonl)");
    app.add_option("--events", events, "association event log (JSONL)");
    app.add_option("--dump-csv", dump_csv, "per-frame association scores (CSV)");
    tracker.add(app);
    classify.add(app);
  }

  int run(const GlobalOptions& g) const {
    const TrackerConfig tcfg = tracker.resolve();
    const ClassifyConfig ccfg = classify.resolve();
    const Vocabulary vocab = load_vocabulary(vocabulary);
    DetectionLoadOptions lo;
    lo.score_scale = score_scale;
    lo.vocabulary = &vocab;
    if (!sidecar.empty()) lo.sidecar = fs::path(sidecar);
    const FrameMap dets = load_detections(detections, lo);
    const FusionWeights weights = classify.load();
    const PipelineResult r = run_pipeline(dets, vocab, weights, tcfg, ccfg, g.threads, !dump_csv.empty());
    write_tracks(r.tracks, in_out_dir(g, out, "tracks.jsonl"));
    if (!events.empty()) write_events(r.events, in_out_dir(g, events, ""));
    if (!dump_csv.empty()) write_scores(r.scores, in_out_dir(g, dump_csv, ""));
    std::cout << fmt::format("{} tracks from {} frames\n", r.tracks.size(), dets.size());
    return kOk;
  }

  static void write_events(const std::vector<AssociationEvent>& events, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    for (const auto& e : events) {
      ojson j;
      j["frame"] = e.frame;
      j["kind"] = to_string(e.kind);
      if (e.kind != AssociationEvent::Kind::discarded) j["track_id"] = e.track_id;
      if (e.kind != AssociationEvent::Kind::died) j["det_index"] = e.det_index;
      std::string line = j.dump();
      line.pop_back();
      line += ",\"score\":" + format_number(e.score) + "}\n";
      out << line;
    }
  }

  static void write_scores(const std::vector<ScoreRow>& rows, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << "frame,track_id,det_index,score\n";
    for (const auto& r : rows) {
      out << r.frame << ',' << r.track_id << ',' << r.det_index << ',' << format_number(r.score) << '\n';
    }
  }
};

// classify ------------------------------------------------------------------

struct ClassifyCommand {
  std::string tracks, detections, vocabulary, sidecar, out;
  ClassifyFlags classify;

  void add(CLI::App& app) {
    app.add_option("--tracks", tracks, "tracks.jsonl produced by track")->required()->check(CLI::ExistingFile);
    app.add_option("--detections", detections, "detections.jsonl the tracks refer to")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--vocabulary", vocabulary, "vocabulary.json")->required()->check(CLI::ExistingFile);
    app.add_option("--sidecar", sidecar, "embedding sidecar (.embin)")->check(CLI::ExistingFile);
    app.add_option("--out", out, "labelled tracks (default <out-dir>/classified.jsonl)");
    classify.add(app);
  }

  int run(const GlobalOptions& g) const {
    const ClassifyConfig ccfg = classify.resolve();
    const Vocabulary vocab = load_vocabulary(vocabulary);
    DetectionLoadOptions lo;
    lo.vocabulary = &vocab;
    if (!sidecar.empty()) lo.sidecar = fs::path(sidecar);
    const FrameMap dets = load_detections(detections, lo);
    const auto input = read_tracks(tracks);
    const auto labelled = classify_tracks(input, dets, vocab, classify.load(), ccfg, g.threads);
    write_tracks(labelled, in_out_dir(g, out, "classified.jsonl"));
    std::cout << fmt::format("{} tracks classified\n", labelled.size());
    return kOk;
  }
};

// eval ----------------------------------------------------------------------

ojson scores_json(const EvalScores& s) {
  ojson j;
  j["valid"] = s.valid;
  j["loc_a"] = s.loc_a;
  j["ass_a"] = s.ass_a;
  j["cls_a"] = s.cls_a;
  j["teta"] = s.teta;
  j["tp"] = s.tp;
  j["fp"] = s.fp;
  j["fn"] = s.fn;
  return j;
}

std::string report_table(const EvalReport& r) {
  std::string t = fmt::format("{:<8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}\n", "split", "TETA", "LocA", "AssA",
                              "ClsA", "TP", "FP", "FN");
  const std::pair<const char*, const EvalScores*> rows[] = {{"overall", &r.overall}, {"base", &r.base},
                                                            {"novel", &r.novel}};
  for (const auto& [name, s] : rows) {
    if (!s->valid) {
      t += fmt::format("{:<8} {:>7}\n", name, "-");
      continue;
    }
    t += fmt::format("{:<8} {:>7.2f} {:>7.2f} {:>7.2f} {:>7.2f} {:>7} {:>7} {:>7}\n", name, s->teta, s->loc_a,
                     s->ass_a, s->cls_a, s->tp, s->fp, s->fn);
  }
  t += fmt::format("id switches: {}\n", r.id_switches);
  return t;
}

struct EvalCommand {
  std::string pred, gt, vocabulary, out, label_mode = "track";
  double iou_threshold = 0.5;

  void add(CLI::App& app) {
    app.add_option("--pred", pred, "predicted tracks.jsonl")->required()->check(CLI::ExistingFile);
    app.add_option("--gt", gt, "groundtruth.jsonl")->required()->check(CLI::ExistingFile);
    app.add_option("--vocabulary", vocabulary, "vocabulary.json for base/novel splits")->check(CLI::ExistingFile);
    app.add_option("--iou", iou_threshold, "IoU threshold for a true positive");
    app.add_option("--label-mode", label_mode, "track | frame")->check(CLI::IsMember({"track", "frame"}));
    app.add_option("--out", out, "report (default <out-dir>/report.json)");
  }

  int run(const GlobalOptions& g) const {
    EvalConfig cfg;
    cfg.iou_threshold = iou_threshold;
    cfg.label_mode = label_mode == "frame" ? ClassLabelMode::frame : ClassLabelMode::track;
    if (!vocabulary.empty()) cfg.splits = load_vocabulary(vocabulary).splits();
    const EvalReport r = evaluate(read_tracks(pred), load_groundtruth(gt), cfg);
    ojson j;
    j["overall"] = scores_json(r.overall);
    j["base"] = scores_json(r.base);
    j["novel"] = scores_json(r.novel);
    j["id_switches"] = r.id_switches;
    write_json(j, in_out_dir(g, out, "report.json"));
    std::cout << report_table(r);
    return kOk;
  }
};

// synth ---------------------------------------------------------------------

struct SynthCommand {
  SceneFlags scene;
  bool sidecar = false;

  void add(CLI::App& app) {
    scene.add(app);
    app.add_flag("--sidecar", sidecar, "write embeddings to detections.embin");
  }

  int run(const GlobalOptions& g) const {
    const SynthScene s = gen_scene(scene.resolve(g.seed));
    const fs::path dir(g.out_dir);
    std::optional<fs::path> side;
    if (sidecar) side = dir / "detections.embin";
    write_detections(s.detections, dir / "detections.jsonl", side);
    write_groundtruth(s.gt_tracks, dir / "groundtruth.jsonl");
    write_vocabulary(s.vocabulary, dir / "vocabulary.json");
    std::size_t n = 0;
    for (const auto& [f, d] : s.detections) n += d.size();
    std::cout << fmt::format("{} detections over {} frames, {} identities\n", n, s.detections.size(),
                             s.gt_tracks.size());
    return kOk;
  }
};

// train ---------------------------------------------------------------------

struct TrainCommand {
  std::string detections, groundtruth, sidecar, init, out, distance = "euclidean";
  SceneFlags scene;
  TrainConfig cfg;
  std::size_t hidden = 0;
  std::size_t n_clip = 5;
  std::size_t pairs = 64;
  bool rotation = false;
  double erase = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;

  void add(CLI::App& app) {
    app.add_option("--detections", detections, "train from these detections instead of a synthetic scene")
        ->check(CLI::ExistingFile);
    app.add_option("--groundtruth", groundtruth, "identities for --detections")->check(CLI::ExistingFile);
    app.add_option("--sidecar", sidecar, "embedding sidecar (.embin)")->check(CLI::ExistingFile);
    app.add_option("--init", init, "initial weight bundle")->check(CLI::ExistingFile);
    app.add_option("--out", out, "trained weights (default <out-dir>/weights.twb)");
    scene.add(app);
    app.add_option("--margin", cfg.margin, "contrastive margin");
    app.add_option("--distance", distance, "euclidean | cosine_distance")
        ->check(CLI::IsMember({"euclidean", "cosine_distance"}));
    app.add_option("--lr", cfg.learning_rate, "learning rate");
    app.add_option("--steps", cfg.steps, "gradient steps");
    app.add_option("--batch", cfg.batch_size, "pairs per step (0: all)");
    app.add_option("--heads", cfg.heads, "attention heads");
    app.add_option("--hidden", hidden, "MLP width (0: 4x embedding width)");
    app.add_option("--n-clip", n_clip, "observations per clip");
    app.add_option("--pairs", pairs, "training pairs");
    app.add_flag("--rotation", rotation, "random plane rotation augmentation");
    app.add_option("--erase", erase, "share of coordinates zeroed per observation");
    app.add_option("--scale-min", scale_min, "lower scaling factor");
    app.add_option("--scale-max", scale_max, "upper scaling factor");
  }

  int run(const GlobalOptions& g) const {
    if (detections.empty() != groundtruth.empty()) {
      throw CLI::ValidationError("--detections", "--detections and --groundtruth go together");
    }
    SynthScene data;
    if (!detections.empty()) {
      DetectionLoadOptions lo;
      if (!sidecar.empty()) lo.sidecar = fs::path(sidecar);
      data = scene_from_files(load_detections(detections, lo), load_groundtruth(groundtruth));
    } else {
      data = gen_scene(scene.resolve(g.seed));
    }
    Augmentations aug{rotation, erase, scale_min, scale_max};
    const auto train_pairs = make_train_pairs(data, n_clip, aug, pairs, g.seed + 1);
    const std::size_t d = train_pairs.front().clip_a.cols();

    FusionWeights weights;
    if (!init.empty()) {
      weights = fusion_weights_from_bundle(load_weights(init));
    } else {
      FusionInitOptions io;
      io.d = d;
      io.hidden = hidden;
      io.seed = g.seed + 2;
      weights = init_fusion_weights(io);
    }
    TrainConfig tc = cfg;
    tc.distance = *parse_distance(distance);
    tc.seed = g.seed + 3;
    const TrainResult r = train_fusion(train_pairs, weights.self_params(), tc);
    weights.set_self_params(r.params);
    save_weights(to_bundle(weights), in_out_dir(g, out, "weights.twb"));

    std::ofstream curve(fs::path(g.out_dir) / "loss_curve.csv", std::ios::binary);
    curve << "step,loss\n";
    for (std::size_t i = 0; i < r.loss_curve.size(); ++i) curve << i << ',' << format_number(r.loss_curve[i]) << '\n';
    if (!r.loss_curve.empty()) {
      std::cout << fmt::format("loss {:.6f} -> {:.6f} over {} steps\n", r.loss_curve.front(), r.loss_curve.back(),
                               r.loss_curve.size());
    }
    return kOk;
  }
};

// bench-fusion --------------------------------------------------------------

struct BenchCommand {
  SceneFlags scene;
  TrackerFlags tracker;
  std::size_t scenes = 5;
  std::size_t heads = 1;
  std::size_t n_clip = 5;
  std::string weights;
  std::vector<std::string> mechanisms{"average", "attention", "self", "cross", "concat"};

  void add(CLI::App& app) {
    scene.add(app);
    tracker.add(app);
    app.add_option("--scenes", scenes, "scenes in the suite");
    app.add_option("--heads", heads, "attention heads");
    app.add_option("--n-clip", n_clip, "observations sampled per trajectory");
    app.add_option("--weights", weights, "weight bundle (default: seeded initialisation)")
        ->check(CLI::ExistingFile);
    app.add_option("--mechanisms", mechanisms, "fusion mechanisms to compare")
        ->check(CLI::IsMember({"average", "attention", "self", "self_noresidual", "cross", "concat"}));
  }

  int run(const GlobalOptions& g) const {
    const TrackerConfig tcfg = tracker.resolve();
    const std::size_t n_mech = mechanisms.size();
    std::vector<SynthScene> suite(scenes);
    std::vector<PipelineResult> tracked(scenes);
    parallel_for(scenes, g.threads, [&](std::size_t s) {
      suite[s] = gen_scene(scene.resolve(g.seed + s));
      // Association does not depend on the mechanism; run it once per scene.
      FusionWeights none;
      ClassifyConfig avg;
      avg.n_clip = n_clip;
      tracked[s] = run_pipeline(suite[s].detections, suite[s].vocabulary, none, tcfg, avg, 1);
    });
    FusionWeights w;
    if (!weights.empty()) {
      w = fusion_weights_from_bundle(load_weights(weights));
    } else {
      FusionInitOptions io;
      io.d = scene.cfg.d;
      io.seed = g.seed;
      io.identity_values = true;
      w = init_fusion_weights(io);
    }
    std::vector<EvalReport> reports(n_mech * scenes);
    parallel_for(n_mech * scenes, g.threads, [&](std::size_t k) {
      const std::size_t m = k / scenes;
      const std::size_t s = k % scenes;
      ClassifyConfig cc;
      cc.fusion = *parse_fusion(mechanisms[m]);
      cc.n_clip = n_clip;
      cc.heads = heads;
      const SynthScene& sc = suite[s];
      const auto labelled = classify_tracks(tracked[s].tracks, sc.detections, sc.vocabulary, w, cc, 1);
      EvalConfig ec;
      ec.splits = sc.vocabulary.splits();
      reports[k] = evaluate(labelled, sc.gt_tracks, ec);
    });

    ojson rows = ojson::array();
    std::string table = fmt::format("{:<16} {:>7} {:>7} {:>7} {:>7} {:>9} {:>9}\n", "mechanism", "TETA", "LocA",
                                    "AssA", "ClsA", "ClsA-base", "ClsA-nov");
    std::string csv = "mechanism,teta,loc_a,ass_a,cls_a,cls_a_base,cls_a_novel\n";
    for (std::size_t m = 0; m < n_mech; ++m) {
      double teta = 0, loc = 0, ass = 0, cls = 0, cls_b = 0, cls_n = 0;
      for (std::size_t s = 0; s < scenes; ++s) {
        const EvalReport& r = reports[m * scenes + s];
        teta += r.overall.teta;
        loc += r.overall.loc_a;
        ass += r.overall.ass_a;
        cls += r.overall.cls_a;
        cls_b += r.base.cls_a;
        cls_n += r.novel.cls_a;
      }
      const double k = scenes == 0 ? 1.0 : static_cast<double>(scenes);
      ojson row;
      row["mechanism"] = mechanisms[m];
      row["teta"] = teta / k;
      row["loc_a"] = loc / k;
      row["ass_a"] = ass / k;
      row["cls_a"] = cls / k;
      row["cls_a_base"] = cls_b / k;
      row["cls_a_novel"] = cls_n / k;
      rows.push_back(row);
      table += fmt::format("{:<16} {:>7.2f} {:>7.2f} {:>7.2f} {:>7.2f} {:>9.2f} {:>9.2f}\n", mechanisms[m], teta / k,
                           loc / k, ass / k, cls / k, cls_b / k, cls_n / k);
      csv += fmt::format("{},{},{},{},{},{},{}\n", mechanisms[m], format_number(teta / k), format_number(loc / k),
                         format_number(ass / k), format_number(cls / k), format_number(cls_b / k),
                         format_number(cls_n / k));
    }
    ojson j;
    j["scenes"] = scenes;
    j["rows"] = rows;
    write_json(j, fs::path(g.out_dir) / "bench_fusion.json");
    std::ofstream(fs::path(g.out_dir) / "bench_fusion.csv", std::ios::binary) << csv;
    std::cout << table;
    return kOk;
  }
};

void print_error(const std::string& code, const std::string& message) {
  ojson j;
  j["error"] = code;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"trajkit: trajectory-aware open-vocabulary tracking toolkit", "trajkit"};
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config; command-line flags take precedence");
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "output directory");

  TrackCommand track;
  ClassifyCommand classify;
  EvalCommand eval;
  SynthCommand synth;
  TrainCommand train;
  BenchCommand bench;
  CLI::App* sub_track = app.add_subcommand("track", "associate detections and label trajectories");
  CLI::App* sub_classify = app.add_subcommand("classify", "label existing trajectories");
  CLI::App* sub_eval = app.add_subcommand("eval", "score predicted tracks against ground truth");
  CLI::App* sub_synth = app.add_subcommand("synth", "generate a synthetic scene");
  CLI::App* sub_train = app.add_subcommand("train", "train the self-fusion block");
  CLI::App* sub_bench = app.add_subcommand("bench-fusion", "compare fusion mechanisms on a synthetic suite");
  track.add(*sub_track);
  classify.add(*sub_classify);
  eval.add(*sub_eval);
  synth.add(*sub_synth);
  train.add(*sub_train);
  bench.add(*sub_bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e) == 0 ? kOk : kUsageError;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    fs::create_directories(g.out_dir);
    write_manifest(app, *sub, g);
    if (sub == sub_track) return track.run(g);
    if (sub == sub_classify) return classify.run(g);
    if (sub == sub_eval) return eval.run(g);
    if (sub == sub_synth) return synth.run(g);
    if (sub == sub_train) return train.run(g);
    return bench.run(g);
  } catch (const Error& e) {
    print_error(std::string(to_string(e.code())), e.what());
    return kDomainError;
  } catch (const CLI::ParseError& e) {
    print_error("Usage", e.what());
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    print_error("Io", e.what());
    return kDomainError;
  }
}

}  // namespace trajkit::cli
