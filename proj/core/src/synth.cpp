#include "trajkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "trajkit/error.hpp"
#include "trajkit/eval.hpp"
#include "trajkit/io.hpp"

namespace trajkit {

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (n_categories == 0) fail("n_categories must be positive");
  if (d < 2) fail("embedding width must be at least 2");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be >= 0");
  if (!(miss_rate >= 0.0 && miss_rate < 1.0)) fail("miss_rate must lie in [0,1)");
  if (!(fp_rate >= 0.0) || !std::isfinite(fp_rate)) fail("fp_rate must be >= 0");
  if (!(label_flip_prob >= 0.0 && label_flip_prob < 1.0)) fail("label_flip_prob must lie in [0,1)");
  if (label_flip_prob > 0.0 && n_categories < 2) fail("label flips need at least two categories");
  if (!(conf_alpha > 0.0 && conf_beta > 0.0 && fp_conf_alpha > 0.0 && fp_conf_beta > 0.0)) {
    fail("confidence Beta parameters must be positive");
  }
  if (!(category_pull >= 0.0 && category_pull <= 1.0)) fail("category_pull must lie in [0,1]");
  if (!(scene_width > 250.0 && scene_height > 250.0)) fail("scene must be larger than 250x250");
  for (const auto& o : occlusions) {
    if (o.identity >= n_identities) fail("occlusion refers to unknown identity " + std::to_string(o.identity));
    if (o.end < o.start) fail("occlusion window ends before it starts");
  }
}

Vec random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  double n = 0.0;
  while (!(n > 1e-12)) {
    for (double& x : v) x = rng.normal();
    n = l2_norm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

Vec noisy_embedding(Rng& rng, std::span<const double> prototype, double sigma) {
  Vec v(prototype.begin(), prototype.end());
  if (sigma == 0.0) return v;
  for (double& x : v) x += sigma * rng.normal();
  const double n = l2_norm(v);
  if (!(n > 0.0)) return Vec(prototype.begin(), prototype.end());
  for (double& x : v) x /= n;
  return v;
}

namespace {

Embedding to_float(std::span<const double> v) { return Embedding(v.begin(), v.end()); }

struct Mover {
  BBox box;
  double vx = 0.0;
  double vy = 0.0;
};

void reflect(double& pos, double& vel, double lo, double hi) {
  if (pos < lo) {
    pos = 2.0 * lo - pos;
    vel = -vel;
  } else if (pos > hi) {
    pos = 2.0 * hi - pos;
    vel = -vel;
  }
  pos = std::clamp(pos, lo, hi);
}

bool occluded(const SynthConfig& cfg, std::size_t identity, FrameIndex frame) {
  return std::any_of(cfg.occlusions.begin(), cfg.occlusions.end(), [&](const OcclusionWindow& o) {
    return o.identity == identity && frame >= o.start && frame < o.end;
  });
}

}  // namespace

SynthScene gen_scene(const SynthConfig& cfg) {
  cfg.validate();
  Rng root(cfg.seed);
  Rng proto_rng = root.fork(1);
  Rng motion_rng = root.fork(2);
  Rng frame_rng = root.fork(3);
  Rng vocab_rng = root.fork(4);

  SynthScene scene;
  const std::size_t d = cfg.d;
  for (std::size_t k = 0; k < cfg.n_categories; ++k) scene.category_prototypes.push_back(random_unit(proto_rng, d));

  scene.identity_category.resize(cfg.n_identities);
  for (std::size_t i = 0; i < cfg.n_identities; ++i) scene.identity_category[i] = static_cast<CategoryId>(i % cfg.n_categories);
  for (std::size_t i = cfg.n_identities; i > 1; --i) {
    std::swap(scene.identity_category[i - 1], scene.identity_category[proto_rng.below(i)]);
  }
  for (std::size_t i = 0; i < cfg.n_identities; ++i) {
    const Vec u = random_unit(proto_rng, d);
    const Vec& c = scene.category_prototypes[scene.identity_category[i]];
    Vec p(d);
    for (std::size_t j = 0; j < d; ++j) p[j] = cfg.category_pull * c[j] + (1.0 - cfg.category_pull) * u[j];
    double n = l2_norm(p);
    if (!(n > 1e-9)) {
      p = u;
      n = 1.0;
    }
    for (double& x : p) x /= n;
    scene.prototypes.push_back(std::move(p));
  }

  std::vector<Mover> movers(cfg.n_identities);
  for (auto& m : movers) {
    m.box.w = motion_rng.uniform(40.0, 120.0);
    m.box.h = motion_rng.uniform(80.0, 240.0);
    m.box.x = motion_rng.uniform(0.0, cfg.scene_width - m.box.w);
    m.box.y = motion_rng.uniform(0.0, cfg.scene_height - m.box.h);
    m.vx = motion_rng.uniform(-8.0, 8.0);
    m.vy = motion_rng.uniform(-8.0, 8.0);
  }

  scene.gt_tracks.resize(cfg.n_identities);
  for (std::size_t i = 0; i < cfg.n_identities; ++i) {
    scene.gt_tracks[i].track_id = i + 1;
    scene.gt_tracks[i].category_id = scene.identity_category[i];
  }

  for (FrameIndex f = 0; f < cfg.n_frames; ++f) {
    std::vector<std::pair<DetectionRecord, std::optional<std::size_t>>> records;
    std::vector<BBox> visible;
    for (std::size_t i = 0; i < cfg.n_identities; ++i) {
      Mover& m = movers[i];
      if (f > 0) {
        m.box.x += m.vx;
        m.box.y += m.vy;
        reflect(m.box.x, m.vx, 0.0, cfg.scene_width - m.box.w);
        reflect(m.box.y, m.vy, 0.0, cfg.scene_height - m.box.h);
      }
      if (occluded(cfg, i, f)) continue;
      scene.gt_tracks[i].boxes[f] = m.box;
      visible.push_back(m.box);
      // Draws happen in a fixed order whether or not they are used.
      const bool missed = frame_rng.bernoulli(cfg.miss_rate);
      const bool flipped = frame_rng.bernoulli(cfg.label_flip_prob);
      const std::uint64_t other = cfg.n_categories > 1 ? frame_rng.below(cfg.n_categories - 1) : 0;
      const double beta_conf = frame_rng.beta(cfg.conf_alpha, cfg.conf_beta);
      const double high_conf = frame_rng.uniform(0.9, 1.0);
      Vec emb = noisy_embedding(frame_rng, scene.prototypes[i], cfg.noise_sigma);
      if (missed) continue;

      DetectionRecord rec;
      rec.frame = f;
      rec.bbox = m.box;
      CategoryId cat = scene.identity_category[i];
      if (flipped) {
        const auto o = static_cast<CategoryId>(other);
        cat = o >= cat ? o + 1 : o;
      }
      rec.category_id = cat;
      rec.confidence = (cfg.noise_sigma == 0.0 && !flipped) ? high_conf : beta_conf;
      rec.category_score = rec.confidence;
      rec.embedding = to_float(emb);
      records.emplace_back(std::move(rec), i);
    }

    const std::uint64_t n_fp = cfg.fp_rate > 0.0 ? frame_rng.poisson(cfg.fp_rate) : 0;
    for (std::uint64_t k = 0; k < n_fp; ++k) {
      DetectionRecord rec;
      rec.frame = f;
      for (int attempt = 0; attempt < 20; ++attempt) {
        rec.bbox.w = frame_rng.uniform(40.0, 120.0);
        rec.bbox.h = frame_rng.uniform(80.0, 240.0);
        rec.bbox.x = frame_rng.uniform(0.0, cfg.scene_width - rec.bbox.w);
        rec.bbox.y = frame_rng.uniform(0.0, cfg.scene_height - rec.bbox.h);
        const bool clear = std::all_of(visible.begin(), visible.end(),
                                       [&](const BBox& b) { return iou(b, rec.bbox) < 0.1; });
        if (clear) break;
      }
      rec.category_id = static_cast<CategoryId>(frame_rng.below(cfg.n_categories));
      rec.confidence = frame_rng.beta(cfg.fp_conf_alpha, cfg.fp_conf_beta);
      rec.category_score = rec.confidence;
      rec.embedding = to_float(random_unit(frame_rng, d));
      records.emplace_back(std::move(rec), std::nullopt);
    }

    if (records.empty()) continue;
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return canonical_less(a.first, b.first); });
    auto& dets = scene.detections[f];
    auto& srcs = scene.sources[f];
    for (auto& [rec, src] : records) {
      dets.push_back(std::move(rec));
      srcs.push_back(src);
    }
  }

  std::vector<VocabularyEntry> entries;
  const std::size_t n_base = (cfg.n_categories + 1) / 2;
  for (std::size_t k = 0; k < cfg.n_categories; ++k) {
    VocabularyEntry e;
    e.category_id = static_cast<CategoryId>(k);
    e.name = "cat_" + std::to_string(k);
    e.split = k < n_base ? Split::base : Split::novel;
    e.description = "synthetic category " + std::to_string(k);
    e.cate_embedding = to_float(scene.category_prototypes[k]);
    e.attr_embedding = to_float(noisy_embedding(vocab_rng, scene.category_prototypes[k], 0.05 / std::sqrt(static_cast<double>(d))));
    entries.push_back(std::move(e));
  }
  scene.vocabulary = Vocabulary::from_entries(std::move(entries), d);

  std::erase_if(scene.gt_tracks, [](const GroundTruthTrack& g) { return g.boxes.empty(); });
  return scene;
}

Matrix rotate_clip(const Matrix& clip, Rng& rng) {
  const std::size_t d = clip.cols();
  if (d < 2) return clip;
  const std::size_t i = rng.below(d);
  std::size_t j = rng.below(d - 1);
  if (j >= i) ++j;
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Matrix out = clip;
  for (std::size_t r = 0; r < clip.rows(); ++r) {
    const double a = clip(r, i);
    const double b = clip(r, j);
    out(r, i) = c * a - s * b;
    out(r, j) = s * a + c * b;
  }
  return out;
}

Matrix erase_clip(const Matrix& clip, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorCode::InvalidConfig, "erase fraction must lie in [0,1]");
  const std::size_t d = clip.cols();
  const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(d)));
  Matrix out = clip;
  if (k == 0) return out;
  for (std::size_t r = 0; r < clip.rows(); ++r) {
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t t = 0; t < k; ++t) {
      std::swap(idx[t], idx[t + rng.below(d - t)]);
      out(r, idx[t]) = 0.0;
    }
  }
  return out;
}

Matrix scale_clip(const Matrix& clip, double lo, double hi, Rng& rng) {
  if (!(lo > 0.0 && hi >= lo)) throw Error(ErrorCode::InvalidConfig, "scale range must satisfy 0 < lo <= hi");
  Matrix out = clip;
  for (std::size_t r = 0; r < clip.rows(); ++r) {
    const double factor = rng.uniform(lo, hi);
    auto row = out.row(r);
    for (double& x : row) x *= factor;
    const double n = l2_norm(row);
    if (n > 0.0) {
      for (double& x : row) x /= n;
    }
  }
  return out;
}

std::vector<TrainPair> make_train_pairs(const SynthScene& scene, std::size_t n_clip, const Augmentations& aug,
                                        std::size_t n_pairs, std::uint64_t seed) {
  if (n_clip == 0) throw Error(ErrorCode::InvalidConfig, "n_clip must be positive");
  std::vector<std::vector<Vec>> per_identity(scene.prototypes.size());
  for (const auto& [frame, dets] : scene.detections) {
    const auto& srcs = scene.sources.at(frame);
    for (std::size_t k = 0; k < dets.size(); ++k) {
      if (srcs[k]) per_identity[*srcs[k]].push_back(to_double(dets[k].embedding));
    }
  }
  std::map<CategoryId, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < per_identity.size(); ++i) {
    if (!per_identity[i].empty()) by_category[scene.identity_category[i]].push_back(i);
  }
  if (by_category.size() < 2) {
    throw Error(ErrorCode::InvalidConfig, "training pairs need observed identities from at least two categories");
  }
  std::vector<CategoryId> cats;
  for (const auto& kv : by_category) cats.push_back(kv.first);

  Rng rng(seed);
  auto clip_of = [&](std::size_t identity) {
    const auto& obs = per_identity[identity];
    const std::size_t len = std::min(n_clip, obs.size());
    const std::size_t start = rng.below(obs.size() - len + 1);
    Matrix m(len, obs.front().size());
    for (std::size_t r = 0; r < len; ++r) std::copy(obs[start + r].begin(), obs[start + r].end(), m.row(r).begin());
    if (aug.rotation) m = rotate_clip(m, rng);
    if (aug.erase_fraction > 0.0) m = erase_clip(m, aug.erase_fraction, rng);
    if (aug.scale_min != 1.0 || aug.scale_max != 1.0) m = scale_clip(m, aug.scale_min, aug.scale_max, rng);
    return m;
  };

  std::vector<TrainPair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    TrainPair p;
    if (k % 2 == 0) {
      const auto& ids = by_category[cats[rng.below(cats.size())]];
      const std::size_t a = rng.below(ids.size());
      std::size_t b = a;
      if (ids.size() > 1) {
        b = rng.below(ids.size() - 1);
        if (b >= a) ++b;
      }
      p.clip_a = clip_of(ids[a]);
      p.clip_b = clip_of(ids[b]);
      p.y = 1;
    } else {
      const std::size_t ca = rng.below(cats.size());
      std::size_t cb = rng.below(cats.size() - 1);
      if (cb >= ca) ++cb;
      const auto& ia = by_category[cats[ca]];
      const auto& ib = by_category[cats[cb]];
      p.clip_a = clip_of(ia[rng.below(ia.size())]);
      p.clip_b = clip_of(ib[rng.below(ib.size())]);
      p.y = 0;
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace trajkit
