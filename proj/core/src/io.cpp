#include "trajkit/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "trajkit/error.hpp"

namespace trajkit {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

std::string where(const fs::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

BBox parse_bbox(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::MalformedLine, ctx + ": bbox must be [x,y,w,h]");
  }
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw Error(ErrorCode::MalformedLine, ctx + ": bbox needs w > 0 and h > 0");
  return b;
}

json bbox_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

std::vector<float> parse_float_array(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw Error(ErrorCode::MalformedLine, ctx + ": expected a number array");
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::MalformedLine, ctx + ": non-numeric entry");
    const float f = static_cast<float>(v.get<double>());
    if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, ctx);
    out.push_back(f);
  }
  return out;
}

// Little-endian primitives; the on-disk formats are LE regardless of host.
template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, float>) {
    std::uint32_t u;
    std::memcpy(&u, &value, sizeof(u));
    bits = u;
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

class ByteReader {
 public:
  ByteReader(std::vector<char> bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

  bool at_end() const { return pos_ == bytes_.size(); }

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    if constexpr (std::is_same_v<T, float>) {
      const auto u = static_cast<std::uint32_t>(bits);
      float f;
      std::memcpy(&f, &u, sizeof(f));
      return f;
    } else {
      return static_cast<T>(bits);
    }
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::Truncated, name_);
  }

 private:
  std::vector<char> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::vector<char> slurp(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void append_number(std::string& out, float v) { out += format_number(v); }
void append_number(std::string& out, double v) { out += format_number(v); }

}  // namespace

std::string format_number(float value) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return {buf.data(), res.ptr};
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return {buf.data(), res.ptr};
}

bool canonical_less(const DetectionRecord& a, const DetectionRecord& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  const auto ka = std::tie(a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h, a.category_id, a.category_score);
  const auto kb = std::tie(b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h, b.category_id, b.category_score);
  if (ka != kb) return ka < kb;
  return a.embedding < b.embedding;
}

void canonicalize_frame(std::vector<DetectionRecord>& records) {
  std::stable_sort(records.begin(), records.end(), canonical_less);
}

// ---------------------------------------------------------------------------

FrameMap load_detections(const fs::path& path, double score_scale, const Vocabulary* vocabulary) {
  DetectionLoadOptions options;
  options.score_scale = score_scale;
  options.vocabulary = vocabulary;
  return load_detections(path, options);
}

FrameMap load_detections(const fs::path& path, const DetectionLoadOptions& options) {
  if (!(options.score_scale > 0.0) || !std::isfinite(options.score_scale)) {
    throw Error(ErrorCode::InvalidConfig, "score_scale must be a positive real");
  }
  auto in = open_in(path);
  FrameMap frames;
  std::optional<EmbeddingTable> sidecar;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = where(path, line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedLine, ctx + ": " + e.what());
    }
    DetectionRecord rec;
    try {
      rec.frame = j.at("frame").get<std::uint64_t>();
      rec.bbox = parse_bbox(j.at("bbox"), ctx);
      const double raw = j.at("conf").get<double>();
      if (!std::isfinite(raw)) throw Error(ErrorCode::NonFinite, ctx + ": conf");
      rec.confidence = std::clamp(raw * options.score_scale, 0.0, 1.0);
      rec.category_id = j.at("cat").get<CategoryId>();
      rec.category_score = std::clamp(j.value("cat_score", rec.confidence), 0.0, 1.0);
      if (j.contains("emb")) {
        rec.embedding = parse_float_array(j["emb"], ctx);
      } else if (j.contains("emb_ref")) {
        if (!sidecar) {
          fs::path sc = options.sidecar ? *options.sidecar : fs::path(path).replace_extension(".embin");
          sidecar = read_embin(sc);
        }
        const auto ref = j["emb_ref"].get<std::uint64_t>();
        if (ref >= sidecar->count()) {
          throw Error(ErrorCode::MalformedLine, ctx + ": emb_ref out of range");
        }
        auto first = sidecar->values.begin() + static_cast<std::ptrdiff_t>(ref * sidecar->dim);
        rec.embedding.assign(first, first + sidecar->dim);
      } else {
        throw Error(ErrorCode::MissingEmbedding, ctx);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedLine, ctx + ": " + e.what());
    }
    if (rec.embedding.empty()) throw Error(ErrorCode::MissingEmbedding, ctx);
    if (!dim) dim = rec.embedding.size();
    if (rec.embedding.size() != *dim) {
      throw Error(ErrorCode::DimMismatch, ctx + ": embedding length " + std::to_string(rec.embedding.size()) +
                                              " != " + std::to_string(*dim));
    }
    if (options.vocabulary && !options.vocabulary->contains(rec.category_id)) {
      throw Error(ErrorCode::UnknownCategory, ctx + ": category " + std::to_string(rec.category_id));
    }
    frames[rec.frame].push_back(std::move(rec));
  }
  for (auto& [frame, records] : frames) canonicalize_frame(records);
  return frames;
}

void write_detections(const FrameMap& detections, const fs::path& path,
                      const std::optional<fs::path>& sidecar) {
  auto out = open_out(path);
  EmbeddingTable table;
  std::string line;
  for (const auto& [frame, records] : detections) {
    for (const auto& rec : records) {
      line.clear();
      line += "{\"frame\":";
      line += std::to_string(frame);
      line += ",\"bbox\":[";
      append_number(line, rec.bbox.x);
      line += ',';
      append_number(line, rec.bbox.y);
      line += ',';
      append_number(line, rec.bbox.w);
      line += ',';
      append_number(line, rec.bbox.h);
      line += "],\"conf\":";
      append_number(line, rec.confidence);
      line += ",\"cat\":";
      line += std::to_string(rec.category_id);
      line += ",\"cat_score\":";
      append_number(line, rec.category_score);
      if (sidecar) {
        if (table.dim == 0) table.dim = static_cast<std::uint32_t>(rec.embedding.size());
        if (rec.embedding.size() != table.dim) {
          throw Error(ErrorCode::DimMismatch, "write_detections: ragged embeddings");
        }
        line += ",\"emb_ref\":";
        line += std::to_string(table.count());
        table.values.insert(table.values.end(), rec.embedding.begin(), rec.embedding.end());
      } else {
        line += ",\"emb\":[";
        for (std::size_t i = 0; i < rec.embedding.size(); ++i) {
          if (i) line += ',';
          append_number(line, rec.embedding[i]);
        }
        line += ']';
      }
      line += "}\n";
      out << line;
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
  if (sidecar) write_embin(table, *sidecar);
}

EmbeddingTable read_embin(const fs::path& path) {
  ByteReader r(slurp(path), path.string());
  if (r.get_string(4) != "TRJK") throw Error(ErrorCode::BadMagic, path.string());
  const auto version = r.get<std::uint16_t>();
  if (version != kEmbinVersion) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": version " + std::to_string(version));
  }
  EmbeddingTable table;
  table.dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (table.dim == 0 && count != 0) throw Error(ErrorCode::ShapeMismatch, path.string() + ": dim 0");
  r.need(count * table.dim * sizeof(float));
  table.values.resize(count * table.dim);
  for (auto& v : table.values) {
    v = r.get<float>();
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, path.string());
  }
  return table;
}

void write_embin(const EmbeddingTable& table, const fs::path& path) {
  auto out = open_out(path, std::ios::binary);
  out.write("TRJK", 4);
  put_le<std::uint16_t>(out, kEmbinVersion);
  put_le<std::uint32_t>(out, table.dim);
  put_le<std::uint64_t>(out, table.count());
  for (float v : table.values) put_le<float>(out, v);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------

Vocabulary load_vocabulary(const fs::path& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine, path.string() + ": " + e.what());
  }
  std::vector<VocabularyEntry> entries;
  std::size_t dim_text = 0;
  try {
    dim_text = j.at("dim_text").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
      VocabularyEntry entry;
      entry.category_id = e.at("id").get<CategoryId>();
      const std::string ctx = path.string() + ": category " + std::to_string(entry.category_id);
      entry.name = e.at("name").get<std::string>();
      const auto split = parse_split(e.at("split").get<std::string>());
      if (!split) throw Error(ErrorCode::BadSplit, ctx + ": split must be base or novel");
      entry.split = *split;
      entry.description = e.value("description", std::string{});
      if (!e.contains("cate_emb") || !e.contains("attr_emb")) throw Error(ErrorCode::MissingEmbedding, ctx);
      entry.cate_embedding = parse_float_array(e["cate_emb"], ctx);
      entry.attr_embedding = parse_float_array(e["attr_emb"], ctx);
      entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine, path.string() + ": " + e.what());
  }
  return Vocabulary::from_entries(std::move(entries), dim_text);
}

void write_vocabulary(const Vocabulary& vocabulary, const fs::path& path) {
  json entries = json::array();
  for (const auto& e : vocabulary.entries()) {
    json je;
    je["id"] = e.category_id;
    je["name"] = e.name;
    je["split"] = to_string(e.split);
    je["description"] = e.description;
    je["cate_emb"] = e.cate_embedding;
    je["attr_emb"] = e.attr_embedding;
    entries.push_back(std::move(je));
  }
  json j;
  j["dim_text"] = vocabulary.dim_text();
  j["entries"] = std::move(entries);
  auto out = open_out(path);
  out << j.dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const Tensor& WeightBundle::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(ErrorCode::MissingWeights, name);
  return it->second;
}

namespace {

// Symbolic shapes of the recognised tensors: 'd' embedding width, 'h' MLP
// hidden width, 't' text width, '1' a literal one.
const std::map<std::string, std::string>& known_shapes() {
  static const std::map<std::string, std::string> shapes = [] {
    std::map<std::string, std::string> s{
        {"ln1.gamma", "d"},   {"ln1.beta", "d"},     {"ln2.gamma", "d"},   {"ln2.beta", "d"},
        {"mlp.w1", "dh"},     {"mlp.b1", "h"},       {"mlp.w2", "hd"},     {"mlp.b2", "d"},
        {"concat.pool_w", "dd"}, {"concat.pool_b", "d"}, {"concat.fc_w", "d"}, {"concat.fc_b", "1"},
        {"lang_proj.w", "td"},
    };
    for (const char* group : {"attn", "cross"}) {
      for (const char* w : {"wq", "wk", "wv", "wo"}) s[std::string(group) + "." + w] = "dd";
      for (const char* b : {"bq", "bk", "bv", "bo"}) s[std::string(group) + "." + b] = "d";
    }
    return s;
  }();
  return shapes;
}

}  // namespace

void validate_bundle(WeightBundle& bundle) {
  std::map<char, std::uint32_t> bound;
  for (const auto& [name, tensor] : bundle.tensors) {
    if (tensor.values.size() != tensor.numel()) {
      throw Error(ErrorCode::ShapeMismatch, name + ": payload size does not match dims");
    }
    for (float v : tensor.values) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "NonFinite(" + name + ")");
    }
    auto it = known_shapes().find(name);
    if (it == known_shapes().end()) continue;
    const std::string& sym = it->second;
    std::vector<std::uint32_t> dims = tensor.dims;
    // fc_w may be stored as d×1.
    if (name == "concat.fc_w" && dims.size() == 2 && dims[1] == 1) dims.pop_back();
    if (name == "concat.fc_b" && dims.empty()) dims.push_back(1);
    if (dims.size() != sym.size()) {
      throw Error(ErrorCode::ShapeMismatch, name + ": rank " + std::to_string(dims.size()) + ", expected " +
                                                std::to_string(sym.size()));
    }
    for (std::size_t i = 0; i < sym.size(); ++i) {
      if (sym[i] == '1') {
        if (dims[i] != 1) throw Error(ErrorCode::ShapeMismatch, name);
        continue;
      }
      auto [pos, inserted] = bound.emplace(sym[i], dims[i]);
      if (!inserted && pos->second != dims[i]) {
        throw Error(ErrorCode::ShapeMismatch, name + ": dimension " + std::to_string(dims[i]) +
                                                  " inconsistent with " + std::string(1, sym[i]) + "=" +
                                                  std::to_string(pos->second));
      }
    }
  }
  bundle.d = bound.count('d') ? bound['d'] : 0;
}

WeightBundle load_weights(const fs::path& path) {
  ByteReader r(slurp(path), path.string());
  if (r.get_string(4) != "TRJW") throw Error(ErrorCode::BadMagic, path.string());
  WeightBundle bundle;
  bundle.version = r.get<std::uint16_t>();
  if (bundle.version != kWeightBundleVersion) {
    throw Error(ErrorCode::VersionMismatch, path.string() + ": version " + std::to_string(bundle.version));
  }
  while (!r.at_end()) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name = r.get_string(name_len);
    if (name.empty()) throw Error(ErrorCode::ShapeMismatch, path.string() + ": empty tensor name");
    Tensor t;
    const auto rank = r.get<std::uint8_t>();
    for (std::uint8_t i = 0; i < rank; ++i) t.dims.push_back(r.get<std::uint32_t>());
    r.need(t.numel() * sizeof(float));
    t.values.resize(t.numel());
    for (auto& v : t.values) v = r.get<float>();
    if (!bundle.tensors.emplace(name, std::move(t)).second) {
      throw Error(ErrorCode::ShapeMismatch, path.string() + ": duplicate tensor " + name);
    }
  }
  validate_bundle(bundle);
  return bundle;
}

void save_weights(const WeightBundle& bundle, const fs::path& path) {
  auto out = open_out(path, std::ios::binary);
  out.write("TRJW", 4);
  put_le<std::uint16_t>(out, bundle.version);
  for (const auto& [name, tensor] : bundle.tensors) {
    if (name.size() > 0xFFFF) throw Error(ErrorCode::ShapeMismatch, "tensor name too long");
    if (tensor.dims.size() > 0xFF) throw Error(ErrorCode::ShapeMismatch, name + ": rank too large");
    if (tensor.values.size() != tensor.numel()) throw Error(ErrorCode::ShapeMismatch, name);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dims.size()));
    for (auto d : tensor.dims) put_le<std::uint32_t>(out, d);
    for (float v : tensor.values) put_le<float>(out, v);
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------

std::vector<GroundTruthTrack> load_groundtruth(const fs::path& path) {
  auto in = open_in(path);
  std::map<TrackId, GroundTruthTrack> tracks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = where(path, line_no);
    try {
      const json j = json::parse(line);
      const auto id = j.at("track_id").get<TrackId>();
      const auto cat = j.at("cat").get<CategoryId>();
      const auto frame = j.at("frame").get<FrameIndex>();
      const BBox box = parse_bbox(j.at("bbox"), ctx);
      auto [it, inserted] = tracks.try_emplace(id);
      auto& gt = it->second;
      if (inserted) {
        gt.track_id = id;
        gt.category_id = cat;
      } else if (gt.category_id != cat) {
        throw Error(ErrorCode::MalformedLine, ctx + ": track " + std::to_string(id) + " changes category");
      }
      if (!gt.boxes.emplace(frame, box).second) {
        throw Error(ErrorCode::MalformedLine, ctx + ": duplicate frame for track " + std::to_string(id));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedLine, ctx + ": " + e.what());
    }
  }
  std::vector<GroundTruthTrack> out;
  out.reserve(tracks.size());
  for (auto& [id, gt] : tracks) out.push_back(std::move(gt));
  return out;
}

void write_groundtruth(const std::vector<GroundTruthTrack>& tracks, const fs::path& path) {
  auto out = open_out(path);
  std::vector<const GroundTruthTrack*> order;
  for (const auto& t : tracks) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->track_id < b->track_id; });
  for (const auto* t : order) {
    for (const auto& [frame, box] : t->boxes) {
      json j;
      j["track_id"] = t->track_id;
      j["cat"] = t->category_id;
      j["frame"] = frame;
      j["bbox"] = bbox_json(box);
      out << j.dump() << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------

void write_tracks(const std::vector<OutputTrack>& tracks, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  std::vector<const OutputTrack*> order;
  for (const auto& t : tracks) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->track_id < b->track_id; });
  for (const auto* t : order) {
    std::vector<const TrackObservation*> obs;
    for (const auto& o : t->observations) obs.push_back(&o);
    std::stable_sort(obs.begin(), obs.end(), [](auto* a, auto* b) { return a->frame < b->frame; });
    for (const auto* o : obs) {
      json j;
      j["track_id"] = t->track_id;
      j["frame"] = o->frame;
      j["bbox"] = bbox_json(o->bbox);
      j["conf"] = o->confidence;
      j["cat"] = o->category_id;
      j["det"] = o->det_index;
      j["label"] = t->label;
      j["label_source"] = to_string(t->label_source);
      if (t->scores) {
        const auto& s = *t->scores;
        j["scores"] = {{"v_cate", s.v_cate}, {"s_cate", s.s_cate}, {"v_attr", s.v_attr},
                       {"s_attr", s.s_attr}, {"v_det", s.v_det},   {"s_det", s.s_det}};
      }
      out << j.dump() << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::vector<OutputTrack> read_tracks(const fs::path& path) {
  auto in = open_in(path);
  std::map<TrackId, OutputTrack> tracks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = where(path, line_no);
    try {
      const json j = json::parse(line);
      OutputTrack head;
      head.track_id = j.at("track_id").get<TrackId>();
      head.label = j.value("label", CategoryId{0});
      const auto source = parse_label_source(j.value("label_source", std::string("det")));
      if (!source) throw Error(ErrorCode::MalformedLine, ctx + ": bad label_source");
      head.label_source = *source;
      if (j.contains("scores")) {
        const auto& js = j["scores"];
        head.scores = TrackScores{js.at("v_cate").get<CategoryId>(), js.at("s_cate").get<double>(),
                                  js.at("v_attr").get<CategoryId>(), js.at("s_attr").get<double>(),
                                  js.at("v_det").get<CategoryId>(),  js.at("s_det").get<double>()};
      }
      TrackObservation o;
      o.frame = j.at("frame").get<FrameIndex>();
      o.bbox = parse_bbox(j.at("bbox"), ctx);
      o.confidence = j.at("conf").get<double>();
      o.category_id = j.at("cat").get<CategoryId>();
      o.det_index = j.value("det", std::uint32_t{0});

      auto [it, inserted] = tracks.try_emplace(head.track_id, head);
      auto& t = it->second;
      if (!inserted && (t.label != head.label || t.label_source != head.label_source || t.scores != head.scores)) {
        throw Error(ErrorCode::MalformedLine, ctx + ": inconsistent track-level fields");
      }
      if (!t.observations.empty() && t.observations.back().frame >= o.frame) {
        auto pos = std::lower_bound(t.observations.begin(), t.observations.end(), o.frame,
                                    [](const TrackObservation& a, FrameIndex f) { return a.frame < f; });
        if (pos != t.observations.end() && pos->frame == o.frame) {
          throw Error(ErrorCode::MalformedLine, ctx + ": duplicate frame");
        }
        t.observations.insert(pos, o);
      } else {
        t.observations.push_back(o);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedLine, ctx + ": " + e.what());
    }
  }
  std::vector<OutputTrack> out;
  out.reserve(tracks.size());
  for (auto& [id, t] : tracks) out.push_back(std::move(t));
  return out;
}

}  // namespace trajkit
