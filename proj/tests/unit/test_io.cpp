#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "trajkit/error.hpp"
#include "trajkit/fusion.hpp"
#include "trajkit/io.hpp"

using namespace trajkit;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testing_support::temp_dir("io"); }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  fs::path dir_;
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

VocabularyEntry entry(CategoryId id, const std::string& name, Split split, std::size_t d) {
  VocabularyEntry e;
  e.category_id = id;
  e.name = name;
  e.split = split;
  e.cate_embedding.assign(d, 0.5f);
  e.attr_embedding.assign(d, -0.5f);
  return e;
}

}  // namespace

TEST_F(IoTest, ScoreScale) {
  const auto p = write("d.jsonl", R"({"frame":1,"bbox":[0,0,10,10],"conf":3.0,"cat":0,"emb":[1,0]})" "\n");
  EXPECT_NEAR(load_detections(p, 0.1).at(1)[0].confidence, 0.3, 1e-12);
  EXPECT_DOUBLE_EQ(load_detections(p, 1.0).at(1)[0].confidence, 1.0);  // clamped
  const auto q = write("e.jsonl", R"({"frame":1,"bbox":[0,0,10,10],"conf":0.42,"cat":0,"emb":[1,0]})" "\n");
  EXPECT_DOUBLE_EQ(load_detections(q, 1.0).at(1)[0].confidence, 0.42);
  EXPECT_EQ(code_of([&] { load_detections(q, 0.0); }), ErrorCode::InvalidConfig);
}

TEST_F(IoTest, GroupsFramesAscending) {
  const auto p = write("d.jsonl",
                       R"({"frame":5,"bbox":[0,0,10,10],"conf":0.5,"cat":0,"emb":[1,0]})" "\n"
                       "\n"
                       R"({"frame":2,"bbox":[0,0,10,10],"conf":0.5,"cat":0,"emb":[0,1]})" "\n");
  const FrameMap m = load_detections(p);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.begin()->first, 2u);
  EXPECT_EQ(m.rbegin()->first, 5u);
  EXPECT_EQ(m.at(2).size(), 1u);
  EXPECT_EQ(m.at(5).size(), 1u);
}

TEST_F(IoTest, LineOrderDoesNotMatter) {
  const std::string a = R"({"frame":1,"bbox":[5,0,10,10],"conf":0.5,"cat":0,"emb":[1,0]})";
  const std::string b = R"({"frame":1,"bbox":[0,0,10,10],"conf":0.5,"cat":1,"emb":[0,1]})";
  const std::string c = R"({"frame":1,"bbox":[9,9,10,10],"conf":0.9,"cat":2,"emb":[1,1]})";
  const FrameMap x = load_detections(write("x.jsonl", a + "\n" + b + "\n" + c + "\n"));
  const FrameMap y = load_detections(write("y.jsonl", c + "\n" + b + "\n" + a + "\n"));
  ASSERT_EQ(x.at(1).size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(x.at(1)[i].bbox, y.at(1)[i].bbox);
    EXPECT_EQ(x.at(1)[i].embedding, y.at(1)[i].embedding);
  }
  EXPECT_EQ(x.at(1)[0].category_id, 2u);  // highest confidence first
  EXPECT_EQ(x.at(1)[1].category_id, 1u);  // then smaller x
}

TEST_F(IoTest, DetectionErrors) {
  const auto bad = write("bad.jsonl", R"({"frame":1,"bbox":[0,0,10,10],"conf":0.5,"cat":0,"emb":[1,0]})" "\n"
                                      "{not json\n");
  try {
    load_detections(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  const auto ragged = write("r.jsonl", R"({"frame":1,"bbox":[0,0,10,10],"conf":0.5,"cat":0,"emb":[1,0]})" "\n"
                                       R"({"frame":2,"bbox":[0,0,10,10],"conf":0.5,"cat":0,"emb":[1,0,0]})" "\n");
  EXPECT_EQ(code_of([&] { load_detections(ragged); }), ErrorCode::DimMismatch);
  const auto nobox = write("n.jsonl", R"({"frame":1,"bbox":[0,0,0,10],"conf":0.5,"cat":0,"emb":[1,0]})" "\n");
  EXPECT_EQ(code_of([&] { load_detections(nobox); }), ErrorCode::MalformedLine);
  const auto noemb = write("e.jsonl", R"({"frame":1,"bbox":[0,0,1,1],"conf":0.5,"cat":0})" "\n");
  EXPECT_EQ(code_of([&] { load_detections(noemb); }), ErrorCode::MissingEmbedding);
  EXPECT_EQ(code_of([&] { load_detections(dir_ / "absent.jsonl"); }), ErrorCode::Io);

  const Vocabulary v = Vocabulary::from_entries({entry(0, "a", Split::base, 2)}, 2);
  const auto unknown = write("u.jsonl", R"({"frame":1,"bbox":[0,0,1,1],"conf":0.5,"cat":7,"emb":[1,0]})" "\n");
  EXPECT_EQ(code_of([&] { load_detections(unknown, 1.0, &v); }), ErrorCode::UnknownCategory);
}

TEST_F(IoTest, DetectionRoundTripWithSidecar) {
  const SynthScene s = gen_scene(testing_support::clean_scene(3, 4, 6, 1));
  write_detections(s.detections, dir_ / "inline.jsonl");
  write_detections(s.detections, dir_ / "side.jsonl", dir_ / "side.embin");
  const FrameMap a = load_detections(dir_ / "inline.jsonl");
  const FrameMap b = load_detections(dir_ / "side.jsonl");
  ASSERT_EQ(a.size(), s.detections.size());
  for (const auto& [f, recs] : s.detections) {
    ASSERT_EQ(a.at(f).size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      EXPECT_EQ(a.at(f)[i].bbox, recs[i].bbox);
      EXPECT_EQ(a.at(f)[i].confidence, recs[i].confidence);
      EXPECT_EQ(a.at(f)[i].embedding, recs[i].embedding);
      EXPECT_EQ(b.at(f)[i].embedding, recs[i].embedding);
    }
  }
  EXPECT_LT(fs::file_size(dir_ / "side.jsonl"), fs::file_size(dir_ / "inline.jsonl"));
}

TEST_F(IoTest, EmbinRoundTripAndErrors) {
  EmbeddingTable t{3, {1, 2, 3, 4, 5, 6}};
  write_embin(t, dir_ / "t.embin");
  const EmbeddingTable back = read_embin(dir_ / "t.embin");
  EXPECT_EQ(back.dim, 3u);
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.count(), 2u);

  std::string bytes = testing_support::read_file(dir_ / "t.embin");
  write("short.embin", bytes.substr(0, bytes.size() - 2));
  EXPECT_EQ(code_of([&] { read_embin(dir_ / "short.embin"); }), ErrorCode::Truncated);
  bytes[0] = 'X';
  write("magic.embin", bytes);
  EXPECT_EQ(code_of([&] { read_embin(dir_ / "magic.embin"); }), ErrorCode::BadMagic);
}

TEST_F(IoTest, Vocabulary) {
  const auto ok = write("v.json", R"({"dim_text":2,"entries":[
    {"id":0,"name":"cat","split":"base","cate_emb":[1,0],"attr_emb":[0,1]},
    {"id":1,"name":"zucchini","split":"novel","description":"long, green vegetable","cate_emb":[0,1],"attr_emb":[1,1]}]})");
  const Vocabulary v = load_vocabulary(ok);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v.find(1)->name, "zucchini");
  EXPECT_EQ(v.find(1)->split, Split::novel);
  EXPECT_EQ(v.splits().at(0), Split::base);

  const auto dup = write("dup.json", R"({"dim_text":2,"entries":[
    {"id":0,"name":"a","split":"base","cate_emb":[1,0],"attr_emb":[0,1]},
    {"id":0,"name":"b","split":"base","cate_emb":[1,0],"attr_emb":[0,1]}]})");
  try {
    load_vocabulary(dup);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateCategory);
    EXPECT_NE(std::string(e.what()).find("(0)"), std::string::npos);
  }
  const auto width = write("w.json", R"({"dim_text":2,"entries":[
    {"id":0,"name":"a","split":"base","cate_emb":[1,0],"attr_emb":[0,1,2]}]})");
  EXPECT_EQ(code_of([&] { load_vocabulary(width); }), ErrorCode::DimMismatch);
  const auto split = write("s.json", R"({"dim_text":2,"entries":[
    {"id":0,"name":"a","split":"rare","cate_emb":[1,0],"attr_emb":[0,1]}]})");
  EXPECT_EQ(code_of([&] { load_vocabulary(split); }), ErrorCode::BadSplit);

  write_vocabulary(v, dir_ / "round.json");
  const Vocabulary r = load_vocabulary(dir_ / "round.json");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].description, "long, green vegetable");
  EXPECT_EQ(r[1].attr_embedding, v[1].attr_embedding);
}

TEST_F(IoTest, WeightsLoadIdentityBundle) {
  FusionWeights w;
  w.d = 8;
  AttentionParams a = AttentionParams::zeros(8);
  a.wq = a.wk = a.wv = a.wo = Matrix::identity(8);
  w.attn = a;
  save_weights(to_bundle(w), dir_ / "w.twb");
  const WeightBundle b = load_weights(dir_ / "w.twb");
  EXPECT_EQ(b.d, 8u);
  EXPECT_TRUE(b.has("attn.wq"));
  EXPECT_EQ(fusion_weights_from_bundle(b).attn->wq, Matrix::identity(8));
}

TEST_F(IoTest, WeightsErrors) {
  WeightBundle b;
  b.tensors["attn.bq"] = Tensor{{4}, {1, 2, 3, 4}};
  save_weights(b, dir_ / "ok.twb");
  std::string bytes = testing_support::read_file(dir_ / "ok.twb");

  write("trunc.twb", bytes.substr(0, bytes.size() - 3));
  EXPECT_EQ(code_of([&] { load_weights(dir_ / "trunc.twb"); }), ErrorCode::Truncated);

  std::string magic = bytes;
  magic[1] = '?';
  write("magic.twb", magic);
  EXPECT_EQ(code_of([&] { load_weights(dir_ / "magic.twb"); }), ErrorCode::BadMagic);

  std::string version = bytes;
  version[4] = 9;
  write("ver.twb", version);
  EXPECT_EQ(code_of([&] { load_weights(dir_ / "ver.twb"); }), ErrorCode::VersionMismatch);

  WeightBundle nan;
  nan.tensors["mlp.b2"] = Tensor{{2}, {1.0f, std::numeric_limits<float>::quiet_NaN()}};
  save_weights(nan, dir_ / "nan.twb");
  try {
    load_weights(dir_ / "nan.twb");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
    EXPECT_NE(std::string(e.what()).find("mlp.b2"), std::string::npos);
  }

  WeightBundle shape;
  shape.tensors["attn.wq"] = Tensor{{4, 4}, std::vector<float>(16, 0.f)};
  shape.tensors["attn.bq"] = Tensor{{3}, {0, 0, 0}};
  save_weights(shape, dir_ / "shape.twb");
  EXPECT_EQ(code_of([&] { load_weights(dir_ / "shape.twb"); }), ErrorCode::ShapeMismatch);
}

TEST_F(IoTest, TracksFile) {
  write_tracks({}, dir_ / "empty.jsonl");
  EXPECT_EQ(fs::file_size(dir_ / "empty.jsonl"), 0u);
  EXPECT_TRUE(read_tracks(dir_ / "empty.jsonl").empty());

  OutputTrack t;
  t.track_id = 4;
  t.label = 2;
  t.label_source = LabelSource::attr;
  t.scores = TrackScores{1, 0.25, 2, 0.875, 2, 0.5};
  for (FrameIndex f : {3, 1, 2}) t.observations.push_back({f, {1.5, 2, 3, 4}, 0.1 * f, 2, static_cast<std::uint32_t>(f)});
  OutputTrack u;
  u.track_id = 1;
  u.label = 0;
  u.observations.push_back({7, {0, 0, 1, 1}, 1.0 / 3.0, 0, 0});
  write_tracks({t, u}, dir_ / "t.jsonl");

  const std::string text = testing_support::read_file(dir_ / "t.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  EXPECT_EQ(text.find("\"track_id\":1"), text.find("\"track_id\""));  // id 1 first

  const auto back = read_tracks(dir_ / "t.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], u);
  OutputTrack sorted = t;
  std::sort(sorted.observations.begin(), sorted.observations.end(),
            [](const auto& a, const auto& b) { return a.frame < b.frame; });
  EXPECT_EQ(back[1], sorted);
}

TEST_F(IoTest, GroundTruthRoundTrip) {
  std::vector<GroundTruthTrack> gts(2);
  gts[0] = {1, 3, {{0, {1, 2, 3, 4}}, {2, {2, 2, 3, 4}}}};
  gts[1] = {2, 0, {{1, {0.5, 0.25, 9, 9}}}};
  write_groundtruth(gts, dir_ / "gt.jsonl");
  const auto back = load_groundtruth(dir_ / "gt.jsonl");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].track_id, gts[i].track_id);
    EXPECT_EQ(back[i].category_id, gts[i].category_id);
    EXPECT_EQ(back[i].boxes, gts[i].boxes);
  }
  const auto bad = write("g.jsonl", R"({"track_id":1,"cat":0,"frame":0,"bbox":[0,0,1,1]})" "\n"
                                    R"({"track_id":1,"cat":1,"frame":1,"bbox":[0,0,1,1]})" "\n");
  EXPECT_EQ(code_of([&] { load_groundtruth(bad); }), ErrorCode::MalformedLine);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(0.1f), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_number(x)), x);
}
