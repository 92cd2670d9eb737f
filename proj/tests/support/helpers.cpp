#include "helpers.hpp"

#include <fstream>
#include <sstream>

namespace testing_support {

using trajkit::Matrix;

oracle::M to_oracle(const Matrix& m) {
  oracle::M out(m.rows(), oracle::V(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

Matrix from_oracle(const oracle::M& m) { return Matrix::from_rows(m); }

oracle::Attn to_oracle(const trajkit::AttentionParams& p) {
  return {to_oracle(p.wq), to_oracle(p.wk), to_oracle(p.wv), to_oracle(p.wo), p.bq, p.bk, p.bv, p.bo};
}

oracle::Mlp to_oracle(const trajkit::MlpParams& p) { return {to_oracle(p.w1), to_oracle(p.w2), p.b1, p.b2}; }

oracle::Ln to_oracle(const trajkit::LayerNormParams& p) { return {p.gamma, p.beta, p.eps}; }

trajkit::AttentionParams random_attention(std::mt19937_64& g, std::size_t d, double scale) {
  trajkit::AttentionParams a;
  a.wq = from_oracle(oracle::random_matrix(g, d, d, scale));
  a.wk = from_oracle(oracle::random_matrix(g, d, d, scale));
  a.wv = from_oracle(oracle::random_matrix(g, d, d, scale));
  a.wo = from_oracle(oracle::random_matrix(g, d, d, scale));
  a.bq = oracle::random_vector(g, d, scale);
  a.bk = oracle::random_vector(g, d, scale);
  a.bv = oracle::random_vector(g, d, scale);
  a.bo = oracle::random_vector(g, d, scale);
  return a;
}

trajkit::SelfFusionParams random_self_params(std::mt19937_64& g, std::size_t d, std::size_t hidden, double scale) {
  trajkit::SelfFusionParams p;
  auto ln = [&] {
    trajkit::LayerNormParams l;
    l.gamma = oracle::random_vector(g, d, 0.5);
    for (double& v : l.gamma) v += 1.0;
    l.beta = oracle::random_vector(g, d, 0.2);
    return l;
  };
  p.ln1 = ln();
  p.attn = random_attention(g, d, scale);
  p.ln2 = ln();
  p.mlp.w1 = from_oracle(oracle::random_matrix(g, d, hidden, scale));
  p.mlp.b1 = oracle::random_vector(g, hidden, scale);
  p.mlp.w2 = from_oracle(oracle::random_matrix(g, hidden, d, scale));
  p.mlp.b2 = oracle::random_vector(g, d, scale);
  return p;
}

Matrix random_clip(std::mt19937_64& g, std::size_t n, std::size_t d, double scale) {
  return from_oracle(oracle::random_matrix(g, n, d, scale));
}

std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 g(std::random_device{}());
  const auto p = std::filesystem::temp_directory_path() / ("trajkit_" + tag + "_" + std::to_string(g()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

trajkit::SynthConfig clean_scene(std::size_t identities, std::size_t frames, std::size_t d, std::uint64_t seed) {
  trajkit::SynthConfig c;
  c.n_identities = identities;
  c.n_frames = frames;
  c.n_categories = 4;
  c.d = d;
  c.seed = seed;
  return c;
}

}  // namespace testing_support
