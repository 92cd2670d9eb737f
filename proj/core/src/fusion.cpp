#include "trajkit/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trajkit/error.hpp"
#include "trajkit/random.hpp"

namespace trajkit {

LayerNormParams LayerNormParams::identity(std::size_t d) { return {Vec(d, 1.0), Vec(d, 0.0), 1e-5}; }

AttentionParams AttentionParams::zeros(std::size_t d) {
  return {Matrix(d, d), Matrix(d, d), Matrix(d, d), Matrix(d, d), Vec(d), Vec(d), Vec(d), Vec(d)};
}

MlpParams MlpParams::zeros(std::size_t d, std::size_t hidden) {
  return {Matrix(d, hidden), Vec(hidden), Matrix(hidden, d), Vec(d)};
}

namespace {

template <typename Fn>
void visit_self_params(SelfFusionParams& p, Fn&& fn) {
  fn(p.ln1.gamma);
  fn(p.ln1.beta);
  fn(p.attn.wq.data());
  fn(p.attn.wk.data());
  fn(p.attn.wv.data());
  fn(p.attn.wo.data());
  fn(p.attn.bq);
  fn(p.attn.bk);
  fn(p.attn.bv);
  fn(p.attn.bo);
  fn(p.ln2.gamma);
  fn(p.ln2.beta);
  fn(p.mlp.w1.data());
  fn(p.mlp.b1);
  fn(p.mlp.w2.data());
  fn(p.mlp.b2);
}

}  // namespace

std::size_t SelfFusionParams::parameter_count() const {
  std::size_t n = 0;
  visit_self_params(const_cast<SelfFusionParams&>(*this), [&](const std::vector<double>& v) { n += v.size(); });
  return n;
}

Vec SelfFusionParams::flatten() const {
  Vec out;
  out.reserve(parameter_count());
  visit_self_params(const_cast<SelfFusionParams&>(*this),
                    [&](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); });
  return out;
}

void SelfFusionParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw Error(ErrorCode::LengthMismatch, "SelfFusionParams::assign");
  std::size_t pos = 0;
  visit_self_params(*this, [&](std::vector<double>& v) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), v.size(), v.begin());
    pos += v.size();
  });
}

SelfFusionParams FusionWeights::self_params() const {
  if (!ln1 || !attn || !ln2 || !mlp) {
    throw Error(ErrorCode::MissingWeights, "self fusion needs ln1, attn, ln2 and mlp tensors");
  }
  return {*ln1, *attn, *ln2, *mlp};
}

void FusionWeights::set_self_params(const SelfFusionParams& p) {
  d = p.width();
  ln1 = p.ln1;
  attn = p.attn;
  ln2 = p.ln2;
  mlp = p.mlp;
}

// ---------------------------------------------------------------------------
// Bundle conversion

namespace {

Vec tensor_vec(const Tensor& t) { return Vec(t.values.begin(), t.values.end()); }

Matrix tensor_mat(const Tensor& t) {
  if (t.dims.size() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a rank-2 tensor");
  return Matrix(t.dims[0], t.dims[1], tensor_vec(t));
}

Tensor vec_tensor(const Vec& v) {
  return {{static_cast<std::uint32_t>(v.size())}, std::vector<float>(v.begin(), v.end())};
}

Tensor mat_tensor(const Matrix& m) {
  return {{static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
          std::vector<float>(m.data().begin(), m.data().end())};
}

bool has_group(const WeightBundle& b, const std::string& prefix, std::initializer_list<const char*> names) {
  bool any = false;
  bool all = true;
  for (const char* n : names) {
    const bool h = b.has(prefix + "." + n);
    any = any || h;
    all = all && h;
  }
  if (any && !all) throw Error(ErrorCode::MissingWeights, "incomplete tensor group '" + prefix + "'");
  return all;
}

AttentionParams attention_from(const WeightBundle& b, const std::string& g) {
  return {tensor_mat(b.at(g + ".wq")), tensor_mat(b.at(g + ".wk")), tensor_mat(b.at(g + ".wv")),
          tensor_mat(b.at(g + ".wo")), tensor_vec(b.at(g + ".bq")), tensor_vec(b.at(g + ".bk")),
          tensor_vec(b.at(g + ".bv")), tensor_vec(b.at(g + ".bo"))};
}

void attention_to(WeightBundle& b, const std::string& g, const AttentionParams& a) {
  b.tensors[g + ".wq"] = mat_tensor(a.wq);
  b.tensors[g + ".wk"] = mat_tensor(a.wk);
  b.tensors[g + ".wv"] = mat_tensor(a.wv);
  b.tensors[g + ".wo"] = mat_tensor(a.wo);
  b.tensors[g + ".bq"] = vec_tensor(a.bq);
  b.tensors[g + ".bk"] = vec_tensor(a.bk);
  b.tensors[g + ".bv"] = vec_tensor(a.bv);
  b.tensors[g + ".bo"] = vec_tensor(a.bo);
}

}  // namespace

FusionWeights fusion_weights_from_bundle(const WeightBundle& bundle) {
  WeightBundle checked = bundle;
  validate_bundle(checked);
  FusionWeights w;
  w.d = checked.d;
  for (const char* ln : {"ln1", "ln2"}) {
    if (has_group(checked, ln, {"gamma", "beta"})) {
      LayerNormParams p{tensor_vec(checked.at(std::string(ln) + ".gamma")),
                        tensor_vec(checked.at(std::string(ln) + ".beta")), 1e-5};
      (std::string(ln) == "ln1" ? w.ln1 : w.ln2) = std::move(p);
    }
  }
  if (has_group(checked, "attn", {"wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"})) w.attn = attention_from(checked, "attn");
  if (has_group(checked, "cross", {"wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"})) w.cross = attention_from(checked, "cross");
  if (has_group(checked, "mlp", {"w1", "b1", "w2", "b2"})) {
    w.mlp = MlpParams{tensor_mat(checked.at("mlp.w1")), tensor_vec(checked.at("mlp.b1")),
                      tensor_mat(checked.at("mlp.w2")), tensor_vec(checked.at("mlp.b2"))};
  }
  if (has_group(checked, "concat", {"pool_w", "pool_b", "fc_w", "fc_b"})) {
    w.concat = ConcatScorerParams{tensor_mat(checked.at("concat.pool_w")), tensor_vec(checked.at("concat.pool_b")),
                                  tensor_vec(checked.at("concat.fc_w")),
                                  static_cast<double>(checked.at("concat.fc_b").values.at(0))};
  }
  if (checked.has("lang_proj.w")) w.lang_proj = tensor_mat(checked.at("lang_proj.w"));
  return w;
}

WeightBundle to_bundle(const FusionWeights& w) {
  WeightBundle b;
  b.version = kWeightBundleVersion;
  if (w.ln1) {
    b.tensors["ln1.gamma"] = vec_tensor(w.ln1->gamma);
    b.tensors["ln1.beta"] = vec_tensor(w.ln1->beta);
  }
  if (w.ln2) {
    b.tensors["ln2.gamma"] = vec_tensor(w.ln2->gamma);
    b.tensors["ln2.beta"] = vec_tensor(w.ln2->beta);
  }
  if (w.attn) attention_to(b, "attn", *w.attn);
  if (w.cross) attention_to(b, "cross", *w.cross);
  if (w.mlp) {
    b.tensors["mlp.w1"] = mat_tensor(w.mlp->w1);
    b.tensors["mlp.b1"] = vec_tensor(w.mlp->b1);
    b.tensors["mlp.w2"] = mat_tensor(w.mlp->w2);
    b.tensors["mlp.b2"] = vec_tensor(w.mlp->b2);
  }
  if (w.concat) {
    b.tensors["concat.pool_w"] = mat_tensor(w.concat->pool_w);
    b.tensors["concat.pool_b"] = vec_tensor(w.concat->pool_b);
    b.tensors["concat.fc_w"] = vec_tensor(w.concat->fc_w);
    b.tensors["concat.fc_b"] = Tensor{{1}, {static_cast<float>(w.concat->fc_b)}};
  }
  if (w.lang_proj) b.tensors["lang_proj.w"] = mat_tensor(*w.lang_proj);
  validate_bundle(b);
  return b;
}

namespace {

Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
  return m;
}

AttentionParams init_attention(Rng& rng, std::size_t d, const FusionInitOptions& o) {
  AttentionParams a = AttentionParams::zeros(d);
  a.wq = uniform_matrix(rng, d, d);
  a.wk = uniform_matrix(rng, d, d);
  a.wv = o.identity_values ? Matrix::identity(d) : uniform_matrix(rng, d, d);
  if (o.identity_values) {
    a.wo = Matrix::identity(d);
  } else if (!o.zero_residual_outputs) {
    a.wo = uniform_matrix(rng, d, d);
  }
  return a;
}

}  // namespace

FusionWeights init_fusion_weights(const FusionInitOptions& o) {
  if (o.d == 0) throw Error(ErrorCode::InvalidConfig, "init_fusion_weights: d must be positive");
  const std::size_t d = o.d;
  const std::size_t hidden = o.hidden ? o.hidden : 4 * d;
  const std::size_t d_text = o.d_text ? o.d_text : d;
  Rng rng(o.seed);
  FusionWeights w;
  w.d = d;
  w.ln1 = LayerNormParams::identity(d);
  w.ln2 = LayerNormParams::identity(d);
  w.attn = init_attention(rng, d, o);
  w.cross = init_attention(rng, d, o);
  w.mlp = MlpParams::zeros(d, hidden);
  w.mlp->w1 = uniform_matrix(rng, d, hidden);
  if (!o.zero_residual_outputs) w.mlp->w2 = uniform_matrix(rng, hidden, d);
  ConcatScorerParams c;
  c.pool_w = o.identity_values ? Matrix::identity(d) : uniform_matrix(rng, d, d);
  c.pool_b = Vec(d, 0.0);
  c.fc_w = Vec(d);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : c.fc_w) v = rng.uniform(-bound, bound);
  w.concat = std::move(c);
  w.lang_proj = d_text == d ? Matrix::identity(d) : uniform_matrix(rng, d_text, d);
  return w;
}

// ---------------------------------------------------------------------------
// Operations

Matrix layer_norm(const Matrix& x, std::span<const double> gamma, std::span<const double> beta, double eps) {
  const std::size_t d = x.cols();
  if (d < 2) throw Error(ErrorCode::InvalidConfig, "layer_norm needs width >= 2");
  if (!(eps >= 0.0)) throw Error(ErrorCode::InvalidConfig, "layer_norm eps must be nonnegative");
  if (gamma.size() != d || beta.size() != d) throw Error(ErrorCode::ShapeMismatch, "layer_norm gamma/beta width");
  Matrix out(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double denom = std::sqrt(var + eps);
    auto o = out.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double centred = in[c] - mean;
      const double xhat = denom > 0.0 ? centred / denom : 0.0;
      o[c] = xhat * gamma[c] + beta[c];
    }
  }
  return out;
}

Matrix layer_norm(const Matrix& x, const LayerNormParams& p) { return layer_norm(x, p.gamma, p.beta, p.eps); }

namespace {

Matrix affine(const Matrix& x, const Matrix& w, const Vec& b) {
  Matrix out = matmul(x, w);
  add_row_bias(out, b);
  return out;
}

void check_attention(const AttentionParams& w, std::size_t d, std::size_t heads) {
  if (heads == 0 || d % heads != 0) {
    throw Error(ErrorCode::InvalidConfig, "width " + std::to_string(d) + " not divisible by heads=" +
                                              std::to_string(heads));
  }
  if (w.wq.rows() != d || w.wq.cols() != d || w.wk.rows() != d || w.wv.rows() != d || w.wo.rows() != d ||
      w.wo.cols() != d) {
    throw Error(ErrorCode::ShapeMismatch, "attention weights do not match input width " + std::to_string(d));
  }
}

}  // namespace

Matrix cross_attention(const Matrix& q_in, const Matrix& kv_in, const AttentionParams& w, std::size_t heads) {
  const std::size_t d = q_in.cols();
  if (kv_in.cols() != d) throw Error(ErrorCode::ShapeMismatch, "attention query/key widths differ");
  check_attention(w, d, heads);
  const Matrix q = affine(q_in, w.wq, w.bq);
  const Matrix k = affine(kv_in, w.wk, w.bk);
  const Matrix v = affine(kv_in, w.wv, w.bv);
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const std::size_t n = q.rows();
  const std::size_t m = k.rows();
  Matrix concat(n, d);
  Vec scores(m);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dk;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dk; ++c) s += q(i, off + c) * k(j, off + c);
        scores[j] = s * scale;
        mx = std::max(mx, scores[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) sum += scores[j] = std::exp(scores[j] - mx);
      for (std::size_t j = 0; j < m; ++j) {
        const double a = scores[j] / sum;
        for (std::size_t c = 0; c < dk; ++c) concat(i, off + c) += a * v(j, off + c);
      }
    }
  }
  return affine(concat, w.wo, w.bo);
}

Matrix self_attention(const Matrix& x, const AttentionParams& w, std::size_t heads) {
  return cross_attention(x, x, w, heads);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Matrix mlp_block(const Matrix& x, const MlpParams& w) {
  if (w.w1.rows() != x.cols() || w.w2.cols() != x.cols() || w.w1.cols() != w.w2.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "mlp weights do not match input width");
  }
  Matrix h = affine(x, w.w1, w.b1);
  for (double& v : h.data()) v = gelu(v);
  return affine(h, w.w2, w.b2);
}

Vec fuse_average(const FeatureClip& x) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyInput, "fusion of an empty clip");
  return column_mean(x);
}

Vec fuse_attention(const FeatureClip& x, const AttentionParams& w, std::size_t heads) {
  return fuse_average(self_attention(x, w, heads));
}

Vec fuse_self(const FeatureClip& x, const SelfFusionParams& w, std::size_t heads, bool residual) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyInput, "fusion of an empty clip");
  if (!residual) return fuse_average(mlp_block(self_attention(x, w.attn, heads), w.mlp));
  Matrix mid = self_attention(layer_norm(x, w.ln1), w.attn, heads);
  for (std::size_t i = 0; i < mid.data().size(); ++i) mid.data()[i] += x.data()[i];
  Matrix out = mlp_block(layer_norm(mid, w.ln2), w.mlp);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += mid.data()[i];
  return fuse_average(out);
}

Vec fuse_cross(const FeatureClip& x, const AttentionParams& w, std::size_t heads) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyInput, "fusion of an empty clip");
  Matrix running(1, x.cols());
  std::copy(x.row(0).begin(), x.row(0).end(), running.row(0).begin());
  for (std::size_t i = 1; i < x.rows(); ++i) {
    Matrix next(1, x.cols());
    std::copy(x.row(i).begin(), x.row(i).end(), next.row(0).begin());
    running = cross_attention(running, next, w, heads);
  }
  return Vec(running.row(0).begin(), running.row(0).end());
}

double concat_score(const FeatureClip& x, std::span<const double> lang, const AttentionParams& attn,
                    const ConcatScorerParams& scorer, std::size_t heads) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyInput, "fusion of an empty clip");
  if (lang.size() != x.cols()) throw Error(ErrorCode::DimMismatch, "concat_score: language width differs");
  Matrix stacked(x.rows() + 1, x.cols());
  std::copy(x.data().begin(), x.data().end(), stacked.data().begin());
  std::copy(lang.begin(), lang.end(), stacked.row(x.rows()).begin());
  const Vec pooled_in = fuse_average(self_attention(stacked, attn, heads));
  Vec pooled = vec_mat(pooled_in, scorer.pool_w);
  for (std::size_t i = 0; i < pooled.size(); ++i) pooled[i] += scorer.pool_b[i];
  if (scorer.fc_w.size() != pooled.size()) throw Error(ErrorCode::ShapeMismatch, "concat fc width");
  return dot(pooled, scorer.fc_w) + scorer.fc_b;
}

const char* to_string(FusionMechanism m) {
  switch (m) {
    case FusionMechanism::average: return "average";
    case FusionMechanism::attention: return "attention";
    case FusionMechanism::self: return "self";
    case FusionMechanism::self_noresidual: return "self_noresidual";
    case FusionMechanism::cross: return "cross";
    case FusionMechanism::concat: return "concat";
  }
  return "average";
}

std::optional<FusionMechanism> parse_fusion(const std::string& text) {
  for (auto m : {FusionMechanism::average, FusionMechanism::attention, FusionMechanism::self,
                 FusionMechanism::self_noresidual, FusionMechanism::cross, FusionMechanism::concat}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

bool needs_weights(FusionMechanism m) { return m != FusionMechanism::average; }

Vec fuse(FusionMechanism m, const FeatureClip& x, const FusionWeights& w, std::size_t heads) {
  switch (m) {
    case FusionMechanism::average: return fuse_average(x);
    case FusionMechanism::attention:
      if (!w.attn) throw Error(ErrorCode::MissingWeights, "attention fusion needs attn.* tensors");
      return fuse_attention(x, *w.attn, heads);
    case FusionMechanism::self: return fuse_self(x, w.self_params(), heads, true);
    case FusionMechanism::self_noresidual:
      if (!w.attn || !w.mlp) throw Error(ErrorCode::MissingWeights, "self fusion needs attn.* and mlp.* tensors");
      return fuse_average(mlp_block(self_attention(x, *w.attn, heads), *w.mlp));
    case FusionMechanism::cross:
      if (!w.cross) throw Error(ErrorCode::MissingWeights, "cross fusion needs cross.* tensors");
      return fuse_cross(x, *w.cross, heads);
    case FusionMechanism::concat:
      throw Error(ErrorCode::InvalidConfig, "concat fusion scores categories directly; use concat_score");
  }
  return fuse_average(x);
}

}  // namespace trajkit
