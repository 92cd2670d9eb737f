#include "trajkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trajkit/error.hpp"
#include "trajkit/random.hpp"

namespace trajkit {

const char* to_string(Distance d) { return d == Distance::euclidean ? "euclidean" : "cosine_distance"; }

std::optional<Distance> parse_distance(const std::string& text) {
  if (text == "euclidean") return Distance::euclidean;
  if (text == "cosine_distance" || text == "cosine") return Distance::cosine_distance;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw Error(ErrorCode::InvalidConfig, "margin must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
  if (heads == 0) throw Error(ErrorCode::InvalidConfig, "heads must be positive");
}

namespace {

double distance_of(std::span<const double> fa, std::span<const double> fb, Distance distance) {
  if (fa.size() != fb.size()) throw Error(ErrorCode::LengthMismatch, "contrastive_loss: widths differ");
  if (distance == Distance::euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) s += (fa[i] - fb[i]) * (fa[i] - fb[i]);
    return std::sqrt(s);
  }
  const double na = l2_norm(fa);
  const double nb = l2_norm(fb);
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ZeroNorm, "cosine distance of a zero vector");
  return 1.0 - dot(fa, fb) / (na * nb);
}

}  // namespace

double contrastive_loss(std::span<const double> fa, std::span<const double> fb, int y, double margin,
                        Distance distance) {
  if (y != 0 && y != 1) throw Error(ErrorCode::InvalidConfig, "pair label must be 0 or 1");
  const double d = distance_of(fa, fb, distance);
  const double hinge = std::max(0.0, margin - d);
  return 0.5 * (y * d * d + (1 - y) * hinge * hinge);
}

Vec numeric_gradient(const std::function<double(std::span<const double>)>& f, std::span<const double> theta,
                     double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "numeric_gradient eps must be positive");
  Vec work(theta.begin(), theta.end());
  Vec grad(theta.size());
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double saved = work[i];
    work[i] = saved + eps;
    const double up = f(work);
    work[i] = saved - eps;
    const double down = f(work);
    work[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Forward pass with caches, and its reverse pass.

namespace {

struct LnCache {
  Matrix xhat;
  Vec inv_std;
};

Matrix ln_forward(const Matrix& x, const LayerNormParams& p, LnCache& cache) {
  const std::size_t d = x.cols();
  cache.xhat = Matrix(x.rows(), d);
  cache.inv_std.assign(x.rows(), 0.0);
  Matrix out(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + p.eps);
    cache.inv_std[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      cache.xhat(r, c) = (in[c] - mean) * inv;
      out(r, c) = cache.xhat(r, c) * p.gamma[c] + p.beta[c];
    }
  }
  return out;
}

Matrix ln_backward(const Matrix& dy, const LayerNormParams& p, const LnCache& cache, LayerNormParams& grad) {
  const std::size_t d = dy.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  Matrix dx(dy.rows(), d);
  Vec dxhat(d);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      grad.gamma[c] += dy(r, c) * cache.xhat(r, c);
      grad.beta[c] += dy(r, c);
      dxhat[c] = dy(r, c) * p.gamma[c];
      sum_dxhat += dxhat[c];
      sum_dxhat_xhat += dxhat[c] * cache.xhat(r, c);
    }
    for (std::size_t c = 0; c < d; ++c) {
      dx(r, c) = cache.inv_std[r] * (dxhat[c] - inv_d * sum_dxhat - cache.xhat(r, c) * inv_d * sum_dxhat_xhat);
    }
  }
  return dx;
}

struct AttnCache {
  Matrix x, q, k, v, concat;
  std::vector<Matrix> probs;  // per head, n×n
};

Matrix affine(const Matrix& x, const Matrix& w, const Vec& b) {
  Matrix out = matmul(x, w);
  add_row_bias(out, b);
  return out;
}

Matrix attn_forward(const Matrix& x, const AttentionParams& w, std::size_t heads, AttnCache& c) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (heads == 0 || d % heads != 0) throw Error(ErrorCode::InvalidConfig, "width not divisible by heads");
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  c.x = x;
  c.q = affine(x, w.wq, w.bq);
  c.k = affine(x, w.wk, w.bk);
  c.v = affine(x, w.wv, w.bv);
  c.concat = Matrix(n, d);
  c.probs.assign(heads, Matrix(n, n));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dk;
    Matrix& a = c.probs[h];
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t e = 0; e < dk; ++e) s += c.q(i, off + e) * c.k(j, off + e);
        a(i, j) = s * scale;
        mx = std::max(mx, a(i, j));
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += a(i, j) = std::exp(a(i, j) - mx);
      for (std::size_t j = 0; j < n; ++j) a(i, j) /= sum;
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t e = 0; e < dk; ++e) c.concat(i, off + e) += a(i, j) * c.v(j, off + e);
      }
    }
  }
  return affine(c.concat, w.wo, w.bo);
}

void accumulate(Matrix& into, const Matrix& add) {
  for (std::size_t i = 0; i < into.data().size(); ++i) into.data()[i] += add.data()[i];
}

void accumulate(Vec& into, const Vec& add) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += add[i];
}

Matrix attn_backward(const Matrix& dout, const AttentionParams& w, std::size_t heads, const AttnCache& c,
                     AttentionParams& g) {
  const std::size_t n = dout.rows();
  const std::size_t d = dout.cols();
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  accumulate(g.wo, matmul_at(c.concat, dout));
  accumulate(g.bo, column_sum(dout));
  const Matrix dconcat = matmul_bt(dout, w.wo);

  Matrix dq(n, d), dk_m(n, d), dv(n, d);
  Vec da(n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dk;
    const Matrix& a = c.probs[h];
    for (std::size_t i = 0; i < n; ++i) {
      double row_dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t e = 0; e < dk; ++e) s += dconcat(i, off + e) * c.v(j, off + e);
        da[j] = s;
        row_dot += a(i, j) * s;
        for (std::size_t e = 0; e < dk; ++e) dv(j, off + e) += a(i, j) * dconcat(i, off + e);
      }
      for (std::size_t j = 0; j < n; ++j) {
        const double ds = a(i, j) * (da[j] - row_dot) * scale;
        for (std::size_t e = 0; e < dk; ++e) {
          dq(i, off + e) += ds * c.k(j, off + e);
          dk_m(j, off + e) += ds * c.q(i, off + e);
        }
      }
    }
  }
  accumulate(g.wq, matmul_at(c.x, dq));
  accumulate(g.wk, matmul_at(c.x, dk_m));
  accumulate(g.wv, matmul_at(c.x, dv));
  accumulate(g.bq, column_sum(dq));
  accumulate(g.bk, column_sum(dk_m));
  accumulate(g.bv, column_sum(dv));
  Matrix dx = matmul_bt(dq, w.wq);
  accumulate(dx, matmul_bt(dk_m, w.wk));
  accumulate(dx, matmul_bt(dv, w.wv));
  return dx;
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

struct SelfCache {
  LnCache ln1, ln2;
  AttnCache attn;
  Matrix l2_out, hidden_pre, hidden;
  std::size_t n = 0;
};

Vec self_forward(const Matrix& x, const SelfFusionParams& p, std::size_t heads, SelfCache& c) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyInput, "fusion of an empty clip");
  c.n = x.rows();
  const Matrix l1 = ln_forward(x, p.ln1, c.ln1);
  Matrix mid = attn_forward(l1, p.attn, heads, c.attn);
  accumulate(mid, x);
  c.l2_out = ln_forward(mid, p.ln2, c.ln2);
  c.hidden_pre = affine(c.l2_out, p.mlp.w1, p.mlp.b1);
  c.hidden = c.hidden_pre;
  for (double& v : c.hidden.data()) v = gelu(v);
  Matrix out = affine(c.hidden, p.mlp.w2, p.mlp.b2);
  accumulate(out, mid);
  return column_mean(out);
}

void self_backward(std::span<const double> dfused, const SelfFusionParams& p, std::size_t heads, const SelfCache& c,
                   SelfFusionParams& g) {
  const std::size_t d = dfused.size();
  Matrix dout(c.n, d);
  const double inv_n = 1.0 / static_cast<double>(c.n);
  for (std::size_t r = 0; r < c.n; ++r) {
    for (std::size_t j = 0; j < d; ++j) dout(r, j) = dfused[j] * inv_n;
  }
  // MLP branch
  accumulate(g.mlp.w2, matmul_at(c.hidden, dout));
  accumulate(g.mlp.b2, column_sum(dout));
  Matrix dhidden = matmul_bt(dout, p.mlp.w2);
  for (std::size_t i = 0; i < dhidden.data().size(); ++i) dhidden.data()[i] *= gelu_grad(c.hidden_pre.data()[i]);
  accumulate(g.mlp.w1, matmul_at(c.l2_out, dhidden));
  accumulate(g.mlp.b1, column_sum(dhidden));
  const Matrix dl2 = matmul_bt(dhidden, p.mlp.w1);
  Matrix dmid = ln_backward(dl2, p.ln2, c.ln2, g.ln2);
  accumulate(dmid, dout);
  // Attention branch
  const Matrix dl1 = attn_backward(dmid, p.attn, heads, c.attn, g.attn);
  (void)ln_backward(dl1, p.ln1, c.ln1, g.ln1);
}

SelfFusionParams zeros_like(const SelfFusionParams& p) {
  SelfFusionParams g = p;
  Vec flat(p.parameter_count(), 0.0);
  g.assign(flat);
  return g;
}

Vec normalized(const Vec& f, double& norm) {
  norm = l2_norm(f);
  if (!std::isfinite(norm)) throw Error(ErrorCode::NonFinite, "fused trajectory feature is not finite");
  if (!(norm > 0.0)) throw Error(ErrorCode::ZeroNorm, "fused trajectory feature has zero norm");
  Vec g(f);
  for (double& v : g) v /= norm;
  return g;
}

// d/df of a loss given d/dg where g = f/‖f‖.
Vec through_normalize(const Vec& g, double norm, const Vec& dg) {
  const double proj = dot(g, dg);
  Vec df(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) df[i] = (dg[i] - g[i] * proj) / norm;
  return df;
}

}  // namespace

double pair_loss(const TrainPair& pair, const SelfFusionParams& params, const TrainConfig& cfg) {
  double na = 0.0, nb = 0.0;
  const Vec ga = normalized(fuse_self(pair.clip_a, params, cfg.heads), na);
  const Vec gb = normalized(fuse_self(pair.clip_b, params, cfg.heads), nb);
  return contrastive_loss(ga, gb, pair.y, cfg.margin, cfg.distance);
}

double mean_loss(std::span<const TrainPair> pairs, const SelfFusionParams& params, const TrainConfig& cfg) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) total += pair_loss(p, params, cfg);
  return total / static_cast<double>(pairs.size());
}

LossGradient analytic_gradients(const TrainPair& pair, const SelfFusionParams& params, const TrainConfig& cfg) {
  SelfCache ca, cb;
  double na = 0.0, nb = 0.0;
  const Vec ga = normalized(self_forward(pair.clip_a, params, cfg.heads, ca), na);
  const Vec gb = normalized(self_forward(pair.clip_b, params, cfg.heads, cb), nb);

  LossGradient out;
  out.loss = contrastive_loss(ga, gb, pair.y, cfg.margin, cfg.distance);
  out.grad = zeros_like(params);

  const std::size_t d = ga.size();
  Vec dga(d, 0.0), dgb(d, 0.0);
  if (cfg.distance == Distance::euclidean) {
    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i) dist += (ga[i] - gb[i]) * (ga[i] - gb[i]);
    dist = std::sqrt(dist);
    // dL/dga = coef · (ga − gb)
    double coef = 0.0;
    if (pair.y == 1) {
      coef = 1.0;
    } else if (dist < cfg.margin && dist > 0.0) {
      coef = -(cfg.margin - dist) / dist;
    }
    for (std::size_t i = 0; i < d; ++i) {
      dga[i] = coef * (ga[i] - gb[i]);
      dgb[i] = -dga[i];
    }
  } else {
    // Both are unit vectors, so D = 1 − ga·gb.
    const double dist = 1.0 - dot(ga, gb);
    double dldd = 0.0;
    if (pair.y == 1) {
      dldd = dist;
    } else if (dist < cfg.margin) {
      dldd = -(cfg.margin - dist);
    }
    for (std::size_t i = 0; i < d; ++i) {
      dga[i] = -dldd * gb[i];
      dgb[i] = -dldd * ga[i];
    }
  }
  self_backward(through_normalize(ga, na, dga), params, cfg.heads, ca, out.grad);
  self_backward(through_normalize(gb, nb, dgb), params, cfg.heads, cb, out.grad);
  return out;
}

TrainResult train_fusion(std::span<const TrainPair> pairs, SelfFusionParams init, const TrainConfig& cfg) {
  cfg.validate();
  TrainResult result{std::move(init), {}};
  if (cfg.steps == 0) return result;
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "train_fusion needs at least one pair");
  const std::size_t d = result.params.width();
  for (const auto& p : pairs) {
    if (p.clip_a.cols() != d || p.clip_b.cols() != d) {
      throw Error(ErrorCode::DimMismatch, "training clip width differs from the fusion width");
    }
    if (p.y != 0 && p.y != 1) throw Error(ErrorCode::InvalidConfig, "pair label must be 0 or 1");
  }
  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= pairs.size();
  const std::size_t batch = full_batch ? pairs.size() : cfg.batch_size;
  Rng rng(cfg.seed);
  std::vector<std::size_t> idx(batch);
  result.loss_curve.reserve(cfg.steps);

  Vec theta = result.params.flatten();
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < batch; ++b) idx[b] = full_batch ? b : rng.below(pairs.size());
    Vec grad(theta.size(), 0.0);
    double loss = 0.0;
    // Fixed accumulation order keeps runs bit-identical.
    try {
      for (std::size_t b = 0; b < batch; ++b) {
        const LossGradient lg = analytic_gradients(pairs[idx[b]], result.params, cfg);
        loss += lg.loss;
        const Vec flat = lg.grad.flatten();
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += flat[i];
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      throw Error(ErrorCode::Diverged, "Diverged(" + std::to_string(step) + ")");
    }
    loss /= static_cast<double>(batch);
    if (!std::isfinite(loss)) throw Error(ErrorCode::Diverged, "Diverged(" + std::to_string(step) + ")");
    result.loss_curve.push_back(loss);
    const double step_size = cfg.learning_rate / static_cast<double>(batch);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= step_size * grad[i];
    for (double v : theta) {
      if (!std::isfinite(v)) throw Error(ErrorCode::Diverged, "Diverged(" + std::to_string(step) + ")");
    }
    result.params.assign(theta);
  }
  return result;
}

}  // namespace trajkit
