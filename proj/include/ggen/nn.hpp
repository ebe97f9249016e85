#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ggen/common.hpp"
#include "ggen/rng.hpp"

namespace ggen {

// Named parameter tensors. Vectors are stored as n x 1 matrices. Iteration
// order is the map's lexicographic order everywhere (optimizer, reductions,
// serialization), which keeps all parameter walks deterministic.
struct ParamStore {
  std::map<std::string, Mat> tensors;

  Mat& at(const std::string& name) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw internal_error("missing parameter tensor: " + name);
    return it->second;
  }

  const Mat& at(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw internal_error("missing parameter tensor: " + name);
    return it->second;
  }

  ParamStore zeros_like() const {
    ParamStore out;
    for (const auto& [name, t] : tensors) out.tensors[name] = Mat::Zero(t.rows(), t.cols());
    return out;
  }

  // this += scale * other, matched by name.
  void add_scaled(const ParamStore& other, double scale) {
    if (other.tensors.size() != tensors.size())
      throw internal_error("param store shape mismatch in add_scaled");
    auto it = tensors.begin();
    for (const auto& [name, t] : other.tensors) {
      if (it->first != name) throw internal_error("param store name mismatch: " + name);
      it->second += scale * t;
      ++it;
    }
  }

  void scale(double s) {
    for (auto& [name, t] : tensors) t *= s;
  }

  double squared_norm() const {
    double acc = 0;
    for (const auto& [name, t] : tensors) acc += t.squaredNorm();
    return acc;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors) n += static_cast<std::size_t>(t.size());
    return n;
  }
};

// ---- linear ----

// y = x * W^T + 1 b^T. W is out x in, b is out x 1, x has one row per token.
inline Mat linear_forward(const Mat& x, const Mat& w, const Mat& b) {
  if (x.cols() != w.cols())
    throw internal_error("linear: input width " + std::to_string(x.cols()) +
                         " vs weight fan-in " + std::to_string(w.cols()));
  Mat y = x * w.transpose();
  y.rowwise() += b.col(0).transpose();
  return y;
}

inline Mat linear_backward(const Mat& x, const Mat& w, const Mat& dy, Mat& dw, Mat& db) {
  dw += dy.transpose() * x;
  db.col(0) += dy.colwise().sum().transpose();
  return dy * w;  // dx
}

// ---- layer norm ----

struct LayerNormCache {
  Mat xhat;
  Vec inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

inline Mat layer_norm_forward(const Mat& x, const Mat& gain, const Mat& bias,
                              LayerNormCache* cache = nullptr) {
  const auto d = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  Vec inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / d;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mu) * is;
    inv_std[r] = is;
  }
  Mat y = (xhat.array().rowwise() * gain.col(0).transpose().array()).matrix();
  y.rowwise() += bias.col(0).transpose();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

inline Mat layer_norm_backward(const Mat& dy, const Mat& gain, const LayerNormCache& cache,
                               Mat& dgain, Mat& dbias) {
  const auto d = static_cast<double>(dy.cols());
  dgain.col(0) += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  dbias.col(0) += dy.colwise().sum().transpose();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const auto dxhat = (dy.row(r).array() * gain.col(0).transpose().array()).eval();
    const double m1 = dxhat.sum() / d;
    const double m2 = (dxhat * cache.xhat.row(r).array()).sum() / d;
    dx.row(r) =
        ((dxhat - m1 - cache.xhat.row(r).array() * m2) * cache.inv_std[r]).matrix();
  }
  return dx;
}

// ---- silu ----

inline Mat silu_forward(const Mat& x) {
  return (x.array() / (1.0 + (-x.array()).exp())).matrix();
}

inline Mat silu_backward(const Mat& x, const Mat& dy) {
  const auto sig = (1.0 / (1.0 + (-x.array()).exp())).eval();
  return (dy.array() * sig * (1.0 + x.array() * (1.0 - sig))).matrix();
}

// ---- softmax ----

// Row-wise softmax tolerating -inf entries from additive masks.
inline Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    if (!std::isfinite(mx)) throw internal_error("softmax: fully masked row");
    const auto e = (logits.row(r).array() - mx).exp().eval();
    p.row(r) = e / e.sum();
  }
  return p;
}

inline Mat softmax_backward(const Mat& p, const Mat& dp) {
  Mat dlogits(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double dot = (dp.row(r).array() * p.row(r).array()).sum();
    dlogits.row(r) = (p.row(r).array() * (dp.row(r).array() - dot)).matrix();
  }
  return dlogits;
}

// ---- positional encoding ----

// Interleaved sinusoidal code: pe[2i] = sin(t / 10000^(2i/d)),
// pe[2i+1] = cos with the same frequency.
inline Mat sinusoidal_position_encoding(double t, int dim) {
  Mat pe(1, dim);
  for (int i = 0; i < dim; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
    pe(0, i) = std::sin(t * freq);
    if (i + 1 < dim) pe(0, i + 1) = std::cos(t * freq);
  }
  return pe;
}

// ---- attention ----

// Additive band mask: position i may attend to j iff |i - j| <= window.
inline Mat banded_attention_mask(int length, int window) {
  if (window < 0) throw internal_error("banded mask: negative window");
  Mat mask = Mat::Zero(length, length);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < length; ++i)
    for (int j = 0; j < length; ++j)
      if (std::abs(i - j) > window) mask(i, j) = neg_inf;
  return mask;
}

struct AttentionCoreCache {
  Mat q, k, v;
  std::vector<Mat> probs;  // one L x L matrix per head
  int heads = 1;
};

// softmax((Q_h K_h^T + mask + bias_h) / sqrt(head_width)) V_h, heads
// concatenated. With a single token and no mask this is exactly V. Optional
// per-head additive bias implements relative position terms.
inline Mat attention_core(const Mat& q, const Mat& k, const Mat& v, int heads,
                          const Mat* mask = nullptr,
                          const std::vector<Mat>* head_bias = nullptr,
                          AttentionCoreCache* cache = nullptr) {
  if (q.cols() % heads != 0) throw internal_error("attention: width not divisible by heads");
  if (k.rows() != v.rows() || k.cols() != q.cols() || v.cols() != q.cols())
    throw internal_error("attention: K/V shape mismatch");
  const Eigen::Index hd = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Mat out(q.rows(), q.cols());
  if (cache) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->probs.assign(static_cast<std::size_t>(heads), Mat());
    cache->heads = heads;
  }
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * hd, hd);
    const auto kh = k.middleCols(h * hd, hd);
    Mat logits = qh * kh.transpose() * scale;
    if (mask) logits += *mask;
    if (head_bias) logits += (*head_bias)[static_cast<std::size_t>(h)];
    const Mat p = softmax_rows(logits);
    out.middleCols(h * hd, hd) = p * v.middleCols(h * hd, hd);
    if (cache) cache->probs[static_cast<std::size_t>(h)] = p;
  }
  return out;
}

struct AttentionCoreGrads {
  Mat dq, dk, dv;
  std::vector<Mat> dlogits;  // per head, for relative-bias accumulation
};

inline AttentionCoreGrads attention_core_backward(const Mat& dy, const AttentionCoreCache& cache) {
  const int heads = cache.heads;
  const Eigen::Index hd = cache.q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  AttentionCoreGrads g;
  g.dq = Mat::Zero(cache.q.rows(), cache.q.cols());
  g.dk = Mat::Zero(cache.k.rows(), cache.k.cols());
  g.dv = Mat::Zero(cache.v.rows(), cache.v.cols());
  g.dlogits.resize(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const auto hu = static_cast<std::size_t>(h);
    const Mat& p = cache.probs[hu];
    const auto dyh = dy.middleCols(h * hd, hd);
    const auto vh = cache.v.middleCols(h * hd, hd);
    const Mat dp = dyh * vh.transpose();
    g.dv.middleCols(h * hd, hd) = p.transpose() * dyh;
    const Mat dlogits = softmax_backward(p, dp);
    g.dlogits[hu] = dlogits;
    g.dq.middleCols(h * hd, hd) = dlogits * cache.k.middleCols(h * hd, hd) * scale;
    g.dk.middleCols(h * hd, hd) = dlogits.transpose() * cache.q.middleCols(h * hd, hd) * scale;
  }
  return g;
}

// Relative position bias per head: entry (i, j) reads table(h, clamp(j - i)
// + clip). Zero-initialized tables make this a no-op until trained.
inline std::vector<Mat> relative_bias_matrices(const Mat& table, int len_q, int len_k, int clip) {
  if (table.cols() != 2 * clip + 1) throw internal_error("relative bias: table width != 2*clip+1");
  std::vector<Mat> out(static_cast<std::size_t>(table.rows()));
  for (Eigen::Index h = 0; h < table.rows(); ++h) {
    Mat b(len_q, len_k);
    for (int i = 0; i < len_q; ++i)
      for (int j = 0; j < len_k; ++j) {
        const int off = std::max(-clip, std::min(clip, j - i));
        b(i, j) = table(h, off + clip);
      }
    out[static_cast<std::size_t>(h)] = std::move(b);
  }
  return out;
}

inline void relative_bias_backward(const std::vector<Mat>& dlogits, int clip, Mat& dtable) {
  for (std::size_t h = 0; h < dlogits.size(); ++h) {
    const Mat& d = dlogits[h];
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index j = 0; j < d.cols(); ++j) {
        const int off = std::max(-clip, std::min(clip, static_cast<int>(j - i)));
        dtable(static_cast<Eigen::Index>(h), off + clip) += d(i, j);
      }
  }
}

// ---- multi-head attention block (projections + core + relative bias) ----

struct MhaCache {
  Mat x;
  AttentionCoreCache core;
  Mat concat;  // core output, before the output projection
};

// Parameter names under `prefix`: wq wk wv wo (h x h), bq bk bv bo (h x 1),
// rel_bias (heads x 2*clip+1).
inline Mat mha_forward(const Mat& x, const ParamStore& params, const std::string& prefix,
                       int heads, int clip, const Mat* mask, MhaCache* cache) {
  const Mat q = linear_forward(x, params.at(prefix + ".wq"), params.at(prefix + ".bq"));
  const Mat k = linear_forward(x, params.at(prefix + ".wk"), params.at(prefix + ".bk"));
  const Mat v = linear_forward(x, params.at(prefix + ".wv"), params.at(prefix + ".bv"));
  const auto bias = relative_bias_matrices(params.at(prefix + ".rel_bias"),
                                           static_cast<int>(x.rows()), static_cast<int>(x.rows()),
                                           clip);
  AttentionCoreCache core;
  const Mat concat = attention_core(q, k, v, heads, mask, &bias, &core);
  const Mat y = linear_forward(concat, params.at(prefix + ".wo"), params.at(prefix + ".bo"));
  if (cache) {
    cache->x = x;
    cache->core = std::move(core);
    cache->concat = concat;
  }
  return y;
}

inline Mat mha_backward(const Mat& dy, const ParamStore& params, const std::string& prefix,
                        int clip, const MhaCache& cache, ParamStore& grads) {
  const Mat dconcat = linear_backward(cache.concat, params.at(prefix + ".wo"), dy,
                                      grads.at(prefix + ".wo"), grads.at(prefix + ".bo"));
  AttentionCoreGrads cg = attention_core_backward(dconcat, cache.core);
  relative_bias_backward(cg.dlogits, clip, grads.at(prefix + ".rel_bias"));
  Mat dx = linear_backward(cache.x, params.at(prefix + ".wq"), cg.dq, grads.at(prefix + ".wq"),
                           grads.at(prefix + ".bq"));
  dx += linear_backward(cache.x, params.at(prefix + ".wk"), cg.dk, grads.at(prefix + ".wk"),
                        grads.at(prefix + ".bk"));
  dx += linear_backward(cache.x, params.at(prefix + ".wv"), cg.dv, grads.at(prefix + ".wv"),
                        grads.at(prefix + ".bv"));
  return dx;
}

// ---- transformer encoder layer, pre-norm ----

struct EncoderLayerCache {
  Mat x;               // layer input
  LayerNormCache ln1;
  Mat ln1_out;
  MhaCache attn;
  Mat after_attn;
  LayerNormCache ln2;
  Mat ln2_out;
  Mat ffn_pre;   // fc1 output before silu
  Mat ffn_mid;   // silu output
};

inline Mat encoder_layer_forward(const Mat& x, const ParamStore& params, const std::string& prefix,
                                 int heads, int clip, EncoderLayerCache* cache) {
  EncoderLayerCache local;
  EncoderLayerCache& c = cache ? *cache : local;
  c.x = x;
  c.ln1_out = layer_norm_forward(x, params.at(prefix + ".ln1.g"), params.at(prefix + ".ln1.b"),
                                 &c.ln1);
  const Mat attn =
      mha_forward(c.ln1_out, params, prefix + ".attn", heads, clip, nullptr, &c.attn);
  c.after_attn = x + attn;
  c.ln2_out = layer_norm_forward(c.after_attn, params.at(prefix + ".ln2.g"),
                                 params.at(prefix + ".ln2.b"), &c.ln2);
  c.ffn_pre = linear_forward(c.ln2_out, params.at(prefix + ".ffn.fc1.w"),
                             params.at(prefix + ".ffn.fc1.b"));
  c.ffn_mid = silu_forward(c.ffn_pre);
  const Mat ffn = linear_forward(c.ffn_mid, params.at(prefix + ".ffn.fc2.w"),
                                 params.at(prefix + ".ffn.fc2.b"));
  return c.after_attn + ffn;
}

inline Mat encoder_layer_backward(const Mat& dy, const ParamStore& params,
                                  const std::string& prefix, int clip,
                                  const EncoderLayerCache& cache, ParamStore& grads) {
  const Mat dffn_mid = linear_backward(cache.ffn_mid, params.at(prefix + ".ffn.fc2.w"), dy,
                                       grads.at(prefix + ".ffn.fc2.w"),
                                       grads.at(prefix + ".ffn.fc2.b"));
  const Mat dffn_pre = silu_backward(cache.ffn_pre, dffn_mid);
  const Mat dln2_out = linear_backward(cache.ln2_out, params.at(prefix + ".ffn.fc1.w"), dffn_pre,
                                       grads.at(prefix + ".ffn.fc1.w"),
                                       grads.at(prefix + ".ffn.fc1.b"));
  Mat dafter_attn = dy + layer_norm_backward(dln2_out, params.at(prefix + ".ln2.g"), cache.ln2,
                                             grads.at(prefix + ".ln2.g"),
                                             grads.at(prefix + ".ln2.b"));
  const Mat dln1_out =
      mha_backward(dafter_attn, params, prefix + ".attn", clip, cache.attn, grads);
  return dafter_attn + layer_norm_backward(dln1_out, params.at(prefix + ".ln1.g"), cache.ln1,
                                           grads.at(prefix + ".ln1.g"),
                                           grads.at(prefix + ".ln1.b"));
}

}  // namespace ggen
