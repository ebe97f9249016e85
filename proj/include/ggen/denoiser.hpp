#pragma once

#include <string>
#include <vector>

#include "ggen/common.hpp"
#include "ggen/conditioning.hpp"
#include "ggen/nn.hpp"
#include "ggen/rng.hpp"

namespace ggen {

// Geometry of the gesture denoiser. Projection widths derive from `hidden`:
// emotion and per-frame text/speech land in hidden/4 lanes, the seed gets
// the remaining 3/4, so the condition token and the frame lanes line up.
struct DenoiserConfig {
  int feature_dim = 1141;
  int frames = 80;       // window length M
  int seed_frames = 8;   // seed length N
  int speech_dim = 1024;
  int text_dim = 300;
  int emotion_dim = 6;
  int hidden = 256;
  int heads = 8;
  int layers = 8;
  int ffn_mult = 4;
  int local_window = 10;

  int emotion_width() const { return hidden / 4; }
  int seed_width() const { return hidden - hidden / 4; }
  int lane_width() const { return hidden / 4; }  // speech and text lanes
  int fused_width() const { return 2 * hidden + hidden / 4; }

  void validate() const {
    if (hidden % 4 != 0) throw input_error("denoiser: hidden width must be divisible by 4");
    if (hidden % heads != 0) throw input_error("denoiser: hidden width must be divisible by heads");
    if (feature_dim < 1 || frames < 1 || seed_frames < 1 || layers < 1)
      throw input_error("denoiser: dimensions must be positive");
    if (local_window < 0) throw input_error("denoiser: negative local window");
  }
};

inline ParamStore init_denoiser_params(const DenoiserConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore p;
  Rng rng(seed);
  auto pair = [&](const std::string& w_name, const std::string& b_name, int rows, int cols) {
    const double s = 1.0 / std::sqrt(static_cast<double>(cols));
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-s, s);
    p.tensors[w_name] = std::move(m);
    p.tensors[b_name] = Mat::Zero(rows, 1);
  };
  auto weight = [&](const std::string& name, int rows, int cols) {
    pair(name, name.substr(0, name.size() - 1) + "b", rows, cols);
  };
  auto attention = [&](const std::string& prefix, int clip) {
    for (const char* n : {"q", "k", "v", "o"})
      pair(prefix + ".w" + n, prefix + ".b" + n, cfg.hidden, cfg.hidden);
    p.tensors[prefix + ".rel_bias"] = Mat::Zero(cfg.heads, 2 * clip + 1);
  };

  weight("time.fc1.w", cfg.hidden, cfg.hidden);
  weight("time.fc2.w", cfg.hidden, cfg.hidden);
  weight("proj.speech.w", cfg.lane_width(), cfg.speech_dim);
  weight("proj.text.w", cfg.lane_width(), cfg.text_dim);
  weight("proj.seed.w", cfg.seed_width(), cfg.seed_frames * cfg.feature_dim);
  weight("proj.emotion.w", cfg.emotion_width(), cfg.emotion_dim);
  weight("proj.gesture.w", cfg.hidden, cfg.feature_dim);
  weight("fuse.w", cfg.hidden, cfg.fused_width());
  attention("local", cfg.local_window);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string e = "enc" + std::to_string(l);
    p.tensors[e + ".ln1.g"] = Mat::Ones(cfg.hidden, 1);
    p.tensors[e + ".ln1.b"] = Mat::Zero(cfg.hidden, 1);
    p.tensors[e + ".ln2.g"] = Mat::Ones(cfg.hidden, 1);
    p.tensors[e + ".ln2.b"] = Mat::Zero(cfg.hidden, 1);
    attention(e + ".attn", cfg.frames);
    weight(e + ".ffn.fc1.w", cfg.hidden * cfg.ffn_mult, cfg.hidden);
    weight(e + ".ffn.fc2.w", cfg.hidden, cfg.hidden * cfg.ffn_mult);
  }
  p.tensors["final.g"] = Mat::Ones(cfg.hidden, 1);
  p.tensors["final.b"] = Mat::Zero(cfg.hidden, 1);
  weight("out.w", cfg.feature_dim, cfg.hidden);
  return p;
}

namespace detail {

inline void check_bundle(const ConditionBundle& cond, const DenoiserConfig& cfg) {
  if (cond.seed.rows() != cfg.seed_frames || cond.seed.cols() != cfg.feature_dim)
    throw input_error("condition: seed block is " + std::to_string(cond.seed.rows()) + "x" +
                      std::to_string(cond.seed.cols()) + ", expected " +
                      std::to_string(cfg.seed_frames) + "x" + std::to_string(cfg.feature_dim));
  if (cond.emotion.size() != cfg.emotion_dim)
    throw input_error("condition: emotion vector has " + std::to_string(cond.emotion.size()) +
                      " entries, expected " + std::to_string(cfg.emotion_dim));
  if (cond.speech.rows() != cfg.frames || cond.speech.cols() != cfg.speech_dim)
    throw input_error("condition: speech block is " + std::to_string(cond.speech.rows()) + "x" +
                      std::to_string(cond.speech.cols()) + ", expected " +
                      std::to_string(cfg.frames) + "x" + std::to_string(cfg.speech_dim));
  if (cond.text.rows() != cfg.frames || cond.text.cols() != cfg.text_dim)
    throw input_error("condition: text block is " + std::to_string(cond.text.rows()) + "x" +
                      std::to_string(cond.text.cols()) + ", expected " +
                      std::to_string(cfg.frames) + "x" + std::to_string(cfg.text_dim));
}

// Row-major flatten of the seed window into a single row.
inline Mat flatten_seed(const Mat& seed) {
  Mat flat(1, seed.rows() * seed.cols());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < seed.rows(); ++r)
    for (Eigen::Index c = 0; c < seed.cols(); ++c) flat(0, k++) = seed(r, c);
  return flat;
}

}  // namespace detail

struct ConditionTokenCache {
  Mat pe, t_pre, t_mid;      // timestep branch
  Mat seed_flat, emotion_in;  // projection inputs after masking
  Mat z;                      // 1 x hidden
};

// Condition token z: [emotion projection | seed projection] + timestep
// embedding. Masked inputs are zeroed before projection, so only the
// projection biases and the timestep term survive full masking.
inline Mat encode_condition(const ConditionBundle& cond, double t, const ParamStore& params,
                            const DenoiserConfig& cfg, ConditionTokenCache* cache = nullptr) {
  detail::check_bundle(cond, cfg);
  ConditionTokenCache local;
  ConditionTokenCache& c = cache ? *cache : local;
  c.pe = sinusoidal_position_encoding(t, cfg.hidden);
  c.t_pre = linear_forward(c.pe, params.at("time.fc1.w"), params.at("time.fc1.b"));
  c.t_mid = silu_forward(c.t_pre);
  const Mat tvec = linear_forward(c.t_mid, params.at("time.fc2.w"), params.at("time.fc2.b"));

  if (cond.seed_masked)
    c.seed_flat = Mat::Zero(1, cfg.seed_frames * cfg.feature_dim);
  else
    c.seed_flat = detail::flatten_seed(cond.seed);
  if (cond.emotion_masked)
    c.emotion_in = Mat::Zero(1, cfg.emotion_dim);
  else
    c.emotion_in = cond.emotion.transpose();
  const Mat s = linear_forward(c.seed_flat, params.at("proj.seed.w"), params.at("proj.seed.b"));
  const Mat e =
      linear_forward(c.emotion_in, params.at("proj.emotion.w"), params.at("proj.emotion.b"));
  c.z = Mat(1, cfg.hidden);
  c.z.leftCols(cfg.emotion_width()) = e;
  c.z.rightCols(cfg.seed_width()) = s;
  c.z += tvec;
  return c.z;
}

struct FrameFusionCache {
  Mat x_t, speech, text;  // projection inputs
  Mat concat;             // frames x fused_width
};

// Per-frame lanes: [condition token | projected noisy gesture | projected
// text + projected speech], fused down to the working width.
inline Mat fuse_frames(const Mat& x_t, const ConditionBundle& cond, const Mat& z,
                       const ParamStore& params, const DenoiserConfig& cfg,
                       FrameFusionCache* cache = nullptr) {
  if (x_t.rows() != cfg.frames || x_t.cols() != cfg.feature_dim)
    throw input_error("denoiser: x_t is " + std::to_string(x_t.rows()) + "x" +
                      std::to_string(x_t.cols()) + ", expected " + std::to_string(cfg.frames) +
                      "x" + std::to_string(cfg.feature_dim));
  FrameFusionCache local;
  FrameFusionCache& c = cache ? *cache : local;
  c.x_t = x_t;
  c.speech = cond.speech;
  c.text = cond.text;
  const Mat a = linear_forward(cond.speech, params.at("proj.speech.w"), params.at("proj.speech.b"));
  const Mat v = linear_forward(cond.text, params.at("proj.text.w"), params.at("proj.text.b"));
  const Mat x = linear_forward(x_t, params.at("proj.gesture.w"), params.at("proj.gesture.b"));
  c.concat.resize(cfg.frames, cfg.fused_width());
  c.concat.leftCols(cfg.hidden) = z.replicate(cfg.frames, 1);
  c.concat.middleCols(cfg.hidden, cfg.hidden) = x;
  c.concat.rightCols(cfg.lane_width()) = v + a;
  return linear_forward(c.concat, params.at("fuse.w"), params.at("fuse.b"));
}

struct DenoiserCache {
  ConditionTokenCache token;
  FrameFusionCache fusion;
  Mat fused;       // frames x hidden
  Mat local_mask;
  MhaCache local;
  Mat tokens0;     // (frames+1) x hidden, encoder input
  std::vector<EncoderLayerCache> layers;
  Mat enc_out;
  LayerNormCache final_ln;
  Mat final_out;
};

// Predicts the clean gesture window from a noisy one. `t` is the diffusion
// timestep fed to the sinusoidal embedding.
inline Mat denoiser_forward(const Mat& x_t, double t, const ConditionBundle& cond,
                            const ParamStore& params, const DenoiserConfig& cfg,
                            DenoiserCache* cache = nullptr) {
  DenoiserCache local;
  DenoiserCache& c = cache ? *cache : local;
  const Mat z = encode_condition(cond, t, params, cfg, &c.token);
  c.fused = fuse_frames(x_t, cond, z, params, cfg, &c.fusion);
  c.local_mask = banded_attention_mask(cfg.frames, cfg.local_window);
  const Mat h_local = mha_forward(c.fused, params, "local", cfg.heads, cfg.local_window,
                                  &c.local_mask, &c.local);

  c.tokens0.resize(cfg.frames + 1, cfg.hidden);
  c.tokens0.row(0) = z;
  c.tokens0.bottomRows(cfg.frames) = h_local;

  Mat tokens = c.tokens0;
  c.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (int l = 0; l < cfg.layers; ++l)
    tokens = encoder_layer_forward(tokens, params, "enc" + std::to_string(l), cfg.heads,
                                   cfg.frames, &c.layers[static_cast<std::size_t>(l)]);
  c.enc_out = tokens;
  c.final_out = layer_norm_forward(tokens, params.at("final.g"), params.at("final.b"),
                                   &c.final_ln);
  return linear_forward(c.final_out.bottomRows(cfg.frames), params.at("out.w"),
                        params.at("out.b"));
}

// Accumulates parameter gradients for one window; returns d(loss)/d(x_t).
inline Mat denoiser_backward(const Mat& dy, const ParamStore& params, const DenoiserConfig& cfg,
                             const DenoiserCache& cache, ParamStore& grads) {
  Mat dfinal = Mat::Zero(cfg.frames + 1, cfg.hidden);
  dfinal.bottomRows(cfg.frames) =
      linear_backward(cache.final_out.bottomRows(cfg.frames), params.at("out.w"), dy,
                      grads.at("out.w"), grads.at("out.b"));
  Mat dtokens = layer_norm_backward(dfinal, params.at("final.g"), cache.final_ln,
                                    grads.at("final.g"), grads.at("final.b"));
  for (int l = cfg.layers - 1; l >= 0; --l)
    dtokens = encoder_layer_backward(dtokens, params, "enc" + std::to_string(l), cfg.frames,
                                     cache.layers[static_cast<std::size_t>(l)], grads);

  Mat dz = dtokens.row(0);
  const Mat dh_local = dtokens.bottomRows(cfg.frames);
  const Mat dfused =
      mha_backward(dh_local, params, "local", cfg.local_window, cache.local, grads);
  const Mat dconcat = linear_backward(cache.fusion.concat, params.at("fuse.w"), dfused,
                                      grads.at("fuse.w"), grads.at("fuse.b"));

  dz += dconcat.leftCols(cfg.hidden).colwise().sum();
  const Mat dx_proj = dconcat.middleCols(cfg.hidden, cfg.hidden);
  const Mat dlane = dconcat.rightCols(cfg.lane_width());
  const Mat dx_t = linear_backward(cache.fusion.x_t, params.at("proj.gesture.w"), dx_proj,
                                   grads.at("proj.gesture.w"), grads.at("proj.gesture.b"));
  linear_backward(cache.fusion.speech, params.at("proj.speech.w"), dlane,
                  grads.at("proj.speech.w"), grads.at("proj.speech.b"));
  linear_backward(cache.fusion.text, params.at("proj.text.w"), dlane, grads.at("proj.text.w"),
                  grads.at("proj.text.b"));

  const Mat de = dz.leftCols(cfg.emotion_width());
  const Mat ds = dz.rightCols(cfg.seed_width());
  linear_backward(cache.token.emotion_in, params.at("proj.emotion.w"), de,
                  grads.at("proj.emotion.w"), grads.at("proj.emotion.b"));
  linear_backward(cache.token.seed_flat, params.at("proj.seed.w"), ds, grads.at("proj.seed.w"),
                  grads.at("proj.seed.b"));
  const Mat dt_mid = linear_backward(cache.token.t_mid, params.at("time.fc2.w"), dz,
                                     grads.at("time.fc2.w"), grads.at("time.fc2.b"));
  const Mat dt_pre = silu_backward(cache.token.t_pre, dt_mid);
  linear_backward(cache.token.pe, params.at("time.fc1.w"), dt_pre, grads.at("time.fc1.w"),
                  grads.at("time.fc1.b"));
  return dx_t;
}

}  // namespace ggen
