#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "ggen/common.hpp"
#include "ggen/denoiser.hpp"
#include "ggen/features.hpp"
#include "ggen/nn.hpp"
#include "ggen/rng.hpp"

namespace ggen {

// Index i holds the values for timestep t = i + 1; alpha_bar_at(0) = 1.
struct NoiseSchedule {
  int timesteps = 0;
  Vec beta, alpha, alpha_bar, sigma;

  double alpha_bar_at(int t) const {
    if (t < 0 || t > timesteps) throw internal_error("schedule: timestep out of range");
    return t == 0 ? 1.0 : alpha_bar(t - 1);
  }
  double beta_at(int t) const {
    if (t < 1 || t > timesteps) throw internal_error("schedule: timestep out of range");
    return beta(t - 1);
  }
  double sigma_at(int t) const {
    if (t < 1 || t > timesteps) throw internal_error("schedule: timestep out of range");
    return sigma(t - 1);
  }
};

inline NoiseSchedule make_noise_schedule(int timesteps, double beta_start = 1e-4,
                                         double beta_end = 0.02) {
  if (timesteps < 1) throw input_error("schedule: need at least one timestep");
  if (beta_start <= 0.0 || beta_end >= 1.0 || beta_end < beta_start)
    throw input_error("schedule: betas must satisfy 0 < start <= end < 1");
  NoiseSchedule s;
  s.timesteps = timesteps;
  s.beta.resize(timesteps);
  s.alpha.resize(timesteps);
  s.alpha_bar.resize(timesteps);
  s.sigma.resize(timesteps);
  double running = 1.0;
  for (int i = 0; i < timesteps; ++i) {
    const double frac = timesteps == 1 ? 0.0 : static_cast<double>(i) / (timesteps - 1);
    s.beta(i) = beta_start + (beta_end - beta_start) * frac;
    s.alpha(i) = 1.0 - s.beta(i);
    running *= s.alpha(i);
    s.alpha_bar(i) = running;
    const double prev = i == 0 ? 1.0 : s.alpha_bar(i - 1);
    // Posterior std of x_{t-1} given x_t and x_0; zero at t = 1.
    s.sigma(i) = std::sqrt(s.beta(i) * (1.0 - prev) / (1.0 - s.alpha_bar(i)));
  }
  return s;
}

// Diffuse a clean window to timestep t with the given unit noise.
inline Mat q_sample(const Mat& x0, int t, const Mat& eps, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.timesteps) throw input_error("q_sample: timestep out of range");
  if (eps.rows() != x0.rows() || eps.cols() != x0.cols())
    throw input_error("q_sample: noise shape mismatch");
  const double ab = sched.alpha_bar_at(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

inline double huber_loss(const Mat& pred, const Mat& target, double delta = 1.0) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw input_error("huber: shape mismatch");
  const Mat d = pred - target;
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double a = std::abs(d(i));
    total += a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
  }
  return total / static_cast<double>(d.size());
}

inline Mat huber_grad(const Mat& pred, const Mat& target, double delta = 1.0) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw input_error("huber: shape mismatch");
  Mat g = pred - target;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (std::abs(g(i)) > delta) g(i) = g(i) > 0 ? delta : -delta;
  }
  return g / static_cast<double>(g.size());
}

// Classifier-free guided clean-window estimate. gamma blends the prediction
// under the primary condition with the one under the secondary condition
// (typically its unconditional or emotion-swapped variant); gamma of exactly
// 0 or 1 runs a single branch so the blend is bit-identical to that branch.
inline Mat guided_denoise(const Mat& x_t, int t, const ConditionBundle& primary,
                          const ConditionBundle& secondary, double gamma,
                          const ParamStore& params, const DenoiserConfig& cfg) {
  if (gamma == 1.0) return denoiser_forward(x_t, static_cast<double>(t), primary, params, cfg);
  if (gamma == 0.0) return denoiser_forward(x_t, static_cast<double>(t), secondary, params, cfg);
  const Mat a = denoiser_forward(x_t, static_cast<double>(t), primary, params, cfg);
  const Mat b = denoiser_forward(x_t, static_cast<double>(t), secondary, params, cfg);
  return gamma * a + (1.0 - gamma) * b;
}

struct AdamState {
  ParamStore m, v;
  std::int64_t step = 0;
};

inline AdamState make_adam_state(const ParamStore& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

inline void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params.tensors) {
    const Mat& g = grads.at(name);
    Mat& m = state.m.at(name);
    Mat& v = state.v.at(name);
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const Mat mhat = m / bc1;
    const Mat vhat = v / bc2;
    p.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
}

struct TrainItem {
  Mat x0;                // frames x feature_dim, normalized
  ConditionBundle cond;  // unmasked condition
};

struct TrainStepStats {
  double loss = 0.0;
  double grad_norm = 0.0;
};

namespace detail {

// Randomness drawn up front for one batch item, in a fixed order, so the
// result does not depend on how the work is scheduled.
struct ItemDraw {
  bool mask_uncond = false;
  int t = 1;
  Mat eps;
};

inline std::vector<ItemDraw> draw_batch(std::size_t n, const NoiseSchedule& sched,
                                        const DenoiserConfig& cfg, double mask_prob, Rng& rng) {
  std::vector<ItemDraw> draws(n);
  for (auto& d : draws) {
    d.mask_uncond = rng.bernoulli(mask_prob);
    d.t = static_cast<int>(rng.uniform_int(1, sched.timesteps));
    d.eps = rng.normal_matrix(cfg.frames, cfg.feature_dim);
  }
  return draws;
}

// Binary-counter pairwise merge: the combination tree over item gradients is
// fixed by the item order alone, so serial and threaded runs sum in exactly
// the same order and produce bit-identical results.
class PairwiseAccumulator {
 public:
  void push(ParamStore&& g) {
    stack_.emplace_back(std::move(g), 1);
    while (stack_.size() >= 2 &&
           stack_[stack_.size() - 1].second == stack_[stack_.size() - 2].second) {
      auto top = std::move(stack_.back());
      stack_.pop_back();
      stack_.back().first.add_scaled(top.first, 1.0);
      stack_.back().second *= 2;
    }
  }
  ParamStore finish() {
    if (stack_.empty()) throw internal_error("gradient reduction: empty batch");
    ParamStore acc = std::move(stack_.back().first);
    stack_.pop_back();
    while (!stack_.empty()) {
      stack_.back().first.add_scaled(acc, 1.0);
      acc = std::move(stack_.back().first);
      stack_.pop_back();
    }
    return acc;
  }

 private:
  std::vector<std::pair<ParamStore, int>> stack_;
};

}  // namespace detail

struct TrainHyper {
  double lr = 3e-5;
  double gamma = 1.0;        // guidance blend used at sampling time
  double mask_prob = 0.10;   // chance an item trains the unconditional branch
  double huber_delta = 1.0;
  int threads = 1;
};

// One optimizer step over a batch of training windows. Per-item randomness is
// drawn on the calling thread in item order (mask flag, timestep, noise), the
// items are evaluated possibly in parallel, and gradients are merged in a
// fixed pairwise tree, so a given Rng state always yields the same update.
inline TrainStepStats training_step(const std::vector<const TrainItem*>& batch,
                                    ParamStore& params, AdamState& adam,
                                    const NoiseSchedule& sched, const DenoiserConfig& cfg,
                                    const TrainHyper& hyper, Rng& rng) {
  if (batch.empty()) throw input_error("training: empty batch");
  const std::size_t n = batch.size();
  const auto draws = detail::draw_batch(n, sched, cfg, hyper.mask_prob, rng);

  std::vector<double> losses(n, 0.0);
  std::vector<ParamStore> grads(n);
  const auto run_item = [&](std::size_t i) {
    const TrainItem& item = *batch[i];
    const detail::ItemDraw& d = draws[i];
    ConditionBundle cond = item.cond;
    if (d.mask_uncond) cond = unconditional_variant(cond);
    const Mat x_t = q_sample(item.x0, d.t, d.eps, sched);
    DenoiserCache cache;
    const Mat pred = denoiser_forward(x_t, static_cast<double>(d.t), cond, params, cfg, &cache);
    losses[i] = huber_loss(pred, item.x0, hyper.huber_delta) / static_cast<double>(n);
    const Mat dpred = huber_grad(pred, item.x0, hyper.huber_delta) / static_cast<double>(n);
    ParamStore g = params.zeros_like();
    denoiser_backward(dpred, params, cfg, cache, g);
    grads[i] = std::move(g);
  };

  const int workers = std::max(1, hyper.threads);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run_item(i);
  } else {
    std::size_t next = 0;
    while (next < n) {
      std::vector<std::thread> pool;
      const std::size_t stop = std::min(n, next + static_cast<std::size_t>(workers));
      for (std::size_t i = next; i < stop; ++i) pool.emplace_back(run_item, i);
      for (auto& th : pool) th.join();
      next = stop;
    }
  }

  detail::PairwiseAccumulator acc;
  for (std::size_t i = 0; i < n; ++i) acc.push(std::move(grads[i]));
  const ParamStore total = acc.finish();

  TrainStepStats stats;
  for (double l : losses) stats.loss += l;
  stats.grad_norm = std::sqrt(total.squared_norm());
  adam_step(params, total, adam, hyper.lr);
  return stats;
}

enum class SamplingMode {
  VarianceSplit,  // direction term keeps total variance at 1 - alpha_bar
  Resample        // re-diffuses the estimate with fresh full-scale noise
};

// Reverse diffusion for one window. Noise draws per step: the direction (or
// re-diffusion) noise first, then the posterior jitter, both full matrices,
// so the consumption pattern is independent of the estimates.
inline Mat sample_segment(const ConditionBundle& primary, const ConditionBundle& secondary,
                          double gamma, const ParamStore& params, const DenoiserConfig& cfg,
                          const NoiseSchedule& sched, Rng& rng,
                          SamplingMode mode = SamplingMode::VarianceSplit) {
  Mat x = rng.normal_matrix(cfg.frames, cfg.feature_dim);
  for (int t = sched.timesteps; t >= 2; --t) {
    const Mat x0_hat = guided_denoise(x, t, primary, secondary, gamma, params, cfg);
    const double ab_prev = sched.alpha_bar_at(t - 1);
    const double sig = sched.sigma_at(t);
    const Mat eps = rng.normal_matrix(cfg.frames, cfg.feature_dim);
    const Mat z = rng.normal_matrix(cfg.frames, cfg.feature_dim);
    double dir_scale;
    if (mode == SamplingMode::VarianceSplit)
      dir_scale = std::sqrt(std::max(0.0, 1.0 - ab_prev - sig * sig));
    else
      dir_scale = std::sqrt(1.0 - ab_prev);
    x = std::sqrt(ab_prev) * x0_hat + dir_scale * eps + sig * z;
  }
  return guided_denoise(x, 1, primary, secondary, gamma, params, cfg);
}

struct SegmentResult {
  Mat seed;    // seed window fed to this segment (normalized)
  Mat output;  // generated window (normalized)
};

struct LongFormResult {
  std::vector<SegmentResult> segments;
  Mat features;  // concatenated denormalized feature rows
};

// Stitches segments: the first seed is the normalized-space origin (the data
// mean), every later seed is the tail of the previous output. The secondary
// condition list carries the guidance alternative per segment (unconditional
// or a second emotion); seeds are mirrored into it.
inline LongFormResult generate_long(std::vector<ConditionBundle> primary,
                                    std::vector<ConditionBundle> secondary, double gamma,
                                    const ParamStore& params, const DenoiserConfig& cfg,
                                    const NoiseSchedule& sched, const Normalizer& norm, Rng& rng,
                                    SamplingMode mode = SamplingMode::VarianceSplit) {
  if (primary.empty()) throw input_error("generate: no segments");
  if (secondary.size() != primary.size())
    throw input_error("generate: condition lists differ in length");
  LongFormResult result;
  result.features.resize(static_cast<Eigen::Index>(primary.size()) * cfg.frames,
                         cfg.feature_dim);
  Mat seed = Mat::Zero(cfg.seed_frames, cfg.feature_dim);
  for (std::size_t k = 0; k < primary.size(); ++k) {
    primary[k].seed = seed;
    secondary[k].seed = seed;
    const Mat out =
        sample_segment(primary[k], secondary[k], gamma, params, cfg, sched, rng, mode);
    result.segments.push_back({seed, out});
    result.features.middleRows(static_cast<Eigen::Index>(k) * cfg.frames, cfg.frames) =
        norm.denormalize(out);
    seed = out.bottomRows(cfg.seed_frames);
  }
  return result;
}

}  // namespace ggen
