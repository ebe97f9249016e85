#include <gtest/gtest.h>

#include <cmath>

#include "ggen/diffusion.hpp"
#include "ggen/gradcheck.hpp"

namespace {

using ggen::ConditionBundle;
using ggen::DenoiserConfig;
using ggen::Mat;
using ggen::NoiseSchedule;
using ggen::ParamStore;
using ggen::Rng;
using ggen::TrainItem;

DenoiserConfig tiny_config() {
  DenoiserConfig cfg;
  cfg.feature_dim = 5;
  cfg.frames = 3;
  cfg.seed_frames = 2;
  cfg.speech_dim = 4;
  cfg.text_dim = 3;
  cfg.emotion_dim = 6;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.ffn_mult = 2;
  cfg.local_window = 1;
  return cfg;
}

ConditionBundle random_bundle(const DenoiserConfig& cfg, Rng& rng, int emotion = 1) {
  ConditionBundle cond;
  cond.seed = rng.normal_matrix(cfg.seed_frames, cfg.feature_dim);
  cond.emotion = ggen::Vec::Zero(cfg.emotion_dim);
  cond.emotion(emotion) = 1.0;
  cond.speech = rng.normal_matrix(cfg.frames, cfg.speech_dim);
  cond.text = rng.normal_matrix(cfg.frames, cfg.text_dim);
  return cond;
}

TEST(NoiseSchedule, LinearBetaEndpointsAndMonotoneAlphaBar) {
  const NoiseSchedule s = ggen::make_noise_schedule(1000);
  EXPECT_DOUBLE_EQ(s.beta_at(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta_at(1000), 0.02);
  EXPECT_DOUBLE_EQ(s.alpha_bar_at(0), 1.0);
  for (int t = 1; t <= 1000; ++t) {
    EXPECT_LT(s.alpha_bar_at(t), s.alpha_bar_at(t - 1));
    EXPECT_GT(s.alpha_bar_at(t), 0.0);
  }
  // Midpoint of the beta line.
  EXPECT_NEAR(s.beta_at(500), 1e-4 + (0.02 - 1e-4) * 499.0 / 999.0, 1e-15);
}

TEST(NoiseSchedule, PosteriorSigmaInvariants) {
  for (const NoiseSchedule& s :
       {ggen::make_noise_schedule(1000), ggen::make_noise_schedule(50, 1e-3, 0.3),
        ggen::make_noise_schedule(8, 0.5, 0.999)}) {
    EXPECT_DOUBLE_EQ(s.sigma_at(1), 0.0);
    for (int t = 1; t <= s.timesteps; ++t) {
      const double var = s.sigma_at(t) * s.sigma_at(t);
      EXPECT_LE(var, 1.0 - s.alpha_bar_at(t - 1) + 1e-15) << "t=" << t;
      EXPECT_GE(var, 0.0);
    }
  }
}

TEST(NoiseSchedule, RejectsBadRanges) {
  EXPECT_THROW(ggen::make_noise_schedule(0), ggen::input_error);
  EXPECT_THROW(ggen::make_noise_schedule(10, 0.0, 0.5), ggen::input_error);
  EXPECT_THROW(ggen::make_noise_schedule(10, 0.1, 1.0), ggen::input_error);
  EXPECT_THROW(ggen::make_noise_schedule(10, 0.5, 0.1), ggen::input_error);
}

TEST(QSample, SingleStepHalfBetaIsExact) {
  // One timestep with beta 0.5 gives alpha_bar exactly 0.5.
  const NoiseSchedule s = ggen::make_noise_schedule(1, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(s.alpha_bar_at(1), 0.5);
  Mat x0(1, 2), eps(1, 2);
  x0 << 2.0, -4.0;
  eps << 1.0, 1.0;
  const Mat xt = ggen::q_sample(x0, 1, eps, s);
  const double r = std::sqrt(0.5);
  EXPECT_DOUBLE_EQ(xt(0, 0), r * 2.0 + r);
  EXPECT_DOUBLE_EQ(xt(0, 1), r * -4.0 + r);
  EXPECT_THROW(ggen::q_sample(x0, 2, eps, s), ggen::input_error);
  EXPECT_THROW(ggen::q_sample(x0, 0, eps, s), ggen::input_error);
}

TEST(QSample, MonteCarloMomentsMatchSchedule) {
  const NoiseSchedule s = ggen::make_noise_schedule(1, 0.5, 0.5);
  Rng rng(99);
  Mat x0(1, 1);
  x0 << 3.0;
  const int draws = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = ggen::q_sample(x0, 1, rng.normal_matrix(1, 1), s)(0, 0);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / draws;
  const double var = sumsq / draws - mean * mean;
  EXPECT_NEAR(mean, std::sqrt(0.5) * 3.0, 0.02);
  EXPECT_NEAR(var, 0.5, 0.02);
}

TEST(Huber, UnitDeltaOracles) {
  Mat p(1, 1), q(1, 1);
  p << 2.0;
  q << 0.0;
  EXPECT_DOUBLE_EQ(ggen::huber_loss(p, q), 1.5);  // linear branch: 1*(2 - 0.5)
  p << 0.5;
  EXPECT_DOUBLE_EQ(ggen::huber_loss(p, q), 0.125);  // quadratic branch: 0.5*0.25
  p << -3.0;
  EXPECT_DOUBLE_EQ(ggen::huber_loss(p, q), 2.5);
  EXPECT_DOUBLE_EQ(ggen::huber_grad(p, q)(0, 0), -1.0);
}

TEST(Huber, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  Mat pred = rng.normal_matrix(3, 4) * 2.0;  // spans both branches
  const Mat target = rng.normal_matrix(3, 4);
  const Mat analytic = ggen::huber_grad(pred, target);
  const Mat numeric =
      ggen::numeric_gradient([&]() { return ggen::huber_loss(pred, target); }, pred);
  EXPECT_LT(ggen::max_relative_error(analytic, numeric), 1e-6);
}

TEST(Guidance, EndpointGammaRunsSingleBranch) {
  const DenoiserConfig cfg = tiny_config();
  const ParamStore params = ggen::init_denoiser_params(cfg, 31);
  Rng rng(6);
  const ConditionBundle c1 = random_bundle(cfg, rng, 1);
  ConditionBundle c2 = random_bundle(cfg, rng, 4);
  const Mat x = rng.normal_matrix(cfg.frames, cfg.feature_dim);

  const Mat full = ggen::denoiser_forward(x, 3.0, c1, params, cfg);
  const Mat other = ggen::denoiser_forward(x, 3.0, c2, params, cfg);
  EXPECT_EQ(ggen::guided_denoise(x, 3, c1, c2, 1.0, params, cfg), full);
  EXPECT_EQ(ggen::guided_denoise(x, 3, c1, c2, 0.0, params, cfg), other);

  const Mat mid = ggen::guided_denoise(x, 3, c1, c2, 0.5, params, cfg);
  EXPECT_LT((mid - (0.5 * full + 0.5 * other)).cwiseAbs().maxCoeff(), 1e-12);
  const Mat extrap = ggen::guided_denoise(x, 3, c1, c2, 2.0, params, cfg);
  EXPECT_LT((extrap - (2.0 * full - other)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adam, ConstantGradientStepsAtLearningRate) {
  ParamStore p;
  p.tensors["w"] = Mat::Zero(1, 1);
  ParamStore g;
  g.tensors["w"] = Mat::Ones(1, 1);
  ggen::AdamState st = ggen::make_adam_state(p);
  ggen::adam_step(p, g, st, 0.1);
  // Bias correction makes the very first step exactly lr / (1 + eps).
  EXPECT_NEAR(p.at("w")(0, 0), -0.1, 1e-8);
  ggen::adam_step(p, g, st, 0.1);
  EXPECT_NEAR(p.at("w")(0, 0), -0.2, 1e-7);
  EXPECT_EQ(st.step, 2);
}

TEST(Training, StepIsDeterministicInRngState) {
  const DenoiserConfig cfg = tiny_config();
  const NoiseSchedule sched = ggen::make_noise_schedule(10, 1e-3, 0.3);
  Rng data_rng(41);
  std::vector<TrainItem> items(3);
  for (auto& it : items) {
    it.x0 = data_rng.normal_matrix(cfg.frames, cfg.feature_dim);
    it.cond = random_bundle(cfg, data_rng);
  }
  std::vector<const TrainItem*> batch;
  for (const auto& it : items) batch.push_back(&it);
  ggen::TrainHyper hyper;
  hyper.lr = 1e-3;

  const auto run = [&](int threads) {
    ParamStore params = ggen::init_denoiser_params(cfg, 50);
    ggen::AdamState adam = ggen::make_adam_state(params);
    Rng rng(77);
    ggen::TrainHyper h = hyper;
    h.threads = threads;
    ggen::TrainStepStats st{};
    for (int i = 0; i < 3; ++i) st = ggen::training_step(batch, params, adam, sched, cfg, h, rng);
    return std::make_pair(params, st);
  };

  const auto [p1, s1] = run(1);
  const auto [p2, s2] = run(1);
  for (const auto& [name, tensor] : p1.tensors) EXPECT_EQ(tensor, p2.at(name)) << name;
  EXPECT_EQ(s1.loss, s2.loss);
  // Threaded item evaluation must reproduce the serial result bit for bit.
  const auto [p3, s3] = run(3);
  for (const auto& [name, tensor] : p1.tensors) EXPECT_EQ(tensor, p3.at(name)) << name;
  EXPECT_EQ(s1.loss, s3.loss);
}

TEST(Training, LossFallsOnTinyDataset) {
  const DenoiserConfig cfg = tiny_config();
  const NoiseSchedule sched = ggen::make_noise_schedule(10, 1e-3, 0.3);
  Rng data_rng(42);
  std::vector<TrainItem> items(2);
  for (auto& it : items) {
    it.x0 = data_rng.normal_matrix(cfg.frames, cfg.feature_dim) * 0.5;
    it.cond = random_bundle(cfg, data_rng);
  }
  std::vector<const TrainItem*> batch;
  for (const auto& it : items) batch.push_back(&it);

  ParamStore params = ggen::init_denoiser_params(cfg, 51);
  ggen::AdamState adam = ggen::make_adam_state(params);
  Rng rng(78);
  ggen::TrainHyper hyper;
  hyper.lr = 5e-3;
  double first = 0.0, last = 0.0;
  const int steps = 120;
  for (int i = 0; i < steps; ++i) {
    const auto st = ggen::training_step(batch, params, adam, sched, cfg, hyper, rng);
    if (i < 10) first += st.loss;
    if (i >= steps - 10) last += st.loss;
    EXPECT_TRUE(std::isfinite(st.loss));
  }
  EXPECT_LT(last, 0.5 * first);
}

TEST(Sampling, DeterministicAndShaped) {
  const DenoiserConfig cfg = tiny_config();
  const ParamStore params = ggen::init_denoiser_params(cfg, 60);
  const NoiseSchedule sched = ggen::make_noise_schedule(5, 1e-3, 0.3);
  Rng cond_rng(8);
  const ConditionBundle c1 = random_bundle(cfg, cond_rng, 0);
  const ConditionBundle c2 = ggen::unconditional_variant(c1);

  Rng r1(123), r2(123), r3(124);
  const Mat a = ggen::sample_segment(c1, c2, 1.0, params, cfg, sched, r1);
  const Mat b = ggen::sample_segment(c1, c2, 1.0, params, cfg, sched, r2);
  const Mat c = ggen::sample_segment(c1, c2, 1.0, params, cfg, sched, r3);
  EXPECT_EQ(a.rows(), cfg.frames);
  EXPECT_EQ(a.cols(), cfg.feature_dim);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_TRUE(a.allFinite());

  Rng r4(123);
  const Mat d =
      ggen::sample_segment(c1, c2, 1.0, params, cfg, sched, r4, ggen::SamplingMode::Resample);
  EXPECT_NE(a, d);
}

TEST(Sampling, SingleStepScheduleDenoisesPureNoise) {
  // With one timestep the sampler must return the t = 1 estimate of the
  // initial draw, nothing else.
  const DenoiserConfig cfg = tiny_config();
  const ParamStore params = ggen::init_denoiser_params(cfg, 61);
  const NoiseSchedule sched = ggen::make_noise_schedule(1, 0.5, 0.5);
  Rng cond_rng(9);
  const ConditionBundle c1 = random_bundle(cfg, cond_rng, 2);
  Rng r1(5);
  const Mat got = ggen::sample_segment(c1, c1, 1.0, params, cfg, sched, r1);
  Rng r2(5);
  const Mat x = r2.normal_matrix(cfg.frames, cfg.feature_dim);
  const Mat want = ggen::denoiser_forward(x, 1.0, c1, params, cfg);
  EXPECT_EQ(got, want);
}

TEST(Sampling, LongFormChainsSeeds) {
  const DenoiserConfig cfg = tiny_config();
  const ParamStore params = ggen::init_denoiser_params(cfg, 62);
  const NoiseSchedule sched = ggen::make_noise_schedule(4, 1e-3, 0.3);
  Rng cond_rng(10);
  std::vector<ConditionBundle> primary, secondary;
  for (int k = 0; k < 3; ++k) {
    primary.push_back(random_bundle(cfg, cond_rng, k));
    secondary.push_back(ggen::unconditional_variant(primary.back()));
  }
  ggen::Normalizer norm;
  norm.mean = ggen::Vec::Constant(cfg.feature_dim, 2.0);
  norm.std = ggen::Vec::Constant(cfg.feature_dim, 3.0);

  Rng rng(55);
  const ggen::LongFormResult res =
      ggen::generate_long(primary, secondary, 1.0, params, cfg, sched, norm, rng);
  ASSERT_EQ(res.segments.size(), 3u);
  EXPECT_EQ(res.segments[0].seed, Mat::Zero(cfg.seed_frames, cfg.feature_dim));
  for (std::size_t k = 1; k < 3; ++k)
    EXPECT_EQ(res.segments[k].seed,
              Mat(res.segments[k - 1].output.bottomRows(cfg.seed_frames)));
  EXPECT_EQ(res.features.rows(), 3 * cfg.frames);
  // Output rows are the denormalized segment outputs.
  const Mat want = (res.segments[0].output * 3.0).rowwise() +
                   ggen::Vec::Constant(cfg.feature_dim, 2.0).transpose();
  EXPECT_LT((res.features.topRows(cfg.frames) - want).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
