#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ggen/dataset.hpp"
#include "ggen/diffusion.hpp"
#include "ggen/evaluation.hpp"
#include "ggen/gradcheck.hpp"
#include "ggen/rotation.hpp"

namespace ggen {

struct SelfcheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

namespace detail {

inline SelfcheckResult check_rotation_consistency() {
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-kPi, kPi);
    const double b = rng.uniform(-kPi / 2, kPi / 2);
    const double g = rng.uniform(-kPi, kPi);
    const Mat3 m = euler_zyx_to_matrix(a, b, g);
    const Mat3 q = quaternion_to_matrix(euler_to_quaternion(a, b, g));
    worst = std::max(worst, (m - q).cwiseAbs().maxCoeff());
  }
  std::ostringstream d;
  d << "worst euler->matrix vs euler->quaternion gap " << worst << " over 1000 triples";
  return {"rotation representation consistency", worst < 1e-9, d.str()};
}

inline SelfcheckResult check_gradients() {
  DenoiserConfig cfg;
  cfg.feature_dim = 5;
  cfg.frames = 3;
  cfg.seed_frames = 2;
  cfg.speech_dim = 4;
  cfg.text_dim = 3;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.ffn_mult = 2;
  cfg.local_window = 1;
  ParamStore params = init_denoiser_params(cfg, 7);
  Rng rng(8);
  ConditionBundle cond;
  cond.seed = rng.normal_matrix(cfg.seed_frames, cfg.feature_dim);
  cond.emotion = Vec::Zero(6);
  cond.emotion(1) = 1.0;
  cond.speech = rng.normal_matrix(cfg.frames, cfg.speech_dim);
  cond.text = rng.normal_matrix(cfg.frames, cfg.text_dim);
  const Mat x = rng.normal_matrix(cfg.frames, cfg.feature_dim);
  const Mat w = rng.normal_matrix(cfg.frames, cfg.feature_dim);

  ParamStore grads = params.zeros_like();
  DenoiserCache cache;
  denoiser_forward(x, 5.0, cond, params, cfg, &cache);
  denoiser_backward(w, params, cfg, cache, grads);
  const auto loss = [&]() {
    return (denoiser_forward(x, 5.0, cond, params, cfg).array() * w.array()).sum();
  };
  const GradCheckReport report = check_parameter_gradients(loss, params, grads);
  std::ostringstream d;
  d << "max relative error " << report.max_rel_error << " (worst " << report.worst_tensor
    << ", " << report.entries_checked << " entries)";
  return {"analytic gradients vs finite differences", report.max_rel_error < 1e-4, d.str()};
}

inline SelfcheckResult check_schedule() {
  const NoiseSchedule s = make_noise_schedule(1000);
  bool ok = s.sigma_at(1) == 0.0 && s.alpha_bar_at(0) == 1.0;
  double worst_var = 0.0;
  for (int t = 1; t <= s.timesteps; ++t) {
    ok = ok && s.alpha_bar_at(t) < s.alpha_bar_at(t - 1);
    const double slack = s.sigma_at(t) * s.sigma_at(t) - (1.0 - s.alpha_bar_at(t - 1));
    worst_var = std::max(worst_var, slack);
  }
  ok = ok && worst_var <= 1e-15;
  std::ostringstream d;
  d << "sigma_1 " << s.sigma_at(1) << ", posterior variance never exceeds 1 - alpha_bar_prev";
  return {"noise schedule invariants", ok, d.str()};
}

inline SelfcheckResult check_fgd() {
  Mat real(2, 1), gen(2, 1);
  real << 0.0, 2.0;
  gen << 1.0, 3.0;
  const double closed = frechet_gesture_distance(real, gen);
  Rng rng(9);
  const Mat x = rng.normal_matrix(200, 50);
  const double self = frechet_gesture_distance(x, x);
  const bool ok = std::abs(closed - 1.0) < 1e-9 && std::abs(self) <= 1e-8;
  std::ostringstream d;
  d << "closed form " << closed << " (want 1), self distance " << self;
  return {"frechet distance oracles", ok, d.str()};
}

inline SelfcheckResult check_guidance() {
  DenoiserConfig cfg;
  cfg.feature_dim = 4;
  cfg.frames = 2;
  cfg.seed_frames = 1;
  cfg.speech_dim = 3;
  cfg.text_dim = 2;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.ffn_mult = 2;
  cfg.local_window = 1;
  const ParamStore params = init_denoiser_params(cfg, 11);
  Rng rng(12);
  ConditionBundle c1;
  c1.seed = rng.normal_matrix(1, 4);
  c1.emotion = Vec::Zero(6);
  c1.emotion(0) = 1.0;
  c1.speech = rng.normal_matrix(2, 3);
  c1.text = rng.normal_matrix(2, 2);
  const ConditionBundle c2 = unconditional_variant(c1);
  const Mat x = rng.normal_matrix(2, 4);
  const Mat a = denoiser_forward(x, 1.0, c1, params, cfg);
  const Mat b = denoiser_forward(x, 1.0, c2, params, cfg);
  const bool exact1 = guided_denoise(x, 1, c1, c2, 1.0, params, cfg) == a;
  const bool exact0 = guided_denoise(x, 1, c1, c2, 0.0, params, cfg) == b;
  const double blend =
      (guided_denoise(x, 1, c1, c2, 0.5, params, cfg) - (0.5 * a + 0.5 * b)).cwiseAbs().maxCoeff();
  const bool ok = exact1 && exact0 && blend < 1e-12;
  std::ostringstream d;
  d << "endpoints bit-exact " << (exact1 && exact0 ? "yes" : "NO") << ", midpoint gap " << blend;
  return {"guidance blending identities", ok, d.str()};
}

inline SelfcheckResult check_huber() {
  Mat p(1, 1), q(1, 1);
  p << 2.0;
  q << 0.0;
  const double v = huber_loss(p, q);
  return {"huber loss oracle", v == 1.5, "loss(2, 0) = " + std::to_string(v) + " (want 1.5)"};
}

inline SelfcheckResult check_bvh_round_trip() {
  Rng rng(13);
  MotionClip clip;
  clip.skeleton = make_toy_skeleton(5);
  clip.frame_time = 0.05;
  clip.frames = rng.normal_matrix(4, clip.skeleton.channel_count()) * 20.0;
  std::stringstream buf;
  write_bvh(buf, clip);
  const MotionClip back = parse_bvh(buf);
  const double gap = (back.frames - clip.frames).cwiseAbs().maxCoeff();
  std::ostringstream d;
  d << "write -> parse channel gap " << gap;
  return {"bvh round trip", gap < 1e-4, d.str()};
}

inline SelfcheckResult check_tensor_blob() {
  Rng rng(14);
  const Mat m = rng.normal_matrix(3, 5);
  std::stringstream buf;
  write_tensor(buf, m, Dtype::f64);
  const bool exact = read_tensor(buf).data == m;
  std::string bytes;
  {
    std::stringstream again;
    write_tensor(again, m, Dtype::f64);
    bytes = again.str();
  }
  bytes[bytes.size() - 3] ^= 0x10;
  bool caught = false;
  try {
    std::istringstream in(bytes);
    read_tensor(in);
  } catch (const input_error&) {
    caught = true;
  }
  return {"tensor blob integrity", exact && caught,
          std::string("round trip ") + (exact ? "exact" : "INEXACT") + ", corruption " +
              (caught ? "detected" : "MISSED")};
}

}  // namespace detail

inline std::vector<SelfcheckResult> run_selfchecks() {
  return {detail::check_rotation_consistency(), detail::check_gradients(),
          detail::check_schedule(),             detail::check_fgd(),
          detail::check_guidance(),             detail::check_huber(),
          detail::check_bvh_round_trip(),       detail::check_tensor_blob()};
}

inline bool print_selfchecks(const std::vector<SelfcheckResult>& results, std::ostream& out) {
  bool all_ok = true;
  for (const auto& r : results) {
    out << (r.ok ? "ok   " : "FAIL ") << std::left << std::setw(44) << r.name << " " << r.detail
        << "\n";
    all_ok = all_ok && r.ok;
  }
  out << (all_ok ? "all checks passed" : "SOME CHECKS FAILED") << "\n";
  return all_ok;
}

}  // namespace ggen
