#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "ggen/checkpoint.hpp"
#include "ggen/config.hpp"
#include "ggen/dataset.hpp"
#include "ggen/diffusion.hpp"
#include "ggen/evaluation.hpp"
#include "ggen/selfcheck.hpp"

namespace ggen {

// Exit codes: 0 success, 2 bad input (files, flags, formats), 1 internal.
template <typename Fn>
int guard_command(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const input_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

namespace detail {

constexpr std::uint64_t kRunStreamSalt = 0x9E3779B97F4A7C15ull;     // training draws
constexpr std::uint64_t kSampleStreamSalt = 0xC2B2AE3D27D4EB4Full;  // sampling draws

inline void check_dataset_matches(const Dataset& ds, const RunConfig& cfg, std::ostream& out) {
  if (ds.feature_dim != cfg.feature_dim() || ds.frames != cfg.frames ||
      ds.seed_frames != cfg.seed_frames || ds.speech_dim != cfg.speech_dim ||
      ds.text_dim != cfg.text_dim || ds.fps != cfg.fps)
    throw input_error(
        "dataset geometry does not match the config (feature_dim/frames/seed_frames/"
        "speech_dim/text_dim/fps)");
  if (ds.config_hash != config_hash(cfg))
    out << "note: dataset was built under config hash " << ds.config_hash
        << ", current config hashes to " << config_hash(cfg) << "; geometry matches\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessOptions {
  std::string data_dir;
  std::string out_dir;
  std::string config_path;
};

inline int cmd_preprocess(const PreprocessOptions& opt, std::ostream& out) {
  const RunConfig cfg = opt.config_path.empty() ? RunConfig{} : load_config(opt.config_path);
  cfg.validate();
  const IngestStats stats = ingest_dataset(opt.data_dir, opt.out_dir, cfg, out);
  out << "ingested " << stats.clips_used << " clips (" << stats.clips_skipped << " skipped), "
      << stats.windows << " windows -> " << opt.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string dataset_dir;
  std::string checkpoint_out;
  std::string config_path;  // fresh runs only
  std::string resume_path;  // resumes carry their own config
  int steps = -1;           // override config when >= 0
};

inline int cmd_train(const TrainOptions& opt, std::ostream& out) {
  const Dataset ds = load_dataset(opt.dataset_dir);
  Checkpoint ck;
  if (!opt.resume_path.empty()) {
    if (!opt.config_path.empty())
      throw input_error("train: pass either --config or --resume, not both");
    ck = load_checkpoint(opt.resume_path);
    out << "resuming from step " << ck.step << "\n";
  } else {
    ck.config = opt.config_path.empty() ? RunConfig{} : load_config(opt.config_path);
    ck.config.validate();
    ck.skeleton = ds.skeleton;
    ck.normalizer = ds.normalizer;
    ck.params = init_denoiser_params(ck.config.denoiser(), ck.config.seed);
    ck.adam = make_adam_state(ck.params);
    Rng fresh(ck.config.seed ^ detail::kRunStreamSalt);
    ck.rng_state = fresh.state();
  }
  const RunConfig& cfg = ck.config;
  detail::check_dataset_matches(ds, cfg, out);

  const DenoiserConfig dcfg = cfg.denoiser();
  const NoiseSchedule sched = cfg.schedule();
  const TrainHyper hyper = cfg.hyper();
  Rng rng;
  rng.set_state(ck.rng_state);

  const std::int64_t target = opt.steps >= 0 ? opt.steps : cfg.steps;
  const std::size_t batch =
      std::min(static_cast<std::size_t>(cfg.batch_size), ds.items.size());
  for (std::int64_t step = ck.step + 1; step <= target; ++step) {
    const std::vector<std::size_t> picks = sample_indices(rng, ds.items.size(), batch);
    std::vector<const TrainItem*> ptrs;
    ptrs.reserve(picks.size());
    for (std::size_t i : picks) ptrs.push_back(&ds.items[i]);
    const TrainStepStats st = training_step(ptrs, ck.params, ck.adam, sched, dcfg, hyper, rng);
    ck.step = step;
    if (step % cfg.log_every == 0 || step == target)
      out << "step " << step << "  loss " << st.loss << "  grad " << st.grad_norm << "\n";
    if (step % cfg.checkpoint_every == 0) {
      ck.rng_state = rng.state();
      save_checkpoint(opt.checkpoint_out, ck);
    }
  }
  ck.rng_state = rng.state();
  save_checkpoint(opt.checkpoint_out, ck);
  out << "trained to step " << ck.step << ", checkpoint " << opt.checkpoint_out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleOptions {
  std::string checkpoint;
  std::string wav;
  std::string textgrid;  // optional
  std::string out_bvh;
  std::string emotion = "Neutral";
  std::string emotion_mix;  // optional second emotion for the guidance blend
  int segments = 0;         // 0 = cover the waveform
  double gamma = std::numeric_limits<double>::quiet_NaN();  // NaN = config value
  std::int64_t seed = -1;                                   // -1 = derive from config
};

inline int cmd_sample(const SampleOptions& opt, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const RunConfig& cfg = ck.config;
  const double gamma = std::isnan(opt.gamma) ? cfg.gamma : opt.gamma;

  std::vector<ConditionBundle> primary =
      conditions_from_speech(opt.wav, opt.textgrid, opt.emotion, opt.segments, cfg);
  std::vector<ConditionBundle> secondary;
  secondary.reserve(primary.size());
  if (!opt.emotion_mix.empty()) {
    const Vec e2 = encode_emotion(opt.emotion_mix);
    for (const ConditionBundle& b : primary) {
      ConditionBundle alt = b;
      alt.emotion = e2;
      secondary.push_back(std::move(alt));
    }
  } else {
    for (const ConditionBundle& b : primary) secondary.push_back(unconditional_variant(b));
  }

  const std::uint64_t seed =
      opt.seed >= 0 ? static_cast<std::uint64_t>(opt.seed) : cfg.seed ^ detail::kSampleStreamSalt;
  Rng rng(seed);
  const LongFormResult res = generate_long(primary, secondary, gamma, ck.params, cfg.denoiser(),
                                           cfg.schedule(), ck.normalizer, rng,
                                           cfg.sampling_mode());
  const MotionClip clip =
      features_to_motion(res.features, ck.skeleton, static_cast<double>(cfg.fps));
  save_bvh(opt.out_bvh, clip);

  json side;
  side["checkpoint"] = opt.checkpoint;
  side["checkpoint_step"] = ck.step;
  side["config_hash"] = config_hash(cfg);
  side["wav"] = opt.wav;
  side["textgrid"] = opt.textgrid;
  side["emotion"] = opt.emotion;
  side["emotion_mix"] = opt.emotion_mix;
  side["gamma"] = gamma;
  side["sampler"] = cfg.sampler;
  side["seed"] = seed;
  side["segments"] = res.segments.size();
  side["frames"] = res.features.rows();
  side["fps"] = cfg.fps;
  std::ofstream sf(opt.out_bvh + ".run.json", std::ios::binary);
  if (!sf) throw input_error("cannot write " + opt.out_bvh + ".run.json");
  sf << side.dump(2) << "\n";

  out << "wrote " << res.features.rows() << " frames in " << res.segments.size()
      << " segments -> " << opt.out_bvh << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint;
  std::string dataset_dir;
  std::string report_path;  // optional JSON output
  int max_windows = 0;      // 0 = every window
  std::int64_t seed = -1;
};

inline int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(opt.checkpoint);
  const RunConfig& cfg = ck.config;
  const Dataset ds = load_dataset(opt.dataset_dir);
  detail::check_dataset_matches(ds, cfg, out);

  const DenoiserConfig dcfg = cfg.denoiser();
  const NoiseSchedule sched = cfg.schedule();
  const std::uint64_t seed =
      opt.seed >= 0 ? static_cast<std::uint64_t>(opt.seed) : cfg.seed ^ detail::kSampleStreamSalt;
  Rng rng(seed);

  const std::size_t count = opt.max_windows > 0
                                ? std::min<std::size_t>(ds.items.size(),
                                                        static_cast<std::size_t>(opt.max_windows))
                                : ds.items.size();
  const int m = cfg.frames;
  Mat real_rows(static_cast<Eigen::Index>(count) * m, ds.feature_dim);
  Mat gen_rows(static_cast<Eigen::Index>(count) * m, ds.feature_dim);
  std::vector<Mat> real_norm, gen_norm, real_raw, gen_raw;
  for (std::size_t i = 0; i < count; ++i) {
    const TrainItem& item = ds.items[i];
    const ConditionBundle secondary = unconditional_variant(item.cond);
    const Mat gen = sample_segment(item.cond, secondary, cfg.gamma, ck.params, dcfg, sched, rng,
                                   cfg.sampling_mode());
    const Mat gen_feats = ds.normalizer.denormalize(gen);
    const Mat real_feats = ds.normalizer.denormalize(item.x0);
    real_rows.middleRows(static_cast<Eigen::Index>(i) * m, m) = real_feats;
    gen_rows.middleRows(static_cast<Eigen::Index>(i) * m, m) = gen_feats;
    real_norm.push_back(item.x0);
    gen_norm.push_back(gen);
    real_raw.push_back(real_feats);
    gen_raw.push_back(gen_feats);
  }

  const double fgd = frechet_gesture_distance(real_rows, gen_rows);
  const double mse = mean_squared_error(real_raw, gen_raw);
  const double mse_normalized = mean_squared_error(real_norm, gen_norm);

  out << "windows " << count << "\n";
  out << "fgd " << fgd << "\n";
  out << "mse " << mse << "\n";
  out << "mse_normalized " << mse_normalized << "\n";

  json report;
  report["checkpoint"] = opt.checkpoint;
  report["checkpoint_step"] = ck.step;
  report["dataset"] = opt.dataset_dir;
  report["config_hash"] = config_hash(cfg);
  report["windows"] = count;
  report["gamma"] = cfg.gamma;
  report["sampler"] = cfg.sampler;
  report["seed"] = seed;
  report["fgd"] = fgd;
  report["mse"] = mse;
  report["mse_normalized"] = mse_normalized;
  report["config"] = serialize_config(cfg);
  if (!opt.report_path.empty()) {
    std::ofstream rf(opt.report_path, std::ios::binary);
    if (!rf) throw input_error("cannot write " + opt.report_path);
    rf << report.dump(2) << "\n";
    out << "report -> " << opt.report_path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// selfcheck
// ---------------------------------------------------------------------------

inline int cmd_selfcheck(std::ostream& out) {
  return print_selfchecks(run_selfchecks(), out) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// convert
// ---------------------------------------------------------------------------

struct ConvertOptions {
  std::string to_features;  // input .bvh -> feature tensor
  std::string to_motion;    // input feature tensor -> .bvh
  std::string like_bvh;     // skeleton donor for to_motion
  std::string output;
  std::string gaze_joint = "Head";
  double fps = 0.0;  // 0 = donor clip rate
};

inline int cmd_convert(const ConvertOptions& opt, std::ostream& out) {
  const bool to_features = !opt.to_features.empty();
  const bool to_motion = !opt.to_motion.empty();
  if (to_features == to_motion)
    throw input_error("convert: pass exactly one of --to-features or --to-motion");
  if (opt.output.empty()) throw input_error("convert: missing --out");

  if (to_features) {
    const MotionClip clip = load_bvh(opt.to_features);
    const Mat feats = build_features(clip, static_cast<int>(clip.skeleton.joints.size()),
                                     opt.gaze_joint);
    save_tensor(opt.output, feats, Dtype::f64);
    out << "wrote " << feats.rows() << "x" << feats.cols() << " feature tensor -> " << opt.output
        << "\n";
    return 0;
  }

  if (opt.like_bvh.empty()) throw input_error("convert: --to-motion needs --like <skeleton.bvh>");
  const MotionClip donor = load_bvh(opt.like_bvh);
  const TensorRecord rec = load_tensor(opt.to_motion);
  const double fps = opt.fps > 0.0 ? opt.fps : donor.fps();
  const MotionClip clip = features_to_motion(rec.data, donor.skeleton, fps);
  save_bvh(opt.output, clip);
  out << "wrote " << clip.frame_count() << " frames -> " << opt.output << "\n";
  return 0;
}

}  // namespace ggen
