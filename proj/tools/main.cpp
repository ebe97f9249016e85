#include <iostream>

#include <CLI11.hpp>

#include "ggen/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"speech-conditioned gesture generation"};
  app.require_subcommand(1);

  ggen::PreprocessOptions pre;
  CLI::App* preprocess = app.add_subcommand(
      "preprocess", "ingest BVH/WAV/TextGrid clips into a training dataset");
  preprocess->add_option("--data", pre.data_dir, "corpus directory")->required();
  preprocess->add_option("--out", pre.out_dir, "dataset output directory")->required();
  preprocess->add_option("--config", pre.config_path, "run config file");

  ggen::TrainOptions tr;
  CLI::App* train = app.add_subcommand("train", "train the gesture denoiser");
  train->add_option("--dataset", tr.dataset_dir, "preprocessed dataset directory")->required();
  train->add_option("--out", tr.checkpoint_out, "checkpoint output path")->required();
  train->add_option("--config", tr.config_path, "run config file (fresh runs)");
  train->add_option("--resume", tr.resume_path, "checkpoint to resume from");
  train->add_option("--steps", tr.steps, "override the configured step count");

  ggen::SampleOptions sa;
  CLI::App* sample = app.add_subcommand("sample", "generate gestures for a speech recording");
  sample->add_option("--checkpoint", sa.checkpoint, "trained checkpoint")->required();
  sample->add_option("--wav", sa.wav, "speech waveform")->required();
  sample->add_option("--textgrid", sa.textgrid, "word alignment TextGrid");
  sample->add_option("--out", sa.out_bvh, "output BVH path")->required();
  sample->add_option("--emotion", sa.emotion, "emotion label (default Neutral)");
  sample->add_option("--emotion-mix", sa.emotion_mix,
                     "second emotion blended through the guidance weight");
  sample->add_option("--segments", sa.segments, "segment count (default: cover the audio)");
  sample->add_option("--gamma", sa.gamma, "guidance weight (default: config value)");
  sample->add_option("--seed", sa.seed, "sampling seed (default: derived from config)");

  ggen::EvalOptions ev;
  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint against a dataset");
  eval->add_option("--checkpoint", ev.checkpoint, "trained checkpoint")->required();
  eval->add_option("--dataset", ev.dataset_dir, "preprocessed dataset directory")->required();
  eval->add_option("--report", ev.report_path, "write a JSON report here");
  eval->add_option("--max-windows", ev.max_windows, "cap the evaluated window count");
  eval->add_option("--seed", ev.seed, "sampling seed (default: derived from config)");

  app.add_subcommand("selfcheck", "run fast internal consistency checks");

  ggen::ConvertOptions cv;
  CLI::App* convert = app.add_subcommand("convert", "convert between BVH and feature tensors");
  convert->add_option("--to-features", cv.to_features, "input BVH to turn into features");
  convert->add_option("--to-motion", cv.to_motion, "input feature tensor to turn into BVH");
  convert->add_option("--like", cv.like_bvh, "skeleton donor BVH for --to-motion");
  convert->add_option("--out", cv.output, "output path");
  convert->add_option("--gaze", cv.gaze_joint, "gaze joint name (default Head)");
  convert->add_option("--fps", cv.fps, "frame rate for --to-motion (default: donor rate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are user input errors
  }

  const auto run = [&](auto&& fn) { return ggen::guard_command(fn, std::cerr); };
  if (preprocess->parsed()) return run([&] { return ggen::cmd_preprocess(pre, std::cout); });
  if (train->parsed()) return run([&] { return ggen::cmd_train(tr, std::cout); });
  if (sample->parsed()) return run([&] { return ggen::cmd_sample(sa, std::cout); });
  if (eval->parsed()) return run([&] { return ggen::cmd_eval(ev, std::cout); });
  if (convert->parsed()) return run([&] { return ggen::cmd_convert(cv, std::cout); });
  return run([&] { return ggen::cmd_selfcheck(std::cout); });
}
