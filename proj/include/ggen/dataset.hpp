#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "ggen/bvh.hpp"
#include "ggen/conditioning.hpp"
#include "ggen/config.hpp"
#include "ggen/diffusion.hpp"
#include "ggen/features.hpp"
#include "ggen/serialize.hpp"
#include "ggen/tensorio.hpp"

namespace ggen {

// ---------------------------------------------------------------------------
// Toy corpus synthesis: small deterministic clips (BVH + WAV + TextGrid) for
// smoke tests and the overfit check, shaped like real takes.
// ---------------------------------------------------------------------------

// Root, a spine chain ending in Head, and four limb chains that absorb the
// remaining joint budget. Leaves carry end sites.
inline Skeleton make_toy_skeleton(int joint_count) {
  if (joint_count < 1) throw input_error("toy skeleton: need at least one joint");
  Skeleton skel;
  const std::vector<Channel> root_channels = {Channel::Xposition, Channel::Yposition,
                                              Channel::Zposition, Channel::Zrotation,
                                              Channel::Yrotation, Channel::Xrotation};
  const std::vector<Channel> rot_channels = {Channel::Zrotation, Channel::Yrotation,
                                             Channel::Xrotation};
  auto add = [&](const std::string& name, int parent, const Vec3& offset) {
    Joint j;
    j.name = name;
    j.parent = parent;
    j.offset = offset;
    j.channels = parent < 0 ? root_channels : rot_channels;
    skel.joints.push_back(std::move(j));
    return static_cast<int>(skel.joints.size()) - 1;
  };

  const std::vector<std::string> spine = {"Hips", "Spine", "Spine1", "Spine2", "Neck"};
  const int core = std::min(joint_count, 6);
  int prev = add("Hips", -1, Vec3::Zero());
  for (int i = 1; i < core - 1; ++i) prev = add(spine[static_cast<std::size_t>(i)], prev, Vec3(0, 10, 0));
  if (joint_count > 1) add("Head", prev, Vec3(0, 10, 0));
  const int chest = std::max(0, core - 2);  // last spine joint before Head

  struct Limb {
    const char* base;
    int attach;
    Vec3 dir;
    int last;
  };
  std::vector<Limb> limbs = {{"LeftArm", chest, Vec3(6, 0, 0), -1},
                             {"RightArm", chest, Vec3(-6, 0, 0), -1},
                             {"LeftLeg", 0, Vec3(2, -8, 0), -1},
                             {"RightLeg", 0, Vec3(-2, -8, 0), -1}};
  const int extra = joint_count - static_cast<int>(skel.joints.size());
  for (int k = 0; k < extra; ++k) {
    Limb& limb = limbs[static_cast<std::size_t>(k % 4)];
    const int idx = k / 4;
    const std::string name = idx == 0 ? limb.base : limb.base + std::to_string(idx);
    const int parent = limb.last < 0 ? limb.attach : limb.last;
    limb.last = add(name, parent, idx == 0 ? limb.dir : Vec3(limb.dir.x() * 0.5, limb.dir.y() * 0.5, 0));
  }

  std::vector<int> child_count(skel.joints.size(), 0);
  for (const Joint& j : skel.joints)
    if (j.parent >= 0) ++child_count[static_cast<std::size_t>(j.parent)];
  for (std::size_t i = 0; i < skel.joints.size(); ++i) {
    if (child_count[i] == 0) {
      skel.joints[i].has_end_site = true;
      skel.joints[i].end_site = Vec3(0, 2, 0);
    }
  }
  return skel;
}

struct ToyCorpusSpec {
  int clips = 6;
  double seconds = 12.0;
  int joint_count = 75;
  int fps = 20;
  int sample_rate = 16000;
};

// Smooth sinusoidal joint angles, a two-tone amplitude-modulated waveform and
// a steady word grid. Everything is a pure function of the seed.
inline void synthesize_toy_corpus(const std::string& dir, const ToyCorpusSpec& spec,
                                  std::uint64_t seed) {
  if (spec.clips < 1 || spec.seconds <= 0.0) throw input_error("toy corpus: empty spec");
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Rng rng(seed);
  const Skeleton skel = make_toy_skeleton(spec.joint_count);
  const int channels = skel.channel_count();
  const int frames = static_cast<int>(std::lround(spec.seconds * spec.fps));
  const std::vector<std::string> vocab = {"the",  "hand",   "waves", "softly",
                                          "then", "rests",  "again", "slowly"};

  for (int c = 0; c < spec.clips; ++c) {
    char stem_buf[64];
    std::snprintf(stem_buf, sizeof(stem_buf), "clip%02d_%s", c,
                  emotion_labels()[static_cast<std::size_t>(c % 6)]);
    const std::string stem = stem_buf;

    MotionClip clip;
    clip.skeleton = skel;
    clip.frame_time = 1.0 / spec.fps;
    clip.frames.resize(frames, channels);
    std::vector<double> amp(static_cast<std::size_t>(channels)),
        freq(static_cast<std::size_t>(channels)), phase(static_cast<std::size_t>(channels));
    for (int ch = 0; ch < channels; ++ch) {
      const bool positional = ch < 3;  // root translation columns come first
      amp[static_cast<std::size_t>(ch)] = positional ? rng.uniform(1.0, 3.0) : rng.uniform(5.0, 15.0);
      freq[static_cast<std::size_t>(ch)] = rng.uniform(0.3, 1.0);
      phase[static_cast<std::size_t>(ch)] = rng.uniform(0.0, 2.0 * kPi);
    }
    for (int f = 0; f < frames; ++f) {
      const double t = static_cast<double>(f) / spec.fps;
      for (int ch = 0; ch < channels; ++ch)
        clip.frames(f, ch) = amp[static_cast<std::size_t>(ch)] *
                             std::sin(2.0 * kPi * freq[static_cast<std::size_t>(ch)] * t +
                                      phase[static_cast<std::size_t>(ch)]);
    }
    save_bvh((fs::path(dir) / (stem + ".bvh")).string(), clip);

    const double f0 = rng.uniform(180.0, 320.0);
    const double f1 = rng.uniform(400.0, 700.0);
    const int n = static_cast<int>(std::lround(spec.seconds * spec.sample_rate));
    std::vector<double> samples(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / spec.sample_rate;
      const double envelope = 0.6 + 0.4 * std::sin(2.0 * kPi * 0.4 * t);
      samples[static_cast<std::size_t>(i)] =
          envelope * (0.25 * std::sin(2.0 * kPi * f0 * t) + 0.15 * std::sin(2.0 * kPi * f1 * t));
    }
    save_wav_pcm16((fs::path(dir) / (stem + ".wav")).string(), samples, spec.sample_rate);

    std::vector<WordInterval> words;
    for (int k = 0;; ++k) {
      const double start = 0.05 + 0.5 * k;
      const double end = start + 0.4;
      if (end >= spec.seconds) break;
      words.push_back({start, end, vocab[static_cast<std::size_t>((c + k) % vocab.size())]});
    }
    save_textgrid((fs::path(dir) / (stem + ".TextGrid")).string(), words, 0.0, spec.seconds);
  }
}

// ---------------------------------------------------------------------------
// Corpus ingest: BVH/WAV/TextGrid triples to normalized training windows.
// ---------------------------------------------------------------------------

inline std::string emotion_from_stem(const std::string& stem) {
  const auto us = stem.find('_');
  if (us == std::string::npos || us + 1 >= stem.size())
    throw input_error("cannot infer emotion from stem '" + stem +
                      "'; expected <name>_<Emotion> naming");
  const auto next = stem.find('_', us + 1);
  const std::string label =
      next == std::string::npos ? stem.substr(us + 1) : stem.substr(us + 1, next - us - 1);
  if (emotion_index(label) < 0)
    throw input_error("stem '" + stem + "': " +
                      std::string("'") + label + "' is not a known emotion label");
  return label;
}

namespace detail {

inline bool same_structure(const Skeleton& a, const Skeleton& b) {
  if (a.joints.size() != b.joints.size()) return false;
  for (std::size_t i = 0; i < a.joints.size(); ++i) {
    if (a.joints[i].name != b.joints[i].name || a.joints[i].parent != b.joints[i].parent ||
        a.joints[i].channels != b.joints[i].channels)
      return false;
  }
  return true;
}

// Samples covering window w of the clip, zero-padded past the waveform end.
inline std::vector<double> window_samples(const std::vector<double>& samples, int window,
                                          int frames, int fps, int sample_rate) {
  const std::size_t span =
      static_cast<std::size_t>(std::lround(static_cast<double>(frames) * sample_rate / fps));
  const std::size_t begin = static_cast<std::size_t>(window) * span;
  std::vector<double> out(span, 0.0);
  for (std::size_t i = 0; i < span && begin + i < samples.size(); ++i)
    out[i] = samples[begin + i];
  return out;
}

inline std::unique_ptr<SpeechEmbedder> make_speech_embedder(const std::string& data_dir,
                                                            const std::string& stem,
                                                            const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path precomputed = fs::path(data_dir) / (stem + ".speech0.bin");
  if (fs::exists(precomputed))
    return std::make_unique<PrecomputedSpeechEmbedder>(data_dir, stem, cfg.speech_dim);
  return std::make_unique<MelProjectionEmbedder>(cfg.speech_dim, cfg.embed_seed);
}

inline std::unique_ptr<TextEmbedder> make_text_embedder(const std::string& data_dir,
                                                        const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path table = fs::path(data_dir) / "word_embeddings.txt";
  if (fs::exists(table))
    return std::make_unique<WordTableEmbedder>(table.string(), cfg.text_dim, cfg.embed_seed);
  return std::make_unique<HashedNgramEmbedder>(cfg.text_dim, cfg.embed_seed);
}

}  // namespace detail

struct IngestStats {
  int clips_used = 0;
  int clips_skipped = 0;
  int windows = 0;
};

inline std::vector<std::string> list_corpus_stems(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw input_error("not a directory: " + dir);
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".bvh")
      stems.push_back(entry.path().stem().string());
  std::sort(stems.begin(), stems.end());
  return stems;
}

// Two passes: fit the feature normalizer over every usable clip, then window,
// embed and write one tensor bundle per clip plus a manifest. Output bytes
// depend only on the inputs and the config, so re-ingest is idempotent.
inline IngestStats ingest_dataset(const std::string& data_dir, const std::string& out_dir,
                                  const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  cfg.validate();
  const int m = cfg.frames, n = cfg.seed_frames;
  const std::vector<std::string> stems = list_corpus_stems(data_dir);
  if (stems.empty()) throw input_error("no .bvh clips found in " + data_dir);

  struct ClipData {
    std::string stem, emotion;
    MotionClip clip;
    Mat features;
  };
  std::vector<ClipData> clips;
  Skeleton skeleton;
  IngestStats stats;
  Eigen::Index total_rows = 0;

  for (const std::string& stem : stems) {
    const fs::path bvh = fs::path(data_dir) / (stem + ".bvh");
    const fs::path wav = fs::path(data_dir) / (stem + ".wav");
    const fs::path grid = fs::path(data_dir) / (stem + ".TextGrid");
    if (!fs::exists(wav) || !fs::exists(grid)) {
      log << "warning: skipping " << stem << ": missing .wav or .TextGrid companion\n";
      ++stats.clips_skipped;
      continue;
    }
    ClipData cd;
    cd.stem = stem;
    cd.emotion = emotion_from_stem(stem);
    cd.clip = load_bvh(bvh.string());
    if (std::abs(cd.clip.fps() - cfg.fps) > 0.01)
      throw input_error(bvh.string() + ": clip rate " + std::to_string(cd.clip.fps()) +
                        " fps does not match configured " + std::to_string(cfg.fps));
    if (cd.clip.frame_count() < m + n) {
      log << "warning: skipping " << stem << ": " << cd.clip.frame_count()
          << " frames, need at least " << (m + n) << "\n";
      ++stats.clips_skipped;
      continue;
    }
    if (clips.empty())
      skeleton = cd.clip.skeleton;
    else if (!detail::same_structure(skeleton, cd.clip.skeleton))
      throw input_error(bvh.string() + ": skeleton differs from the first clip");
    cd.features = build_features(cd.clip, cfg.joint_count, cfg.gaze_joint);
    total_rows += cd.features.rows();
    clips.push_back(std::move(cd));
  }
  if (clips.empty()) throw input_error("no usable clips in " + data_dir);

  Mat all_rows(total_rows, cfg.feature_dim());
  Eigen::Index at = 0;
  for (const ClipData& cd : clips) {
    all_rows.middleRows(at, cd.features.rows()) = cd.features;
    at += cd.features.rows();
  }
  const Normalizer norm = Normalizer::fit(all_rows);

  fs::create_directories(out_dir);
  {
    std::ofstream nf(fs::path(out_dir) / "norm.bin", std::ios::binary);
    if (!nf) throw input_error("cannot write " + (fs::path(out_dir) / "norm.bin").string());
    write_tensor(nf, norm.mean.transpose(), Dtype::f64);
    write_tensor(nf, norm.std.transpose(), Dtype::f64);
  }

  const auto text_embedder = detail::make_text_embedder(data_dir, cfg);
  json clip_entries = json::array();
  for (const ClipData& cd : clips) {
    const auto speech_embedder = detail::make_speech_embedder(data_dir, cd.stem, cfg);
    WavData wav = load_wav((fs::path(data_dir) / (cd.stem + ".wav")).string());
    const int speech_rate = MelConfig{}.sample_rate;
    std::vector<double> samples =
        peak_normalize(resample(wav.samples, wav.sample_rate, speech_rate));
    const std::vector<WordInterval> words =
        load_textgrid_words((fs::path(data_dir) / (cd.stem + ".TextGrid")).string());
    const Vec emotion = encode_emotion(cd.emotion);

    const int windows = static_cast<int>(cd.features.rows()) / m;
    const Mat normalized = norm.normalize(cd.features);
    Mat x0(windows * m, cfg.feature_dim());
    Mat seeds(windows * n, cfg.feature_dim());
    Mat speech(windows * m, cfg.speech_dim);
    Mat text(windows * m, cfg.text_dim);
    Mat emotions(windows, 6);
    for (int w = 0; w < windows; ++w) {
      x0.middleRows(w * m, m) = normalized.middleRows(w * m, m);
      if (w == 0)
        seeds.middleRows(0, n).setZero();  // normalized-space data mean
      else
        seeds.middleRows(w * n, n) = normalized.middleRows(w * m - n, n);
      const std::vector<double> span =
          detail::window_samples(samples, w, m, cfg.fps, speech_rate);
      speech.middleRows(w * m, m) = speech_embedder->embed_segment(span, w, m);
      text.middleRows(w * m, m) =
          embed_text(words, static_cast<double>(w) * m / cfg.fps, m, cfg.fps, *text_embedder);
      emotions.row(w) = emotion.transpose();
    }

    const std::string file = cd.stem + ".data.bin";
    std::ofstream df(fs::path(out_dir) / file, std::ios::binary);
    if (!df) throw input_error("cannot write " + (fs::path(out_dir) / file).string());
    write_tensor(df, x0, Dtype::f64);
    write_tensor(df, seeds, Dtype::f64);
    write_tensor(df, speech, Dtype::f64);
    write_tensor(df, text, Dtype::f64);
    write_tensor(df, emotions, Dtype::f64);

    clip_entries.push_back({{"stem", cd.stem},
                            {"emotion", cd.emotion},
                            {"frames", cd.features.rows()},
                            {"windows", windows},
                            {"file", file}});
    ++stats.clips_used;
    stats.windows += windows;
  }

  json manifest;
  manifest["format"] = 1;
  manifest["config_hash"] = config_hash(cfg);
  manifest["fps"] = cfg.fps;
  manifest["joint_count"] = cfg.joint_count;
  manifest["feature_dim"] = cfg.feature_dim();
  manifest["frames"] = m;
  manifest["seed_frames"] = n;
  manifest["speech_dim"] = cfg.speech_dim;
  manifest["text_dim"] = cfg.text_dim;
  manifest["emotion_dim"] = 6;
  manifest["skeleton"] = skeleton_to_json(skeleton);
  manifest["clips"] = std::move(clip_entries);
  std::ofstream mf(fs::path(out_dir) / "manifest.json", std::ios::binary);
  if (!mf) throw input_error("cannot write " + (fs::path(out_dir) / "manifest.json").string());
  mf << manifest.dump(2) << "\n";
  return stats;
}

struct Dataset {
  int fps = 0, joint_count = 0, feature_dim = 0, frames = 0, seed_frames = 0;
  int speech_dim = 0, text_dim = 0;
  std::string config_hash;
  Skeleton skeleton;
  Normalizer normalizer;
  std::vector<TrainItem> items;
  std::vector<std::string> item_names;  // "<stem>#<window>"
};

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw input_error("cannot open dataset manifest: " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw input_error(manifest_path.string() + ": bad JSON: " + e.what());
  }
  if (!manifest.contains("format") || manifest["format"].get<int>() != 1)
    throw input_error(manifest_path.string() + ": unsupported dataset format");

  Dataset ds;
  ds.fps = manifest.at("fps").get<int>();
  ds.joint_count = manifest.at("joint_count").get<int>();
  ds.feature_dim = manifest.at("feature_dim").get<int>();
  ds.frames = manifest.at("frames").get<int>();
  ds.seed_frames = manifest.at("seed_frames").get<int>();
  ds.speech_dim = manifest.at("speech_dim").get<int>();
  ds.text_dim = manifest.at("text_dim").get<int>();
  ds.config_hash = manifest.at("config_hash").get<std::string>();
  ds.skeleton = skeleton_from_json(manifest.at("skeleton"));

  {
    std::ifstream nf(fs::path(dir) / "norm.bin", std::ios::binary);
    if (!nf) throw input_error("cannot open " + (fs::path(dir) / "norm.bin").string());
    ds.normalizer.mean = read_tensor(nf).data.transpose();
    ds.normalizer.std = read_tensor(nf).data.transpose();
  }

  const int m = ds.frames, n = ds.seed_frames;
  for (const json& entry : manifest.at("clips")) {
    const std::string stem = entry.at("stem").get<std::string>();
    const int windows = entry.at("windows").get<int>();
    const fs::path file = fs::path(dir) / entry.at("file").get<std::string>();
    std::ifstream df(file, std::ios::binary);
    if (!df) throw input_error("cannot open " + file.string());
    Mat x0, seeds, speech, text, emotions;
    try {
      x0 = read_tensor(df).data;
      seeds = read_tensor(df).data;
      speech = read_tensor(df).data;
      text = read_tensor(df).data;
      emotions = read_tensor(df).data;
    } catch (const input_error& e) {
      throw input_error(file.string() + ": " + e.what());
    }
    if (x0.rows() != windows * m || seeds.rows() != windows * n ||
        speech.rows() != windows * m || text.rows() != windows * m ||
        emotions.rows() != windows)
      throw input_error(file.string() + ": tensor rows disagree with manifest window count");
    if (x0.cols() != ds.feature_dim || speech.cols() != ds.speech_dim ||
        text.cols() != ds.text_dim)
      throw input_error(file.string() + ": tensor widths disagree with manifest");
    for (int w = 0; w < windows; ++w) {
      TrainItem item;
      item.x0 = x0.middleRows(w * m, m);
      item.cond.seed = seeds.middleRows(w * n, n);
      item.cond.speech = speech.middleRows(w * m, m);
      item.cond.text = text.middleRows(w * m, m);
      item.cond.emotion = emotions.row(w).transpose();
      ds.items.push_back(std::move(item));
      ds.item_names.push_back(stem + "#" + std::to_string(w));
    }
  }
  if (ds.items.empty()) throw input_error(dir + ": dataset has no windows");
  return ds;
}

// ---------------------------------------------------------------------------
// Inference-time conditions from a WAV (+ optional TextGrid).
// ---------------------------------------------------------------------------

// Splits the audio into generation windows and builds unmasked bundles; seeds
// are zero placeholders that the long-form sampler overwrites. segment_count
// of zero means "cover the whole waveform".
inline std::vector<ConditionBundle> conditions_from_speech(const std::string& wav_path,
                                                           const std::string& textgrid_path,
                                                           const std::string& emotion_label,
                                                           int segment_count,
                                                           const RunConfig& cfg) {
  const Vec emotion = encode_emotion(emotion_label);
  WavData wav = load_wav(wav_path);
  const int speech_rate = MelConfig{}.sample_rate;
  std::vector<double> samples =
      peak_normalize(resample(wav.samples, wav.sample_rate, speech_rate));
  std::vector<WordInterval> words;
  if (!textgrid_path.empty()) words = load_textgrid_words(textgrid_path);

  const int m = cfg.frames;
  const double window_seconds = static_cast<double>(m) / cfg.fps;
  if (segment_count <= 0) {
    const double seconds = static_cast<double>(samples.size()) / speech_rate;
    segment_count = std::max(1, static_cast<int>(std::ceil(seconds / window_seconds)));
  }

  MelProjectionEmbedder speech_embedder(cfg.speech_dim, cfg.embed_seed);
  HashedNgramEmbedder text_embedder(cfg.text_dim, cfg.embed_seed);
  std::vector<ConditionBundle> bundles;
  for (int w = 0; w < segment_count; ++w) {
    ConditionBundle cond;
    cond.seed = Mat::Zero(cfg.seed_frames, cfg.feature_dim());
    cond.emotion = emotion;
    const std::vector<double> span =
        detail::window_samples(samples, w, m, cfg.fps, speech_rate);
    cond.speech = speech_embedder.embed_segment(span, w, m);
    cond.text = embed_text(words, static_cast<double>(w) * m / cfg.fps, m, cfg.fps, text_embedder);
    bundles.push_back(std::move(cond));
  }
  return bundles;
}

}  // namespace ggen
