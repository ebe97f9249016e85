#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ggen/common.hpp"
#include "ggen/crc32.hpp"
#include "ggen/denoiser.hpp"
#include "ggen/diffusion.hpp"
#include "ggen/features.hpp"

namespace ggen {

// One flat bag of knobs for the whole pipeline. Defaults are the reference
// training setup; toy runs override the scale fields.
struct RunConfig {
  // data
  int fps = 20;
  int joint_count = 75;
  std::string gaze_joint = "Head";
  // window geometry
  int frames = 80;
  int seed_frames = 8;
  // condition embedders
  int speech_dim = 1024;
  int text_dim = 300;
  std::uint64_t embed_seed = 2024;
  // denoiser
  int hidden = 256;
  int heads = 8;
  int layers = 8;
  int ffn_mult = 4;
  int local_window = 10;
  // diffusion
  int timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double huber_delta = 1.0;
  // training
  double lr = 3e-5;
  int batch_size = 640;
  int steps = 100000;
  double mask_prob = 0.10;
  std::uint64_t seed = 1;
  int threads = 1;
  int checkpoint_every = 5000;
  int log_every = 100;
  // sampling
  double gamma = 1.0;
  std::string sampler = "split";  // "split" or "resample"

  int feature_dim() const { return FeatureLayout{joint_count}.width(); }

  void validate() const {
    if (fps < 1) throw input_error("config: fps must be positive");
    if (joint_count < 1) throw input_error("config: joint_count must be positive");
    if (frames < 2) throw input_error("config: frames must be at least 2");
    if (seed_frames < 1 || seed_frames >= frames)
      throw input_error("config: seed_frames must be in [1, frames)");
    if (speech_dim < 1 || text_dim < 1) throw input_error("config: embedding dims must be positive");
    if (hidden % 4 != 0) throw input_error("config: hidden must be divisible by 4");
    if (heads < 1 || hidden % heads != 0)
      throw input_error("config: hidden must be divisible by heads");
    if (layers < 1 || ffn_mult < 1) throw input_error("config: layers and ffn_mult must be positive");
    if (local_window < 0) throw input_error("config: local_window must be non-negative");
    if (timesteps < 1) throw input_error("config: timesteps must be positive");
    if (beta_start <= 0.0 || beta_end >= 1.0 || beta_end < beta_start)
      throw input_error("config: betas must satisfy 0 < beta_start <= beta_end < 1");
    if (huber_delta <= 0.0) throw input_error("config: huber_delta must be positive");
    if (lr <= 0.0) throw input_error("config: lr must be positive");
    if (batch_size < 1 || steps < 0) throw input_error("config: bad batch_size or steps");
    if (mask_prob < 0.0 || mask_prob > 1.0)
      throw input_error("config: mask_prob must be in [0, 1]");
    if (threads < 1) throw input_error("config: threads must be positive");
    if (checkpoint_every < 1 || log_every < 1)
      throw input_error("config: intervals must be positive");
    if (sampler != "split" && sampler != "resample")
      throw input_error("config: sampler must be \"split\" or \"resample\"");
  }

  DenoiserConfig denoiser() const {
    DenoiserConfig d;
    d.feature_dim = feature_dim();
    d.frames = frames;
    d.seed_frames = seed_frames;
    d.speech_dim = speech_dim;
    d.text_dim = text_dim;
    d.hidden = hidden;
    d.heads = heads;
    d.layers = layers;
    d.ffn_mult = ffn_mult;
    d.local_window = local_window;
    return d;
  }
  NoiseSchedule schedule() const { return make_noise_schedule(timesteps, beta_start, beta_end); }
  TrainHyper hyper() const {
    TrainHyper h;
    h.lr = lr;
    h.gamma = gamma;
    h.mask_prob = mask_prob;
    h.huber_delta = huber_delta;
    h.threads = threads;
    return h;
  }
  SamplingMode sampling_mode() const {
    return sampler == "resample" ? SamplingMode::Resample : SamplingMode::VarianceSplit;
  }
};

namespace detail {

inline std::string trim_ws(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline long long parse_config_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw input_error("config: key '" + key + "' needs an integer, got '" + value + "'");
  return v;
}

inline std::uint64_t parse_config_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || value.find('-') != std::string::npos)
    throw input_error("config: key '" + key + "' needs a non-negative integer, got '" + value +
                      "'");
  return v;
}

inline double parse_config_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw input_error("config: key '" + key + "' needs a number, got '" + value + "'");
  return v;
}

inline std::string parse_config_string(const std::string& key, const std::string& value) {
  if (value.size() < 2 || value.front() != '"' || value.back() != '"')
    throw input_error("config: key '" + key + "' needs a double-quoted string, got '" + value +
                      "'");
  return value.substr(1, value.size() - 2);
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_config_double;
  using detail::parse_config_int;
  using detail::parse_config_string;
  using detail::parse_config_u64;
  const auto as_int = [&](int& field) { field = static_cast<int>(parse_config_int(key, value)); };
  if (key == "fps") as_int(cfg.fps);
  else if (key == "joint_count") as_int(cfg.joint_count);
  else if (key == "gaze_joint") cfg.gaze_joint = parse_config_string(key, value);
  else if (key == "frames") as_int(cfg.frames);
  else if (key == "seed_frames") as_int(cfg.seed_frames);
  else if (key == "speech_dim") as_int(cfg.speech_dim);
  else if (key == "text_dim") as_int(cfg.text_dim);
  else if (key == "embed_seed") cfg.embed_seed = parse_config_u64(key, value);
  else if (key == "hidden") as_int(cfg.hidden);
  else if (key == "heads") as_int(cfg.heads);
  else if (key == "layers") as_int(cfg.layers);
  else if (key == "ffn_mult") as_int(cfg.ffn_mult);
  else if (key == "local_window") as_int(cfg.local_window);
  else if (key == "timesteps") as_int(cfg.timesteps);
  else if (key == "beta_start") cfg.beta_start = parse_config_double(key, value);
  else if (key == "beta_end") cfg.beta_end = parse_config_double(key, value);
  else if (key == "huber_delta") cfg.huber_delta = parse_config_double(key, value);
  else if (key == "lr") cfg.lr = parse_config_double(key, value);
  else if (key == "batch_size") as_int(cfg.batch_size);
  else if (key == "steps") as_int(cfg.steps);
  else if (key == "mask_prob") cfg.mask_prob = parse_config_double(key, value);
  else if (key == "seed") cfg.seed = parse_config_u64(key, value);
  else if (key == "threads") as_int(cfg.threads);
  else if (key == "checkpoint_every") as_int(cfg.checkpoint_every);
  else if (key == "log_every") as_int(cfg.log_every);
  else if (key == "gamma") cfg.gamma = parse_config_double(key, value);
  else if (key == "sampler") cfg.sampler = parse_config_string(key, value);
  else throw input_error("config: unknown key '" + key + "'");
}

// key = value lines; # starts a comment; strings are double-quoted. Unknown
// keys are errors so typos cannot silently fall back to defaults.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = detail::trim_ws(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw input_error("config: line " + std::to_string(lineno) + " is not 'key = value'");
    const std::string key = detail::trim_ws(s.substr(0, eq));
    std::string value = detail::trim_ws(s.substr(eq + 1));
    if (!value.empty() && value[0] == '"') {
      const auto close = value.find('"', 1);
      if (close == std::string::npos)
        throw input_error("config: line " + std::to_string(lineno) + " has an unterminated string");
      const std::string rest = detail::trim_ws(value.substr(close + 1));
      if (!rest.empty() && rest[0] != '#')
        throw input_error("config: line " + std::to_string(lineno) + " has trailing characters");
      value = value.substr(0, close + 1);
    } else {
      const auto hash = value.find('#');
      if (hash != std::string::npos) value = detail::trim_ws(value.substr(0, hash));
    }
    if (key.empty() || value.empty())
      throw input_error("config: line " + std::to_string(lineno) + " is missing a key or value");
    apply_config_entry(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const input_error& e) {
    throw input_error(path + ": " + e.what());
  }
}

// Canonical text form: fixed key order, full-precision numbers. Also the
// basis of the config hash, so equal configs hash equally.
inline std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "fps = " << cfg.fps << "\n";
  out << "joint_count = " << cfg.joint_count << "\n";
  out << "gaze_joint = \"" << cfg.gaze_joint << "\"\n";
  out << "frames = " << cfg.frames << "\n";
  out << "seed_frames = " << cfg.seed_frames << "\n";
  out << "speech_dim = " << cfg.speech_dim << "\n";
  out << "text_dim = " << cfg.text_dim << "\n";
  out << "embed_seed = " << cfg.embed_seed << "\n";
  out << "hidden = " << cfg.hidden << "\n";
  out << "heads = " << cfg.heads << "\n";
  out << "layers = " << cfg.layers << "\n";
  out << "ffn_mult = " << cfg.ffn_mult << "\n";
  out << "local_window = " << cfg.local_window << "\n";
  out << "timesteps = " << cfg.timesteps << "\n";
  out << "beta_start = " << cfg.beta_start << "\n";
  out << "beta_end = " << cfg.beta_end << "\n";
  out << "huber_delta = " << cfg.huber_delta << "\n";
  out << "lr = " << cfg.lr << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "steps = " << cfg.steps << "\n";
  out << "mask_prob = " << cfg.mask_prob << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "threads = " << cfg.threads << "\n";
  out << "checkpoint_every = " << cfg.checkpoint_every << "\n";
  out << "log_every = " << cfg.log_every << "\n";
  out << "gamma = " << cfg.gamma << "\n";
  out << "sampler = \"" << cfg.sampler << "\"\n";
  return out.str();
}

inline std::string config_hash(const RunConfig& cfg) {
  return crc32_hex(crc32(serialize_config(cfg)));
}

}  // namespace ggen
