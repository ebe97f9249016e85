#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ggen/audio.hpp"
#include "ggen/common.hpp"
#include "ggen/rng.hpp"
#include "ggen/tensorio.hpp"
#include "ggen/textgrid.hpp"

namespace ggen {

inline const std::array<const char*, 6>& emotion_labels() {
  static const std::array<const char*, 6> labels = {"Neutral", "Sad", "Happy",
                                                    "Relaxed", "Old", "Angry"};
  return labels;
}

inline int emotion_index(const std::string& label) {
  const auto& labels = emotion_labels();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (label == labels[i]) return static_cast<int>(i);
  return -1;
}

inline Vec encode_emotion(const std::string& label) {
  const int idx = emotion_index(label);
  if (idx < 0) {
    std::string valid;
    for (const char* l : emotion_labels()) {
      if (!valid.empty()) valid += ", ";
      valid += l;
    }
    throw input_error("unknown emotion '" + label + "'; valid labels: " + valid);
  }
  Vec v = Vec::Zero(6);
  v[idx] = 1.0;
  return v;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t seed = 0) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Linear interpolation of rows onto a new row count, endpoints preserved.
inline Mat interpolate_rows(const Mat& in, Eigen::Index out_rows) {
  if (in.rows() == 0) throw input_error("interpolate_rows: empty input");
  if (out_rows < 1) throw input_error("interpolate_rows: bad target row count");
  if (in.rows() == out_rows) return in;
  Mat out(out_rows, in.cols());
  if (in.rows() == 1) {
    out.rowwise() = in.row(0);
    return out;
  }
  const double scale =
      static_cast<double>(in.rows() - 1) / static_cast<double>(std::max<Eigen::Index>(out_rows - 1, 1));
  for (Eigen::Index i = 0; i < out_rows; ++i) {
    const double t = out_rows == 1 ? 0.0 : static_cast<double>(i) * scale;
    const auto lo = static_cast<Eigen::Index>(std::floor(t));
    const auto hi = std::min(lo + 1, in.rows() - 1);
    const double frac = t - static_cast<double>(lo);
    out.row(i) = (1.0 - frac) * in.row(lo) + frac * in.row(hi);
  }
  return out;
}

// Per-segment speech embedding source. `segment_index` identifies the
// window within the clip for providers backed by precomputed files.
struct SpeechEmbedder {
  virtual ~SpeechEmbedder() = default;
  virtual int dim() const = 0;
  virtual Mat embed_segment(const std::vector<double>& samples, int segment_index,
                            int out_frames) = 0;
};

// Baseline on-the-fly embedding: log-mel spectrogram followed by a fixed
// seeded random projection up to the working width. Stands in for a learned
// acoustic encoder while keeping every value deterministic.
class MelProjectionEmbedder : public SpeechEmbedder {
 public:
  MelProjectionEmbedder(int out_dim, std::uint64_t seed, MelConfig mel = {})
      : out_dim_(out_dim), mel_(mel) {
    Rng rng(seed);
    projection_ = rng.normal_matrix(mel_.bins, out_dim_) / std::sqrt(static_cast<double>(mel_.bins));
  }

  int dim() const override { return out_dim_; }

  Mat embed_segment(const std::vector<double>& samples, int, int out_frames) override {
    const Mat mel = log_mel_spectrogram(samples, mel_);
    if (mel.rows() == 0) throw input_error("speech segment shorter than one analysis hop");
    return interpolate_rows(mel, out_frames) * projection_;
  }

 private:
  int out_dim_;
  MelConfig mel_;
  Mat projection_;
};

// Reads per-segment tensors "<stem>.speech<k>.bin" produced offline. Rows
// are interpolated onto the frame grid when the stored rate differs.
class PrecomputedSpeechEmbedder : public SpeechEmbedder {
 public:
  PrecomputedSpeechEmbedder(std::string directory, std::string stem, int expect_dim)
      : dir_(std::move(directory)), stem_(std::move(stem)), dim_(expect_dim) {}

  int dim() const override { return dim_; }

  Mat embed_segment(const std::vector<double>&, int segment_index, int out_frames) override {
    const std::string path = dir_ + "/" + stem_ + ".speech" + std::to_string(segment_index) + ".bin";
    const TensorRecord rec = load_tensor(path);
    if (rec.dims.size() != 2 || static_cast<int>(rec.dims[1]) != dim_)
      throw input_error(path + ": precomputed embedding width " +
                        std::to_string(rec.dims.size() == 2 ? rec.dims[1] : 0) +
                        " does not match expected " + std::to_string(dim_));
    if (rec.data.rows() < 1) throw input_error(path + ": empty embedding");
    return interpolate_rows(rec.data, out_frames);
  }

 private:
  std::string dir_, stem_;
  int dim_;
};

struct TextEmbedder {
  virtual ~TextEmbedder() = default;
  virtual int dim() const = 0;
  virtual Vec embed_word(const std::string& word) = 0;
};

// Hashed character n-grams (3..6) over the boundary-marked lowercase word,
// signed-bucket accumulation, unit normalized. OOV-free by construction.
class HashedNgramEmbedder : public TextEmbedder {
 public:
  explicit HashedNgramEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  int dim() const override { return dim_; }

  Vec embed_word(const std::string& word) override {
    std::string w = "<";
    for (char c : word) w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    w.push_back('>');
    Vec v = Vec::Zero(dim_);
    for (std::size_t n = 3; n <= 6; ++n) {
      if (w.size() < n) break;
      for (std::size_t i = 0; i + n <= w.size(); ++i) {
        const std::uint64_t h = fnv1a64(w.substr(i, n), seed_);
        const auto idx = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
        v[idx] += (h >> 63) ? -1.0 : 1.0;
      }
    }
    const double norm = v.norm();
    if (norm > 0) v /= norm;
    return v;
  }

 private:
  int dim_;
  std::uint64_t seed_;
};

// Word-vector table in "word v1 .. vN" text format; unknown words fall back
// to the hashed embedding so the output is always defined.
class WordTableEmbedder : public TextEmbedder {
 public:
  WordTableEmbedder(const std::string& path, int dim, std::uint64_t fallback_seed)
      : dim_(dim), fallback_(dim, fallback_seed) {
    std::ifstream f(path);
    if (!f) throw input_error("cannot open word table: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream is(line);
      std::string word;
      is >> word;
      Vec v(dim_);
      for (int i = 0; i < dim_; ++i)
        if (!(is >> v[i]))
          throw input_error(path + ":" + std::to_string(line_no) + ": row for '" + word +
                            "' has fewer than " + std::to_string(dim_) + " values");
      double extra;
      if (is >> extra)
        throw input_error(path + ":" + std::to_string(line_no) + ": row for '" + word +
                          "' has more than " + std::to_string(dim_) + " values");
      table_[word] = std::move(v);
    }
  }

  int dim() const override { return dim_; }

  Vec embed_word(const std::string& word) override {
    const auto it = table_.find(word);
    if (it != table_.end()) return it->second;
    return fallback_.embed_word(word);
  }

 private:
  int dim_;
  std::map<std::string, Vec> table_;
  HashedNgramEmbedder fallback_;
};

// Frame-aligned text matrix for one window: frame f (at segment_start +
// f/fps seconds) takes the vector of the word whose interval contains that
// time, zeros when no word is active.
inline Mat embed_text(const std::vector<WordInterval>& words, double segment_start, int frames,
                      double fps, TextEmbedder& embedder) {
  Mat out = Mat::Zero(frames, embedder.dim());
  std::map<std::string, Vec> cache;
  for (int f = 0; f < frames; ++f) {
    const double t = segment_start + f / fps;
    for (const auto& w : words) {
      if (t >= w.start && t < w.end) {
        auto it = cache.find(w.text);
        if (it == cache.end()) it = cache.emplace(w.text, embedder.embed_word(w.text)).first;
        out.row(f) = it->second.transpose();
        break;
      }
    }
  }
  return out;
}

// Everything the denoiser is conditioned on for one window. The mask flags
// zero the seed and emotion inputs at projection time, which is how the
// unconditional branch of the guidance pair is formed.
struct ConditionBundle {
  Mat seed;     // seed_frames x feature_dim, normalized
  Vec emotion;  // 6
  Mat speech;   // frames x speech_dim
  Mat text;     // frames x text_dim
  bool seed_masked = false;
  bool emotion_masked = false;
};

inline ConditionBundle unconditional_variant(const ConditionBundle& c) {
  ConditionBundle u = c;
  u.seed_masked = true;
  u.emotion_masked = true;
  return u;
}

}  // namespace ggen
