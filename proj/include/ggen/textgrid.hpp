#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ggen/common.hpp"

namespace ggen {

struct WordInterval {
  double start = 0;
  double end = 0;
  std::string text;
};

struct TextGridTier {
  std::string name;
  std::vector<WordInterval> intervals;
};

struct TextGrid {
  double xmin = 0, xmax = 0;
  std::vector<TextGridTier> tiers;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Praat escapes an embedded quote as "".
inline std::string unquote(const std::string& s) {
  const auto b = s.find('"');
  const auto e = s.rfind('"');
  if (b == std::string::npos || e <= b) return trim(s);
  std::string inner = s.substr(b + 1, e - b - 1);
  std::string out;
  out.reserve(inner.size());
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner[i] == '"' && i + 1 < inner.size() && inner[i + 1] == '"') ++i;
    out.push_back(inner[i]);
  }
  return out;
}

inline double number_after_equals(const std::string& line, const char* what) {
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw input_error(std::string("textgrid: expected '") + what + " = <number>', got '" + line + "'");
  const std::string v = trim(line.substr(eq + 1));
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str())
    throw input_error(std::string("textgrid: non-numeric value for ") + what + ": '" + v + "'");
  return x;
}

inline bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

inline TextGrid parse_long(const std::vector<std::string>& lines) {
  TextGrid tg;
  TextGridTier* tier = nullptr;
  WordInterval current;
  int pending = 0;  // 1 after "intervals [k]:", counts xmin/xmax/text fields seen
  bool is_interval_tier = true;
  for (const std::string& raw : lines) {
    const std::string line = trim(raw);
    if (starts_with(line, "class")) {
      is_interval_tier = unquote(line) == "IntervalTier";
      if (is_interval_tier) {
        tg.tiers.emplace_back();
        tier = &tg.tiers.back();
      } else {
        tier = nullptr;  // point tiers are skipped
      }
      pending = 0;
    } else if (starts_with(line, "name") && tier && tier->name.empty()) {
      tier->name = unquote(line);
    } else if (starts_with(line, "intervals [")) {
      pending = 1;
      current = {};
    } else if (pending == 1 && starts_with(line, "xmin")) {
      current.start = number_after_equals(line, "xmin");
      pending = 2;
    } else if (pending == 2 && starts_with(line, "xmax")) {
      current.end = number_after_equals(line, "xmax");
      pending = 3;
    } else if (pending == 3 && starts_with(line, "text")) {
      current.text = unquote(line.substr(line.find('=') + 1));
      if (tier) tier->intervals.push_back(current);
      pending = 0;
    } else if (starts_with(line, "xmin") && tg.tiers.empty() && tg.xmax == 0) {
      tg.xmin = number_after_equals(line, "xmin");
    } else if (starts_with(line, "xmax") && tg.tiers.empty() && tg.xmax == 0) {
      tg.xmax = number_after_equals(line, "xmax");
    }
  }
  return tg;
}

inline TextGrid parse_short(const std::vector<std::string>& lines) {
  // Sequential field list: xmin, xmax, <exists>, size, then per tier
  // class, name, xmin, xmax, count, then count * (xmin, xmax, text).
  std::size_t i = 2;  // skip the two header lines
  auto next = [&]() -> std::string {
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
    if (i >= lines.size()) throw input_error("textgrid: truncated short-format file");
    return trim(lines[i++]);
  };
  auto next_number = [&]() {
    const std::string s = next();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw input_error("textgrid: expected a number, got '" + s + "'");
    return v;
  };

  TextGrid tg;
  tg.xmin = next_number();
  tg.xmax = next_number();
  const std::string exists = next();
  if (exists.find("exists") == std::string::npos)
    throw input_error("textgrid: malformed short format, expected <exists>, got '" + exists + "'");
  const int tier_count = static_cast<int>(next_number());
  for (int t = 0; t < tier_count; ++t) {
    const std::string klass = unquote(next());
    TextGridTier tier;
    tier.name = unquote(next());
    next_number();  // tier xmin
    next_number();  // tier xmax
    const int count = static_cast<int>(next_number());
    if (klass == "IntervalTier") {
      for (int k = 0; k < count; ++k) {
        WordInterval w;
        w.start = next_number();
        w.end = next_number();
        w.text = unquote(next());
        tier.intervals.push_back(w);
      }
      tg.tiers.push_back(std::move(tier));
    } else {
      for (int k = 0; k < count; ++k) {
        next_number();  // point time
        next();         // mark
      }
    }
  }
  return tg;
}

}  // namespace detail

inline TextGrid parse_textgrid(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.empty() || lines[0].find("ooTextFile") == std::string::npos)
    throw input_error("textgrid: missing ooTextFile header");
  if (lines.size() < 2 || lines[1].find("TextGrid") == std::string::npos)
    throw input_error("textgrid: not a TextGrid object");
  for (const std::string& l : lines)
    if (l.find("item [") != std::string::npos) return detail::parse_long(lines);
  return detail::parse_short(lines);
}

// The "words" tier with empty labels dropped and timing validated.
inline std::vector<WordInterval> words_from_textgrid(const TextGrid& tg) {
  const TextGridTier* words = nullptr;
  for (const auto& tier : tg.tiers)
    if (tier.name == "words") words = &tier;
  if (!words) throw input_error("textgrid: no tier named 'words'");

  std::vector<WordInterval> out;
  for (const auto& w : words->intervals)
    if (!detail::trim(w.text).empty()) out.push_back(w);

  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(out[k].start >= 0) || !(out[k].end > out[k].start))
      throw input_error("textgrid: interval " + std::to_string(k) +
                        " has a non-positive span [" + std::to_string(out[k].start) + ", " +
                        std::to_string(out[k].end) + ")");
    if (k > 0 && out[k].start < out[k - 1].end - 1e-9)
      throw input_error("textgrid: intervals " + std::to_string(k - 1) + " and " +
                        std::to_string(k) + " overlap");
  }
  return out;
}

inline std::vector<WordInterval> load_textgrid_words(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open textgrid file: " + path);
  try {
    return words_from_textgrid(parse_textgrid(f));
  } catch (const input_error& e) {
    throw input_error(path + ": " + e.what());
  }
}

// Long-format writer with a single "words" tier.
inline void write_textgrid(std::ostream& out, const std::vector<WordInterval>& words,
                           double xmin, double xmax) {
  out << "File type = \"ooTextFile\"\n";
  out << "Object class = \"TextGrid\"\n\n";
  out << "xmin = " << xmin << "\n";
  out << "xmax = " << xmax << "\n";
  out << "tiers? <exists>\n";
  out << "size = 1\n";
  out << "item []:\n";
  out << "    item [1]:\n";
  out << "        class = \"IntervalTier\"\n";
  out << "        name = \"words\"\n";
  out << "        xmin = " << xmin << "\n";
  out << "        xmax = " << xmax << "\n";
  out << "        intervals: size = " << words.size() << "\n";
  for (std::size_t k = 0; k < words.size(); ++k) {
    out << "        intervals [" << (k + 1) << "]:\n";
    out << "            xmin = " << words[k].start << "\n";
    out << "            xmax = " << words[k].end << "\n";
    out << "            text = \"" << words[k].text << "\"\n";
  }
}

inline void save_textgrid(const std::string& path, const std::vector<WordInterval>& words,
                          double xmin, double xmax) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot write textgrid file: " + path);
  write_textgrid(f, words, xmin, xmax);
}

}  // namespace ggen
