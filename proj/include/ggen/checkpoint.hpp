#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ggen/config.hpp"
#include "ggen/diffusion.hpp"
#include "ggen/nn.hpp"
#include "ggen/serialize.hpp"
#include "ggen/tensorio.hpp"

namespace ggen {

// Everything needed to resume a run exactly: parameters, optimizer moments,
// the feature normalizer, the step counter, and the training Rng state.
struct Checkpoint {
  RunConfig config;
  Skeleton skeleton;
  Normalizer normalizer;
  ParamStore params;
  AdamState adam;
  std::int64_t step = 0;
  std::string rng_state;
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in, const char* what) {
  char b[8];
  in.read(b, 8);
  if (!in) throw input_error(std::string("checkpoint: truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

}  // namespace detail

// Layout: "GGCP" magic, format version, length-prefixed JSON header, then one
// framed tensor per manifest entry in header order. Each tensor frame checks
// its own payload, so corruption is caught on load.
inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  std::vector<std::pair<std::string, const Mat*>> tensors;
  tensors.emplace_back("norm.mean", nullptr);
  tensors.emplace_back("norm.std", nullptr);
  for (const auto& [name, m] : ck.params.tensors) tensors.emplace_back("param." + name, &m);
  for (const auto& [name, m] : ck.adam.m.tensors) tensors.emplace_back("adam.m." + name, &m);
  for (const auto& [name, m] : ck.adam.v.tensors) tensors.emplace_back("adam.v." + name, &m);

  json header;
  header["format"] = 1;
  header["step"] = ck.step;
  header["adam_step"] = ck.adam.step;
  header["rng_state"] = ck.rng_state;
  header["config"] = serialize_config(ck.config);
  header["skeleton"] = skeleton_to_json(ck.skeleton);
  json manifest = json::array();
  for (const auto& [name, m] : tensors) manifest.push_back(name);
  header["tensors"] = std::move(manifest);
  const std::string header_text = header.dump();

  out.write("GGCP", 4);
  detail::put_u32(out, 1);
  detail::put_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  const Mat mean = ck.normalizer.mean.transpose();
  const Mat stdv = ck.normalizer.std.transpose();
  write_tensor(out, mean, Dtype::f64);
  write_tensor(out, stdv, Dtype::f64);
  for (const auto& [name, m] : tensors)
    if (m != nullptr) write_tensor(out, *m, Dtype::f64);
  if (!out) throw input_error("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "GGCP")
    throw input_error("checkpoint: bad magic, not a checkpoint file");
  const std::uint32_t version = detail::get_u32(in, "checkpoint version");
  if (version != 1)
    throw input_error("checkpoint: unsupported format version " + std::to_string(version));
  const std::uint64_t header_len = detail::get_u64(in, "header length");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw input_error("checkpoint: truncated header");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw input_error(std::string("checkpoint: bad header JSON: ") + e.what());
  }

  Checkpoint ck;
  ck.step = header.at("step").get<std::int64_t>();
  ck.adam.step = header.at("adam_step").get<std::int64_t>();
  ck.rng_state = header.at("rng_state").get<std::string>();
  ck.config = parse_config(header.at("config").get<std::string>());
  ck.skeleton = skeleton_from_json(header.at("skeleton"));

  for (const json& entry : header.at("tensors")) {
    const std::string name = entry.get<std::string>();
    TensorRecord rec;
    try {
      rec = read_tensor(in);
    } catch (const input_error& e) {
      throw input_error("checkpoint: tensor '" + name + "': " + e.what());
    }
    if (name == "norm.mean")
      ck.normalizer.mean = rec.data.transpose();
    else if (name == "norm.std")
      ck.normalizer.std = rec.data.transpose();
    else if (name.rfind("param.", 0) == 0)
      ck.params.tensors[name.substr(6)] = rec.data;
    else if (name.rfind("adam.m.", 0) == 0)
      ck.adam.m.tensors[name.substr(7)] = rec.data;
    else if (name.rfind("adam.v.", 0) == 0)
      ck.adam.v.tensors[name.substr(7)] = rec.data;
    else
      throw input_error("checkpoint: unknown tensor '" + name + "'");
  }
  if (ck.normalizer.mean.size() == 0 || ck.normalizer.std.size() == 0)
    throw input_error("checkpoint: missing normalizer tensors");
  if (ck.params.tensors.empty()) throw input_error("checkpoint: no parameters");
  if (ck.adam.m.tensors.size() != ck.params.tensors.size() ||
      ck.adam.v.tensors.size() != ck.params.tensors.size())
    throw input_error("checkpoint: optimizer state does not match parameters");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open checkpoint for writing: " + path);
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open checkpoint: " + path);
  try {
    return read_checkpoint(in);
  } catch (const input_error& e) {
    throw input_error(path + ": " + e.what());
  }
}

}  // namespace ggen
