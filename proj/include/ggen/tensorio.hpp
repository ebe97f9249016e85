#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ggen/common.hpp"
#include "ggen/crc32.hpp"

namespace ggen {

// Framed tensor record:
//   "GGTB" | dtype u8 | rank u8 | reserved u16 | dims u32[rank] | crc32 u32 | payload
// All integers little endian; payload is row major.
enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw input_error(std::string("tensor: truncated while reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

template <typename T>
void append_scalar(std::string& payload, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  payload.append(buf, sizeof(T));
}

}  // namespace detail

inline std::size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

// Writes one framed tensor; matrices serialize row by row.
inline void write_tensor(std::ostream& out, const Mat& m, Dtype dtype,
                         const std::vector<std::uint32_t>& dims) {
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  if (count != static_cast<std::uint64_t>(m.size()))
    throw internal_error("write_tensor: dims do not match element count");

  std::string payload;
  payload.reserve(static_cast<std::size_t>(count) * dtype_size(dtype));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (dtype == Dtype::f32)
        detail::append_scalar(payload, static_cast<float>(m(r, c)));
      else
        detail::append_scalar(payload, m(r, c));
    }

  out.write("GGTB", 4);
  out.put(static_cast<char>(dtype));
  out.put(static_cast<char>(dims.size()));
  out.put(0);
  out.put(0);
  for (auto d : dims) detail::put_u32(out, d);
  detail::put_u32(out, crc32(payload));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw input_error("tensor: write failed");
}

inline void write_tensor(std::ostream& out, const Mat& m, Dtype dtype) {
  write_tensor(out, m, dtype,
               {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())});
}

struct TensorRecord {
  Dtype dtype = Dtype::f32;
  std::vector<std::uint32_t> dims;
  Mat data;  // rank 1 loads as a column vector, rank 2 as rows x cols
};

inline TensorRecord read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw input_error("tensor: truncated header");
  if (std::memcmp(magic, "GGTB", 4) != 0) throw input_error("tensor: bad magic");
  TensorRecord rec;
  const int dtype_raw = in.get();
  const int rank = in.get();
  in.get();
  in.get();
  if (dtype_raw != 1 && dtype_raw != 2)
    throw input_error("tensor: unknown dtype " + std::to_string(dtype_raw));
  rec.dtype = static_cast<Dtype>(dtype_raw);
  if (rank < 1 || rank > 2) throw input_error("tensor: unsupported rank " + std::to_string(rank));
  std::uint64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    rec.dims.push_back(detail::get_u32(in, "dims"));
    count *= rec.dims.back();
  }
  const std::uint32_t stored_crc = detail::get_u32(in, "crc");
  std::string payload(static_cast<std::size_t>(count) * dtype_size(rec.dtype), '\0');
  if (!in.read(payload.data(), static_cast<std::streamsize>(payload.size())))
    throw input_error("tensor: truncated payload");
  if (crc32(payload) != stored_crc)
    throw input_error("tensor: corrupt blob (checksum mismatch)");

  const Eigen::Index rows = rank == 2 ? rec.dims[0] : rec.dims[0];
  const Eigen::Index cols = rank == 2 ? rec.dims[1] : 1;
  rec.data.resize(rows, cols);
  const char* p = payload.data();
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (rec.dtype == Dtype::f32) {
        float v;
        std::memcpy(&v, p, 4);
        p += 4;
        rec.data(r, c) = v;
      } else {
        double v;
        std::memcpy(&v, p, 8);
        p += 8;
        rec.data(r, c) = v;
      }
    }
  return rec;
}

inline TensorRecord load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open tensor file: " + path);
  try {
    return read_tensor(f);
  } catch (const input_error& e) {
    throw input_error(path + ": " + e.what());
  }
}

inline void save_tensor(const std::string& path, const Mat& m, Dtype dtype) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot write tensor file: " + path);
  write_tensor(f, m, dtype);
}

}  // namespace ggen
