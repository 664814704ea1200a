#include "fcid/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fcid/error.hpp"

namespace fcid::io {

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

void write_u32(std::ostream& out, std::uint32_t value) {
  const char bytes[4] = {static_cast<char>(value & 0xff), static_cast<char>((value >> 8) & 0xff),
                         static_cast<char>((value >> 16) & 0xff), static_cast<char>((value >> 24) & 0xff)};
  out.write(bytes, 4);
}

void write_f32(std::ostream& out, double value) {
  write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

std::uint32_t read_u32(std::istream& in, const char* module) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw RuntimeError(module, "truncated payload");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

double read_f32(std::istream& in, const char* module) {
  return static_cast<double>(std::bit_cast<float>(read_u32(in, module)));
}

double round_to_f32(double value) { return static_cast<double>(static_cast<float>(value)); }

void save_tensor_file(const std::filesystem::path& path, const TensorFile& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("io", "cannot open " + path.string() + " for writing");
  out.write("TOCT", 4);
  write_u32(out, 1);
  write_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) write_u32(out, d);
  for (double v : tensor.values) write_f32(out, v);
  if (!out) throw RuntimeError("io", "write failed for " + path.string());
}

TensorFile load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("io", "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "TOCT") {
    throw RuntimeError("io", "bad magic in tensor file " + path.string());
  }
  if (read_u32(in, "io") != 1) throw RuntimeError("io", "unsupported tensor file version");
  const std::uint32_t rank = read_u32(in, "io");
  if (rank == 0 || rank > 8) throw RuntimeError("io", "invalid tensor rank");
  TensorFile t;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims.push_back(read_u32(in, "io"));
    count *= t.dims.back();
    if (count > (std::uint64_t{1} << 32)) throw RuntimeError("io", "tensor dimensions overflow");
  }
  t.values.resize(count);
  for (auto& v : t.values) v = read_f32(in, "io");
  return t;
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("io", "cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("io", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("io", "cannot open " + path.string() + " for writing");
  out << text;
}

}  // namespace fcid::io
