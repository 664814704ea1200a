#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fcid/tensor.hpp"

namespace fcid::io {

/// Six significant digits, the precision used by every textual artifact.
std::string format_real(double value);

/// Little-endian writers/readers. Readers throw RuntimeError(module, ...) on
/// a short read so callers get a module-qualified "truncated" message.
void write_u32(std::ostream& out, std::uint32_t value);
void write_f32(std::ostream& out, double value);
std::uint32_t read_u32(std::istream& in, const char* module);
double read_f32(std::istream& in, const char* module);

/// Value after a round trip through a 32-bit float.
double round_to_f32(double value);

/// Generic N-d tensor file: magic "TOCT", version u32 = 1, rank u32,
/// rank × u32 dims, then little-endian float32 payload in row-major order.
struct TensorFile {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};
void save_tensor_file(const std::filesystem::path& path, const TensorFile& tensor);
TensorFile load_tensor_file(const std::filesystem::path& path);

/// FNV-1a 64-bit over the file bytes, rendered as 16 lowercase hex digits.
std::string file_checksum(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fcid::io
