#include "fcid/codebook.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fcid/error.hpp"
#include "fcid/io.hpp"

namespace fcid {
namespace {
constexpr const char* kModule = "codebook-toc";
}

Codebook::Codebook(Tensor2 codes, bool normalized) : codes_(std::move(codes)), normalized_(normalized) {
  if (codes_.rows() < 2) throw ValidationError(kModule, "codebook needs H >= 2, got " + std::to_string(codes_.rows()));
  if (codes_.cols() < 1) throw ValidationError(kModule, "codebook needs D >= 1");
  if (!codes_.all_finite()) throw ValidationError(kModule, "codebook has non-finite entries");
  if (normalized_) {
    for (std::size_t i = 0; i < codes_.rows(); ++i) {
      const double norm = std::sqrt(squared_norm(codes_.row(i)));
      if (std::abs(norm - 1.0) > 1e-9) {
        throw ValidationError(kModule, "row " + std::to_string(i) + " flagged normalized but has norm " +
                                           io::format_real(norm));
      }
    }
  }
}

Codebook Codebook::random(std::size_t h, std::size_t d, Rng& rng) {
  Tensor2 codes(h, d);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : codes.values()) v = rng.normal(0.0, stddev);
  return Codebook(std::move(codes));
}

DimensionMask::DimensionMask(std::size_t d, std::span<const std::size_t> selected) : flags_(d, 0) {
  for (std::size_t k : selected) {
    if (k >= d) throw ValidationError(kModule, "mask index " + std::to_string(k) + " out of range for D=" + std::to_string(d));
    if (flags_[k]) throw ValidationError(kModule, "duplicate mask index " + std::to_string(k));
    flags_[k] = 1;
  }
  q_ = selected.size();
  if (q_ < 1 || q_ > d) throw ValidationError(kModule, "mask must select between 1 and D dimensions");
}

DimensionMask DimensionMask::all(std::size_t d) {
  std::vector<std::size_t> idx(d);
  for (std::size_t k = 0; k < d; ++k) idx[k] = k;
  return DimensionMask(d, idx);
}

std::vector<std::size_t> DimensionMask::indices() const {
  std::vector<std::size_t> out;
  out.reserve(q_);
  for (std::size_t k = 0; k < flags_.size(); ++k)
    if (flags_[k]) out.push_back(k);
  return out;
}

Tensor2 DimensionMask::apply(const Tensor2& rows) const {
  if (rows.cols() != dim()) throw ValidationError(kModule, "mask dimension does not match features");
  Tensor2 out = rows;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t k = 0; k < dim(); ++k)
      if (!flags_[k]) out(i, k) = 0.0;
  return out;
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError(kModule, "cannot open " + path.string() + " for writing");
  out.write("TOCB", 4);
  io::write_u32(out, 1);
  io::write_u32(out, static_cast<std::uint32_t>(codebook.size()));
  io::write_u32(out, static_cast<std::uint32_t>(codebook.dim()));
  io::write_u32(out, codebook.normalized() ? 1u : 0u);
  for (double v : codebook.codes().values()) io::write_f32(out, v);
  if (!out) throw RuntimeError(kModule, "write failed for " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError(kModule, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4)) throw RuntimeError(kModule, "truncated payload");
  if (std::string(magic, 4) != "TOCB") throw RuntimeError(kModule, "bad magic in " + path.string());
  const std::uint32_t version = io::read_u32(in, kModule);
  if (version != 1) throw RuntimeError(kModule, "unsupported codebook version " + std::to_string(version));
  const std::uint32_t h = io::read_u32(in, kModule);
  const std::uint32_t d = io::read_u32(in, kModule);
  const std::uint32_t flags = io::read_u32(in, kModule);
  if (h < 2 || d < 1) {
    throw ValidationError(kModule, "invariant violation: header H=" + std::to_string(h) + " D=" + std::to_string(d));
  }
  const std::uint64_t count = std::uint64_t{h} * d;
  if (count > (std::uint64_t{1} << 31)) throw RuntimeError(kModule, "dimension overflow in header");
  Tensor2 codes(h, d);
  for (double& v : codes.values()) v = io::read_f32(in, kModule);
  if ((flags & 1u) == 0) return Codebook(std::move(codes), false);
  // float32 rows are unit length only to ~1e-7; renormalize in double so the
  // flag's 1e-9 invariant holds.
  for (std::size_t i = 0; i < codes.rows(); ++i) {
    const double norm = std::sqrt(squared_norm(codes.row(i)));
    if (norm == 0.0) throw ValidationError(kModule, "normalized codebook has zero-norm row " + std::to_string(i));
    for (double& v : codes.row(i)) v /= norm;
  }
  return Codebook(std::move(codes), true);
}

void save_mask(const std::filesystem::path& path, const DimensionMask& mask) {
  nlohmann::json j;
  j["d"] = mask.dim();
  j["q"] = mask.q();
  j["selected"] = mask.indices();
  io::write_text(path, j.dump() + "\n");
}

DimensionMask load_mask(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, "malformed mask file " + path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("d") || !j.contains("q") || !j.contains("selected")) {
    throw ValidationError(kModule, "mask file needs keys d, q, selected");
  }
  const auto d = j["d"].get<std::size_t>();
  const auto q = j["q"].get<std::size_t>();
  const auto selected = j["selected"].get<std::vector<std::size_t>>();
  if (selected.size() != q) throw ValidationError(kModule, "mask q does not match selected count");
  return DimensionMask(d, selected);
}

}  // namespace fcid
