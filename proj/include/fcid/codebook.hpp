#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "fcid/rng.hpp"
#include "fcid/tensor.hpp"

namespace fcid {

/// H×D matrix of codewords shared by every modality. Immutable once built;
/// updates produce a new Codebook.
class Codebook {
 public:
  /// Throws ValidationError if H < 2, D < 1, any entry is non-finite, or the
  /// normalized flag is set while some row is not unit length (1e-9).
  explicit Codebook(Tensor2 codes, bool normalized = false);

  std::size_t size() const { return codes_.rows(); }
  std::size_t dim() const { return codes_.cols(); }
  const Tensor2& codes() const { return codes_; }
  std::span<const double> code(std::size_t i) const { return codes_.row(i); }
  bool normalized() const { return normalized_; }

  /// Rows drawn i.i.d. from Normal(0, 1/D).
  static Codebook random(std::size_t h, std::size_t d, Rng& rng);

  bool operator==(const Codebook& other) const = default;

 private:
  Tensor2 codes_;
  bool normalized_ = false;
};

/// Binary per-dimension selection flag with exactly q ones, 1 <= q <= D.
class DimensionMask {
 public:
  /// Builds a mask from selected indices (any order, no duplicates).
  DimensionMask(std::size_t d, std::span<const std::size_t> selected);
  static DimensionMask all(std::size_t d);

  std::size_t dim() const { return flags_.size(); }
  std::size_t q() const { return q_; }
  bool selected(std::size_t k) const { return flags_[k] != 0; }
  const std::vector<std::uint8_t>& flags() const { return flags_; }
  /// Selected indices in ascending order.
  std::vector<std::size_t> indices() const;

  /// Zeroes unselected columns.
  Tensor2 apply(const Tensor2& rows) const;

  bool operator==(const DimensionMask& other) const = default;

 private:
  std::vector<std::uint8_t> flags_;
  std::size_t q_ = 0;
};

/// Codebook file: "TOCB", version u32 = 1, H u32, D u32, flags u32 (bit0:
/// normalized), then H·D little-endian float32 row-major.
void save_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook load_codebook(const std::filesystem::path& path);

/// Mask file: {"d": D, "q": Q, "selected": [ascending indices]}.
void save_mask(const std::filesystem::path& path, const DimensionMask& mask);
DimensionMask load_mask(const std::filesystem::path& path);

}  // namespace fcid
