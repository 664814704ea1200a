#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fcid/rng.hpp"
#include "fcid/tensor.hpp"

namespace fcid {

/// A trainable tensor and its gradient accumulator (always the same shape).
struct Param {
  Tensor2 value;
  Tensor2 grad;

  Param() = default;
  Param(std::size_t rows, std::size_t cols) : value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
  /// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  void init_uniform(std::size_t fan_in, Rng& rng);
};

/// Ordered, non-owning registry of named parameters. The owning model must
/// outlive the store.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Param* param;
  };

  void add(std::string name, Param& param);
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  Param* find(std::string_view name) const;

  void zero_grad();
  /// Adds `scale` times every gradient into the matching value.
  void apply_gradient(double scale);
  /// FNV-1a over the raw bytes of every value; used to assert freezing.
  std::uint64_t value_hash() const;

 private:
  std::vector<Entry> entries_;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  const GradCheckEntry* worst() const;
};

/// Compares the gradients already stored in `params` against central
/// differences of `loss`. Relative error per element is
/// |a - n| / max(|a|, |n|, 1e-8). Parameter values are restored afterwards.
/// Throws RuntimeError if the loss is non-finite at any probe point.
GradCheckReport finite_diff_check(const std::function<double()>& loss, const ParamStore& params,
                                  double epsilon = 1e-5, double tolerance = 1e-4);
/// Same check for a loss that is a sum of parts. Each part is differenced on
/// its own, so round-off stays at the scale of the part rather than the total.
GradCheckReport finite_diff_check_parts(const std::function<std::vector<double>()>& parts, const ParamStore& params,
                                        double epsilon = 1e-5, double tolerance = 1e-4);

}  // namespace fcid
