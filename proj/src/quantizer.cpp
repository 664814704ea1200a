#include "fcid/quantizer.hpp"

#include <sstream>

#include "fcid/error.hpp"
#include "fcid/io.hpp"

namespace fcid::vq {
namespace {
constexpr const char* kModule = "quantizer";
}

QuantizationResult quantize(const Tensor2& features, const Codebook& codebook, const DimensionMask* mask) {
  const std::size_t d = codebook.dim();
  if (features.cols() != d) {
    throw ValidationError(kModule, "feature width " + std::to_string(features.cols()) +
                                       " does not match codebook dimension " + std::to_string(d));
  }
  if (mask != nullptr && mask->dim() != d) throw ValidationError(kModule, "mask dimension does not match codebook");
  std::vector<std::size_t> active;
  if (mask != nullptr) {
    active = mask->indices();
  } else {
    active.resize(d);
    for (std::size_t k = 0; k < d; ++k) active[k] = k;
  }
  QuantizationResult result;
  result.indices.resize(features.rows());
  result.distances.resize(features.rows());
  result.quantized = Tensor2(features.rows(), d);
  for (std::size_t t = 0; t < features.rows(); ++t) {
    auto f = features.row(t);
    std::size_t best = 0;
    double best_dist = 0.0;
    for (std::size_t j = 0; j < codebook.size(); ++j) {
      auto e = codebook.code(j);
      double dist = 0.0;
      for (std::size_t k : active) {
        const double diff = f[k] - e[k];
        dist += diff * diff;
      }
      if (j == 0 || dist < best_dist) {
        best = j;
        best_dist = dist;
      }
    }
    result.indices[t] = best;
    result.distances[t] = best_dist;
    auto e = codebook.code(best);
    std::copy(e.begin(), e.end(), result.quantized.row(t).begin());
  }
  return result;
}

CommitmentLoss commitment_loss(const Tensor2& features, const Tensor2& quantized, double beta) {
  if (!features.same_shape(quantized)) throw ValidationError(kModule, "commitment: shape mismatch");
  CommitmentLoss out;
  out.grad_features = Tensor2(features.rows(), features.cols());
  if (features.empty()) return out;
  const double n = static_cast<double>(features.size());
  double total = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double diff = features[i] - quantized[i];
    total += diff * diff;
    out.grad_features[i] = 2.0 * beta * diff / n;
  }
  out.value = beta * total / n;
  return out;
}

Tensor2 straight_through(const Tensor2& features, const Tensor2& quantized) {
  if (!features.same_shape(quantized)) throw ValidationError(kModule, "straight-through: shape mismatch");
  return quantized;
}

Tensor2 straight_through_backward(const Tensor2& grad_output) { return grad_output; }

EmaState EmaState::for_codebook(const Codebook& codebook, double decay, double epsilon) {
  if (!(decay > 0.0 && decay <= 1.0)) throw ValidationError(kModule, "EMA decay must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw ValidationError(kModule, "EMA epsilon must be positive");
  EmaState s;
  s.decay = decay;
  s.epsilon = epsilon;
  s.cluster_size.assign(codebook.size(), 1.0);
  s.cluster_sum = codebook.codes();
  return s;
}

Codebook mmema_update(EmaState& state, const Codebook& codebook, std::span<const Assignment> modalities) {
  const std::size_t h = codebook.size();
  const std::size_t d = codebook.dim();
  if (state.cluster_size.size() != h || state.cluster_sum.rows() != h || state.cluster_sum.cols() != d) {
    throw ValidationError(kModule, "EMA state shape does not match codebook");
  }
  if (modalities.empty()) throw ValidationError(kModule, "MMEMA needs at least one modality");
  std::vector<double> counts(h, 0.0);
  Tensor2 sums(h, d);
  const double weight = 1.0 / static_cast<double>(modalities.size());
  for (const Assignment& m : modalities) {
    if (m.features->cols() != d || m.features->rows() != m.indices.size()) {
      throw ValidationError(kModule, "MMEMA features/indices shape mismatch");
    }
    for (std::size_t t = 0; t < m.indices.size(); ++t) {
      const std::size_t idx = m.indices[t];
      if (idx >= h) throw ValidationError(kModule, "code index " + std::to_string(idx) + " out of [0, H)");
      counts[idx] += weight;
      auto f = m.features->row(t);
      auto s = sums.row(idx);
      for (std::size_t k = 0; k < d; ++k) s[k] += weight * f[k];
    }
  }
  const double g = state.decay;
  double total = 0.0;
  for (std::size_t j = 0; j < h; ++j) {
    state.cluster_size[j] = g * state.cluster_size[j] + (1.0 - g) * counts[j];
    total += state.cluster_size[j];
  }
  for (std::size_t i = 0; i < state.cluster_sum.size(); ++i) {
    state.cluster_sum[i] = g * state.cluster_sum[i] + (1.0 - g) * sums[i];
  }
  Tensor2 codes(h, d);
  const double denom = total + static_cast<double>(h) * state.epsilon;
  for (std::size_t j = 0; j < h; ++j) {
    const double smoothed = (state.cluster_size[j] + state.epsilon) / denom * total;
    auto src = state.cluster_sum.row(j);
    auto dst = codes.row(j);
    for (std::size_t k = 0; k < d; ++k) dst[k] = src[k] / smoothed;
  }
  return Codebook(std::move(codes));
}

void save_assignments_csv(const std::filesystem::path& path, const QuantizationResult& result,
                          std::size_t steps_per_sample) {
  if (steps_per_sample == 0) throw ValidationError(kModule, "steps_per_sample must be positive");
  std::ostringstream out;
  out << "sample_id,t,code_index,sq_distance\n";
  for (std::size_t r = 0; r < result.indices.size(); ++r) {
    out << r / steps_per_sample << ',' << r % steps_per_sample << ',' << result.indices[r] << ','
        << io::format_real(result.distances[r]) << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace fcid::vq
