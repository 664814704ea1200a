#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "fcid/codebook.hpp"
#include "fcid/tensor.hpp"

namespace fcid::vq {

inline constexpr double kDefaultBeta = 0.25;

/// Nearest-code assignment for each feature row.
struct QuantizationResult {
  std::vector<std::size_t> indices;
  Tensor2 quantized;  // row t = codebook row indices[t]
  std::vector<double> distances;  // squared Euclidean (over the active mask)
};

/// How a TOC mask is used when emitting codes.
enum class MaskMode {
  PostQuantize,    // full-space nearest neighbour, then zero the unselected dims
  MaskedDistance,  // nearest neighbour measured on the selected dims only
};

/// Argmin of squared distance over all codes; ties go to the lowest index.
/// With a mask, distances use only the selected dimensions (the emitted
/// `quantized` rows are still full codewords).
QuantizationResult quantize(const Tensor2& features, const Codebook& codebook,
                            const DimensionMask* mask = nullptr);

/// Commitment term: beta · mean((features - sg[quantized])²). Gradient flows
/// only to the features.
struct CommitmentLoss {
  double value = 0.0;
  Tensor2 grad_features;
};
CommitmentLoss commitment_loss(const Tensor2& features, const Tensor2& quantized, double beta = kDefaultBeta);

/// Straight-through estimator. Forward returns `quantized` bit-exactly; the
/// backward pass hands the decoder-side gradient unchanged to the encoder.
Tensor2 straight_through(const Tensor2& features, const Tensor2& quantized);
Tensor2 straight_through_backward(const Tensor2& grad_output);

/// Running statistics for the multimodal EMA codebook update.
struct EmaState {
  double decay = 0.99;
  double epsilon = 1e-5;
  std::vector<double> cluster_size;  // length H
  Tensor2 cluster_sum;               // H×D

  /// State consistent with `codebook`: unit counts and sums equal to the codes,
  /// so an update with decay 1 reproduces the codebook.
  static EmaState for_codebook(const Codebook& codebook, double decay = 0.99, double epsilon = 1e-5);
};

/// One modality's features and their assigned code indices.
struct Assignment {
  const Tensor2* features;
  std::span<const std::size_t> indices;
};

/// Per modality m: one-hot counts n_m and feature sums s_m. Equal-weight
/// means n, s across modalities feed
///   cluster_size <- γ·cluster_size + (1-γ)·n
///   cluster_sum  <- γ·cluster_sum  + (1-γ)·s
/// and codes <- cluster_sum / smoothed(cluster_size), where the Laplace
/// smoothing is (size_k + ε) / (Σ size + H·ε) · Σ size.
Codebook mmema_update(EmaState& state, const Codebook& codebook, std::span<const Assignment> modalities);

/// CSV with header sample_id,t,code_index,sq_distance.
void save_assignments_csv(const std::filesystem::path& path, const QuantizationResult& result,
                          std::size_t steps_per_sample);

}  // namespace fcid::vq
