#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "fcid/codebook.hpp"
#include "fcid/tensor.hpp"

namespace fcid::toc {

inline constexpr double kDefaultLambda = 0.3;

/// Where the variance term is measured. Similarity always uses the
/// L2-normalized copy.
enum class VarianceSource { Normalized, Raw };

/// Per-dimension code similarity S_k, code variance V_k and the combined
/// score U_k = lambda·V_k - (1 - lambda)·S_k.
struct DimensionScore {
  std::vector<double> similarity;
  std::vector<double> variance;
  std::vector<double> combined;
  double lambda = kDefaultLambda;
};

/// Row-wise unit normalization. Throws ValidationError naming the first
/// zero-norm row.
Codebook l2_normalize(const Codebook& codebook);

/// S_k = (1/H²) Σ_i Σ_{j≠i} e^i_k e^j_k on the L2-normalized codebook,
/// via (Σ_i e^i_k)² - Σ_i (e^i_k)² in O(H·D).
std::vector<double> per_dim_similarity(const Codebook& codebook);

/// Population variance of each column (divisor H) of the codebook as given.
std::vector<double> per_dim_variance(const Codebook& codebook);

DimensionScore toc_scores(const Codebook& codebook, double lambda = kDefaultLambda,
                          VarianceSource variance_on = VarianceSource::Normalized);

/// Top-q dimensions by combined score; ties go to the lower index.
DimensionMask select_dims(const DimensionScore& scores, std::size_t q);
DimensionMask select_top(const std::vector<double>& values, std::size_t q);

/// Average pairwise cosine similarity (1/H²) Σ_{i≠j} cos(e^i ⊙ F, e^j ⊙ F).
/// Masked rows are renormalized, so this is a true cosine on the kept
/// dimensions. Throws ValidationError if a (masked) row is all zero.
double average_similarity(const Codebook& codebook, const DimensionMask* mask = nullptr);

/// Σ_{k selected} S_k: the decomposed masked-dot-product objective on the
/// normalized codebook, without renormalizing the masked rows.
double masked_dot_objective(const Codebook& codebook, const DimensionMask& mask);

/// H×H cosine similarity matrix (masked rows renormalized when a mask is given).
Tensor2 cosine_similarity_matrix(const Codebook& codebook, const DimensionMask* mask = nullptr);

/// CSV with header k,S_k,V_k,U_k.
void save_scores_csv(const std::filesystem::path& path, const DimensionScore& scores);

}  // namespace fcid::toc
