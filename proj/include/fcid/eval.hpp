#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcid/codebook.hpp"
#include "fcid/data.hpp"
#include "fcid/model.hpp"
#include "fcid/quantizer.hpp"

namespace fcid::eval {

/// Single affine softmax layer trained by full-batch gradient descent on
/// standardized inputs (statistics taken from the training features).
class LinearClassifier {
 public:
  struct Options {
    std::size_t epochs = 200;
    double learning_rate = 0.5;
  };

  LinearClassifier() = default;
  void fit(const Tensor2& features, std::span<const std::size_t> labels, std::size_t classes, Options options);
  void fit(const Tensor2& features, std::span<const std::size_t> labels, std::size_t classes) {
    fit(features, labels, classes, Options{});
  }
  std::vector<std::size_t> predict(const Tensor2& features) const;
  double accuracy(const Tensor2& features, std::span<const std::size_t> labels) const;

 private:
  Tensor2 standardize(const Tensor2& features) const;

  Tensor2 mean_, scale_;
  Tensor2 weight_, bias_;
};

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

struct CmgResult {
  model::Modality train_modality;
  model::Modality test_modality;
  double train_accuracy = 0.0;  // held-out accuracy on the training modality
  double test_accuracy = 0.0;   // accuracy on the other modality
  std::optional<std::size_t> mask_q;
};

/// Cross-modal generalization: a linear classifier on frozen quantized codes
/// of m1 (training split), evaluated on the test split of m1 and of m2.
CmgResult cmg_run(const model::FcidModel& model, const data::Dataset& dataset, const data::Split& split,
                  model::Modality m1, model::Modality m2, const DimensionMask* mask = nullptr,
                  vq::MaskMode mode = vq::MaskMode::PostQuantize);

/// Rank of each query's own pair among all candidates by cosine similarity.
/// Ties are broken toward the lower candidate index.
std::vector<std::size_t> retrieval_ranks(const Tensor2& queries, const Tensor2& candidates);
/// R@K for each K, averaged over both retrieval directions.
std::vector<double> recall_at_k(const Tensor2& first, const Tensor2& second, std::span<const std::size_t> ks);

struct RetrievalResult {
  model::Modality first, second;
  std::vector<std::size_t> ks;
  std::vector<double> recall;
  std::size_t pool = 0;
};
/// Retrieval on the first `pool` test samples using coarse general features
/// before quantization, or the emitted codes with `use_codes`.
RetrievalResult retrieval_eval(const model::FcidModel& model, const data::Dataset& dataset, const data::Split& split,
                               model::Modality first, model::Modality second, std::span<const std::size_t> ks,
                               std::size_t pool = 200, bool use_codes = false);

enum class Category { Red, Green, Blue, Unused };
const char* category_name(Category c);

/// Red iff one modality holds more than 95% of the code's activations; green
/// iff every modality holds at least 5%; blue otherwise; unused if never hit.
Category categorize(const std::array<std::size_t, 3>& counts);

struct ActivationStats {
  std::vector<std::array<std::size_t, 3>> counts;  // per code: audio, video, text
  std::vector<Category> categories;
  std::array<std::size_t, 4> totals{};  // red, green, blue, unused
};
/// One activation per sample and modality (coarse codes have no time axis).
ActivationStats activation_stats(const model::FcidModel& model, const data::Dataset& dataset);
ActivationStats activation_stats_from_counts(std::vector<std::array<std::size_t, 3>> counts);

// ---------------------------------------------------------------- masked reconstruction

/// Small VQ autoencoder: affine encoder, shared codebook with EMA updates,
/// affine decoder.
struct Autoencoder {
  Affine encoder;
  Affine decoder;
  Codebook codebook;
  vq::EmaState ema;

  /// Reconstruction through quantization; with a mask, the emitted code's
  /// unselected dimensions are zeroed before decoding.
  Tensor2 reconstruct(const Tensor2& x, const DimensionMask* mask = nullptr,
                      vq::MaskMode mode = vq::MaskMode::PostQuantize) const;
  double mse(const Tensor2& x, const DimensionMask* mask = nullptr,
             vq::MaskMode mode = vq::MaskMode::PostQuantize) const;
};

struct AutoencoderConfig {
  std::size_t input_dim = 32;
  std::size_t latent_factors = 6;
  std::size_t codebook_size = 128;
  std::size_t code_dim = 32;
  std::size_t samples = 4000;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double learning_rate = 0.05;
  double beta = vq::kDefaultBeta;
  double noise = 0.05;
  std::uint64_t seed = 11;
};

/// Features of low intrinsic dimension: latent factors with geometrically
/// decaying scales through a fixed random linear map, plus noise.
Tensor2 autoencoder_features(const AutoencoderConfig& config, std::uint64_t seed);
Autoencoder train_autoencoder(const AutoencoderConfig& config, const Tensor2& features);

struct MaskedReconRow {
  double mask_percent = 0.0;
  std::size_t q = 0;
  double toc_mse = 0.0;
  double random_mean_mse = 0.0;
  std::size_t count = 0;  // random trials with MSE above the TOC mask's
  std::size_t trials = 0;
};

/// For each masked percentage, the TOC mask keeping q = D·(1 - p/100)
/// dimensions against `n_random` random masks of the same size.
std::vector<MaskedReconRow> masked_recon_sweep(const Autoencoder& ae, const Tensor2& features,
                                               std::span<const double> mask_percents, std::size_t n_random,
                                               std::uint64_t seed, double lambda = 0.3,
                                               vq::MaskMode mode = vq::MaskMode::PostQuantize);
inline constexpr std::array<double, 6> kMaskPercents{87.5, 75.0, 62.5, 50.0, 37.5, 25.0};

// ---------------------------------------------------------------- similarity and probes

struct SimilarityReport {
  double before = 0.0;
  double after = 0.0;
  Tensor2 matrix_before;
  Tensor2 matrix_after;
};
SimilarityReport similarity_report(const Codebook& codebook, const DimensionMask& mask);

struct ProbeResult {
  double general_to_shared = 0.0;    // fine general features -> class label
  double general_to_specific = 0.0;  // fine general features -> quadrant of z_m
  double specific_to_shared = 0.0;   // fine specific features -> class label
  double shared_chance = 0.0;
  double specific_chance = 0.0;
};
/// Linear probes on frozen audio and video features, averaged over the two
/// modalities; trained on the training split, scored on the test split.
ProbeResult probe_disentanglement(const model::FcidModel& model, const data::Dataset& dataset,
                                  const data::Split& split);

// ---------------------------------------------------------------- CSV

void save_cmg_csv(const std::filesystem::path& path, const std::vector<CmgResult>& rows);
void save_retrieval_csv(const std::filesystem::path& path, const std::vector<RetrievalResult>& rows);
void save_activation_csv(const std::filesystem::path& path, const ActivationStats& stats);
void save_masked_recon_csv(const std::filesystem::path& path, const std::vector<MaskedReconRow>& rows);
void save_probe_csv(const std::filesystem::path& path, const ProbeResult& probes);
void save_matrix_csv(const std::filesystem::path& path, const Tensor2& matrix);

}  // namespace fcid::eval
