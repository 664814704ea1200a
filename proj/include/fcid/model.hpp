#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fcid/codebook.hpp"
#include "fcid/layers.hpp"
#include "fcid/losses.hpp"
#include "fcid/quantizer.hpp"
#include "fcid/tensor.hpp"

namespace fcid::model {

enum class Modality { Audio = 0, Video = 1, Text = 2 };
inline constexpr std::array<Modality, 3> kModalities{Modality::Audio, Modality::Video, Modality::Text};

std::string_view modality_name(Modality m);
/// Accepts "a"/"audio", "v"/"video", "te"/"t"/"text"; anything else is a ValidationError.
Modality parse_modality(std::string_view name);

struct ModelConfig {
  std::size_t audio_dim = 24;
  std::size_t video_dim = 24;
  std::size_t text_dim = 16;
  std::size_t code_dim = 16;
  std::size_t codebook_size = 64;
  std::size_t hidden = 32;
  std::size_t context = 32;
  std::size_t horizon = 3;

  std::size_t input_dim(Modality m) const;
};

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double clip_norm = 1.0;  // global gradient norm cap; 0 disables
  double club_learning_rate = 0.01;
  double club_clip_norm = 1.0;
  double lambda = 0.3;  // TOC weight used when scoring the trained codebook
  double beta = vq::kDefaultBeta;
  double tau = mi::kDefaultTau;
  double gamma = 0.99;
  double ema_epsilon = 1e-5;
  bool use_club_a = true;
  bool use_club_v = true;
  bool use_club_av = true;
  bool use_club_te = true;
  bool use_recon = true;
  bool use_commit = true;
  std::uint64_t seed = 0;

  bool any_club() const { return use_club_a || use_club_v || use_club_av || use_club_te; }
};

/// Paired tri-modal inputs. Audio and video are time-major sequences; text is
/// one vector per sample.
struct Batch {
  FeatureBatch audio;
  FeatureBatch video;
  Tensor2 text;

  std::size_t size() const { return text.rows(); }
  Batch gather(std::span<const std::size_t> samples) const;
};

struct FineForward {
  FeatureBatch general_audio, general_video;
  FeatureBatch specific_audio, specific_video;
};

/// Coarse features per modality (indexed by Modality), one row per sample.
struct CoarseForward {
  std::array<Tensor2, 3> projected;
  std::array<Tensor2, 3> general;
  std::array<Tensor2, 3> specific;
  std::array<vq::QuantizationResult, 3> codes;
};

/// Frozen code choice: indices and the offsets e_l - c at the point they were
/// taken, so the quantized output is c + offset and varies smoothly with c.
struct FrozenCodes {
  std::array<std::vector<std::size_t>, 3> indices;
  std::array<Tensor2, 3> offsets;
};

struct Objective {
  mi::LossReport report;
  FineForward fine;
  CoarseForward coarse;
};

/// Output of the frozen inference path for one modality.
struct Encoding {
  Tensor2 general;           // coarse general features before quantization, N×D
  Tensor2 specific;          // coarse specific features, N×D
  Tensor2 fine_general;      // time-mean fine general features (text: projected input), N×D
  Tensor2 fine_specific;     // time-mean fine specific features (text: coarse specific), N×D
  vq::QuantizationResult codes;
  Tensor2 emitted;           // quantized codes after the optional mask
};

class FcidModel {
 public:
  explicit FcidModel(const ModelConfig& config = {});

  const ModelConfig& config() const { return config_; }
  void init(Rng& rng, double gamma = 0.99, double ema_epsilon = 1e-5);

  /// Encoders, projectors, decoders and CPC heads (not the CLUB estimators,
  /// which are fitted separately, nor the codebook, which follows MMEMA).
  ParamStore parameters();
  ParamStore estimator_parameters();

  FineForward forward_fine(const FeatureBatch& audio, const FeatureBatch& video) const;
  CoarseForward forward_coarse(const FineForward& fine, const Tensor2& text) const;

  /// Full objective for one batch with CPC context length `cpc_steps`. With
  /// `backward`, gradients are accumulated into parameters(). When `frozen`
  /// is given, codes are not recomputed.
  Objective objective(const Batch& batch, const TrainConfig& config, std::size_t cpc_steps, bool backward,
                      const FrozenCodes* frozen = nullptr);

  /// Inference path with frozen parameters.
  Encoding encode(const Batch& batch, Modality m, const DimensionMask* mask = nullptr,
                  vq::MaskMode mode = vq::MaskMode::PostQuantize) const;

  std::array<Mlp2, 2> fine_general;   // audio, video
  std::array<Mlp2, 2> fine_specific;  // audio, video
  Affine project_av;
  Affine project_te;
  Mlp2 coarse_general_av, coarse_general_te;
  Mlp2 coarse_specific_av, coarse_specific_te;
  std::array<Mlp2, 3> decoder;
  std::array<mi::CpcHead, 2> cpc;
  std::array<mi::ClubEstimator, 2> club_fine;
  mi::ClubEstimator club_av, club_te;
  Codebook codebook;
  vq::EmaState ema;

 private:
  ModelConfig config_;
};

/// SGD with momentum over parameters(), one MMEMA codebook update and one
/// CLUB fitting step per estimator per call.
class Trainer {
 public:
  Trainer(FcidModel& model, const TrainConfig& config);

  mi::LossReport step(const Batch& batch);
  /// Shuffled minibatches over `data` for config.epochs epochs; returns the
  /// per-step loss trajectory.
  std::vector<mi::LossReport> fit(const Batch& data);

  const TrainConfig& config() const { return config_; }

 private:
  FcidModel& model_;
  TrainConfig config_;
  Rng rng_;
  std::vector<Tensor2> velocity_;
};

/// Checkpoint: magic "TOCK", u32 version 1, u32 header length, JSON header
/// (model config, caller metadata, blob names and shapes), then each blob as
/// little-endian float32 row-major.
void save_checkpoint(const std::filesystem::path& path, FcidModel& model, const std::string& metadata_json = "{}");
FcidModel load_checkpoint(const std::filesystem::path& path, std::string* metadata_json = nullptr);

}  // namespace fcid::model
