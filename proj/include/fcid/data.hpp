#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fcid/model.hpp"
#include "fcid/tensor.hpp"

namespace fcid::data {

struct SynthConfig {
  std::size_t samples = 2000;
  std::size_t steps = 8;
  std::size_t classes = 8;
  std::size_t shared_dim = 4;
  std::size_t pairwise_dim = 2;
  std::size_t specific_dim = 2;
  std::size_t audio_dim = 24;
  std::size_t video_dim = 24;
  std::size_t text_dim = 16;
  double noise = 0.1;
  std::uint64_t seed = 7;
};

/// Ground-truth factors, one row per sample.
struct Latents {
  Tensor2 shared;    // z_avt
  Tensor2 pairwise;  // z_av (before the per-step rotation)
  Tensor2 audio;     // z_a
  Tensor2 video;     // z_v
  Tensor2 text;      // z_te
};

struct Dataset {
  SynthConfig config;
  model::Batch inputs;  // all samples; audio/video time-major
  Latents latents;
  std::vector<std::size_t> labels;
};

/// Class centres and fixed linear maps are drawn first, then per sample:
///   z_avt = centre + 0.5·noise, label = nearest centre
///   x_m[t] = A_m [z_avt; rot(2πt/T)·z_av; z_m] + drift_m·(t/(T-1) - 1/2) + σ·noise   (m = a, v)
///   x_te   = A_te [z_avt; z_te] + σ·noise
/// All values are rounded to float32 so saving and loading is lossless.
Dataset generate(const SynthConfig& config);

struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Disjoint, label-stratified, deterministic partition. Each split's sample
/// list is ascending. Throws ValidationError unless fractions are >= 0 and
/// sum to 1.
Split split(const std::vector<std::size_t>& labels, std::array<double, 3> fractions, std::uint64_t seed);

/// Directory with manifest.json, audio.toct [N,T,Da], video.toct [N,T,Dv],
/// text.toct [N,Dt], labels.csv and latents.csv.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

/// Quadrant of the first two coordinates of a factor: 4 classes (2 if the
/// factor is 1-d). Used as a discretized probe target.
std::vector<std::size_t> quadrant_labels(const Tensor2& factor);

}  // namespace fcid::data
