#include "fcid/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fcid/error.hpp"
#include "fcid/io.hpp"

namespace fcid::model {
namespace {

constexpr const char* kModule = "fcid-model";
constexpr char kMagic[4] = {'T', 'O', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::size_t index(Modality m) { return static_cast<std::size_t>(m); }

/// Per-sample rows (N×D) repeated at every step, time-major.
Tensor2 repeat_steps(const Tensor2& x, std::size_t steps) {
  Tensor2 out(steps * x.rows(), x.cols());
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < x.rows(); ++i) std::ranges::copy(x.row(i), out.row(t * x.rows() + i).begin());
  return out;
}

/// Adjoint of repeat_steps.
Tensor2 sum_steps(const Tensor2& rows, std::size_t steps) {
  const std::size_t n = rows.rows() / steps;
  Tensor2 out(n, rows.cols());
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      auto src = rows.row(t * n + i);
      auto dst = out.row(i);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
  return out;
}

void check_width(const Tensor2& x, std::size_t expected, Modality m) {
  if (x.cols() != expected)
    throw ValidationError(kModule, std::string(modality_name(m)) + " input has " + std::to_string(x.cols()) +
                                       " columns, expected " + std::to_string(expected));
}

void check_batch(const Batch& batch, const ModelConfig& config) {
  check_width(batch.audio.rows(), config.audio_dim, Modality::Audio);
  check_width(batch.video.rows(), config.video_dim, Modality::Video);
  check_width(batch.text, config.text_dim, Modality::Text);
  if (batch.audio.batch() != batch.size() || batch.video.batch() != batch.size() ||
      batch.audio.steps() != batch.video.steps())
    throw ValidationError(kModule, "audio, video and text batches are not paired");
}

FeatureBatch gather_sequences(const FeatureBatch& x, std::span<const std::size_t> samples) {
  FeatureBatch out(x.steps(), samples.size(), x.dim());
  for (std::size_t t = 0; t < x.steps(); ++t)
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i] >= x.batch()) throw ValidationError(kModule, "sample index out of range");
      std::ranges::copy(x.at(t, samples[i]), out.at(t, i).begin());
    }
  return out;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"audio_dim", c.audio_dim},         {"video_dim", c.video_dim}, {"text_dim", c.text_dim},
          {"code_dim", c.code_dim},           {"codebook_size", c.codebook_size},
          {"hidden", c.hidden},               {"context", c.context},     {"horizon", c.horizon}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.audio_dim = j.at("audio_dim").get<std::size_t>();
  c.video_dim = j.at("video_dim").get<std::size_t>();
  c.text_dim = j.at("text_dim").get<std::size_t>();
  c.code_dim = j.at("code_dim").get<std::size_t>();
  c.codebook_size = j.at("codebook_size").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.context = j.at("context").get<std::size_t>();
  c.horizon = j.at("horizon").get<std::size_t>();
  return c;
}

}  // namespace

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::Audio: return "audio";
    case Modality::Video: return "video";
    case Modality::Text: return "text";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  if (name == "a" || name == "audio") return Modality::Audio;
  if (name == "v" || name == "video") return Modality::Video;
  if (name == "t" || name == "te" || name == "text") return Modality::Text;
  throw ValidationError(kModule, "unknown modality '" + std::string(name) + "'");
}

std::size_t ModelConfig::input_dim(Modality m) const {
  switch (m) {
    case Modality::Audio: return audio_dim;
    case Modality::Video: return video_dim;
    case Modality::Text: return text_dim;
  }
  return 0;
}

Batch Batch::gather(std::span<const std::size_t> samples) const {
  Batch out;
  out.audio = gather_sequences(audio, samples);
  out.video = gather_sequences(video, samples);
  out.text = gather_rows(text, samples);
  return out;
}

// ---------------------------------------------------------------- model

FcidModel::FcidModel(const ModelConfig& c)
    : fine_general{Mlp2(c.audio_dim, c.hidden, c.code_dim), Mlp2(c.video_dim, c.hidden, c.code_dim)},
      fine_specific{Mlp2(c.audio_dim, c.hidden, c.code_dim), Mlp2(c.video_dim, c.hidden, c.code_dim)},
      project_av(c.code_dim, c.code_dim),
      project_te(c.text_dim, c.code_dim),
      coarse_general_av(c.code_dim, c.hidden, c.code_dim),
      coarse_general_te(c.code_dim, c.hidden, c.code_dim),
      coarse_specific_av(c.code_dim, c.hidden, c.code_dim),
      coarse_specific_te(c.code_dim, c.hidden, c.code_dim),
      decoder{Mlp2(3 * c.code_dim, c.hidden, c.audio_dim), Mlp2(3 * c.code_dim, c.hidden, c.video_dim),
              Mlp2(2 * c.code_dim, c.hidden, c.text_dim)},
      cpc{mi::CpcHead(c.code_dim, c.context, c.horizon), mi::CpcHead(c.code_dim, c.context, c.horizon)},
      club_fine{mi::ClubEstimator(c.code_dim, c.code_dim), mi::ClubEstimator(c.code_dim, c.code_dim)},
      club_av(c.code_dim, c.code_dim),
      club_te(c.code_dim, c.code_dim),
      codebook(Tensor2(c.codebook_size, c.code_dim)),
      ema(vq::EmaState::for_codebook(codebook)),
      config_(c) {
  if (c.audio_dim == 0 || c.video_dim == 0 || c.text_dim == 0 || c.code_dim == 0 || c.hidden == 0 ||
      c.context == 0 || c.horizon == 0)
    throw ValidationError(kModule, "model dimensions must be positive");
}

void FcidModel::init(Rng& rng, double gamma, double ema_epsilon) {
  for (auto& m : fine_general) m.init(rng);
  for (auto& m : fine_specific) m.init(rng);
  project_av.init(rng);
  project_te.init(rng);
  coarse_general_av.init(rng);
  coarse_general_te.init(rng);
  coarse_specific_av.init(rng);
  coarse_specific_te.init(rng);
  for (auto& m : decoder) m.init(rng);
  for (auto& m : cpc) m.init(rng);
  for (auto& m : club_fine) m.init(rng);
  club_av.init(rng);
  club_te.init(rng);
  codebook = Codebook::random(config_.codebook_size, config_.code_dim, rng);
  ema = vq::EmaState::for_codebook(codebook, gamma, ema_epsilon);
}

ParamStore FcidModel::parameters() {
  ParamStore store;
  fine_general[0].register_params(store, "fine_general.audio");
  fine_general[1].register_params(store, "fine_general.video");
  fine_specific[0].register_params(store, "fine_specific.audio");
  fine_specific[1].register_params(store, "fine_specific.video");
  project_av.register_params(store, "project.av");
  project_te.register_params(store, "project.te");
  coarse_general_av.register_params(store, "coarse_general.av");
  coarse_general_te.register_params(store, "coarse_general.te");
  coarse_specific_av.register_params(store, "coarse_specific.av");
  coarse_specific_te.register_params(store, "coarse_specific.te");
  decoder[0].register_params(store, "decoder.audio");
  decoder[1].register_params(store, "decoder.video");
  decoder[2].register_params(store, "decoder.text");
  cpc[0].register_params(store, "cpc.audio");
  cpc[1].register_params(store, "cpc.video");
  return store;
}

ParamStore FcidModel::estimator_parameters() {
  ParamStore store;
  club_fine[0].register_params(store, "club.audio");
  club_fine[1].register_params(store, "club.video");
  club_av.register_params(store, "club.av");
  club_te.register_params(store, "club.te");
  return store;
}

FineForward FcidModel::forward_fine(const FeatureBatch& audio, const FeatureBatch& video) const {
  check_width(audio.rows(), config_.audio_dim, Modality::Audio);
  check_width(video.rows(), config_.video_dim, Modality::Video);
  const std::size_t steps = audio.steps(), n = audio.batch();
  return {FeatureBatch(steps, n, fine_general[0].forward(audio.rows())),
          FeatureBatch(steps, n, fine_general[1].forward(video.rows())),
          FeatureBatch(steps, n, fine_specific[0].forward(audio.rows())),
          FeatureBatch(steps, n, fine_specific[1].forward(video.rows()))};
}

CoarseForward FcidModel::forward_coarse(const FineForward& fine, const Tensor2& text) const {
  check_width(text, config_.text_dim, Modality::Text);
  if (fine.general_audio.dim() != config_.code_dim || fine.general_video.dim() != config_.code_dim)
    throw ValidationError(kModule, "fine features do not match the code dimension");
  CoarseForward out;
  out.projected[0] = project_av.forward(fine.general_audio.time_mean());
  out.projected[1] = project_av.forward(fine.general_video.time_mean());
  out.projected[2] = project_te.forward(text);
  for (std::size_t m = 0; m < 3; ++m) {
    const Mlp2& general = m < 2 ? coarse_general_av : coarse_general_te;
    const Mlp2& specific = m < 2 ? coarse_specific_av : coarse_specific_te;
    out.general[m] = general.forward(out.projected[m]);
    out.specific[m] = specific.forward(out.projected[m]);
    out.codes[m] = vq::quantize(out.general[m], codebook);
  }
  return out;
}

Objective FcidModel::objective(const Batch& batch, const TrainConfig& cfg, std::size_t cpc_steps, bool backward,
                               const FrozenCodes* frozen) {
  check_batch(batch, config_);
  const std::size_t steps = batch.audio.steps(), n = batch.size(), d = config_.code_dim;
  if (n < 2) throw ValidationError(kModule, "training batch needs at least 2 samples");
  const std::array<const FeatureBatch*, 2> inputs{&batch.audio, &batch.video};

  Objective out;
  std::array<Mlp2::Cache, 2> fine_gc, fine_sc;
  std::array<FeatureBatch, 2> f, fs;
  for (std::size_t m = 0; m < 2; ++m) {
    f[m] = FeatureBatch(steps, n, fine_general[m].forward(inputs[m]->rows(), &fine_gc[m]));
    fs[m] = FeatureBatch(steps, n, fine_specific[m].forward(inputs[m]->rows(), &fine_sc[m]));
  }

  std::array<Tensor2, 2> pooled{f[0].time_mean(), f[1].time_mean()};
  std::array<Mlp2::Cache, 3> coarse_gc, coarse_sc;
  std::array<Tensor2, 3> quantized;
  CoarseForward& c = out.coarse;
  for (std::size_t m = 0; m < 3; ++m) {
    c.projected[m] = m < 2 ? project_av.forward(pooled[m]) : project_te.forward(batch.text);
    const Mlp2& general = m < 2 ? coarse_general_av : coarse_general_te;
    const Mlp2& specific = m < 2 ? coarse_specific_av : coarse_specific_te;
    c.general[m] = general.forward(c.projected[m], &coarse_gc[m]);
    c.specific[m] = specific.forward(c.projected[m], &coarse_sc[m]);
    if (frozen != nullptr) {
      vq::QuantizationResult& r = c.codes[m];
      r.indices = frozen->indices[m];
      r.quantized = c.general[m] + frozen->offsets[m];
      quantized[m] = r.quantized;
    } else {
      c.codes[m] = vq::quantize(c.general[m], codebook);
      quantized[m] = vq::straight_through(c.general[m], c.codes[m].quantized);
    }
  }

  mi::LossReport& report = out.report;
  std::array<Tensor2, 2> df{Tensor2(steps * n, d), Tensor2(steps * n, d)};
  std::array<Tensor2, 2> dfs = df;
  std::array<Tensor2, 3> dgen{Tensor2(n, d), Tensor2(n, d), Tensor2(n, d)};
  std::array<Tensor2, 3> dspec = dgen;
  std::array<Tensor2, 3> dq = dgen;

  const auto ab = mi::cpc_loss(f[0], f[1], cpc[0], cpc_steps, backward);
  const auto ba = mi::cpc_loss(f[1], f[0], cpc[1], cpc_steps, backward);
  report.cpc = ab.value + ba.value;
  if (backward) {
    df[0] += ab.grad_source;
    df[0] += ba.grad_target;
    df[1] += ab.grad_target;
    df[1] += ba.grad_source;
  }

  for (std::size_t m = 0; m < 2; ++m) {
    const auto nce = mi::infonce_loss(c.general[m], c.general[2], cfg.tau);
    report.nce += nce.value;
    dgen[m] += nce.grad_first;
    dgen[2] += nce.grad_second;
  }

  const std::array<bool, 2> fine_flags{cfg.use_club_a, cfg.use_club_v};
  for (std::size_t m = 0; m < 2; ++m) {
    if (!fine_flags[m]) continue;
    const auto r = mi::club_estimate(f[m], fs[m], club_fine[m], backward);
    // A negative estimate only reflects estimator lag; it is not minimized further.
    if (r.value <= 0.0) continue;
    report.club_fine += r.value;
    if (backward) {
      df[m] += r.grad_general;
      dfs[m] += r.grad_specific;
    }
  }
  for (std::size_t m = 0; m < 3; ++m) {
    if (m < 2 ? !cfg.use_club_av : !cfg.use_club_te) continue;
    auto& est = m < 2 ? club_av : club_te;
    const auto r = mi::club_estimate(FeatureBatch(1, n, c.general[m]), FeatureBatch(1, n, c.specific[m]), est, backward);
    if (r.value <= 0.0) continue;
    report.club_coarse += r.value;
    if (backward) {
      dgen[m] += r.grad_general;
      dspec[m] += r.grad_specific;
    }
  }

  if (cfg.use_commit) {
    for (std::size_t m = 0; m < 3; ++m) {
      const Tensor2 target = gather_rows(codebook.codes(), c.codes[m].indices);
      const auto commit = vq::commitment_loss(c.general[m], target, cfg.beta);
      report.commit += commit.value;
      dgen[m] += commit.grad_features;
    }
  }

  if (cfg.use_recon) {
    for (std::size_t m = 0; m < 3; ++m) {
      Mlp2::Cache cache;
      if (m < 2) {
        const Tensor2 code_rows = repeat_steps(quantized[m], steps);
        const Tensor2 specific_rows = repeat_steps(c.specific[m], steps);
        const Tensor2 input = hconcat({&code_rows, &specific_rows, &fs[m].rows()});
        const auto loss = mi::reconstruction_loss(inputs[m]->rows(), decoder[m].forward(input, &cache));
        report.recon += loss.value;
        if (!backward) continue;
        const Tensor2 dinput = decoder[m].backward(cache, loss.grad_decoded);
        dq[m] += sum_steps(slice_cols(dinput, 0, d), steps);
        dspec[m] += sum_steps(slice_cols(dinput, d, 2 * d), steps);
        dfs[m] += slice_cols(dinput, 2 * d, 3 * d);
      } else {
        const Tensor2 input = hconcat({&quantized[m], &c.specific[m]});
        const auto loss = mi::reconstruction_loss(batch.text, decoder[m].forward(input, &cache));
        report.recon += loss.value;
        if (!backward) continue;
        const Tensor2 dinput = decoder[m].backward(cache, loss.grad_decoded);
        dq[m] += slice_cols(dinput, 0, d);
        dspec[m] += slice_cols(dinput, d, 2 * d);
      }
    }
  }
  report.total = mi::total_loss(report);

  out.fine = {f[0], f[1], fs[0], fs[1]};
  if (!backward) return out;

  for (std::size_t m = 0; m < 3; ++m) {
    // The quantized output passes its gradient straight to the encoder, both
    // in live mode (straight-through) and frozen mode (constant offset).
    dgen[m] += vq::straight_through_backward(dq[m]);
    Mlp2& general = m < 2 ? coarse_general_av : coarse_general_te;
    Mlp2& specific = m < 2 ? coarse_specific_av : coarse_specific_te;
    Tensor2 dproj = general.backward(coarse_gc[m], dgen[m]);
    dproj += specific.backward(coarse_sc[m], dspec[m]);
    if (m < 2) {
      const Tensor2 dpool = project_av.backward(pooled[m], dproj) * (1.0 / static_cast<double>(steps));
      df[m] += repeat_steps(dpool, steps);
    } else {
      project_te.backward(batch.text, dproj);
    }
  }
  for (std::size_t m = 0; m < 2; ++m) {
    fine_general[m].backward(fine_gc[m], df[m]);
    fine_specific[m].backward(fine_sc[m], dfs[m]);
  }
  return out;
}

Encoding FcidModel::encode(const Batch& batch, Modality m, const DimensionMask* mask, vq::MaskMode mode) const {
  if (mask != nullptr && mask->dim() != config_.code_dim)
    throw ValidationError(kModule, "mask dimension does not match the code dimension");
  Encoding e;
  if (m == Modality::Text) {
    check_width(batch.text, config_.text_dim, m);
    e.fine_general = project_te.forward(batch.text);
    e.general = coarse_general_te.forward(e.fine_general);
    e.specific = coarse_specific_te.forward(e.fine_general);
    e.fine_specific = e.specific;
  } else {
    const std::size_t k = index(m);
    const FeatureBatch& x = k == 0 ? batch.audio : batch.video;
    check_width(x.rows(), config_.input_dim(m), m);
    e.fine_general = FeatureBatch(x.steps(), x.batch(), fine_general[k].forward(x.rows())).time_mean();
    e.fine_specific = FeatureBatch(x.steps(), x.batch(), fine_specific[k].forward(x.rows())).time_mean();
    const Tensor2 projected = project_av.forward(e.fine_general);
    e.general = coarse_general_av.forward(projected);
    e.specific = coarse_specific_av.forward(projected);
  }
  const bool masked_distance = mask != nullptr && mode == vq::MaskMode::MaskedDistance;
  e.codes = vq::quantize(e.general, codebook, masked_distance ? mask : nullptr);
  e.emitted = mask != nullptr ? mask->apply(e.codes.quantized) : e.codes.quantized;
  return e;
}

// ---------------------------------------------------------------- trainer

Trainer::Trainer(FcidModel& model, const TrainConfig& config) : model_(model), config_(config), rng_(config.seed) {
  if (config.batch_size < 2) throw ValidationError(kModule, "batch size must be at least 2");
  if (!(config.learning_rate >= 0.0) || !(config.momentum >= 0.0 && config.momentum < 1.0))
    throw ValidationError(kModule, "learning rate must be >= 0 and momentum in [0, 1)");
  const ParamStore store = model_.parameters();
  for (const auto& entry : store.entries())
    velocity_.emplace_back(entry.param->value.rows(), entry.param->value.cols());
}

mi::LossReport Trainer::step(const Batch& batch) {
  const std::size_t t = mi::draw_cpc_time(batch.audio.steps(), model_.config().horizon, rng_);
  ParamStore store = model_.parameters();
  store.zero_grad();
  Objective obj = model_.objective(batch, config_, t, true);

  const auto& entries = store.entries();
  double factor = 1.0;
  if (config_.clip_norm > 0.0) {
    double norm = 0.0;
    for (const auto& e : entries) norm += squared_norm(e.param->grad.values());
    norm = std::sqrt(norm);
    if (norm > config_.clip_norm) factor = config_.clip_norm / norm;
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Param& p = *entries[k].param;
    Tensor2& v = velocity_[k];
    v *= config_.momentum;
    v -= p.grad * (config_.learning_rate * factor);
    p.value += v;
  }

  std::array<vq::Assignment, 3> assignments;
  for (std::size_t m = 0; m < 3; ++m) assignments[m] = {&obj.coarse.general[m], obj.coarse.codes[m].indices};
  model_.codebook = vq::mmema_update(model_.ema, model_.codebook, assignments);

  const double lr = config_.club_learning_rate, clip = config_.club_clip_norm;
  const std::array<Tensor2, 2> av_general{obj.coarse.general[0], obj.coarse.general[1]};
  const std::array<Tensor2, 2> av_specific{obj.coarse.specific[0], obj.coarse.specific[1]};
  mi::club_fit_step(model_.club_fine[0], obj.fine.general_audio.rows(), obj.fine.specific_audio.rows(), lr, clip);
  mi::club_fit_step(model_.club_fine[1], obj.fine.general_video.rows(), obj.fine.specific_video.rows(), lr, clip);
  mi::club_fit_step(model_.club_av, vconcat(av_general), vconcat(av_specific), lr, clip);
  mi::club_fit_step(model_.club_te, obj.coarse.general[2], obj.coarse.specific[2], lr, clip);
  return obj.report;
}

std::vector<mi::LossReport> Trainer::fit(const Batch& data) {
  check_batch(data, model_.config());
  if (data.size() < config_.batch_size)
    throw ValidationError(kModule, "dataset has fewer samples than one batch");
  std::vector<mi::LossReport> trajectory;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    const auto order = rng_.permutation(data.size());
    // Incomplete trailing batches are dropped so every step sees the same batch size.
    for (std::size_t start = 0; start + config_.batch_size <= order.size(); start += config_.batch_size) {
      const std::span<const std::size_t> ids(order.data() + start, config_.batch_size);
      trajectory.push_back(step(data.gather(ids)));
    }
  }
  return trajectory;
}

// ---------------------------------------------------------------- checkpoint

namespace {

struct Blob {
  std::string name;
  Tensor2* value;
};

std::vector<Blob> checkpoint_blobs(FcidModel& model, Tensor2& codebook, Tensor2& cluster_size) {
  std::vector<Blob> blobs;
  const ParamStore params = model.parameters();
  const ParamStore estimators = model.estimator_parameters();
  for (const auto& e : params.entries()) blobs.push_back({e.name, &e.param->value});
  for (const auto& e : estimators.entries()) blobs.push_back({e.name, &e.param->value});
  blobs.push_back({"codebook", &codebook});
  blobs.push_back({"ema.cluster_size", &cluster_size});
  blobs.push_back({"ema.cluster_sum", &model.ema.cluster_sum});
  return blobs;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, FcidModel& model, const std::string& metadata_json) {
  Tensor2 codebook = model.codebook.codes();
  Tensor2 cluster_size(1, model.ema.cluster_size.size(), model.ema.cluster_size);
  const auto blobs = checkpoint_blobs(model, codebook, cluster_size);

  nlohmann::json header;
  header["model"] = config_to_json(model.config());
  try {
    header["metadata"] = nlohmann::json::parse(metadata_json);
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(kModule, "checkpoint metadata is not valid JSON");
  }
  header["ema"] = {{"decay", model.ema.decay}, {"epsilon", model.ema.epsilon}};
  header["blobs"] = nlohmann::json::array();
  for (const auto& b : blobs)
    header["blobs"].push_back({{"name", b.name}, {"rows", b.value->rows()}, {"cols", b.value->cols()}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError(kModule, "cannot write " + path.string());
  out.write(kMagic, 4);
  io::write_u32(out, kVersion);
  io::write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : blobs)
    for (double v : b.value->values()) io::write_f32(out, v);
  if (!out) throw RuntimeError(kModule, "failed writing " + path.string());
}

FcidModel load_checkpoint(const std::filesystem::path& path, std::string* metadata_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError(kModule, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw RuntimeError(kModule, "bad magic in " + path.string());
  if (io::read_u32(in, kModule) != kVersion) throw RuntimeError(kModule, "unsupported checkpoint version");
  const std::uint32_t length = io::read_u32(in, kModule);
  std::string text(length, '\0');
  in.read(text.data(), length);
  if (!in) throw RuntimeError(kModule, "truncated payload");

  nlohmann::json header;
  ModelConfig config;
  try {
    header = nlohmann::json::parse(text);
    config = config_from_json(header.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeError(kModule, std::string("malformed checkpoint header: ") + e.what());
  }
  FcidModel model(config);
  Tensor2 codebook(config.codebook_size, config.code_dim);
  Tensor2 cluster_size(1, config.codebook_size);
  const auto blobs = checkpoint_blobs(model, codebook, cluster_size);
  const auto& listed = header.at("blobs");
  if (listed.size() != blobs.size()) throw ValidationError(kModule, "checkpoint blob list does not match the model");
  for (std::size_t k = 0; k < blobs.size(); ++k) {
    const auto& entry = listed[k];
    if (entry.at("name").get<std::string>() != blobs[k].name ||
        entry.at("rows").get<std::size_t>() != blobs[k].value->rows() ||
        entry.at("cols").get<std::size_t>() != blobs[k].value->cols())
      throw ValidationError(kModule, "checkpoint blob '" + blobs[k].name + "' does not match the model");
    for (double& v : blobs[k].value->values()) v = io::read_f32(in, kModule);
  }
  model.codebook = Codebook(std::move(codebook));
  model.ema.cluster_size.assign(cluster_size.values().begin(), cluster_size.values().end());
  model.ema.decay = header.at("ema").at("decay").get<double>();
  model.ema.epsilon = header.at("ema").at("epsilon").get<double>();
  if (metadata_json != nullptr) *metadata_json = header.at("metadata").dump();
  return model;
}

}  // namespace fcid::model
