#include "fcid/eval.hpp"

#include <algorithm>
#include <cmath>

#include "fcid/error.hpp"
#include "fcid/io.hpp"
#include "fcid/toc.hpp"

namespace fcid::eval {
namespace {

constexpr const char* kModule = "eval-harness";

std::vector<std::size_t> gather(const std::vector<std::size_t>& values, std::span<const std::size_t> idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(values[i]);
  return out;
}

Tensor2 normalize_rows(const Tensor2& x) {
  Tensor2 out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double norm = std::sqrt(squared_norm(out.row(i)));
    if (norm == 0.0) throw ValidationError(kModule, "retrieval feature " + std::to_string(i) + " has zero norm");
    for (double& v : out.row(i)) v /= norm;
  }
  return out;
}

void require_trained(const model::FcidModel& model) {
  // A model that was never initialized has an all-zero codebook.
  for (double v : model.codebook.codes().values())
    if (v != 0.0) return;
  throw ValidationError(kModule, "model is untrained (all-zero codebook)");
}

}  // namespace

// ---------------------------------------------------------------- classifier

Tensor2 LinearClassifier::standardize(const Tensor2& features) const {
  Tensor2 out = features;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t k = 0; k < out.cols(); ++k) out(i, k) = (out(i, k) - mean_(0, k)) / scale_(0, k);
  return out;
}

void LinearClassifier::fit(const Tensor2& features, std::span<const std::size_t> labels, std::size_t classes,
                           Options options) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n == 0 || labels.size() != n) throw ValidationError(kModule, "classifier needs one label per feature row");
  if (classes < 2) throw ValidationError(kModule, "classifier needs at least 2 classes");
  for (std::size_t y : labels)
    if (y >= classes) throw ValidationError(kModule, "label out of range");

  mean_ = col_mean(features);
  scale_ = Tensor2(1, d);
  for (std::size_t k = 0; k < d; ++k) {
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (features(i, k) - mean_(0, k)) * (features(i, k) - mean_(0, k));
    const double sd = std::sqrt(var / static_cast<double>(n));
    scale_(0, k) = sd > 1e-12 ? sd : 1.0;
  }
  const Tensor2 x = standardize(features);
  weight_ = Tensor2(d, classes);
  bias_ = Tensor2(1, classes);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    Tensor2 g = affine_forward(x, weight_, bias_);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = g.row(i);
      const double top = *std::ranges::max_element(row);
      double z = 0.0;
      for (double& v : row) z += (v = std::exp(v - top));
      for (double& v : row) v /= z;
      row[labels[i]] -= 1.0;
      for (double& v : row) v /= static_cast<double>(n);
    }
    weight_ -= matmul_tn(x, g) * options.learning_rate;
    bias_ -= col_sum(g) * options.learning_rate;
  }
}

std::vector<std::size_t> LinearClassifier::predict(const Tensor2& features) const {
  if (weight_.empty()) throw ValidationError(kModule, "classifier has not been fitted");
  if (features.cols() != weight_.rows()) throw ValidationError(kModule, "classifier input width mismatch");
  const Tensor2 scores = affine_forward(standardize(features), weight_, bias_);
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    out[i] = static_cast<std::size_t>(std::ranges::max_element(row) - row.begin());
  }
  return out;
}

double LinearClassifier::accuracy(const Tensor2& features, std::span<const std::size_t> labels) const {
  return eval::accuracy(predict(features), labels);
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size() || labels.empty())
    throw ValidationError(kModule, "accuracy needs equal, non-empty prediction and label lists");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------- CMG

CmgResult cmg_run(const model::FcidModel& model, const data::Dataset& dataset, const data::Split& split,
                  model::Modality m1, model::Modality m2, const DimensionMask* mask, vq::MaskMode mode) {
  require_trained(model);
  const model::Batch train = dataset.inputs.gather(split.train);
  const model::Batch test = dataset.inputs.gather(split.test);
  const auto train_labels = gather(dataset.labels, split.train);
  const auto test_labels = gather(dataset.labels, split.test);

  LinearClassifier classifier;
  classifier.fit(model.encode(train, m1, mask, mode).emitted, train_labels, dataset.config.classes);
  CmgResult out{m1, m2, 0.0, 0.0, std::nullopt};
  out.train_accuracy = classifier.accuracy(model.encode(test, m1, mask, mode).emitted, test_labels);
  out.test_accuracy = m1 == m2 ? out.train_accuracy
                               : classifier.accuracy(model.encode(test, m2, mask, mode).emitted, test_labels);
  if (mask != nullptr) out.mask_q = mask->q();
  return out;
}

// ---------------------------------------------------------------- retrieval

std::vector<std::size_t> retrieval_ranks(const Tensor2& queries, const Tensor2& candidates) {
  if (queries.rows() != candidates.rows() || queries.cols() != candidates.cols())
    throw ValidationError(kModule, "retrieval needs paired queries and candidates of equal width");
  const Tensor2 sim = matmul_nt(normalize_rows(queries), normalize_rows(candidates));
  std::vector<std::size_t> ranks(queries.rows());
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    const double own = sim(i, i);
    std::size_t rank = 1;
    for (std::size_t j = 0; j < sim.cols(); ++j)
      if (sim(i, j) > own || (sim(i, j) == own && j < i)) ++rank;
    ranks[i] = rank;
  }
  return ranks;
}

std::vector<double> recall_at_k(const Tensor2& first, const Tensor2& second, std::span<const std::size_t> ks) {
  for (std::size_t k : ks)
    if (k < 1 || k > first.rows()) throw ValidationError(kModule, "K must lie in [1, candidate count]");
  const auto forward = retrieval_ranks(first, second);
  const auto backward = retrieval_ranks(second, first);
  std::vector<double> out;
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t r : forward) hits += r <= k ? 1 : 0;
    for (std::size_t r : backward) hits += r <= k ? 1 : 0;
    out.push_back(static_cast<double>(hits) / static_cast<double>(2 * first.rows()));
  }
  return out;
}

RetrievalResult retrieval_eval(const model::FcidModel& model, const data::Dataset& dataset, const data::Split& split,
                               model::Modality first, model::Modality second, std::span<const std::size_t> ks,
                               std::size_t pool, bool use_codes) {
  require_trained(model);
  if (pool < 1 || pool > split.test.size()) throw ValidationError(kModule, "retrieval pool exceeds the test split");
  const std::span<const std::size_t> ids(split.test.data(), pool);
  const model::Batch batch = dataset.inputs.gather(ids);
  const auto a = model.encode(batch, first);
  const auto b = model.encode(batch, second);
  RetrievalResult out{first, second, {ks.begin(), ks.end()}, {}, pool};
  out.recall = use_codes ? recall_at_k(a.emitted, b.emitted, ks) : recall_at_k(a.general, b.general, ks);
  return out;
}

// ---------------------------------------------------------------- activation

const char* category_name(Category c) {
  switch (c) {
    case Category::Red: return "red";
    case Category::Green: return "green";
    case Category::Blue: return "blue";
    case Category::Unused: return "unused";
  }
  return "?";
}

Category categorize(const std::array<std::size_t, 3>& counts) {
  const std::size_t total = counts[0] + counts[1] + counts[2];
  if (total == 0) return Category::Unused;
  // Integer comparisons: share > 0.95 <=> 100·c > 95·total, share >= 0.05 <=> 100·c >= 5·total.
  for (std::size_t c : counts)
    if (100 * c > 95 * total) return Category::Red;
  for (std::size_t c : counts)
    if (100 * c < 5 * total) return Category::Blue;
  return Category::Green;
}

ActivationStats activation_stats_from_counts(std::vector<std::array<std::size_t, 3>> counts) {
  ActivationStats out;
  out.counts = std::move(counts);
  for (const auto& c : out.counts) {
    const Category cat = categorize(c);
    out.categories.push_back(cat);
    ++out.totals[static_cast<std::size_t>(cat)];
  }
  return out;
}

ActivationStats activation_stats(const model::FcidModel& model, const data::Dataset& dataset) {
  require_trained(model);
  std::vector<std::array<std::size_t, 3>> counts(model.codebook.size(), std::array<std::size_t, 3>{});
  for (model::Modality m : model::kModalities)
    for (std::size_t idx : model.encode(dataset.inputs, m).codes.indices) ++counts[idx][static_cast<std::size_t>(m)];
  return activation_stats_from_counts(std::move(counts));
}

// ---------------------------------------------------------------- masked reconstruction

Tensor2 Autoencoder::reconstruct(const Tensor2& x, const DimensionMask* mask, vq::MaskMode mode) const {
  const Tensor2 z = encoder.forward(x);
  const bool masked_distance = mask != nullptr && mode == vq::MaskMode::MaskedDistance;
  const auto codes = vq::quantize(z, codebook, masked_distance ? mask : nullptr);
  return decoder.forward(mask != nullptr ? mask->apply(codes.quantized) : codes.quantized);
}

double Autoencoder::mse(const Tensor2& x, const DimensionMask* mask, vq::MaskMode mode) const {
  return mi::reconstruction_loss(x, reconstruct(x, mask, mode)).value;
}

Tensor2 autoencoder_features(const AutoencoderConfig& config, std::uint64_t seed) {
  Rng maps(config.seed);
  Tensor2 mixing(config.latent_factors, config.input_dim);
  for (double& v : mixing.values()) v = maps.normal() / std::sqrt(static_cast<double>(config.latent_factors));
  Rng rng(seed);
  Tensor2 z(config.samples, config.latent_factors);
  for (std::size_t i = 0; i < config.samples; ++i)
    for (std::size_t k = 0; k < config.latent_factors; ++k) z(i, k) = std::pow(0.7, static_cast<double>(k)) * 1.5 * rng.normal();
  Tensor2 x = matmul(z, mixing);
  for (double& v : x.values()) v += config.noise * rng.normal();
  return x;
}

Autoencoder train_autoencoder(const AutoencoderConfig& config, const Tensor2& features) {
  if (features.cols() != config.input_dim) throw ValidationError(kModule, "autoencoder input width mismatch");
  if (features.rows() < config.batch_size) throw ValidationError(kModule, "fewer samples than one batch");
  Rng rng(config.seed);
  Autoencoder ae{Affine(config.input_dim, config.code_dim), Affine(config.code_dim, config.input_dim),
                 Codebook(Tensor2(config.codebook_size, config.code_dim)), {}};
  ae.encoder.init(rng);
  ae.decoder.init(rng);
  ae.codebook = Codebook::random(config.codebook_size, config.code_dim, rng);
  ae.ema = vq::EmaState::for_codebook(ae.codebook);
  ParamStore store;
  ae.encoder.register_params(store, "encoder");
  ae.decoder.register_params(store, "decoder");

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = rng.permutation(features.rows());
    for (std::size_t start = 0; start + config.batch_size <= order.size(); start += config.batch_size) {
      const Tensor2 x = gather_rows(features, std::span<const std::size_t>(order.data() + start, config.batch_size));
      store.zero_grad();
      const Tensor2 z = ae.encoder.forward(x);
      const auto codes = vq::quantize(z, ae.codebook);
      const Tensor2 zq = vq::straight_through(z, codes.quantized);
      const auto recon = mi::reconstruction_loss(x, ae.decoder.forward(zq));
      const auto commit = vq::commitment_loss(z, codes.quantized, config.beta);
      Tensor2 dz = vq::straight_through_backward(ae.decoder.backward(zq, recon.grad_decoded));
      dz += commit.grad_features;
      ae.encoder.backward(x, dz);
      store.apply_gradient(-config.learning_rate);
      const std::array<vq::Assignment, 1> assignment{{{&z, codes.indices}}};
      ae.codebook = vq::mmema_update(ae.ema, ae.codebook, assignment);
    }
  }
  return ae;
}

std::vector<MaskedReconRow> masked_recon_sweep(const Autoencoder& ae, const Tensor2& features,
                                               std::span<const double> mask_percents, std::size_t n_random,
                                               std::uint64_t seed, double lambda, vq::MaskMode mode) {
  const std::size_t d = ae.codebook.dim();
  const auto scores = toc::toc_scores(ae.codebook, lambda);
  Rng rng(seed);
  std::vector<MaskedReconRow> rows;
  for (double percent : mask_percents) {
    if (!(percent >= 0.0 && percent < 100.0)) throw ValidationError(kModule, "mask percent must lie in [0, 100)");
    const auto q = static_cast<std::size_t>(std::llround(static_cast<double>(d) * (1.0 - percent / 100.0)));
    if (q < 1) throw ValidationError(kModule, "mask ratio leaves no dimensions");
    MaskedReconRow row{percent, q};
    const DimensionMask toc_mask = toc::select_dims(scores, q);
    row.toc_mse = ae.mse(features, &toc_mask, mode);
    double total = 0.0;
    for (std::size_t trial = 0; trial < n_random; ++trial) {
      const auto perm = rng.permutation(d);
      const DimensionMask mask(d, std::span<const std::size_t>(perm.data(), q));
      const double mse = ae.mse(features, &mask, mode);
      total += mse;
      if (mse > row.toc_mse) ++row.count;
    }
    row.trials = n_random;
    row.random_mean_mse = n_random > 0 ? total / static_cast<double>(n_random) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------- similarity and probes

SimilarityReport similarity_report(const Codebook& codebook, const DimensionMask& mask) {
  SimilarityReport out;
  out.before = toc::average_similarity(codebook);
  out.after = toc::average_similarity(codebook, &mask);
  out.matrix_before = toc::cosine_similarity_matrix(codebook);
  out.matrix_after = toc::cosine_similarity_matrix(codebook, &mask);
  return out;
}

ProbeResult probe_disentanglement(const model::FcidModel& model, const data::Dataset& dataset,
                                  const data::Split& split) {
  const model::Batch train = dataset.inputs.gather(split.train);
  const model::Batch test = dataset.inputs.gather(split.test);
  const auto train_labels = gather(dataset.labels, split.train);
  const auto test_labels = gather(dataset.labels, split.test);
  const std::size_t classes = dataset.config.classes;

  ProbeResult out;
  for (model::Modality m : {model::Modality::Audio, model::Modality::Video}) {
    const auto quadrants = data::quadrant_labels(m == model::Modality::Audio ? dataset.latents.audio
                                                                             : dataset.latents.video);
    const auto train_q = gather(quadrants, split.train);
    const auto test_q = gather(quadrants, split.test);
    const auto enc_train = model.encode(train, m);
    const auto enc_test = model.encode(test, m);

    LinearClassifier probe;
    probe.fit(enc_train.fine_general, train_labels, classes);
    out.general_to_shared += 0.5 * probe.accuracy(enc_test.fine_general, test_labels);
    probe.fit(enc_train.fine_general, train_q, 4);
    out.general_to_specific += 0.5 * probe.accuracy(enc_test.fine_general, test_q);
    probe.fit(enc_train.fine_specific, train_labels, classes);
    out.specific_to_shared += 0.5 * probe.accuracy(enc_test.fine_specific, test_labels);
  }
  out.shared_chance = 1.0 / static_cast<double>(classes);
  out.specific_chance = 0.25;
  return out;
}

// ---------------------------------------------------------------- CSV

void save_cmg_csv(const std::filesystem::path& path, const std::vector<CmgResult>& rows) {
  std::string text = "train_modality,test_modality,mask_q,train_accuracy,test_accuracy\n";
  for (const auto& r : rows)
    text += std::string(model::modality_name(r.train_modality)) + "," +
            std::string(model::modality_name(r.test_modality)) + "," +
            (r.mask_q ? std::to_string(*r.mask_q) : std::string("none")) + "," + io::format_real(r.train_accuracy) +
            "," + io::format_real(r.test_accuracy) + "\n";
  io::write_text(path, text);
}

void save_retrieval_csv(const std::filesystem::path& path, const std::vector<RetrievalResult>& rows) {
  std::string text = "first,second,pool,k,recall\n";
  for (const auto& r : rows)
    for (std::size_t k = 0; k < r.ks.size(); ++k)
      text += std::string(model::modality_name(r.first)) + "," + std::string(model::modality_name(r.second)) + "," +
              std::to_string(r.pool) + "," + std::to_string(r.ks[k]) + "," + io::format_real(r.recall[k]) + "\n";
  io::write_text(path, text);
}

void save_activation_csv(const std::filesystem::path& path, const ActivationStats& stats) {
  std::string text = "code,audio,video,text,category\n";
  for (std::size_t i = 0; i < stats.counts.size(); ++i)
    text += std::to_string(i) + "," + std::to_string(stats.counts[i][0]) + "," + std::to_string(stats.counts[i][1]) +
            "," + std::to_string(stats.counts[i][2]) + "," + category_name(stats.categories[i]) + "\n";
  io::write_text(path, text);
}

void save_masked_recon_csv(const std::filesystem::path& path, const std::vector<MaskedReconRow>& rows) {
  std::string text = "mask_percent,q,toc_mse,random_mean_mse,count,trials\n";
  for (const auto& r : rows)
    text += io::format_real(r.mask_percent) + "," + std::to_string(r.q) + "," + io::format_real(r.toc_mse) + "," +
            io::format_real(r.random_mean_mse) + "," + std::to_string(r.count) + "," + std::to_string(r.trials) + "\n";
  io::write_text(path, text);
}

void save_probe_csv(const std::filesystem::path& path, const ProbeResult& p) {
  std::string text = "probe,accuracy,chance\n";
  text += "general_to_shared," + io::format_real(p.general_to_shared) + "," + io::format_real(p.shared_chance) + "\n";
  text += "general_to_specific," + io::format_real(p.general_to_specific) + "," + io::format_real(p.specific_chance) + "\n";
  text += "specific_to_shared," + io::format_real(p.specific_to_shared) + "," + io::format_real(p.shared_chance) + "\n";
  io::write_text(path, text);
}

void save_matrix_csv(const std::filesystem::path& path, const Tensor2& matrix) {
  std::string text;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    for (std::size_t j = 0; j < matrix.cols(); ++j) text += (j ? "," : "") + io::format_real(matrix(i, j));
    text += "\n";
  }
  io::write_text(path, text);
}

}  // namespace fcid::eval
