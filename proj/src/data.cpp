#include "fcid/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "fcid/error.hpp"
#include "fcid/io.hpp"
#include "fcid/rng.hpp"

namespace fcid::data {
namespace {

constexpr const char* kModule = "synth-data";

Tensor2 random_map(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor2 out(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : out.values()) v = scale * rng.normal();
  return out;
}

void fill_normal(std::span<double> out, Rng& rng) {
  for (double& v : out) v = rng.normal();
}

void validate(const SynthConfig& c) {
  if (c.samples < 1 || c.steps < 1 || c.classes < 1 || c.shared_dim < 1 || c.pairwise_dim < 1 ||
      c.specific_dim < 1 || c.audio_dim < 1 || c.video_dim < 1 || c.text_dim < 1)
    throw ValidationError(kModule, "all counts and dimensions must be at least 1");
  if (!(c.noise >= 0.0)) throw ValidationError(kModule, "noise level must be >= 0");
}

nlohmann::json config_to_json(const SynthConfig& c) {
  return {{"samples", c.samples},         {"steps", c.steps},         {"classes", c.classes},
          {"shared_dim", c.shared_dim},   {"pairwise_dim", c.pairwise_dim},
          {"specific_dim", c.specific_dim}, {"audio_dim", c.audio_dim}, {"video_dim", c.video_dim},
          {"text_dim", c.text_dim},       {"noise", c.noise},         {"seed", c.seed}};
}

SynthConfig config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.samples = j.at("samples").get<std::size_t>();
  c.steps = j.at("steps").get<std::size_t>();
  c.classes = j.at("classes").get<std::size_t>();
  c.shared_dim = j.at("shared_dim").get<std::size_t>();
  c.pairwise_dim = j.at("pairwise_dim").get<std::size_t>();
  c.specific_dim = j.at("specific_dim").get<std::size_t>();
  c.audio_dim = j.at("audio_dim").get<std::size_t>();
  c.video_dim = j.at("video_dim").get<std::size_t>();
  c.text_dim = j.at("text_dim").get<std::size_t>();
  c.noise = j.at("noise").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

io::TensorFile sequences_to_file(const FeatureBatch& x) {
  io::TensorFile f;
  f.dims = {static_cast<std::uint32_t>(x.batch()), static_cast<std::uint32_t>(x.steps()),
            static_cast<std::uint32_t>(x.dim())};
  f.values.reserve(x.rows().size());
  for (std::size_t i = 0; i < x.batch(); ++i)
    for (std::size_t t = 0; t < x.steps(); ++t)
      for (double v : x.at(t, i)) f.values.push_back(v);
  return f;
}

FeatureBatch sequences_from_file(const io::TensorFile& f, std::size_t n, std::size_t steps, std::size_t dim) {
  if (f.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(steps),
                                           static_cast<std::uint32_t>(dim)})
    throw ValidationError(kModule, "sequence tensor shape does not match the manifest");
  FeatureBatch x(steps, n, dim);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < steps; ++t)
      for (double& v : x.at(t, i)) v = f.values[k++];
  return x;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, std::size_t columns) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream cell_stream(line);
    std::string cell;
    while (std::getline(cell_stream, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) throw RuntimeError(kModule, "malformed row in " + path.filename().string());
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

Dataset generate(const SynthConfig& config) {
  validate(config);
  const std::size_t n = config.samples, steps = config.steps;
  const std::size_t ds = config.shared_dim, dp = config.pairwise_dim, dz = config.specific_dim;
  // One stream per ingredient, so that changing one dimension leaves the
  // draws of every unrelated factor untouched.
  Rng root(config.seed);
  Rng shared_rng = root.fork(), pairwise_rng = root.fork(), audio_rng = root.fork(), video_rng = root.fork(),
      text_rng = root.fork(), av_noise_rng = root.fork(), text_noise_rng = root.fork();
  Rng map_a_rng = root.fork(), map_v_rng = root.fork(), map_te_rng = root.fork(), drift_rng = root.fork();

  Tensor2 centres(config.classes, ds);
  for (double& v : centres.values()) v = 1.5 * shared_rng.normal();
  const Tensor2 map_a = random_map(config.audio_dim, ds + dp + dz, map_a_rng);
  const Tensor2 map_v = random_map(config.video_dim, ds + dp + dz, map_v_rng);
  const Tensor2 map_te = random_map(config.text_dim, ds + dz, map_te_rng);
  Tensor2 drift(2, std::max(config.audio_dim, config.video_dim));
  fill_normal(drift.values(), drift_rng);

  Dataset out;
  out.config = config;
  Latents& z = out.latents;
  z = {Tensor2(n, ds), Tensor2(n, dp), Tensor2(n, dz), Tensor2(n, dz), Tensor2(n, dz)};
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = shared_rng.uniform_index(config.classes);
    for (std::size_t k = 0; k < ds; ++k) z.shared(i, k) = centres(cls, k) + 0.5 * shared_rng.normal();
    fill_normal(z.pairwise.row(i), pairwise_rng);
    fill_normal(z.audio.row(i), audio_rng);
    fill_normal(z.video.row(i), video_rng);
    fill_normal(z.text.row(i), text_rng);
    for (Tensor2* t : {&z.shared, &z.pairwise, &z.audio, &z.video, &z.text})
      for (double& v : t->row(i)) v = io::round_to_f32(v);

    std::size_t nearest = 0;
    double best = 0.0;
    for (std::size_t c = 0; c < config.classes; ++c) {
      double dist = 0.0;
      for (std::size_t k = 0; k < ds; ++k) dist += (z.shared(i, k) - centres(c, k)) * (z.shared(i, k) - centres(c, k));
      if (c == 0 || dist < best) {
        best = dist;
        nearest = c;
      }
    }
    out.labels[i] = nearest;
  }

  FeatureBatch audio(steps, n, config.audio_dim), video(steps, n, config.video_dim);
  std::vector<double> latent(ds + dp + dz);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < steps; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(steps);
      const double ramp = steps > 1 ? static_cast<double>(t) / static_cast<double>(steps - 1) - 0.5 : 0.0;
      std::ranges::copy(z.shared.row(i), latent.begin());
      for (std::size_t k = 0; k < dp; ++k) latent[ds + k] = z.pairwise(i, k);
      for (std::size_t k = 0; k + 1 < dp; k += 2) {
        const double x = z.pairwise(i, k), y = z.pairwise(i, k + 1);
        latent[ds + k] = std::cos(angle) * x - std::sin(angle) * y;
        latent[ds + k + 1] = std::sin(angle) * x + std::cos(angle) * y;
      }
      for (std::size_t m = 0; m < 2; ++m) {
        const Tensor2& map = m == 0 ? map_a : map_v;
        const Tensor2& specific = m == 0 ? z.audio : z.video;
        for (std::size_t k = 0; k < dz; ++k) latent[ds + dp + k] = specific(i, k);
        auto row = (m == 0 ? audio : video).at(t, i);
        for (std::size_t r = 0; r < row.size(); ++r) {
          double v = dot(map.row(r), latent) + drift(m, r) * ramp;
          row[r] = io::round_to_f32(v + config.noise * av_noise_rng.normal());
        }
      }
    }
  }
  Tensor2 text(n, config.text_dim);
  std::vector<double> text_latent(ds + dz);
  for (std::size_t i = 0; i < n; ++i) {
    std::ranges::copy(z.shared.row(i), text_latent.begin());
    std::ranges::copy(z.text.row(i), text_latent.begin() + static_cast<std::ptrdiff_t>(ds));
    for (std::size_t r = 0; r < config.text_dim; ++r)
      text(i, r) = io::round_to_f32(dot(map_te.row(r), text_latent) + config.noise * text_noise_rng.normal());
  }
  out.inputs = {std::move(audio), std::move(video), std::move(text)};
  return out;
}

Split split(const std::vector<std::size_t>& labels, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw ValidationError(kModule, "split fractions must be >= 0");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw ValidationError(kModule, "split fractions must sum to 1");

  // Order samples by their fractional rank inside their class: every prefix
  // of this order then holds each class in proportion, within one sample.
  Rng rng(seed);
  std::size_t classes = 0;
  for (std::size_t y : labels) classes = std::max(classes, y + 1);
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  struct Keyed {
    double key;
    std::size_t label;
    std::size_t sample;
  };
  std::vector<Keyed> order;
  for (std::size_t c = 0; c < classes; ++c) {
    rng.shuffle(std::span<std::size_t>(members[c]));
    for (std::size_t r = 0; r < members[c].size(); ++r)
      order.push_back({(static_cast<double>(r) + 0.5) / static_cast<double>(members[c].size()), c, members[c][r]});
  }
  std::ranges::stable_sort(order, [](const Keyed& a, const Keyed& b) {
    return a.key < b.key || (a.key == b.key && a.label < b.label);
  });

  const std::size_t n = labels.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));
  Split out;
  for (std::size_t k = 0; k < n; ++k) {
    auto& target = k < n_train ? out.train : k < n_train + n_val ? out.val : out.test;
    target.push_back(order[k].sample);
  }
  std::ranges::sort(out.train);
  std::ranges::sort(out.val);
  std::ranges::sort(out.test);
  return out;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  io::save_tensor_file(dir / "audio.toct", sequences_to_file(ds.inputs.audio));
  io::save_tensor_file(dir / "video.toct", sequences_to_file(ds.inputs.video));
  const Tensor2& text = ds.inputs.text;
  io::save_tensor_file(dir / "text.toct",
                       {{static_cast<std::uint32_t>(text.rows()), static_cast<std::uint32_t>(text.cols())},
                        {text.values().begin(), text.values().end()}});

  std::string labels = "sample_id,label\n";
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    labels += std::to_string(i) + "," + std::to_string(ds.labels[i]) + "\n";
  io::write_text(dir / "labels.csv", labels);

  const Latents& z = ds.latents;
  const std::array<std::pair<const char*, const Tensor2*>, 5> factors{
      {{"z_avt", &z.shared}, {"z_av", &z.pairwise}, {"z_a", &z.audio}, {"z_v", &z.video}, {"z_te", &z.text}}};
  std::string latents = "sample_id,label";
  for (const auto& [name, t] : factors)
    for (std::size_t k = 0; k < t->cols(); ++k) latents += std::string(",") + name + "_" + std::to_string(k);
  latents += "\n";
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    latents += std::to_string(i) + "," + std::to_string(ds.labels[i]);
    for (const auto& [name, t] : factors)
      for (double v : t->row(i)) latents += "," + io::format_real(v);
    latents += "\n";
  }
  io::write_text(dir / "latents.csv", latents);

  nlohmann::json manifest;
  manifest["config"] = config_to_json(ds.config);
  for (const char* file : {"audio.toct", "video.toct", "text.toct", "labels.csv", "latents.csv"})
    manifest["checksums"][file] = io::file_checksum(dir / file);
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json"))
    throw RuntimeError(kModule, "no manifest.json in " + dir.string());
  nlohmann::json manifest;
  Dataset ds;
  try {
    manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
    ds.config = config_from_json(manifest.at("config"));
    for (const auto& [file, sum] : manifest.at("checksums").items())
      if (io::file_checksum(dir / file) != sum.get<std::string>())
        throw RuntimeError(kModule, "checksum mismatch for " + file);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed manifest: ") + e.what());
  }
  validate(ds.config);
  const SynthConfig& c = ds.config;
  const std::size_t n = c.samples;
  ds.inputs.audio = sequences_from_file(io::load_tensor_file(dir / "audio.toct"), n, c.steps, c.audio_dim);
  ds.inputs.video = sequences_from_file(io::load_tensor_file(dir / "video.toct"), n, c.steps, c.video_dim);
  const auto text = io::load_tensor_file(dir / "text.toct");
  if (text.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(c.text_dim)})
    throw ValidationError(kModule, "text tensor shape does not match the manifest");
  ds.inputs.text = Tensor2(n, c.text_dim, text.values);

  const std::size_t ds_ = c.shared_dim, dp = c.pairwise_dim, dz = c.specific_dim;
  const auto rows = read_csv(dir / "latents.csv", 2 + ds_ + dp + 3 * dz);
  if (rows.size() != n) throw ValidationError(kModule, "latents.csv row count does not match the manifest");
  Latents& z = ds.latents;
  z = {Tensor2(n, ds_), Tensor2(n, dp), Tensor2(n, dz), Tensor2(n, dz), Tensor2(n, dz)};
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = std::stoul(rows[i][1]);
    std::size_t col = 2;
    for (Tensor2* t : {&z.shared, &z.pairwise, &z.audio, &z.video, &z.text})
      for (double& v : t->row(i)) v = std::stod(rows[i][col++]);
  }
  return ds;
}

std::vector<std::size_t> quadrant_labels(const Tensor2& factor) {
  std::vector<std::size_t> out(factor.rows());
  for (std::size_t i = 0; i < factor.rows(); ++i) {
    std::size_t label = factor(i, 0) >= 0.0 ? 1 : 0;
    if (factor.cols() > 1 && factor(i, 1) >= 0.0) label += 2;
    out[i] = label;
  }
  return out;
}

}  // namespace fcid::data
