#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "fcid/data.hpp"
#include "fcid/error.hpp"
#include "fcid/eval.hpp"
#include "fcid/io.hpp"
#include "fcid/model.hpp"
#include "fcid/toc.hpp"
#include "svg.hpp"

namespace fcid::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using model::Modality;

constexpr const char* kModule = "cli";
constexpr const char* kOutputEnv = "TOC_OUTPUT_DIR";
constexpr std::array<double, 3> kSplitFractions{0.8, 0.1, 0.1};

// ---------------------------------------------------------------- option sets

struct Common {
  std::string out;
  std::string config;
  int threads = 1;
};

Common with_out(const char* out) {
  Common c;
  c.out = out;
  return c;
}

struct GenOptions {
  Common common = with_out("runs/data");
  data::SynthConfig synth;
};

struct TrainOptions {
  Common common = with_out("runs/train");
  std::string data;
  std::uint64_t split_seed = 7;
  model::ModelConfig model;
  model::TrainConfig train;
};

struct TocOptions {
  Common common = with_out("runs/toc");
  std::string codebook;
  std::string model;
  double lambda = toc::kDefaultLambda;
  std::size_t q = 0;
  std::string variance_on = "normalized";
};

struct QuantizeOptions {
  Common common = with_out("runs/quantize");
  std::string model;
  std::string data;
  std::string modality = "a";
  std::string mask;
  std::string mask_mode = "post";
};

struct EvalOptions {
  Common common;
  std::string model;
  std::string data;
  std::uint64_t split_seed = 7;
  // cmg
  std::string pairs = "a:v,v:a,a:te,te:a,v:te,te:v";
  std::string mask;
  std::size_t q = 0;
  double lambda = toc::kDefaultLambda;
  std::string mask_mode = "post";
  // retrieval
  std::string ks = "1,5,10";
  std::size_t pool = 200;
  bool use_codes = false;
  // maskrecon
  eval::AutoencoderConfig autoencoder;
  std::size_t trials = 100;
  std::uint64_t mask_seed = 12;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--out", c.out, "Output directory (overridden by $TOC_OUTPUT_DIR)");
  app.add_option("--config", c.config, "Flat JSON file of option values; flags given on the command line win");
  app.add_option("--threads", c.threads, "Worker cap; computations are single-threaded")->check(CLI::PositiveNumber);
}

// Model and dataset inputs shared by the evaluation commands.
void add_inputs(CLI::App& app, EvalOptions& o, bool with_split) {
  app.add_option("--model", o.model, "Checkpoint written by train")->check(CLI::ExistingPath)->required();
  app.add_option("--data", o.data, "Dataset directory written by gen")->check(CLI::ExistingPath)->required();
  if (with_split) app.add_option("--split-seed", o.split_seed, "Seed of the 80/10/10 stratified split");
}

// ---------------------------------------------------------------- helpers

fs::path output_dir(const Common& c) {
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') return env;
  return c.out;
}

// Refuses output locations that would write into an input.
fs::path prepare_output(const Common& c, std::initializer_list<std::string> inputs) {
  const fs::path out = output_dir(c);
  if (out.empty()) throw ValidationError(kModule, "output directory is empty");
  for (const std::string& in : inputs) {
    if (in.empty() || !fs::exists(in) || !fs::exists(out)) continue;
    const fs::path dir = fs::is_directory(in) ? fs::path(in) : fs::path(in).parent_path();
    if (fs::equivalent(out, dir.empty() ? fs::path(".") : dir))
      throw ValidationError(kModule, "output directory " + out.string() + " would overwrite input " + in);
  }
  fs::create_directories(out);
  return out;
}

// Every option of the command as given or defaulted, plus the resolved
// output directory; loadable again through --config.
void write_config_echo(const fs::path& dir, const CLI::App& sub, const std::string& command) {
  json j;
  j["command"] = command;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    const std::string value = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
    if (value.empty()) continue;  // unset optional path
    j[name] = value;
  }
  j["out"] = dir.string();
  io::write_text(dir / "config.json", j.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep))
    if (!item.empty()) parts.push_back(item);
  return parts;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const char* what) {
  std::vector<std::size_t> values;
  for (const std::string& s : split_list(text, ',')) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s.front() == '-') throw ValidationError(kModule, std::string(what) + ": bad entry '" + s + "'");
    values.push_back(static_cast<std::size_t>(v));
  }
  if (values.empty()) throw ValidationError(kModule, std::string(what) + " is empty");
  return values;
}

std::vector<std::pair<Modality, Modality>> parse_pairs(const std::string& text) {
  std::vector<std::pair<Modality, Modality>> pairs;
  for (const std::string& p : split_list(text, ',')) {
    const auto colon = p.find(':');
    if (colon == std::string::npos) throw ValidationError(kModule, "pair '" + p + "' is not of the form m1:m2");
    pairs.emplace_back(model::parse_modality(p.substr(0, colon)), model::parse_modality(p.substr(colon + 1)));
  }
  if (pairs.empty()) throw ValidationError(kModule, "no modality pairs given");
  return pairs;
}

vq::MaskMode parse_mask_mode(const std::string& s) {
  if (s == "post") return vq::MaskMode::PostQuantize;
  if (s == "masked") return vq::MaskMode::MaskedDistance;
  throw ValidationError(kModule, "mask mode must be 'post' or 'masked', got '" + s + "'");
}

struct Loaded {
  model::FcidModel model;
  data::Dataset dataset;
  data::Split split;
};

Loaded load_inputs(const EvalOptions& o, std::ostream& err) {
  std::string metadata;
  Loaded in{model::load_checkpoint(o.model, &metadata), data::load_dataset(o.data), {}};
  const auto meta = json::parse(metadata, nullptr, false);
  if (meta.is_object() && meta.contains("split_seed") && meta["split_seed"] != o.split_seed)
    err << "warning: the model was trained with split seed " << meta["split_seed"].dump() << ", evaluating with "
        << o.split_seed << "\n";
  in.split = data::split(in.dataset.labels, kSplitFractions, o.split_seed);
  return in;
}

std::string mname(Modality m) { return std::string(model::modality_name(m)); }

// ---------------------------------------------------------------- commands

void cmd_gen(const GenOptions& o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = prepare_output(o.common, {});
  const auto ds = data::generate(o.synth);
  data::save_dataset(dir, ds);
  write_config_echo(dir, sub, "gen");
  out << "gen: " << ds.labels.size() << " samples written to " << dir.string() << "\n";
}

void cmd_train(TrainOptions o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = prepare_output(o.common, {o.data});
  const auto ds = data::load_dataset(o.data);
  o.model.audio_dim = ds.config.audio_dim;
  o.model.video_dim = ds.config.video_dim;
  o.model.text_dim = ds.config.text_dim;
  const auto sp = data::split(ds.labels, kSplitFractions, o.split_seed);

  model::FcidModel m(o.model);
  Rng rng(o.train.seed);
  m.init(rng, o.train.gamma, o.train.ema_epsilon);
  model::Trainer trainer(m, o.train);
  const auto trajectory = trainer.fit(ds.inputs.gather(sp.train));

  json meta;
  meta["split_seed"] = o.split_seed;
  meta["data_manifest_checksum"] = io::file_checksum(fs::path(o.data) / "manifest.json");
  meta["train_samples"] = sp.train.size();
  model::save_checkpoint(dir / "model.tock", m, meta.dump());
  save_codebook(dir / "codebook.tocb", m.codebook);
  mi::save_loss_csv(dir / "loss.csv", trajectory);

  std::vector<svg::Series> curves{{"total", {}, {}}, {"recon", {}, {}}, {"cpc", {}, {}}, {"nce", {}, {}},
                                  {"club", {}, {}}};
  for (std::size_t s = 0; s < trajectory.size(); ++s) {
    const auto& r = trajectory[s];
    const double values[] = {r.total, r.recon, r.cpc, r.nce, r.club_fine + r.club_coarse};
    for (std::size_t c = 0; c < curves.size(); ++c) {
      curves[c].x.push_back(static_cast<double>(s));
      curves[c].y.push_back(values[c]);
    }
  }
  svg::write_line_chart(dir / "loss.svg", "Training loss", "step", "loss", curves);
  write_config_echo(dir, sub, "train");

  out << "train: " << trajectory.size() << " steps, total loss " << io::format_real(trajectory.front().total)
      << " -> " << io::format_real(trajectory.back().total) << "\n";
}

void cmd_toc(const TocOptions& o, const CLI::App& sub, std::ostream& out) {
  if (o.codebook.empty() == o.model.empty()) throw ValidationError(kModule, "give exactly one of --codebook or --model");
  const fs::path dir = prepare_output(o.common, {o.codebook, o.model});
  const Codebook cb = o.codebook.empty() ? model::load_checkpoint(o.model).codebook : load_codebook(o.codebook);
  toc::VarianceSource source;
  if (o.variance_on == "normalized") source = toc::VarianceSource::Normalized;
  else if (o.variance_on == "raw") source = toc::VarianceSource::Raw;
  else throw ValidationError(kModule, "variance source must be 'normalized' or 'raw'");

  const std::size_t q = o.q == 0 ? cb.dim() / 2 : o.q;
  const auto scores = toc::toc_scores(cb, o.lambda, source);
  const auto mask = toc::select_dims(scores, q);
  toc::save_scores_csv(dir / "scores.csv", scores);
  save_mask(dir / "mask.json", mask);

  const auto report = eval::similarity_report(cb, mask);
  eval::save_matrix_csv(dir / "similarity_before.csv", report.matrix_before);
  eval::save_matrix_csv(dir / "similarity_after.csv", report.matrix_after);
  io::write_text(dir / "similarity.csv", "codes,dim,q,before,after\n" + std::to_string(cb.size()) + "," +
                                             std::to_string(cb.dim()) + "," + std::to_string(q) + "," +
                                             io::format_real(report.before) + "," + io::format_real(report.after) +
                                             "\n");
  write_config_echo(dir, sub, "toc");
  out << "toc: kept " << q << " of " << cb.dim() << " dimensions, average similarity "
      << io::format_real(report.before) << " -> " << io::format_real(report.after) << "\n";
}

void cmd_quantize(const QuantizeOptions& o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = prepare_output(o.common, {o.model, o.data, o.mask});
  const auto m = model::load_checkpoint(o.model);
  const auto ds = data::load_dataset(o.data);
  const Modality modality = model::parse_modality(o.modality);
  const vq::MaskMode mode = parse_mask_mode(o.mask_mode);
  std::optional<DimensionMask> mask;
  if (!o.mask.empty()) mask = load_mask(o.mask);
  const auto enc = m.encode(ds.inputs, modality, mask ? &*mask : nullptr, mode);
  vq::save_assignments_csv(dir / "assignments.csv", enc.codes, 1);
  write_config_echo(dir, sub, "quantize");
  out << "quantize: " << enc.codes.indices.size() << " " << mname(modality) << " samples assigned\n";
}

void cmd_eval_cmg(const EvalOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const fs::path dir = prepare_output(o.common, {o.model, o.data, o.mask});
  if (!o.mask.empty() && o.q != 0) throw ValidationError(kModule, "give at most one of --mask or --q");
  const auto pairs = parse_pairs(o.pairs);
  const vq::MaskMode mode = parse_mask_mode(o.mask_mode);
  const Loaded in = load_inputs(o, err);

  std::optional<DimensionMask> mask;
  if (!o.mask.empty()) mask = load_mask(o.mask);
  if (o.q != 0) mask = toc::select_dims(toc::toc_scores(in.model.codebook, o.lambda), o.q);

  std::vector<eval::CmgResult> rows;
  for (const auto& [m1, m2] : pairs) rows.push_back(eval::cmg_run(in.model, in.dataset, in.split, m1, m2));
  if (mask)
    for (const auto& [m1, m2] : pairs)
      rows.push_back(eval::cmg_run(in.model, in.dataset, in.split, m1, m2, &*mask, mode));
  eval::save_cmg_csv(dir / "cmg.csv", rows);
  write_config_echo(dir, sub, "eval cmg");
  for (const auto& r : rows)
    out << "cmg " << mname(r.train_modality) << " -> " << mname(r.test_modality)
        << (r.mask_q ? " (q=" + std::to_string(*r.mask_q) + ")" : std::string()) << ": "
        << io::format_real(r.test_accuracy) << "\n";
}

void cmd_eval_retrieval(const EvalOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const fs::path dir = prepare_output(o.common, {o.model, o.data});
  const auto ks = parse_sizes(o.ks, "--ks");
  const Loaded in = load_inputs(o, err);
  std::vector<eval::RetrievalResult> rows;
  for (const auto& [a, b] : {std::pair{Modality::Audio, Modality::Video}, std::pair{Modality::Audio, Modality::Text},
                             std::pair{Modality::Video, Modality::Text}})
    rows.push_back(eval::retrieval_eval(in.model, in.dataset, in.split, a, b, ks, o.pool, o.use_codes));
  eval::save_retrieval_csv(dir / "retrieval.csv", rows);
  write_config_echo(dir, sub, "eval retrieval");
  for (const auto& r : rows) {
    out << "retrieval " << mname(r.first) << "-" << mname(r.second) << ":";
    for (std::size_t k = 0; k < r.ks.size(); ++k) out << " R@" << r.ks[k] << " " << io::format_real(r.recall[k]);
    out << "\n";
  }
}

void cmd_eval_activation(const EvalOptions& o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = prepare_output(o.common, {o.model, o.data});
  const auto m = model::load_checkpoint(o.model);
  const auto ds = data::load_dataset(o.data);
  const auto stats = eval::activation_stats(m, ds);
  eval::save_activation_csv(dir / "activation.csv", stats);
  std::vector<std::string> labels;
  std::vector<double> values;
  for (auto c : {eval::Category::Red, eval::Category::Green, eval::Category::Blue, eval::Category::Unused}) {
    labels.emplace_back(eval::category_name(c));
    values.push_back(static_cast<double>(stats.totals[static_cast<std::size_t>(c)]));
  }
  svg::write_bar_chart(dir / "activation.svg", "Codes by activation category", labels, values);
  write_config_echo(dir, sub, "eval activation");
  out << "activation:";
  for (std::size_t i = 0; i < labels.size(); ++i) out << " " << labels[i] << " " << stats.totals[i];
  out << "\n";
}

void cmd_eval_maskrecon(const EvalOptions& o, const CLI::App& sub, std::ostream& out) {
  const fs::path dir = prepare_output(o.common, {});
  const vq::MaskMode mode = parse_mask_mode(o.mask_mode);
  const Tensor2 x = eval::autoencoder_features(o.autoencoder, o.autoencoder.seed);
  const auto ae = eval::train_autoencoder(o.autoencoder, x);
  const auto rows = eval::masked_recon_sweep(ae, x, eval::kMaskPercents, o.trials, o.mask_seed, o.lambda, mode);
  eval::save_masked_recon_csv(dir / "maskrecon.csv", rows);
  std::vector<svg::Series> curves{{"TOC mask", {}, {}}, {"random mean", {}, {}}};
  for (const auto& r : rows) {
    curves[0].x.push_back(r.mask_percent);
    curves[0].y.push_back(r.toc_mse);
    curves[1].x.push_back(r.mask_percent);
    curves[1].y.push_back(r.random_mean_mse);
  }
  svg::write_line_chart(dir / "maskrecon.svg", "Masked reconstruction", "masked dimensions (%)", "MSE", curves);
  write_config_echo(dir, sub, "eval maskrecon");
  for (const auto& r : rows)
    out << "maskrecon " << io::format_real(r.mask_percent) << "%: toc " << io::format_real(r.toc_mse) << " random "
        << io::format_real(r.random_mean_mse) << " count " << r.count << "/" << r.trials << "\n";
}

void cmd_eval_probes(const EvalOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  const fs::path dir = prepare_output(o.common, {o.model, o.data});
  const Loaded in = load_inputs(o, err);
  const auto p = eval::probe_disentanglement(in.model, in.dataset, in.split);
  eval::save_probe_csv(dir / "probes.csv", p);
  write_config_echo(dir, sub, "eval probes");
  out << "probes: general->shared " << io::format_real(p.general_to_shared) << ", general->specific "
      << io::format_real(p.general_to_specific) << ", specific->shared " << io::format_real(p.specific_to_shared)
      << "\n";
}

// ---------------------------------------------------------------- config file

std::string json_scalar(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ValidationError(kModule, "config key '" + key + "' must be a string, number or boolean");
}

// Splices the values of a --config file in front of the command-line flags,
// so that the last occurrence (the command line) wins.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  std::size_t depth = 0;
  CLI::App* sub = &app;
  std::string command;
  while (depth < args.size()) {
    CLI::App* next = sub->get_subcommand_no_throw(args[depth]);
    if (next == nullptr) break;
    sub = next;
    command += (command.empty() ? "" : " ") + args[depth];
    ++depth;
  }
  std::string path;
  for (std::size_t i = depth; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || sub == &app) return args;

  if (!fs::is_regular_file(path)) throw ValidationError(kModule, "config file " + path + " does not exist");
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, "malformed config " + path + ": " + e.what());
  }
  if (!config.is_object()) throw ValidationError(kModule, "config " + path + " is not a JSON object");

  std::vector<std::string> expanded(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(depth));
  for (const auto& [key, value] : config.items()) {
    if (key == "command") {
      if (json_scalar(key, value) != command)
        throw ValidationError(kModule, "config is for '" + json_scalar(key, value) + "', not '" + command + "'");
      continue;
    }
    if (key == "config" || key == "help" || sub->get_option_no_throw("--" + key) == nullptr)
      throw ValidationError(kModule, "unknown config key '" + key + "' for " + command);
    expanded.push_back("--" + key + "=" + json_scalar(key, value));
  }
  expanded.insert(expanded.end(), args.begin() + static_cast<std::ptrdiff_t>(depth), args.end());
  return expanded;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Codebook dimension selection and cross-modal disentanglement at desk scale", "fcid"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic tri-modal dataset");
  add_common(*gen_cmd, gen.common);
  auto& sc = gen.synth;
  gen_cmd->add_option("--seed", sc.seed, "Generator seed");
  gen_cmd->add_option("--samples", sc.samples, "Number of samples");
  gen_cmd->add_option("--steps", sc.steps, "Time steps of the audio and video sequences");
  gen_cmd->add_option("--classes", sc.classes, "Number of classes");
  gen_cmd->add_option("--shared-dim", sc.shared_dim, "Dimension of the factor shared by all modalities");
  gen_cmd->add_option("--pairwise-dim", sc.pairwise_dim, "Dimension of the audio-video factor");
  gen_cmd->add_option("--specific-dim", sc.specific_dim, "Dimension of each modality-specific factor");
  gen_cmd->add_option("--audio-dim", sc.audio_dim, "Audio input dimension");
  gen_cmd->add_option("--video-dim", sc.video_dim, "Video input dimension");
  gen_cmd->add_option("--text-dim", sc.text_dim, "Text input dimension");
  gen_cmd->add_option("--noise", sc.noise, "Observation noise standard deviation");

  TrainOptions train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train an FCID model on the training split");
  add_common(*train_cmd, train.common);
  auto& tc = train.train;
  auto& mc = train.model;
  train_cmd->add_option("--data", train.data, "Dataset directory written by gen")->check(CLI::ExistingPath)->required();
  train_cmd->add_option("--split-seed", train.split_seed, "Seed of the 80/10/10 stratified split");
  train_cmd->add_option("--code-dim", mc.code_dim, "Codeword dimension D");
  train_cmd->add_option("--codebook-size", mc.codebook_size, "Number of codewords H");
  train_cmd->add_option("--hidden", mc.hidden, "Hidden width of the encoders and decoders");
  train_cmd->add_option("--context", mc.context, "CPC context width");
  train_cmd->add_option("--horizon", mc.horizon, "CPC prediction horizon");
  train_cmd->add_option("--epochs", tc.epochs, "Training epochs");
  train_cmd->add_option("--batch-size", tc.batch_size, "Minibatch size");
  train_cmd->add_option("--lr", tc.learning_rate, "SGD learning rate");
  train_cmd->add_option("--momentum", tc.momentum, "SGD momentum");
  train_cmd->add_option("--clip-norm", tc.clip_norm, "Global gradient norm cap, 0 disables");
  train_cmd->add_option("--club-lr", tc.club_learning_rate, "Learning rate of the CLUB estimators");
  train_cmd->add_option("--club-clip-norm", tc.club_clip_norm, "Gradient norm cap of the CLUB estimators");
  train_cmd->add_option("--beta", tc.beta, "Commitment weight");
  train_cmd->add_option("--tau", tc.tau, "InfoNCE temperature");
  train_cmd->add_option("--gamma", tc.gamma, "Codebook EMA decay");
  train_cmd->add_option("--ema-epsilon", tc.ema_epsilon, "Laplace smoothing of the codebook EMA");
  train_cmd->add_option("--lambda", tc.lambda, "TOC weight recorded with the model");
  train_cmd->add_option("--club-a", tc.use_club_a, "Audio fine CLUB term");
  train_cmd->add_option("--club-v", tc.use_club_v, "Video fine CLUB term");
  train_cmd->add_option("--club-av", tc.use_club_av, "Audio-video coarse CLUB term");
  train_cmd->add_option("--club-te", tc.use_club_te, "Text coarse CLUB term");
  train_cmd->add_option("--recon", tc.use_recon, "Reconstruction term");
  train_cmd->add_option("--commit", tc.use_commit, "Commitment term");
  train_cmd->add_option("--seed", tc.seed, "Initialization and minibatch seed");

  TocOptions tocopt;
  CLI::App* toc_cmd = app.add_subcommand("toc", "Score codebook dimensions and select a mask");
  add_common(*toc_cmd, tocopt.common);
  toc_cmd->add_option("--codebook", tocopt.codebook, "Codebook file")->check(CLI::ExistingPath);
  toc_cmd->add_option("--model", tocopt.model, "Checkpoint whose codebook is scored")->check(CLI::ExistingPath);
  toc_cmd->add_option("--lambda", tocopt.lambda, "Weight of the variance term")->check(CLI::Range(0.0, 1.0));
  toc_cmd->add_option("--q", tocopt.q, "Dimensions to keep, 0 keeps half");
  toc_cmd->add_option("--variance-on", tocopt.variance_on, "Codebook used for the variance term: normalized or raw");

  QuantizeOptions quant;
  CLI::App* quant_cmd = app.add_subcommand("quantize", "Assign every sample of one modality to a code");
  add_common(*quant_cmd, quant.common);
  quant_cmd->add_option("--model", quant.model, "Checkpoint written by train")->check(CLI::ExistingPath)->required();
  quant_cmd->add_option("--data", quant.data, "Dataset directory written by gen")->check(CLI::ExistingPath)->required();
  quant_cmd->add_option("--modality", quant.modality, "a, v or te");
  quant_cmd->add_option("--mask", quant.mask, "Mask file written by toc")->check(CLI::ExistingPath);
  quant_cmd->add_option("--mask-mode", quant.mask_mode, "post: mask the emitted code; masked: masked distance");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model");
  eval_cmd->require_subcommand(1);

  EvalOptions cmg;
  cmg.common = with_out("runs/eval-cmg");
  CLI::App* cmg_cmd = eval_cmd->add_subcommand("cmg", "Cross-modal generalization with a linear classifier");
  add_common(*cmg_cmd, cmg.common);
  add_inputs(*cmg_cmd, cmg, true);
  cmg_cmd->add_option("--pairs", cmg.pairs, "Comma-separated train:test modality pairs");
  cmg_cmd->add_option("--mask", cmg.mask, "Mask file; adds masked rows")->check(CLI::ExistingPath);
  cmg_cmd->add_option("--q", cmg.q, "Select a TOC mask of this size from the model codebook; adds masked rows");
  cmg_cmd->add_option("--lambda", cmg.lambda, "TOC weight used with --q")->check(CLI::Range(0.0, 1.0));
  cmg_cmd->add_option("--mask-mode", cmg.mask_mode, "post or masked");

  EvalOptions ret;
  ret.common = with_out("runs/eval-retrieval");
  CLI::App* ret_cmd = eval_cmd->add_subcommand("retrieval", "Paired cross-modal retrieval");
  add_common(*ret_cmd, ret.common);
  add_inputs(*ret_cmd, ret, true);
  ret_cmd->add_option("--ks", ret.ks, "Comma-separated recall cut-offs");
  ret_cmd->add_option("--pool", ret.pool, "Test samples in the retrieval pool");
  ret_cmd->add_option("--use-codes", ret.use_codes, "Rank quantized codes instead of continuous features");

  EvalOptions act;
  act.common = with_out("runs/eval-activation");
  CLI::App* act_cmd = eval_cmd->add_subcommand("activation", "Per-code activation counts by modality");
  add_common(*act_cmd, act.common);
  add_inputs(*act_cmd, act, false);

  EvalOptions mr;
  mr.common = with_out("runs/eval-maskrecon");
  auto& ac = mr.autoencoder;
  CLI::App* mr_cmd = eval_cmd->add_subcommand("maskrecon", "Masked reconstruction sweep of a small VQ autoencoder");
  add_common(*mr_cmd, mr.common);
  mr_cmd->add_option("--seed", ac.seed, "Feature and training seed");
  mr_cmd->add_option("--mask-seed", mr.mask_seed, "Seed of the random masks");
  mr_cmd->add_option("--trials", mr.trials, "Random masks per ratio");
  mr_cmd->add_option("--lambda", mr.lambda, "TOC weight")->check(CLI::Range(0.0, 1.0));
  mr_cmd->add_option("--mask-mode", mr.mask_mode, "post or masked");
  mr_cmd->add_option("--input-dim", ac.input_dim, "Feature dimension");
  mr_cmd->add_option("--latent-factors", ac.latent_factors, "Latent factors behind the features");
  mr_cmd->add_option("--codebook-size", ac.codebook_size, "Number of codewords");
  mr_cmd->add_option("--code-dim", ac.code_dim, "Codeword dimension");
  mr_cmd->add_option("--samples", ac.samples, "Number of feature vectors");
  mr_cmd->add_option("--epochs", ac.epochs, "Training epochs");
  mr_cmd->add_option("--batch-size", ac.batch_size, "Minibatch size");
  mr_cmd->add_option("--lr", ac.learning_rate, "Learning rate");
  mr_cmd->add_option("--beta", ac.beta, "Commitment weight");
  mr_cmd->add_option("--noise", ac.noise, "Feature noise standard deviation");

  EvalOptions probes;
  probes.common = with_out("runs/eval-probes");
  CLI::App* probe_cmd = eval_cmd->add_subcommand("probes", "Linear disentanglement probes");
  add_common(*probe_cmd, probes.common);
  add_inputs(*probe_cmd, probes, true);

  try {
    const auto expanded = expand_config(args, app);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);

    if (gen_cmd->parsed()) cmd_gen(gen, *gen_cmd, out);
    else if (train_cmd->parsed()) cmd_train(train, *train_cmd, out);
    else if (toc_cmd->parsed()) cmd_toc(tocopt, *toc_cmd, out);
    else if (quant_cmd->parsed()) cmd_quantize(quant, *quant_cmd, out);
    else if (cmg_cmd->parsed()) cmd_eval_cmg(cmg, *cmg_cmd, out, err);
    else if (ret_cmd->parsed()) cmd_eval_retrieval(ret, *ret_cmd, out, err);
    else if (act_cmd->parsed()) cmd_eval_activation(act, *act_cmd, out);
    else if (mr_cmd->parsed()) cmd_eval_maskrecon(mr, *mr_cmd, out);
    else if (probe_cmd->parsed()) cmd_eval_probes(probes, *probe_cmd, out, err);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "cli: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 1;
  }
}

}  // namespace fcid::cli
