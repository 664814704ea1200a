#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fcid/error.hpp"
#include "fcid/eval.hpp"
#include "fcid/toc.hpp"

using namespace fcid;
using eval::Category;

namespace {

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

Tensor2 random_rows(std::size_t n, std::size_t d, Rng& rng) {
  Tensor2 t(n, d);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("activation categories at the 0.95 and 0.05 boundaries") {
  CHECK(eval::categorize({100, 0, 0}) == Category::Red);
  CHECK(eval::categorize({96, 3, 1}) == Category::Red);
  CHECK(eval::categorize({95, 5, 0}) == Category::Blue);  // exactly 95% is not red
  CHECK(eval::categorize({34, 33, 33}) == Category::Green);
  CHECK(eval::categorize({90, 5, 5}) == Category::Green);  // exactly 5% counts as present
  CHECK(eval::categorize({18, 1, 1}) == Category::Green);
  CHECK(eval::categorize({90, 6, 4}) == Category::Blue);
  CHECK(eval::categorize({50, 50, 0}) == Category::Blue);
  CHECK(eval::categorize({0, 0, 7}) == Category::Red);
  CHECK(eval::categorize({0, 0, 0}) == Category::Unused);

  const auto stats = eval::activation_stats_from_counts({{100, 0, 0}, {34, 33, 33}, {50, 50, 0}, {0, 0, 0}, {1, 1, 1}});
  CHECK(stats.totals == std::array<std::size_t, 4>{1, 2, 1, 1});
  CHECK(stats.categories[2] == Category::Blue);
  CHECK(std::string(eval::category_name(Category::Green)) == "green");
}

TEST_CASE("retrieval ranks and recall") {
  Rng rng(1);
  const Tensor2 x = random_rows(30, 5, rng);
  const auto ranks = eval::retrieval_ranks(x, x);
  for (std::size_t r : ranks) CHECK(r == 1);
  const std::size_t ks[] = {1, 5, 30};
  CHECK(eval::recall_at_k(x, x, ks) == std::vector<double>{1.0, 1.0, 1.0});

  // hand example: each query is closer to the other pair's candidate
  const Tensor2 q{{1, 0}, {0, 1}};
  const Tensor2 c{{1, 1}, {1, 0.1}};
  CHECK(eval::retrieval_ranks(q, c) == std::vector<std::size_t>{2, 2});
  CHECK(eval::retrieval_ranks(q, Tensor2{{1, 0.1}, {1, 1}}) == std::vector<std::size_t>{1, 1});
  // ties go to the lower index: identical candidates
  const Tensor2 same{{1, 0}, {1, 0}};
  CHECK(eval::retrieval_ranks(same, same) == std::vector<std::size_t>{1, 2});

  const Tensor2 y = random_rows(30, 5, rng);
  const std::size_t all_k[] = {1, 2, 3, 5, 8, 13, 21, 30};
  const auto r = eval::recall_at_k(x, y, all_k);
  for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] >= r[i - 1]);
  CHECK(r.back() == 1.0);

  const std::size_t bad_k[] = {31};
  CHECK_THROWS_AS(eval::recall_at_k(x, y, bad_k), ValidationError);
  const std::size_t zero_k[] = {0};
  CHECK_THROWS_AS(eval::recall_at_k(x, y, zero_k), ValidationError);
  CHECK_THROWS_AS(eval::retrieval_ranks(x, random_rows(29, 5, rng)), ValidationError);
}

TEST_CASE("linear classifier separates separable classes") {
  Rng rng(2);
  Tensor2 x(300, 3);
  std::vector<std::size_t> y(300);
  for (std::size_t i = 0; i < 300; ++i) {
    y[i] = i % 3;
    for (std::size_t k = 0; k < 3; ++k) x(i, k) = (k == y[i] ? 4.0 : 0.0) + 0.3 * rng.normal();
  }
  eval::LinearClassifier clf;
  clf.fit(x, y, 3);
  CHECK(clf.accuracy(x, y) == 1.0);
  const std::vector<std::size_t> p{0, 1, 2, 2}, t{0, 1, 1, 2};
  CHECK(eval::accuracy(p, t) == 0.75);
}

TEST_CASE("similarity report identities") {
  const Codebook eye(Tensor2{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto r = eval::similarity_report(eye, DimensionMask::all(3));
  CHECK(r.before == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.after == doctest::Approx(0.0).epsilon(1e-15));

  Rng rng(3);
  const Codebook cb(random_rows(10, 6, rng));
  const auto full = eval::similarity_report(cb, DimensionMask::all(6));
  CHECK(full.before == full.after);
  CHECK(full.matrix_before == full.matrix_after);
  CHECK(full.matrix_before.rows() == 10);
  CHECK(full.matrix_before(2, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("autoencoder training and the masked reconstruction sweep") {
  eval::AutoencoderConfig cfg;
  cfg.input_dim = 12;
  cfg.code_dim = 8;
  cfg.codebook_size = 16;
  cfg.samples = 600;
  cfg.epochs = 5;
  cfg.batch_size = 50;
  const Tensor2 x = eval::autoencoder_features(cfg, cfg.seed);
  CHECK(x.rows() == cfg.samples);
  CHECK(x.cols() == cfg.input_dim);

  eval::AutoencoderConfig untrained = cfg;
  untrained.epochs = 0;
  const auto before = eval::train_autoencoder(untrained, x);
  const auto ae = eval::train_autoencoder(cfg, x);
  CHECK(ae.mse(x) < before.mse(x));

  const double percents[] = {0.0, 50.0};
  const auto rows = eval::masked_recon_sweep(ae, x, percents, 10, 5);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].q == 8);
  CHECK(rows[0].toc_mse == ae.mse(x));
  CHECK(rows[0].random_mean_mse == doctest::Approx(ae.mse(x)).epsilon(1e-12));
  CHECK(rows[0].count == 0);
  CHECK(rows[1].q == 4);
  CHECK(rows[1].trials == 10);

  const auto again = eval::masked_recon_sweep(ae, x, percents, 10, 5);
  CHECK(again[1].random_mean_mse == rows[1].random_mean_mse);
  CHECK(again[1].count == rows[1].count);

  const double bad[] = {100.0};
  CHECK_THROWS_AS(eval::masked_recon_sweep(ae, x, bad, 10, 5), ValidationError);
}

TEST_CASE("evaluations refuse an untrained model") {
  data::SynthConfig sc;
  sc.samples = 80;
  const auto ds = data::generate(sc);
  const auto sp = data::split(ds.labels, {0.8, 0.1, 0.1}, 7);
  const model::FcidModel m;
  CHECK_THROWS_AS(eval::cmg_run(m, ds, sp, model::Modality::Audio, model::Modality::Video), ValidationError);
  CHECK_THROWS_AS(eval::activation_stats(m, ds), ValidationError);
}

TEST_CASE("CMG with the same modality is held-out classification") {
  data::SynthConfig sc;
  sc.samples = 160;
  const auto ds = data::generate(sc);
  const auto sp = data::split(ds.labels, {0.5, 0.25, 0.25}, 7);
  model::FcidModel m;
  Rng rng(4);
  m.init(rng);
  const auto same = eval::cmg_run(m, ds, sp, model::Modality::Video, model::Modality::Video);
  CHECK(same.test_accuracy == same.train_accuracy);
  CHECK_FALSE(same.mask_q.has_value());
  const auto mask = toc::select_dims(toc::toc_scores(m.codebook), 8);
  const auto masked = eval::cmg_run(m, ds, sp, model::Modality::Audio, model::Modality::Video, &mask);
  CHECK(masked.mask_q == 8);

  const std::size_t ks[] = {1, 10};
  const auto r = eval::retrieval_eval(m, ds, sp, model::Modality::Audio, model::Modality::Text, ks, 40);
  CHECK(r.pool == 40);
  CHECK(r.recall.size() == 2);
  CHECK(r.recall[1] >= r.recall[0]);
  CHECK_THROWS_AS(eval::retrieval_eval(m, ds, sp, model::Modality::Audio, model::Modality::Text, ks, 41),
                  ValidationError);

  const auto act = eval::activation_stats(m, ds);
  std::size_t hits = 0;
  for (const auto& c : act.counts) hits += c[0] + c[1] + c[2];
  CHECK(hits == 3 * sc.samples);
}

TEST_CASE("CSV outputs carry their headers") {
  const auto dir = std::filesystem::temp_directory_path() / "fcid_test_eval_csv";
  std::filesystem::create_directories(dir);
  eval::save_cmg_csv(dir / "cmg.csv", {{model::Modality::Audio, model::Modality::Video, 0.5, 0.25, 8}});
  CHECK(first_line(dir / "cmg.csv") == "train_modality,test_modality,mask_q,train_accuracy,test_accuracy");
  eval::save_retrieval_csv(dir / "r.csv", {});
  CHECK(first_line(dir / "r.csv") == "first,second,pool,k,recall");
  eval::save_activation_csv(dir / "a.csv", eval::activation_stats_from_counts({{1, 2, 3}}));
  CHECK(first_line(dir / "a.csv") == "code,audio,video,text,category");
  eval::save_masked_recon_csv(dir / "m.csv", {});
  CHECK(first_line(dir / "m.csv") == "mask_percent,q,toc_mse,random_mean_mse,count,trials");
  eval::save_probe_csv(dir / "p.csv", {});
  CHECK(first_line(dir / "p.csv") == "probe,accuracy,chance");
  std::filesystem::remove_all(dir);
}
