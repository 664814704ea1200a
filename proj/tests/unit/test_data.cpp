#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "fcid/data.hpp"
#include "fcid/error.hpp"
#include "fcid/eval.hpp"

using namespace fcid;

namespace {

data::SynthConfig small() {
  data::SynthConfig c;
  c.samples = 240;
  c.steps = 5;
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("generate has the configured shapes and float32 values") {
  const auto c = small();
  const auto ds = data::generate(c);
  CHECK(ds.inputs.audio.steps() == c.steps);
  CHECK(ds.inputs.audio.batch() == c.samples);
  CHECK(ds.inputs.audio.dim() == c.audio_dim);
  CHECK(ds.inputs.video.dim() == c.video_dim);
  CHECK(ds.inputs.text.rows() == c.samples);
  CHECK(ds.inputs.text.cols() == c.text_dim);
  CHECK(ds.latents.shared.cols() == c.shared_dim);
  CHECK(ds.latents.pairwise.cols() == c.pairwise_dim);
  CHECK(ds.latents.audio.cols() == c.specific_dim);
  CHECK(ds.labels.size() == c.samples);
  for (double v : ds.inputs.audio.rows().values()) CHECK(v == static_cast<double>(static_cast<float>(v)));
  for (std::size_t l : ds.labels) CHECK(l < c.classes);
  CHECK(std::set<std::size_t>(ds.labels.begin(), ds.labels.end()).size() > 1);
}

TEST_CASE("generate is deterministic, also without noise") {
  auto c = small();
  c.noise = 0.0;
  const auto a = data::generate(c), b = data::generate(c);
  CHECK(a.inputs.audio == b.inputs.audio);
  CHECK(a.inputs.text == b.inputs.text);
  CHECK(a.labels == b.labels);
  c.seed = 8;
  CHECK_FALSE(data::generate(c).inputs.audio == a.inputs.audio);
}

TEST_CASE("labels are the nearest class of the shared factor alone") {
  auto c = small();
  const auto a = data::generate(c);
  c.specific_dim = 3;
  c.noise = 0.5;
  const auto b = data::generate(c);
  // same seed: the shared factor and labels do not depend on the other factors
  CHECK(a.latents.shared == b.latents.shared);
  CHECK(a.labels == b.labels);
}

TEST_CASE("text carries no pairwise factor") {
  auto c = small();
  c.noise = 0.0;
  c.pairwise_dim = 1;
  const auto a = data::generate(c);
  c.pairwise_dim = 3;
  const auto b = data::generate(c);
  CHECK(a.latents.shared == b.latents.shared);
  CHECK(a.inputs.text == b.inputs.text);
  CHECK_FALSE(a.inputs.audio == b.inputs.audio);
}

TEST_CASE("raw audio carries label signal") {
  const auto ds = data::generate({});
  const auto sp = data::split(ds.labels, {0.8, 0.1, 0.1}, 7);
  const Tensor2 x = ds.inputs.audio.time_mean();
  eval::LinearClassifier clf;
  std::vector<std::size_t> ytr, yte;
  for (std::size_t i : sp.train) ytr.push_back(ds.labels[i]);
  for (std::size_t i : sp.test) yte.push_back(ds.labels[i]);
  clf.fit(gather_rows(x, sp.train), ytr, 8);
  CHECK(clf.accuracy(gather_rows(x, sp.test), yte) > 3.0 / 8.0);
}

TEST_CASE("split sizes, disjointness and stratification") {
  const auto ds = data::generate({});
  const auto sp = data::split(ds.labels, {0.8, 0.1, 0.1}, 7);
  CHECK(sp.train.size() == 1600);
  CHECK(sp.val.size() == 200);
  CHECK(sp.test.size() == 200);
  std::vector<std::size_t> all;
  for (const auto* part : {&sp.train, &sp.val, &sp.test}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    all.insert(all.end(), part->begin(), part->end());
  }
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

  std::vector<std::size_t> total(8), in_test(8);
  for (std::size_t l : ds.labels) ++total[l];
  for (std::size_t i : sp.test) ++in_test[ds.labels[i]];
  for (std::size_t k = 0; k < 8; ++k) {
    const double expected = 0.1 * static_cast<double>(total[k]);
    CHECK(std::abs(static_cast<double>(in_test[k]) - expected) <= 1.0);
  }

  CHECK(data::split(ds.labels, {0.8, 0.1, 0.1}, 7).test == sp.test);
  CHECK_THROWS_AS(data::split(ds.labels, {0.8, 0.1, 0.2}, 7), ValidationError);
  CHECK_THROWS_AS(data::split(ds.labels, {1.2, -0.1, -0.1}, 7), ValidationError);
}

TEST_CASE("dataset save and load round trip") {
  const auto ds = data::generate(small());
  const auto dir = std::filesystem::temp_directory_path() / "fcid_test_dataset";
  std::filesystem::remove_all(dir);
  data::save_dataset(dir, ds);
  for (const char* f : {"manifest.json", "audio.toct", "video.toct", "text.toct", "labels.csv", "latents.csv"})
    CHECK(std::filesystem::exists(dir / f));
  const auto back = data::load_dataset(dir);
  CHECK(back.inputs.audio == ds.inputs.audio);
  CHECK(back.inputs.video == ds.inputs.video);
  CHECK(back.inputs.text == ds.inputs.text);
  CHECK(back.labels == ds.labels);
  CHECK(back.config.seed == ds.config.seed);
  CHECK(back.latents.shared.rows() == ds.latents.shared.rows());

  const auto dir2 = std::filesystem::temp_directory_path() / "fcid_test_dataset2";
  std::filesystem::remove_all(dir2);
  data::save_dataset(dir2, data::generate(small()));
  for (const char* f : {"manifest.json", "audio.toct", "labels.csv", "latents.csv"})
    CHECK(read_file(dir / f) == read_file(dir2 / f));

  {
    std::fstream f(dir / "text.toct", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x7f');
  }
  CHECK_THROWS(data::load_dataset(dir));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("quadrant labels") {
  const auto q = data::quadrant_labels(Tensor2{{1, 1}, {-1, 1}, {1, -1}, {-1, -1}});
  CHECK(std::set<std::size_t>(q.begin(), q.end()).size() == 4);
  const auto h = data::quadrant_labels(Tensor2{{1}, {-1}});
  CHECK(h[0] != h[1]);
}
