#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/grad_suite.hpp"
#include "fcid/error.hpp"
#include "fcid/losses.hpp"
#include "fcid/rng.hpp"

using namespace fcid;

namespace {

/// log q(y|x) for a diagonal Gaussian, written out directly.
double log_density(std::span<const double> y, std::span<const double> mean, std::span<const double> logvar) {
  double total = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double diff = y[k] - mean[k];
    total += -0.5 * (diff * diff * std::exp(-logvar[k]) + logvar[k] + std::log(2.0 * std::numbers::pi));
  }
  return total;
}

/// CLUB by explicit double loop over (i, j) pairs at each step.
double club_oracle(const FeatureBatch& x, const FeatureBatch& y, const mi::ClubEstimator& est) {
  const auto p = est.predict(x.rows());
  const std::size_t n = x.batch();
  double positive = 0.0, negative = 0.0;
  for (std::size_t t = 0; t < x.steps(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ri = t * n + i;
      positive += log_density(y.at(t, i), p.mean.row(ri), p.logvar.row(ri));
      for (std::size_t j = 0; j < n; ++j) negative += log_density(y.at(t, j), p.mean.row(ri), p.logvar.row(ri));
    }
  }
  const double steps = static_cast<double>(x.steps());
  return positive / (steps * n) - negative / (steps * n * n);
}

void check_suite(const testing::SuiteResult& r) {
  INFO(r.loss << " worst " << r.worst_rel_error << " at " << r.worst_param);
  CHECK(r.passed == r.instances);
}

}  // namespace

TEST_CASE("diagonal softmax cross-entropy by hand") {
  // positive logit 1, negative logit 0, N = 2
  const auto x = mi::diagonal_softmax_xent(Tensor2{{1, 0}, {0, 1}});
  CHECK(x.value == doctest::Approx(0.3132616875182228).epsilon(1e-14));
}

TEST_CASE("club_estimate matches the pairwise oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t steps = 1 + rng.uniform_index(3), n = 2 + rng.uniform_index(6);
    mi::ClubEstimator est(3, 2);
    est.init(rng);
    Tensor2 x(steps * n, 3), y(steps * n, 2);
    for (double& v : x.values()) v = rng.normal();
    for (double& v : y.values()) v = rng.normal();
    const FeatureBatch fx(steps, n, x), fy(steps, n, y);
    CHECK(mi::club_estimate(fx, fy, est) == doctest::Approx(club_oracle(fx, fy, est)).epsilon(1e-12));
  }
  mi::ClubEstimator est(2, 2);
  CHECK_THROWS_AS(mi::club_estimate(FeatureBatch(1, 1, 2), FeatureBatch(1, 1, 2), est), ValidationError);
}

TEST_CASE("club_estimate sign under independence and dependence") {
  Rng rng(2);
  const std::size_t n = 512, d = 2;
  Tensor2 x(n, d), y_dep(n, d), y_ind(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      x(i, k) = rng.normal();
      y_dep(i, k) = 0.9 * x(i, k) + std::sqrt(0.19) * rng.normal();
      y_ind(i, k) = rng.normal();
    }
  mi::ClubEstimator dep(d, d), ind(d, d);
  dep.init(rng);
  ind.init(rng);
  for (int step = 0; step < 1500; ++step) {
    mi::club_fit_step(dep, x, y_dep, 0.05);
    mi::club_fit_step(ind, x, y_ind, 0.05);
  }
  const double independent = mi::club_estimate(FeatureBatch(1, n, x), FeatureBatch(1, n, y_ind), ind);
  const double dependent = mi::club_estimate(FeatureBatch(1, n, x), FeatureBatch(1, n, y_dep), dep);
  CHECK(std::abs(independent) < 0.05);
  CHECK(dependent > 1.0);
}

TEST_CASE("club_fit_step decreases the NLL and honours a zero rate") {
  Rng rng(3);
  const std::size_t n = 256;
  Tensor2 x(n, 3), y(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 3; ++k) x(i, k) = rng.normal();
    y(i, 0) = 0.8 * x(i, 0) - 0.3 * x(i, 2) + 0.3 * rng.normal();
    y(i, 1) = 0.5 * x(i, 1) + 0.5 * rng.normal();
  }
  mi::ClubEstimator est(3, 2);
  est.init(rng);
  double previous = mi::club_fit_step(est, x, y, 0.05);
  int increases = 0;
  for (int step = 0; step < 100; ++step) {
    const double nll = mi::club_fit_step(est, x, y, 0.05);
    if (nll > previous) ++increases;
    previous = nll;
  }
  CHECK(increases <= 5);

  const auto before = est.params().value_hash();
  mi::club_fit_step(est, x, y, 0.0);
  CHECK(est.params().value_hash() == before);
}

TEST_CASE("cpc loss bounds and calibration") {
  Rng rng(4);
  const std::size_t steps = 8, n = 128, d = 16;
  mi::CpcHead head(d, 32, 3);
  head.init(rng);
  Tensor2 a(steps * n, d), b(steps * n, d);
  for (double& v : a.values()) v = rng.normal();
  for (double& v : b.values()) v = rng.normal();
  const FeatureBatch fa(steps, n, a), fb(steps, n, b);
  const double loss = mi::cpc_loss(fa, fb, head, rng, false).value;
  CHECK(loss >= 0.0);
  CHECK(std::abs(loss - std::log(128.0)) <= 0.1 * std::log(128.0));

  CHECK_THROWS_AS(mi::cpc_loss(FeatureBatch(3, n, d), FeatureBatch(3, n, d), head, rng, false), ValidationError);
  mi::CpcHead small(d, 4, 1);
  CHECK_THROWS_AS(mi::cpc_loss(FeatureBatch(4, 1, d), FeatureBatch(4, 1, d), small, rng, false), ValidationError);
}

TEST_CASE("cpc loss with hand-set scores") {
  // N = 2, R = 1, D = 1, context width 1. Zero LSTM weights with a large
  // output-gate bias and input gate bias give a known context; W_1 scales it.
  mi::CpcHead head(1, 1, 1);
  head.summarizer.bias.value = Tensor2{{50.0, -50.0, 50.0, 50.0}};  // i=1, f=0, g=tanh(50)=1, o=1
  const double context = std::tanh(std::tanh(50.0));
  head.projections[0].value = Tensor2{{1.0 / context}};
  // target step 1: sample 0 -> 1, sample 1 -> 0; scores row i = target_j · 1
  // row 0: [1, 0] positive 1; row 1: [1, 0] positive 0 -> use symmetric targets instead
  FeatureBatch source(2, 2, 1), target(2, 2, 1);
  target.at(1, 0)[0] = 1.0;
  target.at(1, 1)[0] = 0.0;
  // row 0 scores [1, 0] with positive 1 -> -log(e/(e+1)); row 1 scores [1, 0]
  // with positive 0 -> -log(1/(e+1)).
  const double value = mi::cpc_loss(source, target, head, 1, false).value;
  const double expected = 0.5 * (-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)) - std::log(1.0 / (std::exp(1.0) + 1.0)));
  CHECK(value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("cpc loss is causal in source and local in target") {
  Rng rng(5);
  const std::size_t steps = 8, n = 4, d = 3;
  mi::CpcHead head(d, 5, 2);
  head.init(rng);
  Tensor2 a(steps * n, d), b(steps * n, d);
  for (double& v : a.values()) v = rng.normal();
  for (double& v : b.values()) v = rng.normal();
  const std::size_t t = 3;
  const double base = mi::cpc_loss(FeatureBatch(steps, n, a), FeatureBatch(steps, n, b), head, t, false).value;
  for (std::size_t s = 0; s < steps; ++s) {
    Tensor2 a2 = a, b2 = b;
    a2(s * n + 1, 0) += 0.7;
    b2(s * n + 1, 0) += 0.7;
    const double src = mi::cpc_loss(FeatureBatch(steps, n, a2), FeatureBatch(steps, n, b), head, t, false).value;
    const double tgt = mi::cpc_loss(FeatureBatch(steps, n, a), FeatureBatch(steps, n, b2), head, t, false).value;
    // 0-based: source steps 0..t-1, target steps t..t+R-1
    CHECK((src != base) == (s < t));
    CHECK((tgt != base) == (s >= t && s < t + 2));
  }
}

TEST_CASE("infonce by hand and at chance") {
  CHECK(mi::kDefaultTau == 1.0);
  const Tensor2 eye = Tensor2::identity(2);
  CHECK(mi::infonce_directional(eye, eye, 1.0) == doctest::Approx(0.3132616875182228).epsilon(1e-12));
  CHECK(mi::infonce_loss(eye, eye, 1.0).value == doctest::Approx(0.3132616875182228).epsilon(1e-12));

  Rng rng(6);
  Tensor2 a(128, 32), b(128, 32);
  for (double& v : a.values()) v = rng.normal();
  for (double& v : b.values()) v = rng.normal();
  const double loss = mi::infonce_loss(a, b).value;
  CHECK(loss >= 0.0);
  CHECK(std::abs(loss - std::log(128.0)) <= 0.05 * std::log(128.0));

  CHECK_THROWS_AS(mi::infonce_loss(Tensor2{{1, 0}, {0, 0}}, eye), ValidationError);
  CHECK_THROWS_AS(mi::infonce_loss(eye, eye, 0.0), ValidationError);
}

TEST_CASE("reconstruction and total loss") {
  const Tensor2 x(3, 4);
  CHECK(mi::reconstruction_loss(x, x).value == 0.0);
  CHECK(mi::reconstruction_loss(x, Tensor2(3, 4, 1.0)).value == 1.0);
  Rng rng(7);
  Tensor2 a(5, 3), b(5, 3);
  for (double& v : a.values()) v = rng.normal();
  for (double& v : b.values()) v = rng.normal();
  double naive = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 3; ++k) naive += (a(i, k) - b(i, k)) * (a(i, k) - b(i, k));
  CHECK(std::abs(mi::reconstruction_loss(a, b).value - naive / 15.0) <= 1e-12);
  CHECK_THROWS_AS(mi::reconstruction_loss(a, x), ValidationError);

  CHECK(mi::total_loss({}) == 0.0);
  mi::LossReport parts{.recon = 1, .commit = 2, .cpc = 1, .nce = 2, .club_fine = 2, .club_coarse = 2};
  CHECK(mi::total_loss(parts) == 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    mi::LossReport r{rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const double expected = r.recon + r.commit + r.cpc + r.nce + r.club_fine + r.club_coarse;
    CHECK(mi::total_loss(r) == doctest::Approx(expected).epsilon(1e-15));
  }
  parts.nce = NAN;
  CHECK_THROWS_WITH_AS(mi::total_loss(parts), doctest::Contains("nce"), RuntimeError);
}

TEST_CASE("loss gradients match finite differences") {
  check_suite(testing::check_club_estimate(20, 100));
  check_suite(testing::check_club_nll(20, 101));
  check_suite(testing::check_cpc(20, 102));
  check_suite(testing::check_infonce(20, 103));
  check_suite(testing::check_reconstruction(20, 104));
  check_suite(testing::check_commitment(20, 105));
}

TEST_CASE("fitted CLUB approaches the value of the exact Gaussian conditional") {
  // y = rho·x + sqrt(1 - rho²)·noise per dimension. With q(y|x) equal to the
  // true conditional, the positive term is -(1/2) per dimension and the
  // negative term -(1 + rho²) / (2(1 - rho²)), so CLUB = d·rho² / (1 - rho²).
  constexpr std::size_t d = 4, n = 1024;
  constexpr double rho = 0.9;
  Rng rng(404);
  auto draw = [&] {
    std::pair<Tensor2, Tensor2> p{Tensor2(n, d), Tensor2(n, d)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        p.first(i, k) = rng.normal();
        p.second(i, k) = rho * p.first(i, k) + std::sqrt(1.0 - rho * rho) * rng.normal();
      }
    return p;
  };
  const auto train = draw();
  const auto test = draw();
  mi::ClubEstimator est(d, d);
  est.init(rng);
  for (int step = 0; step < 3000; ++step) mi::club_fit_step(est, train.first, train.second, 0.05);
  const double estimate = mi::club_estimate(FeatureBatch(1, n, test.first), FeatureBatch(1, n, test.second), est);
  const double exact = d * rho * rho / (1.0 - rho * rho);
  CHECK(estimate == doctest::Approx(exact).epsilon(0.05));
  // an upper bound on the true mutual information -d/2·log(1 - rho²)
  CHECK(estimate > -0.5 * d * std::log(1.0 - rho * rho));
}
