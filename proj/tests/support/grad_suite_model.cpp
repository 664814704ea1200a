#include "grad_suite.hpp"

#include "fcid/model.hpp"
#include "fcid/rng.hpp"

namespace fcid::testing {
namespace {

model::Batch random_batch(const model::ModelConfig& cfg, std::size_t steps, std::size_t n, Rng& rng) {
  auto fill = [&](std::size_t rows, std::size_t cols) {
    Tensor2 t(rows, cols);
    for (double& v : t.values()) v = rng.normal();
    return t;
  };
  model::Batch b;
  b.audio = FeatureBatch(steps, n, fill(steps * n, cfg.audio_dim));
  b.video = FeatureBatch(steps, n, fill(steps * n, cfg.video_dim));
  b.text = fill(n, cfg.text_dim);
  return b;
}

}  // namespace

SuiteResult check_composite(int instances, std::uint64_t seed) {
  SuiteResult result{"composite", 0, 0, 0.0, {}};
  Rng rng(seed);
  for (int n = 0; n < instances; ++n) {
    model::ModelConfig cfg;
    cfg.audio_dim = 2 + rng.uniform_index(3);
    cfg.video_dim = 2 + rng.uniform_index(3);
    cfg.text_dim = 2 + rng.uniform_index(3);
    cfg.code_dim = 2 + rng.uniform_index(3);
    cfg.codebook_size = 3 + rng.uniform_index(4);
    cfg.hidden = 2;
    cfg.context = 2;
    cfg.horizon = 1 + rng.uniform_index(2);
    const std::size_t steps = cfg.horizon + 3;
    const std::size_t batch = 3 + rng.uniform_index(2);

    // Scales chosen so that CPC scores are O(1) and the recurrent weights see
    // a non-trivial state; at the default initialization many gradient entries
    // sit below the round-off floor of a central difference.
    model::FcidModel m(cfg);
    m.init(rng);
    ParamStore store = m.parameters();
    for (const auto& e : store.entries()) {
      double scale = 0.0;
      if (e.name.starts_with("fine_general.")) scale = 1.0;
      if (e.name.starts_with("cpc.")) scale = e.name.find(".lstm.") != std::string::npos ? 0.4 : 2.0;
      if (scale > 0.0)
        for (double& v : e.param->value.values()) v = scale * rng.normal();
    }
    model::TrainConfig train;
    train.use_club_a = rng.uniform() < 0.8;
    train.use_club_v = rng.uniform() < 0.8;
    train.use_club_av = rng.uniform() < 0.8;
    train.use_club_te = rng.uniform() < 0.8;
    const model::Batch data = random_batch(cfg, steps, batch, rng);
    const std::size_t t = steps - cfg.horizon;

    const model::Objective live = m.objective(data, train, t, false);
    model::FrozenCodes frozen;
    for (std::size_t k = 0; k < 3; ++k) {
      frozen.indices[k] = live.coarse.codes[k].indices;
      frozen.offsets[k] = live.coarse.codes[k].quantized - live.coarse.general[k];
    }

    store.zero_grad();
    m.objective(data, train, t, true, &frozen);
    auto parts = [&] {
      const mi::LossReport r = m.objective(data, train, t, false, &frozen).report;
      return std::vector<double>{r.recon, r.commit, r.cpc, r.nce, r.club_fine, r.club_coarse};
    };
    record(result, finite_diff_check_parts(parts, store, kGradEpsilon, kGradTolerance));
  }
  return result;
}

std::vector<SuiteResult> run_all_gradient_suites(int instances, std::uint64_t seed) {
  return {check_club_estimate(instances, seed),     check_club_nll(instances, seed + 1),
          check_cpc(instances, seed + 2),           check_infonce(instances, seed + 3),
          check_reconstruction(instances, seed + 4), check_commitment(instances, seed + 5),
          check_composite(instances, seed + 6)};
}

}  // namespace fcid::testing
