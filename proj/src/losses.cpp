#include "fcid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fcid/error.hpp"
#include "fcid/io.hpp"

namespace fcid::mi {
namespace {

constexpr const char* kModule = "mi-losses";

void require_pairing(const FeatureBatch& a, const FeatureBatch& b, const char* what) {
  if (a.steps() != b.steps() || a.batch() != b.batch()) {
    throw ValidationError(kModule, std::string(what) + ": batches are not paired");
  }
}

/// Row-normalizes and returns the norms.
Tensor2 unit_rows(const Tensor2& x, std::vector<double>& norms) {
  Tensor2 u = x;
  norms.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double n = std::sqrt(squared_norm(x.row(i)));
    if (n == 0.0) throw ValidationError(kModule, "cosine similarity: row " + std::to_string(i) + " has zero norm");
    norms[i] = n;
    for (double& v : u.row(i)) v /= n;
  }
  return u;
}

/// Backward of row normalization u = x / |x|.
Tensor2 unit_rows_backward(const Tensor2& u, const std::vector<double>& norms, const Tensor2& du) {
  Tensor2 dx(u.rows(), u.cols());
  for (std::size_t i = 0; i < u.rows(); ++i) {
    const double proj = dot(u.row(i), du.row(i));
    for (std::size_t k = 0; k < u.cols(); ++k) dx(i, k) = (du(i, k) - u(i, k) * proj) / norms[i];
  }
  return dx;
}

}  // namespace

SoftmaxXent diagonal_softmax_xent(const Tensor2& scores) {
  const std::size_t n = scores.rows();
  if (n == 0 || scores.cols() != n) throw ValidationError(kModule, "contrastive scores must be square");
  SoftmaxXent out;
  out.grad_scores = Tensor2(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = scores.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double s : row) z += std::exp(s - peak);
    const double lse = peak + std::log(z);
    out.value += (lse - row[i]) * inv_n;
    for (std::size_t j = 0; j < n; ++j) out.grad_scores(i, j) = std::exp(row[j] - lse) * inv_n;
    out.grad_scores(i, i) -= inv_n;
  }
  return out;
}

// ---------------------------------------------------------------- CLUB

ClubEstimator::ClubEstimator(std::size_t general_dim, std::size_t specific_dim)
    : trunk(general_dim, 2 * general_dim),
      mean_head(2 * general_dim, specific_dim),
      logvar_head(2 * general_dim, specific_dim) {}

void ClubEstimator::init(Rng& rng) {
  trunk.init(rng);
  mean_head.init(rng);
  logvar_head.init(rng);
}

void ClubEstimator::register_params(ParamStore& store, const std::string& prefix) {
  trunk.register_params(store, prefix + ".trunk");
  mean_head.register_params(store, prefix + ".mean");
  logvar_head.register_params(store, prefix + ".logvar");
}

ParamStore ClubEstimator::params() {
  ParamStore store;
  register_params(store, "club");
  return store;
}

void ClubEstimator::zero_grad() {
  for (Param* p : {&trunk.weight, &trunk.bias, &mean_head.weight, &mean_head.bias, &logvar_head.weight,
                   &logvar_head.bias}) {
    p->zero_grad();
  }
}

ClubEstimator::Prediction ClubEstimator::predict(const Tensor2& general) const {
  Prediction p;
  p.input = general;
  p.hidden = tanh_forward(trunk.forward(general));
  p.mean = mean_head.forward(p.hidden);
  p.raw_logvar = logvar_head.forward(p.hidden);
  p.logvar = p.raw_logvar;
  for (double& v : p.logvar.values()) v = std::clamp(v, -kLogVarClamp, kLogVarClamp);
  return p;
}

Tensor2 ClubEstimator::backward(const Prediction& p, const Tensor2& grad_mean, const Tensor2& grad_logvar) {
  Tensor2 dlogvar = grad_logvar;
  for (std::size_t i = 0; i < dlogvar.size(); ++i) {
    if (p.raw_logvar[i] < -kLogVarClamp || p.raw_logvar[i] > kLogVarClamp) dlogvar[i] = 0.0;
  }
  Tensor2 dhidden = mean_head.backward(p.hidden, grad_mean);
  dhidden += logvar_head.backward(p.hidden, dlogvar);
  return trunk.backward(p.input, tanh_backward(p.hidden, dhidden));
}

ClubResult club_estimate(const FeatureBatch& general, const FeatureBatch& specific, ClubEstimator& est,
                         bool backward) {
  require_pairing(general, specific, "club_estimate");
  const std::size_t n = general.batch();
  const std::size_t steps = general.steps();
  if (n < 2) throw ValidationError(kModule, "club_estimate needs a batch of at least 2");
  if (general.dim() != est.general_dim() || specific.dim() != est.specific_dim()) {
    throw ValidationError(kModule, "club_estimate: feature widths do not match the estimator");
  }
  const std::size_t d = specific.dim();
  const auto pred = est.predict(general.rows());
  const Tensor2& y = specific.rows();

  ClubResult out;
  Tensor2 grad_mean, grad_logvar;
  if (backward) {
    out.grad_specific = Tensor2(y.rows(), d);
    grad_mean = Tensor2(y.rows(), d);
    grad_logvar = Tensor2(y.rows(), d);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double scale = 1.0 / static_cast<double>(steps);
  std::vector<double> m1(d), m2(d), sum_v(d), sum_vmu(d);
  for (std::size_t t = 0; t < steps; ++t) {
    const std::size_t base = t * n;
    std::fill(m1.begin(), m1.end(), 0.0);
    std::fill(m2.begin(), m2.end(), 0.0);
    std::fill(sum_v.begin(), sum_v.end(), 0.0);
    std::fill(sum_vmu.begin(), sum_vmu.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        const double yj = y(base + j, k);
        m1[k] += yj * inv_n;
        m2[k] += yj * yj * inv_n;
      }
    }
    double group = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = base + i;
      for (std::size_t k = 0; k < d; ++k) {
        const double v = std::exp(-pred.logvar(r, k));
        const double mu = pred.mean(r, k);
        const double yi = y(r, k);
        // (y_i - mu_i)^2 - mean_j (y_j - mu_i)^2, expanded.
        const double bracket = yi * yi - 2.0 * mu * (yi - m1[k]) - m2[k];
        group += -0.5 * v * bracket;
        if (backward) {
          const double dv = scale * (-0.5 * bracket * inv_n);
          grad_logvar(r, k) = -v * dv;
          grad_mean(r, k) = scale * v * (yi - m1[k]) * inv_n;
          sum_v[k] += v;
          sum_vmu[k] += v * mu;
        }
      }
    }
    out.value += scale * group * inv_n;
    if (backward) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = base + i;
        for (std::size_t k = 0; k < d; ++k) {
          const double v = std::exp(-pred.logvar(r, k));
          const double yk = y(r, k);
          out.grad_specific(r, k) =
              scale * (-v * (yk - pred.mean(r, k)) * inv_n + (yk * sum_v[k] - sum_vmu[k]) * inv_n * inv_n);
        }
      }
    }
  }
  if (backward) out.grad_general = est.backward(pred, grad_mean, grad_logvar);
  return out;
}

double club_estimate(const FeatureBatch& general, const FeatureBatch& specific, const ClubEstimator& est) {
  ClubEstimator copy = est;
  return club_estimate(general, specific, copy, false).value;
}

double club_nll(const Tensor2& general, const Tensor2& specific, ClubEstimator& est, bool backward) {
  if (general.rows() != specific.rows()) throw ValidationError(kModule, "club_nll: row counts differ");
  if (general.cols() != est.general_dim() || specific.cols() != est.specific_dim()) {
    throw ValidationError(kModule, "club_nll: feature widths do not match the estimator");
  }
  const std::size_t rows = general.rows();
  const std::size_t d = specific.cols();
  if (rows == 0) throw ValidationError(kModule, "club_nll: empty batch");
  const auto pred = est.predict(general);
  const double inv_rows = 1.0 / static_cast<double>(rows);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  Tensor2 grad_mean(rows, d), grad_logvar(rows, d);
  double nll = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < d; ++k) {
      const double lv = pred.logvar(r, k);
      const double v = std::exp(-lv);
      const double diff = specific(r, k) - pred.mean(r, k);
      nll += 0.5 * (diff * diff * v + lv + log_2pi) * inv_rows;
      grad_mean(r, k) = -diff * v * inv_rows;
      grad_logvar(r, k) = 0.5 * (1.0 - diff * diff * v) * inv_rows;
    }
  }
  if (backward) est.backward(pred, grad_mean, grad_logvar);
  return nll;
}

double club_fit_step(ClubEstimator& est, const Tensor2& general, const Tensor2& specific, double learning_rate,
                     double max_grad_norm) {
  est.zero_grad();
  const double nll = club_nll(general, specific, est, true);
  if (!std::isfinite(nll)) throw RuntimeError(kModule, "CLUB fit produced a non-finite NLL");
  ParamStore store = est.params();
  double scale = learning_rate;
  if (max_grad_norm > 0.0) {
    double norm = 0.0;
    for (const auto& e : store.entries()) norm += squared_norm(e.param->grad.values());
    norm = std::sqrt(norm);
    if (norm > max_grad_norm) scale *= max_grad_norm / norm;
  }
  store.apply_gradient(-scale);
  return nll;
}

// ---------------------------------------------------------------- CPC

CpcHead::CpcHead(std::size_t feature_dim, std::size_t context_dim, std::size_t horizon)
    : summarizer(feature_dim, context_dim) {
  if (horizon < 1) throw ValidationError(kModule, "CPC horizon must be at least 1");
  projections.assign(horizon, Param(context_dim, feature_dim));
}

void CpcHead::init(Rng& rng) {
  summarizer.init(rng);
  for (Param& w : projections) w.init_uniform(context_dim(), rng);
}

void CpcHead::register_params(ParamStore& store, const std::string& prefix) {
  summarizer.register_params(store, prefix + ".lstm");
  for (std::size_t r = 0; r < projections.size(); ++r) {
    store.add(prefix + ".w" + std::to_string(r + 1), projections[r]);
  }
}

std::size_t draw_cpc_time(std::size_t steps, std::size_t horizon, Rng& rng) {
  if (steps <= horizon) {
    throw ValidationError(kModule, "CPC needs T > R, got T=" + std::to_string(steps) + " R=" + std::to_string(horizon));
  }
  return 1 + rng.uniform_index(steps - horizon);
}

CpcResult cpc_loss(const FeatureBatch& source, const FeatureBatch& target, CpcHead& head,
                   std::size_t context_steps, bool backward) {
  require_pairing(source, target, "cpc_loss");
  const std::size_t steps = source.steps();
  const std::size_t n = source.batch();
  const std::size_t horizon = head.horizon();
  if (steps <= horizon) {
    throw ValidationError(kModule, "CPC needs T > R, got T=" + std::to_string(steps) + " R=" + std::to_string(horizon));
  }
  if (n < 2) throw ValidationError(kModule, "CPC needs a batch of at least 2");
  if (context_steps < 1 || context_steps > steps - horizon) {
    throw ValidationError(kModule, "CPC context length must lie in [1, T-R]");
  }
  if (source.dim() != head.feature_dim() || target.dim() != head.feature_dim()) {
    throw ValidationError(kModule, "CPC feature width does not match the head");
  }

  std::vector<Tensor2> inputs;
  inputs.reserve(context_steps);
  for (std::size_t t = 0; t < context_steps; ++t) inputs.push_back(source.step(t));
  LstmCell::Trace trace;
  const auto contexts = head.summarizer.forward(inputs, backward ? &trace : nullptr);
  const Tensor2& context = contexts.back();

  CpcResult out;
  out.context_steps = context_steps;
  Tensor2 grad_context(n, head.context_dim());
  if (backward) {
    out.grad_source = Tensor2(source.rows().rows(), source.dim());
    out.grad_target = Tensor2(target.rows().rows(), target.dim());
  }
  const double inv_r = 1.0 / static_cast<double>(horizon);
  for (std::size_t r = 1; r <= horizon; ++r) {
    const std::size_t future = context_steps - 1 + r;
    const Tensor2 prediction = matmul(context, head.projections[r - 1].value);
    const Tensor2 candidates = target.step(future);
    const Tensor2 scores = matmul_nt(prediction, candidates);
    SoftmaxXent xent = diagonal_softmax_xent(scores);
    out.value += xent.value * inv_r;
    if (!backward) continue;
    xent.grad_scores *= inv_r;
    const Tensor2 grad_prediction = matmul(xent.grad_scores, candidates);
    const Tensor2 grad_candidates = matmul_tn(xent.grad_scores, prediction);
    head.projections[r - 1].grad += matmul_tn(context, grad_prediction);
    grad_context += matmul_nt(grad_prediction, head.projections[r - 1].value);
    for (std::size_t i = 0; i < n; ++i) {
      auto src = grad_candidates.row(i);
      auto dst = out.grad_target.row(future * n + i);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
  }
  if (backward) {
    std::vector<Tensor2> dh(context_steps);
    dh.back() = grad_context;
    const auto dx = head.summarizer.backward(trace, dh);
    for (std::size_t t = 0; t < context_steps; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        auto src = dx[t].row(i);
        std::copy(src.begin(), src.end(), out.grad_source.row(t * n + i).begin());
      }
    }
  }
  return out;
}

CpcResult cpc_loss(const FeatureBatch& source, const FeatureBatch& target, CpcHead& head, Rng& rng,
                   bool backward) {
  return cpc_loss(source, target, head, draw_cpc_time(source.steps(), head.horizon(), rng), backward);
}

// ---------------------------------------------------------------- InfoNCE

double infonce_directional(const Tensor2& first, const Tensor2& second, double tau) {
  if (!(tau > 0.0)) throw ValidationError(kModule, "InfoNCE temperature must be positive");
  if (!first.same_shape(second)) throw ValidationError(kModule, "InfoNCE: shape mismatch");
  if (first.rows() < 2) throw ValidationError(kModule, "InfoNCE needs N >= 2");
  std::vector<double> na, nb;
  const Tensor2 scores = matmul_nt(unit_rows(first, na), unit_rows(second, nb)) * (1.0 / tau);
  return diagonal_softmax_xent(scores).value;
}

PairLoss infonce_loss(const Tensor2& first, const Tensor2& second, double tau) {
  if (!(tau > 0.0)) throw ValidationError(kModule, "InfoNCE temperature must be positive");
  if (!first.same_shape(second)) throw ValidationError(kModule, "InfoNCE: shape mismatch");
  if (first.rows() < 2) throw ValidationError(kModule, "InfoNCE needs N >= 2");
  std::vector<double> norms_a, norms_b;
  const Tensor2 ua = unit_rows(first, norms_a);
  const Tensor2 ub = unit_rows(second, norms_b);
  const Tensor2 scores = matmul_nt(ua, ub) * (1.0 / tau);
  const SoftmaxXent forward = diagonal_softmax_xent(scores);
  const SoftmaxXent reverse = diagonal_softmax_xent(transpose(scores));
  PairLoss out;
  out.value = 0.5 * (forward.value + reverse.value);
  Tensor2 grad = (forward.grad_scores + transpose(reverse.grad_scores)) * (0.5 / tau);
  out.grad_first = unit_rows_backward(ua, norms_a, matmul(grad, ub));
  out.grad_second = unit_rows_backward(ub, norms_b, matmul_tn(grad, ua));
  return out;
}

// ---------------------------------------------------------------- reconstruction / total

ReconLoss reconstruction_loss(const Tensor2& target, const Tensor2& decoded) {
  if (!target.same_shape(decoded)) throw ValidationError(kModule, "reconstruction: shape mismatch");
  ReconLoss out;
  out.grad_decoded = Tensor2(target.rows(), target.cols());
  if (target.empty()) return out;
  const double inv = 1.0 / static_cast<double>(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double diff = decoded[i] - target[i];
    out.value += diff * diff * inv;
    out.grad_decoded[i] = 2.0 * diff * inv;
  }
  return out;
}

double total_loss(const LossReport& parts) {
  const std::pair<const char*, double> named[] = {{"recon", parts.recon},         {"commit", parts.commit},
                                                  {"cpc", parts.cpc},             {"nce", parts.nce},
                                                  {"club_fine", parts.club_fine}, {"club_coarse", parts.club_coarse}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) throw RuntimeError(kModule, std::string("non-finite loss component '") + name + "'");
  }
  return parts.recon + parts.commit + (parts.cpc + parts.nce) + (parts.club_fine + parts.club_coarse);
}

void save_loss_csv(const std::filesystem::path& path, const std::vector<LossReport>& trajectory) {
  std::ostringstream out;
  out << "step,recon,commit,cpc,nce,club_fine,club_coarse,total\n";
  for (std::size_t s = 0; s < trajectory.size(); ++s) {
    const auto& r = trajectory[s];
    out << s << ',' << io::format_real(r.recon) << ',' << io::format_real(r.commit) << ',' << io::format_real(r.cpc)
        << ',' << io::format_real(r.nce) << ',' << io::format_real(r.club_fine) << ','
        << io::format_real(r.club_coarse) << ',' << io::format_real(r.total) << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace fcid::mi
