#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fcid/layers.hpp"
#include "fcid/params.hpp"
#include "fcid/rng.hpp"
#include "fcid/tensor.hpp"

namespace fcid::mi {

inline constexpr double kDefaultTau = 1.0;
inline constexpr double kLogVarClamp = 10.0;

/// Mean over rows of logsumexp(S_i) - S_ii; row i's positive is column i.
struct SoftmaxXent {
  double value = 0.0;
  Tensor2 grad_scores;
};
SoftmaxXent diagonal_softmax_xent(const Tensor2& scores);

/// Variational network q_θ(y | x): a tanh perceptron with hidden width 2·dim(x)
/// and two linear heads for the mean and log-variance of a diagonal Gaussian.
/// Log-variance is clamped to [-10, 10].
class ClubEstimator {
 public:
  struct Prediction {
    Tensor2 input;
    Tensor2 hidden;
    Tensor2 mean;
    Tensor2 logvar;
    Tensor2 raw_logvar;
  };

  ClubEstimator() = default;
  ClubEstimator(std::size_t general_dim, std::size_t specific_dim);

  std::size_t general_dim() const { return trunk.in_dim(); }
  std::size_t specific_dim() const { return mean_head.out_dim(); }

  void init(Rng& rng);
  void register_params(ParamStore& store, const std::string& prefix);
  ParamStore params();
  void zero_grad();

  Prediction predict(const Tensor2& general) const;
  /// Accumulates θ gradients; returns dL/d(general).
  Tensor2 backward(const Prediction& p, const Tensor2& grad_mean, const Tensor2& grad_logvar);

  Affine trunk;
  Affine mean_head;
  Affine logvar_head;
};

/// Rows of a FeatureBatch at one time step form one group; CLUB negatives are
/// drawn within a group.
struct ClubResult {
  double value = 0.0;
  Tensor2 grad_general;   // same layout as general.rows()
  Tensor2 grad_specific;  // same layout as specific.rows()
};

/// Î = mean_{i,t} log q(y_{i,t} | x_{i,t}) - mean_{i,j,t} log q(y_{j,t} | x_{i,t}).
/// With `backward`, input gradients are returned and θ gradients accumulated
/// into `est`. Throws ValidationError if the batch has fewer than 2 samples.
ClubResult club_estimate(const FeatureBatch& general, const FeatureBatch& specific, ClubEstimator& est,
                         bool backward);
double club_estimate(const FeatureBatch& general, const FeatureBatch& specific, const ClubEstimator& est);

/// Gaussian negative log-likelihood -mean_rows log q(y | x), including the
/// log-variance and log(2π) terms. Accumulates θ gradients when `backward`.
double club_nll(const Tensor2& general, const Tensor2& specific, ClubEstimator& est, bool backward);

/// One SGD step on the NLL. Returns the NLL before the step; throws
/// RuntimeError if it is not finite. A positive `max_grad_norm` rescales the
/// θ gradient to at most that global norm before the step.
double club_fit_step(ClubEstimator& est, const Tensor2& general, const Tensor2& specific, double learning_rate,
                     double max_grad_norm = 0.0);

/// Per-source-modality CPC head: an LSTM summarizer and one projection
/// W_r (context×feature) per prediction step r = 1..R.
class CpcHead {
 public:
  CpcHead() = default;
  CpcHead(std::size_t feature_dim, std::size_t context_dim, std::size_t horizon);

  std::size_t horizon() const { return projections.size(); }
  std::size_t feature_dim() const { return summarizer.input_dim(); }
  std::size_t context_dim() const { return summarizer.hidden_dim(); }

  void init(Rng& rng);
  void register_params(ParamStore& store, const std::string& prefix);

  LstmCell summarizer;
  std::vector<Param> projections;
};

struct CpcResult {
  double value = 0.0;
  std::size_t context_steps = 0;
  Tensor2 grad_source;  // same layout as source.rows()
  Tensor2 grad_target;  // same layout as target.rows()
};

/// Number of summarized steps t, uniform in [1, T - R].
std::size_t draw_cpc_time(std::size_t steps, std::size_t horizon, Rng& rng);

/// Contrastive predictive coding from `source` (modality m) to `target`
/// (modality n). The context o_t summarizes source steps 1..t; for r = 1..R
/// the score of candidate j is target_{j,t+r} · (o_{i,t} W_r), negatives are
/// the other batch items at the same step, and the loss is
/// -(1/R) Σ_r mean_i log softmax_i. Throws if T <= R or N < 2.
CpcResult cpc_loss(const FeatureBatch& source, const FeatureBatch& target, CpcHead& head,
                   std::size_t context_steps, bool backward);
CpcResult cpc_loss(const FeatureBatch& source, const FeatureBatch& target, CpcHead& head, Rng& rng,
                   bool backward);

struct PairLoss {
  double value = 0.0;
  Tensor2 grad_first;
  Tensor2 grad_second;
};

/// One direction: -(1/N) Σ_i log softmax_j(cos(m_i, n_j)/τ)[i].
double infonce_directional(const Tensor2& first, const Tensor2& second, double tau = kDefaultTau);
/// Mean of both directions, with gradients.
PairLoss infonce_loss(const Tensor2& first, const Tensor2& second, double tau = kDefaultTau);

struct ReconLoss {
  double value = 0.0;
  Tensor2 grad_decoded;
};
/// Mean squared error over all elements.
ReconLoss reconstruction_loss(const Tensor2& target, const Tensor2& decoded);

struct LossReport {
  double recon = 0.0;
  double commit = 0.0;
  double cpc = 0.0;
  double nce = 0.0;
  double club_fine = 0.0;
  double club_coarse = 0.0;
  double total = 0.0;

  bool operator==(const LossReport& other) const = default;
};

/// recon + commit + (cpc + nce) + (club_fine + club_coarse). Throws
/// RuntimeError naming the first non-finite part.
double total_loss(const LossReport& parts);

/// CSV: step,recon,commit,cpc,nce,club_fine,club_coarse,total.
void save_loss_csv(const std::filesystem::path& path, const std::vector<LossReport>& trajectory);

}  // namespace fcid::mi
