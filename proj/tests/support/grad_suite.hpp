#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fcid/params.hpp"

namespace fcid::testing {

/// Outcome of finite-difference checks over several random instances of one loss.
struct SuiteResult {
  std::string loss;
  int instances = 0;
  int passed = 0;
  double worst_rel_error = 0.0;
  std::string worst_param;
};

inline constexpr double kGradEpsilon = 1e-5;
inline constexpr double kGradTolerance = 1e-4;

/// Folds one instance's report into the suite summary.
void record(SuiteResult& result, const GradCheckReport& report);

/// Every differentiable loss checked at epsilon 1e-5 / tolerance 1e-4, with
/// gradients taken with respect to both its inputs and its parameters.
SuiteResult check_club_estimate(int instances, std::uint64_t seed);
SuiteResult check_club_nll(int instances, std::uint64_t seed);
SuiteResult check_cpc(int instances, std::uint64_t seed);
SuiteResult check_infonce(int instances, std::uint64_t seed);
SuiteResult check_reconstruction(int instances, std::uint64_t seed);
SuiteResult check_commitment(int instances, std::uint64_t seed);
/// Full training objective of a small FCID model with frozen code assignments.
SuiteResult check_composite(int instances, std::uint64_t seed);

std::vector<SuiteResult> run_all_gradient_suites(int instances, std::uint64_t seed);

}  // namespace fcid::testing
