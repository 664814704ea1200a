#include "fcid/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fcid/error.hpp"

namespace fcid {

void Param::init_uniform(std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (double& v : value.values()) v = rng.uniform(-bound, bound);
  grad = Tensor2(value.rows(), value.cols());
}

void ParamStore::add(std::string name, Param& param) {
  if (!param.value.same_shape(param.grad)) {
    throw ValidationError("core-numerics", "parameter '" + name + "' has mismatched gradient shape");
  }
  if (find(name) != nullptr) {
    throw ValidationError("core-numerics", "duplicate parameter name '" + name + "'");
  }
  entries_.push_back({std::move(name), &param});
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.param->value.size();
  return n;
}

Param* ParamStore::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.param;
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.param->zero_grad();
}

void ParamStore::apply_gradient(double scale) {
  for (auto& e : entries_) {
    auto v = e.param->value.values();
    auto g = e.param->grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += scale * g[i];
  }
}

std::uint64_t ParamStore::value_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& e : entries_) {
    for (double v : e.param->value.values()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

const GradCheckEntry* GradCheckReport::worst() const {
  const GradCheckEntry* w = nullptr;
  for (const auto& p : params)
    if (w == nullptr || p.max_rel_error > w->max_rel_error) w = &p;
  return w;
}

GradCheckReport finite_diff_check_parts(const std::function<std::vector<double>()>& parts, const ParamStore& params,
                                        double epsilon, double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& e : params.entries()) {
    GradCheckEntry entry;
    entry.name = e.name;
    auto values = e.param->value.values();
    auto grads = e.param->grad.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const std::vector<double> up = parts();
      values[i] = saved - epsilon;
      const std::vector<double> down = parts();
      values[i] = saved;
      if (up.size() != down.size()) throw RuntimeError("core-numerics", "loss part count changed while probing");
      double numeric = 0.0;
      for (std::size_t k = 0; k < up.size(); ++k) {
        if (!std::isfinite(up[k]) || !std::isfinite(down[k])) {
          throw RuntimeError("core-numerics",
                             "non-finite loss while probing '" + e.name + "'[" + std::to_string(i) + "]");
        }
        numeric += (up[k] - down[k]) / (2.0 * epsilon);
      }
      const double analytic = grads[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      if (i == 0 || rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.analytic = analytic;
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

GradCheckReport finite_diff_check(const std::function<double()>& loss, const ParamStore& params, double epsilon,
                                  double tolerance) {
  return finite_diff_check_parts([&] { return std::vector<double>{loss()}; }, params, epsilon, tolerance);
}

}  // namespace fcid
