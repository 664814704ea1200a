#include "fcid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fcid/error.hpp"

namespace fcid {
namespace {

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ValidationError("core-numerics", std::string(op) + ": shape mismatch " +
                                               std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                               " vs " + std::to_string(b.rows()) + "x" +
                                               std::to_string(b.cols()));
  }
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ValidationError("core-numerics", "tensor data length " + std::to_string(data_.size()) +
                                               " does not match " + std::to_string(rows) + "x" +
                                               std::to_string(cols));
  }
}

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ValidationError("core-numerics", "ragged tensor literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor2& Tensor2::operator+=(const Tensor2& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor2& Tensor2::operator-=(const Tensor2& other) {
  require_same_shape(*this, other, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor2& Tensor2::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor2 operator+(Tensor2 a, const Tensor2& b) { return a += b; }
Tensor2 operator-(Tensor2 a, const Tensor2& b) { return a -= b; }
Tensor2 operator*(Tensor2 a, double s) { return a *= s; }

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw ValidationError("core-numerics", "matmul: inner dimensions " + std::to_string(a.cols()) +
                                               " and " + std::to_string(b.rows()) + " disagree");
  }
  Tensor2 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) {
    throw ValidationError("core-numerics", "matmul_tn: row counts disagree");
  }
  Tensor2 out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw ValidationError("core-numerics", "matmul_nt: column counts disagree");
  }
  Tensor2 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "hadamard");
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor2 col_sum(const Tensor2& a) {
  Tensor2 out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j);
  return out;
}

Tensor2 col_mean(const Tensor2& a) {
  Tensor2 out = col_sum(a);
  if (a.rows() > 0) out *= 1.0 / static_cast<double>(a.rows());
  return out;
}

void add_row_inplace(Tensor2& a, const Tensor2& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ValidationError("core-numerics", "add_row: expected 1x" + std::to_string(a.cols()) + " row");
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) r[j] += row[j];
  }
}

Tensor2 hconcat(std::initializer_list<const Tensor2*> parts) {
  std::size_t rows = (*parts.begin())->rows();
  std::size_t cols = 0;
  for (const Tensor2* p : parts) {
    if (p->rows() != rows) throw ValidationError("core-numerics", "hconcat: row counts disagree");
    cols += p->cols();
  }
  Tensor2 out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t offset = 0;
    for (const Tensor2* p : parts) {
      auto src = p->row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
      offset += p->cols();
    }
  }
  return out;
}

Tensor2 slice_cols(const Tensor2& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) throw ValidationError("core-numerics", "slice_cols out of range");
  Tensor2 out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a(i, j);
  return out;
}

Tensor2 slice_rows(const Tensor2& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) throw ValidationError("core-numerics", "slice_rows out of range");
  std::vector<double> data(a.values().begin() + static_cast<std::ptrdiff_t>(begin * a.cols()),
                           a.values().begin() + static_cast<std::ptrdiff_t>(end * a.cols()));
  return Tensor2(end - begin, a.cols(), std::move(data));
}

Tensor2 gather_rows(const Tensor2& a, std::span<const std::size_t> idx) {
  Tensor2 out(idx.size(), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a.rows()) throw ValidationError("core-numerics", "gather_rows index out of range");
    auto src = a.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Tensor2 vconcat(std::span<const Tensor2> parts) {
  if (parts.empty()) return {};
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols()) throw ValidationError("core-numerics", "vconcat: widths disagree");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * parts[0].cols());
  for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
  return Tensor2(rows, parts[0].cols(), std::move(data));
}

double sum(const Tensor2& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

FeatureBatch::FeatureBatch(std::size_t steps, std::size_t batch, std::size_t dim)
    : steps_(steps), batch_(batch), rows_(steps * batch, dim) {}

FeatureBatch::FeatureBatch(std::size_t steps, std::size_t batch, Tensor2 rows)
    : steps_(steps), batch_(batch), rows_(std::move(rows)) {
  if (rows_.rows() != steps * batch) {
    throw ValidationError("core-numerics", "feature batch expects " + std::to_string(steps * batch) +
                                               " rows, got " + std::to_string(rows_.rows()));
  }
}

Tensor2 FeatureBatch::step(std::size_t t) const {
  return slice_rows(rows_, t * batch_, (t + 1) * batch_);
}

void FeatureBatch::set_step(std::size_t t, const Tensor2& values) {
  if (values.rows() != batch_ || values.cols() != dim()) {
    throw ValidationError("core-numerics", "set_step: shape mismatch");
  }
  std::copy(values.values().begin(), values.values().end(),
            rows_.values().begin() + static_cast<std::ptrdiff_t>(t * batch_ * dim()));
}

Tensor2 FeatureBatch::sequence(std::size_t i) const {
  Tensor2 out(steps_, dim());
  for (std::size_t t = 0; t < steps_; ++t) {
    auto src = at(t, i);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

Tensor2 FeatureBatch::time_mean() const {
  Tensor2 out(batch_, dim());
  for (std::size_t t = 0; t < steps_; ++t) {
    for (std::size_t i = 0; i < batch_; ++i) {
      auto src = at(t, i);
      auto dst = out.row(i);
      for (std::size_t k = 0; k < dim(); ++k) dst[k] += src[k];
    }
  }
  if (steps_ > 0) out *= 1.0 / static_cast<double>(steps_);
  return out;
}

}  // namespace fcid
