#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fcid {

/// Dense row-major matrix of doubles. Value type; copies are deep.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);
  Tensor2(std::initializer_list<std::initializer_list<double>> rows);

  static Tensor2 identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor2& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Tensor2& operator+=(const Tensor2& other);
  Tensor2& operator-=(const Tensor2& other);
  Tensor2& operator*=(double s);

  bool operator==(const Tensor2& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Tensor2 operator+(Tensor2 a, const Tensor2& b);
Tensor2 operator-(Tensor2 a, const Tensor2& b);
Tensor2 operator*(Tensor2 a, double s);

/// a·b
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
/// aᵀ·b
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
/// a·bᵀ
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);

Tensor2 transpose(const Tensor2& a);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
/// Column sums as a 1×cols row.
Tensor2 col_sum(const Tensor2& a);
/// Column means as a 1×cols row.
Tensor2 col_mean(const Tensor2& a);
/// Adds a 1×cols row to every row.
void add_row_inplace(Tensor2& a, const Tensor2& row);

Tensor2 hconcat(std::initializer_list<const Tensor2*> parts);
Tensor2 slice_cols(const Tensor2& a, std::size_t begin, std::size_t end);
Tensor2 slice_rows(const Tensor2& a, std::size_t begin, std::size_t end);
Tensor2 gather_rows(const Tensor2& a, std::span<const std::size_t> idx);
/// Stacks equal-width tensors vertically.
Tensor2 vconcat(std::span<const Tensor2> parts);

double sum(const Tensor2& a);
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double max_abs_diff(const Tensor2& a, const Tensor2& b);

/// A batch of N sequences of length T, stored time-major as a (T·N)×D matrix
/// where row t·N + i is sample i at time step t.
class FeatureBatch {
 public:
  FeatureBatch() = default;
  FeatureBatch(std::size_t steps, std::size_t batch, std::size_t dim);
  FeatureBatch(std::size_t steps, std::size_t batch, Tensor2 rows);

  std::size_t steps() const { return steps_; }
  std::size_t batch() const { return batch_; }
  std::size_t dim() const { return rows_.cols(); }

  const Tensor2& rows() const { return rows_; }
  Tensor2& rows() { return rows_; }

  std::span<const double> at(std::size_t t, std::size_t i) const { return rows_.row(t * batch_ + i); }
  std::span<double> at(std::size_t t, std::size_t i) { return rows_.row(t * batch_ + i); }

  /// N×D slice for one time step.
  Tensor2 step(std::size_t t) const;
  void set_step(std::size_t t, const Tensor2& values);
  /// T×D sequence for one sample.
  Tensor2 sequence(std::size_t i) const;
  /// N×D mean over time.
  Tensor2 time_mean() const;

  bool operator==(const FeatureBatch& other) const = default;

 private:
  std::size_t steps_ = 0;
  std::size_t batch_ = 0;
  Tensor2 rows_;
};

}  // namespace fcid
