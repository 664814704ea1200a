#include "fcid/toc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fcid/error.hpp"
#include "fcid/io.hpp"

namespace fcid::toc {
namespace {

constexpr const char* kModule = "codebook-toc";

Tensor2 normalized_rows(const Tensor2& rows, const char* what) {
  Tensor2 out = rows;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double norm = std::sqrt(squared_norm(out.row(i)));
    if (norm == 0.0) {
      throw ValidationError(kModule, std::string(what) + " row " + std::to_string(i) + " has zero norm");
    }
    for (double& v : out.row(i)) v /= norm;
  }
  return out;
}

}  // namespace

Codebook l2_normalize(const Codebook& codebook) {
  return Codebook(normalized_rows(codebook.codes(), "codebook"), true);
}

std::vector<double> per_dim_similarity(const Codebook& codebook) {
  const Codebook unit = codebook.normalized() ? codebook : l2_normalize(codebook);
  const std::size_t h = unit.size();
  const std::size_t d = unit.dim();
  std::vector<double> column_sum(d, 0.0);
  std::vector<double> column_sq(d, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    auto row = unit.code(i);
    for (std::size_t k = 0; k < d; ++k) {
      column_sum[k] += row[k];
      column_sq[k] += row[k] * row[k];
    }
  }
  const double scale = 1.0 / static_cast<double>(h * h);
  std::vector<double> s(d);
  for (std::size_t k = 0; k < d; ++k) s[k] = (column_sum[k] * column_sum[k] - column_sq[k]) * scale;
  return s;
}

std::vector<double> per_dim_variance(const Codebook& codebook) {
  const std::size_t h = codebook.size();
  const std::size_t d = codebook.dim();
  const Tensor2 mean = col_mean(codebook.codes());
  std::vector<double> v(d, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    auto row = codebook.code(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double c = row[k] - mean[k];
      v[k] += c * c;
    }
  }
  for (double& x : v) x /= static_cast<double>(h);
  return v;
}

DimensionScore toc_scores(const Codebook& codebook, double lambda, VarianceSource variance_on) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError(kModule, "lambda must lie in [0, 1], got " + io::format_real(lambda));
  }
  const Codebook unit = codebook.normalized() ? codebook : l2_normalize(codebook);
  DimensionScore score;
  score.lambda = lambda;
  score.similarity = per_dim_similarity(unit);
  score.variance = per_dim_variance(variance_on == VarianceSource::Normalized ? unit : codebook);
  score.combined.resize(score.similarity.size());
  for (std::size_t k = 0; k < score.combined.size(); ++k) {
    score.combined[k] = lambda * score.variance[k] - (1.0 - lambda) * score.similarity[k];
  }
  return score;
}

DimensionMask select_top(const std::vector<double>& values, std::size_t q) {
  const std::size_t d = values.size();
  if (q < 1 || q > d) {
    throw ValidationError(kModule, "q must be in [1, " + std::to_string(d) + "], got " + std::to_string(q));
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(q);
  return DimensionMask(d, order);
}

DimensionMask select_dims(const DimensionScore& scores, std::size_t q) { return select_top(scores.combined, q); }

Tensor2 cosine_similarity_matrix(const Codebook& codebook, const DimensionMask* mask) {
  const Tensor2 rows = mask != nullptr ? mask->apply(codebook.codes()) : codebook.codes();
  const Tensor2 unit = normalized_rows(rows, mask != nullptr ? "masked" : "codebook");
  return matmul_nt(unit, unit);
}

double average_similarity(const Codebook& codebook, const DimensionMask* mask) {
  if (mask != nullptr && mask->dim() != codebook.dim()) {
    throw ValidationError(kModule, "mask dimension does not match codebook");
  }
  const Tensor2 sim = cosine_similarity_matrix(codebook, mask);
  const std::size_t h = codebook.size();
  double total = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < h; ++j)
      if (i != j) total += sim(i, j);
  return total / static_cast<double>(h * h);
}

double masked_dot_objective(const Codebook& codebook, const DimensionMask& mask) {
  const std::vector<double> s = per_dim_similarity(codebook);
  if (mask.dim() != s.size()) throw ValidationError(kModule, "mask dimension does not match codebook");
  double total = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (mask.selected(k)) total += s[k];
  return total;
}

void save_scores_csv(const std::filesystem::path& path, const DimensionScore& scores) {
  std::ostringstream out;
  out << "k,S_k,V_k,U_k\n";
  for (std::size_t k = 0; k < scores.combined.size(); ++k) {
    out << k << ',' << io::format_real(scores.similarity[k]) << ',' << io::format_real(scores.variance[k]) << ','
        << io::format_real(scores.combined[k]) << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace fcid::toc
