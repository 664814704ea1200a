#pragma once

#include <span>
#include <string>
#include <vector>

#include "fcid/params.hpp"
#include "fcid/rng.hpp"
#include "fcid/tensor.hpp"

namespace fcid {

/// y = xW + b with W: in×out and b: 1×out.
Tensor2 affine_forward(const Tensor2& x, const Tensor2& weights, const Tensor2& bias);

Tensor2 tanh_forward(const Tensor2& x);
/// Gradient through tanh given its output y.
Tensor2 tanh_backward(const Tensor2& y, const Tensor2& dy);

class Affine {
 public:
  Affine() = default;
  Affine(std::size_t in, std::size_t out);

  std::size_t in_dim() const { return weight.value.rows(); }
  std::size_t out_dim() const { return weight.value.cols(); }

  void init(Rng& rng);
  void register_params(ParamStore& store, const std::string& prefix);

  Tensor2 forward(const Tensor2& x) const;
  /// Accumulates parameter gradients; returns dL/dx.
  Tensor2 backward(const Tensor2& x, const Tensor2& dy);

  Param weight;
  Param bias;
};

/// Affine -> tanh -> affine.
class Mlp2 {
 public:
  struct Cache {
    Tensor2 input;
    Tensor2 hidden;
  };

  Mlp2() = default;
  Mlp2(std::size_t in, std::size_t hidden, std::size_t out);

  std::size_t in_dim() const { return first.in_dim(); }
  std::size_t out_dim() const { return second.out_dim(); }

  void init(Rng& rng);
  void register_params(ParamStore& store, const std::string& prefix);

  Tensor2 forward(const Tensor2& x, Cache* cache = nullptr) const;
  Tensor2 backward(const Cache& cache, const Tensor2& dy);

  Affine first;
  Affine second;
};

/// Single-layer unidirectional LSTM (gate order i, f, g, o), zero initial state.
class LstmCell {
 public:
  struct Trace {
    std::vector<Tensor2> inputs;   // x_t, N×in
    std::vector<Tensor2> gates;    // activated [i f g o], N×4h
    std::vector<Tensor2> cells;    // c_t
    std::vector<Tensor2> hiddens;  // h_t
  };

  LstmCell() = default;
  LstmCell(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return input_weight.value.rows(); }
  std::size_t hidden_dim() const { return recurrent_weight.value.rows(); }

  void init(Rng& rng);
  void register_params(ParamStore& store, const std::string& prefix);

  /// Runs the cell over `inputs` (each N×in) and returns h_t for every step.
  std::vector<Tensor2> forward(std::span<const Tensor2> inputs, Trace* trace = nullptr) const;
  /// Backpropagation through time. `dh[t]` is the external gradient on h_t
  /// (empty tensors are treated as zero). Returns dL/dx_t.
  std::vector<Tensor2> backward(const Trace& trace, std::span<const Tensor2> dh);

  Param input_weight;      // in×4h
  Param recurrent_weight;  // h×4h
  Param bias;              // 1×4h
};

/// Context sequence o_t for one T×D sequence; o_t only sees inputs at times <= t.
Tensor2 recurrent_summarize(const Tensor2& sequence, const LstmCell& cell);

}  // namespace fcid
