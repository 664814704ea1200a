#include "fcid/layers.hpp"

#include <cmath>

#include "fcid/error.hpp"

namespace fcid {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor2 affine_forward(const Tensor2& x, const Tensor2& weights, const Tensor2& bias) {
  if (x.cols() != weights.rows()) {
    throw ValidationError("core-numerics", "affine: input width " + std::to_string(x.cols()) +
                                               " does not match weight rows " +
                                               std::to_string(weights.rows()));
  }
  if (bias.rows() != 1 || bias.cols() != weights.cols()) {
    throw ValidationError("core-numerics", "affine: bias must be 1x" + std::to_string(weights.cols()));
  }
  Tensor2 y = matmul(x, weights);
  add_row_inplace(y, bias);
  return y;
}

Tensor2 tanh_forward(const Tensor2& x) {
  Tensor2 y = x;
  for (double& v : y.values()) v = std::tanh(v);
  return y;
}

Tensor2 tanh_backward(const Tensor2& y, const Tensor2& dy) {
  Tensor2 dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - y[i] * y[i];
  return dx;
}

Affine::Affine(std::size_t in, std::size_t out) : weight(in, out), bias(1, out) {}

void Affine::init(Rng& rng) {
  weight.init_uniform(in_dim(), rng);
  bias.init_uniform(in_dim(), rng);
}

void Affine::register_params(ParamStore& store, const std::string& prefix) {
  store.add(prefix + ".weight", weight);
  store.add(prefix + ".bias", bias);
}

Tensor2 Affine::forward(const Tensor2& x) const { return affine_forward(x, weight.value, bias.value); }

Tensor2 Affine::backward(const Tensor2& x, const Tensor2& dy) {
  weight.grad += matmul_tn(x, dy);
  bias.grad += col_sum(dy);
  return matmul_nt(dy, weight.value);
}

Mlp2::Mlp2(std::size_t in, std::size_t hidden, std::size_t out) : first(in, hidden), second(hidden, out) {}

void Mlp2::init(Rng& rng) {
  first.init(rng);
  second.init(rng);
}

void Mlp2::register_params(ParamStore& store, const std::string& prefix) {
  first.register_params(store, prefix + ".l1");
  second.register_params(store, prefix + ".l2");
}

Tensor2 Mlp2::forward(const Tensor2& x, Cache* cache) const {
  Tensor2 hidden = tanh_forward(first.forward(x));
  Tensor2 y = second.forward(hidden);
  if (cache != nullptr) {
    cache->input = x;
    cache->hidden = std::move(hidden);
  }
  return y;
}

Tensor2 Mlp2::backward(const Cache& cache, const Tensor2& dy) {
  Tensor2 dhidden = second.backward(cache.hidden, dy);
  return first.backward(cache.input, tanh_backward(cache.hidden, dhidden));
}

LstmCell::LstmCell(std::size_t input_dim, std::size_t hidden_dim)
    : input_weight(input_dim, 4 * hidden_dim),
      recurrent_weight(hidden_dim, 4 * hidden_dim),
      bias(1, 4 * hidden_dim) {}

void LstmCell::init(Rng& rng) {
  const std::size_t fan_in = input_dim() + hidden_dim();
  input_weight.init_uniform(fan_in, rng);
  recurrent_weight.init_uniform(fan_in, rng);
  bias.init_uniform(fan_in, rng);
}

void LstmCell::register_params(ParamStore& store, const std::string& prefix) {
  store.add(prefix + ".wx", input_weight);
  store.add(prefix + ".wh", recurrent_weight);
  store.add(prefix + ".bias", bias);
}

std::vector<Tensor2> LstmCell::forward(std::span<const Tensor2> inputs, Trace* trace) const {
  if (inputs.empty()) throw ValidationError("core-numerics", "recurrent cell needs at least one step");
  const std::size_t n = inputs[0].rows();
  const std::size_t h = hidden_dim();
  Tensor2 hidden(n, h);
  Tensor2 cell(n, h);
  std::vector<Tensor2> outputs;
  outputs.reserve(inputs.size());
  if (trace != nullptr) *trace = Trace{};
  for (const Tensor2& x : inputs) {
    if (x.cols() != input_dim() || x.rows() != n) {
      throw ValidationError("core-numerics", "recurrent cell input shape mismatch");
    }
    Tensor2 z = matmul(x, input_weight.value);
    z += matmul(hidden, recurrent_weight.value);
    add_row_inplace(z, bias.value);
    Tensor2 next_cell(n, h);
    Tensor2 next_hidden(n, h);
    for (std::size_t r = 0; r < n; ++r) {
      auto zr = z.row(r);
      for (std::size_t k = 0; k < h; ++k) {
        const double ig = sigmoid(zr[k]);
        const double fg = sigmoid(zr[h + k]);
        const double gg = std::tanh(zr[2 * h + k]);
        const double og = sigmoid(zr[3 * h + k]);
        zr[k] = ig;
        zr[h + k] = fg;
        zr[2 * h + k] = gg;
        zr[3 * h + k] = og;
        const double c = fg * cell(r, k) + ig * gg;
        next_cell(r, k) = c;
        next_hidden(r, k) = og * std::tanh(c);
      }
    }
    if (trace != nullptr) {
      trace->inputs.push_back(x);
      trace->gates.push_back(std::move(z));
      trace->cells.push_back(next_cell);
      trace->hiddens.push_back(next_hidden);
    }
    cell = std::move(next_cell);
    hidden = next_hidden;
    outputs.push_back(std::move(next_hidden));
  }
  return outputs;
}

std::vector<Tensor2> LstmCell::backward(const Trace& trace, std::span<const Tensor2> dh) {
  const std::size_t steps = trace.inputs.size();
  if (dh.size() != steps) throw ValidationError("core-numerics", "recurrent backward: step count mismatch");
  const std::size_t n = trace.inputs[0].rows();
  const std::size_t h = hidden_dim();
  Tensor2 dh_next(n, h);
  Tensor2 dc_next(n, h);
  const Tensor2 zeros(n, h);
  std::vector<Tensor2> dx(steps);
  for (std::size_t step = steps; step-- > 0;) {
    const Tensor2& gates = trace.gates[step];
    const Tensor2& c = trace.cells[step];
    const Tensor2& c_prev = step > 0 ? trace.cells[step - 1] : zeros;
    const Tensor2& h_prev = step > 0 ? trace.hiddens[step - 1] : zeros;
    Tensor2 dz(n, 4 * h);
    for (std::size_t r = 0; r < n; ++r) {
      auto g = gates.row(r);
      for (std::size_t k = 0; k < h; ++k) {
        const double ig = g[k];
        const double fg = g[h + k];
        const double gg = g[2 * h + k];
        const double og = g[3 * h + k];
        const double tc = std::tanh(c(r, k));
        double dhv = dh_next(r, k);
        if (!dh[step].empty()) dhv += dh[step](r, k);
        const double dog = dhv * tc;
        const double dc = dhv * og * (1.0 - tc * tc) + dc_next(r, k);
        dz(r, k) = dc * gg * ig * (1.0 - ig);
        dz(r, h + k) = dc * c_prev(r, k) * fg * (1.0 - fg);
        dz(r, 2 * h + k) = dc * ig * (1.0 - gg * gg);
        dz(r, 3 * h + k) = dog * og * (1.0 - og);
        dc_next(r, k) = dc * fg;
      }
    }
    input_weight.grad += matmul_tn(trace.inputs[step], dz);
    recurrent_weight.grad += matmul_tn(h_prev, dz);
    bias.grad += col_sum(dz);
    dx[step] = matmul_nt(dz, input_weight.value);
    dh_next = matmul_nt(dz, recurrent_weight.value);
  }
  return dx;
}

Tensor2 recurrent_summarize(const Tensor2& sequence, const LstmCell& cell) {
  if (sequence.rows() == 0) throw ValidationError("core-numerics", "recurrent_summarize: empty sequence");
  std::vector<Tensor2> steps;
  steps.reserve(sequence.rows());
  for (std::size_t t = 0; t < sequence.rows(); ++t) steps.push_back(slice_rows(sequence, t, t + 1));
  std::vector<Tensor2> outputs = cell.forward(steps);
  return vconcat(outputs);
}

}  // namespace fcid
