#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "grlstop/common.hpp"

namespace grlstop {

// Dense feed-forward network with tanh hidden activations and a linear
// output layer. Parameters live in one flat vector (per-layer weights
// row-major, then biases, in declaration order) so optimizer steps,
// checkpoints and finite-difference checks all operate on a single array.
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2)
      throw std::invalid_argument("Mlp: need at least input and output dims");
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_.push_back(count);
      count += static_cast<std::size_t>(dims_[l + 1]) *
                   static_cast<std::size_t>(dims_[l]) +
               static_cast<std::size_t>(dims_[l + 1]);
    }
    params_.assign(count, 0.0);
  }

  const std::vector<int>& dims() const { return dims_; }
  int input_size() const { return dims_.front(); }
  int output_size() const { return dims_.back(); }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t layer_count() const { return dims_.size() - 1; }

  // Flat offset of layer l's weight block; biases follow the weights.
  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const {
    return offsets_[l] + static_cast<std::size_t>(dims_[l + 1]) *
                             static_cast<std::size_t>(dims_[l]);
  }

  struct Cache {
    // activations[0] is the input, activations[l] the post-tanh output of
    // hidden layer l, activations.back() the linear output.
    std::vector<std::vector<double>> activations;
  };

  void forward(std::span<const double> x, Cache& cache) const {
    if (static_cast<int>(x.size()) != input_size())
      throw std::invalid_argument("Mlp::forward: bad input size");
    cache.activations.resize(dims_.size());
    cache.activations[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      const int in = dims_[l];
      const int out = dims_[l + 1];
      const double* w = params_.data() + weight_offset(l);
      const double* b = params_.data() + bias_offset(l);
      const auto& a = cache.activations[l];
      auto& z = cache.activations[l + 1];
      z.assign(static_cast<std::size_t>(out), 0.0);
      for (int o = 0; o < out; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * in;
        double acc = b[o];
        for (int i = 0; i < in; ++i) acc += row[i] * a[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(o)] =
            (l + 2 < dims_.size()) ? std::tanh(acc) : acc;
      }
    }
  }

  std::vector<double> forward(std::span<const double> x) const {
    Cache c;
    forward(x, c);
    return c.activations.back();
  }

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(const Cache& cache, std::span<const double> dout,
                std::span<double> grad) const {
    std::vector<double> delta(dout.begin(), dout.end());
    std::vector<double> next_delta;
    for (std::size_t l = dims_.size() - 1; l-- > 0;) {
      const int in = dims_[l];
      const int out = dims_[l + 1];
      const double* w = params_.data() + weight_offset(l);
      double* gw = grad.data() + weight_offset(l);
      double* gb = grad.data() + bias_offset(l);
      const auto& a = cache.activations[l];
      for (int o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        double* grow = gw + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) grow[i] += d * a[static_cast<std::size_t>(i)];
        gb[o] += d;
      }
      if (l == 0) break;
      next_delta.assign(static_cast<std::size_t>(in), 0.0);
      for (int o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i)
          next_delta[static_cast<std::size_t>(i)] += row[i] * d;
      }
      // back through the tanh of layer l's output
      for (int i = 0; i < in; ++i) {
        const double t = a[static_cast<std::size_t>(i)];
        next_delta[static_cast<std::size_t>(i)] *= 1.0 - t * t;
      }
      delta.swap(next_delta);
    }
  }

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Orthogonal initialization by modified Gram-Schmidt on the shorter side of
// the matrix, scaled by gain. Biases are left at zero.
inline void orthogonal_init_layer(Mlp& net, std::size_t layer, double gain,
                                  Rng& rng) {
  const int in = net.dims()[layer];
  const int out = net.dims()[layer + 1];
  double* w = net.params().data() + net.weight_offset(layer);
  const bool by_rows = out <= in;
  const int vectors = by_rows ? out : in;
  const int length = by_rows ? in : out;

  std::vector<std::vector<double>> basis(
      static_cast<std::size_t>(vectors),
      std::vector<double>(static_cast<std::size_t>(length)));
  for (auto& v : basis) {
    for (;;) {
      for (auto& x : v) x = rng.normal();
      double norm = 0.0;
      for (const double x : v) norm += x * x;
      if (norm > 1e-12) break;
    }
  }
  for (int k = 0; k < vectors; ++k) {
    auto& v = basis[static_cast<std::size_t>(k)];
    for (int j = 0; j < k; ++j) {
      const auto& u = basis[static_cast<std::size_t>(j)];
      double dot = 0.0;
      for (int i = 0; i < length; ++i)
        dot += v[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
      for (int i = 0; i < length; ++i)
        v[static_cast<std::size_t>(i)] -= dot * u[static_cast<std::size_t>(i)];
    }
    double norm = 0.0;
    for (const double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) norm = 1.0;  // practically unreachable
    for (auto& x : v) x /= norm;
  }
  for (int o = 0; o < out; ++o)
    for (int i = 0; i < in; ++i)
      w[static_cast<std::size_t>(o) * in + i] =
          gain * (by_rows ? basis[static_cast<std::size_t>(o)]
                                 [static_cast<std::size_t>(i)]
                          : basis[static_cast<std::size_t>(i)]
                                 [static_cast<std::size_t>(o)]);
}

inline void orthogonal_init(Mlp& net, double hidden_gain, double output_gain,
                            Rng& rng) {
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    orthogonal_init_layer(net, l, l + 1 == net.layer_count() ? output_gain
                                                             : hidden_gain,
                          rng);
}

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double lr)
      : lr_(lr), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("Adam::step: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < m_.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
      params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
  }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  int t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

inline void softmax2(double z0, double z1, double& p0, double& p1) {
  const double m = z0 > z1 ? z0 : z1;
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  const double sum = e0 + e1;
  p0 = e0 / sum;
  p1 = e1 / sum;
}

}  // namespace grlstop
