#pragma once

// Fully connected network with reverse-mode gradients and Adam. All agent
// networks (Q-networks, actor, critics) are instances of Mlp.

#include <cstdint>
#include <span>
#include <vector>

#include "sagin/scenario.hpp"
#include "sagin/serialize.hpp"

namespace sagin {

// Row-major batch: one sample per row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  static Matrix from_row(std::span<const double> v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation : std::uint8_t { Identity = 0, ReLU = 1 };

struct DenseLayer {
  int in = 0;
  int out = 0;
  Activation act = Activation::Identity;
  std::vector<double> w;  // out x in
  std::vector<double> b;  // out
};

struct ForwardCache {
  std::uint64_t version = 0;
  std::vector<Matrix> inputs;  // input of each layer
  Matrix output;
};

struct MlpGrads {
  std::vector<std::vector<double>> dw;
  std::vector<std::vector<double>> db;

  void scale(double s);
  void add(const MlpGrads& other);
  bool finite() const;
};

class Mlp {
 public:
  Mlp() = default;
  // sizes = {input, hidden..., output}; hidden layers use `hidden`, the last layer `output`.
  Mlp(const std::vector<int>& sizes, Activation hidden, Activation output);

  // Uniform in +-sqrt(6 / (fan_in + fan_out)); zero biases.
  void init_glorot(Rng& rng);

  int input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  int output_size() const { return layers_.empty() ? 0 : layers_.back().out; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  // Any mutable access invalidates outstanding forward caches.
  std::vector<DenseLayer>& mutable_layers();
  std::uint64_t version() const { return version_; }
  std::size_t parameter_count() const;

  ForwardCache forward(const Matrix& x) const;
  Matrix predict(const Matrix& x) const;
  std::vector<double> predict(std::span<const double> x) const;

  // Parameter gradients of sum_b <d_out[b], output[b]>. When `d_input` is
  // non-null it receives the gradient with respect to the network input.
  MlpGrads backward(const ForwardCache& cache, const Matrix& d_out, Matrix* d_input = nullptr) const;
  // Input gradient only; skips the parameter accumulation.
  Matrix input_gradient(const ForwardCache& cache, const Matrix& d_out) const;

  MlpGrads zero_grads() const;

  void copy_from(const Mlp& other);
  // this = tau * source + (1 - tau) * this
  void blend_from(const Mlp& source, double tau);
  bool same_params(const Mlp& other) const;

  void save(BinaryWriter& w) const;
  static Mlp load(BinaryReader& r);

 private:
  Matrix backprop(const ForwardCache& cache, const Matrix& d_out, MlpGrads* grads, bool want_input) const;
  void bump();

  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

  static AdamState for_network(const Mlp& net, double lr);

  // Throws TrainingError on non-finite gradients, leaving everything untouched.
  void apply(Mlp& net, const MlpGrads& grads);

  void save(BinaryWriter& w) const;
  static AdamState load(BinaryReader& r);
};

// Adam on a single scalar parameter (the log-temperature).
struct ScalarAdam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  double m = 0.0;
  double v = 0.0;

  void apply(double& param, double grad);
  void save(BinaryWriter& w) const;
  static ScalarAdam load(BinaryReader& r);
};

}  // namespace sagin
