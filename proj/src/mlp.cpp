#include "sagin/mlp.hpp"

#include <atomic>
#include <cmath>

#include "sagin/kernels.hpp"

namespace sagin {

namespace {

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

void MlpGrads::scale(double s) {
  for (auto& v : dw)
    for (auto& x : v) x *= s;
  for (auto& v : db)
    for (auto& x : v) x *= s;
}

void MlpGrads::add(const MlpGrads& o) {
  for (std::size_t l = 0; l < dw.size(); ++l) {
    for (std::size_t i = 0; i < dw[l].size(); ++i) dw[l][i] += o.dw[l][i];
    for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += o.db[l][i];
  }
}

bool MlpGrads::finite() const {
  for (const auto& v : dw)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  for (const auto& v : db)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

Mlp::Mlp(const std::vector<int>& sizes, Activation hidden, Activation output) {
  if (sizes.size() < 2) throw DomainError("Mlp needs at least an input and an output size");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] < 1 || sizes[l + 1] < 1) throw DomainError("Mlp layer sizes must be positive");
    DenseLayer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    layer.act = (l + 2 == sizes.size()) ? output : hidden;
    layer.w.assign(static_cast<std::size_t>(layer.in) * layer.out, 0.0);
    layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
    layers_.push_back(std::move(layer));
  }
  bump();
}

void Mlp::bump() { version_ = next_version(); }

std::vector<DenseLayer>& Mlp::mutable_layers() {
  bump();
  return layers_;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

void Mlp::init_glorot(Rng& rng) {
  for (auto& l : layers_) {
    const double limit = std::sqrt(6.0 / (l.in + l.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : l.w) w = dist(rng);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  bump();
}

ForwardCache Mlp::forward(const Matrix& x) const {
  if (static_cast<int>(x.cols()) != input_size())
    throw DomainError("Mlp::forward: input width " + std::to_string(x.cols()) + " does not match " +
                      std::to_string(input_size()));
  const auto& k = kernels::active();
  ForwardCache cache;
  cache.version = version_;
  cache.inputs.reserve(layers_.size());
  const std::size_t batch = x.rows();
  Matrix current = x;
  for (const auto& l : layers_) {
    Matrix a(batch, static_cast<std::size_t>(l.out));
    k.dense_forward(l.w.data(), l.b.data(), current.data(), a.data(), batch, static_cast<std::size_t>(l.in),
                    static_cast<std::size_t>(l.out));
    if (l.act == Activation::ReLU)
      for (auto& v : a.storage()) v = v > 0.0 ? v : 0.0;
    cache.inputs.push_back(std::move(current));
    current = std::move(a);
  }
  cache.output = std::move(current);
  return cache;
}

Matrix Mlp::predict(const Matrix& x) const { return forward(x).output; }

std::vector<double> Mlp::predict(std::span<const double> x) const {
  return predict(Matrix::from_row(x)).storage();
}

Matrix Mlp::backprop(const ForwardCache& cache, const Matrix& d_out, MlpGrads* grads, bool want_input) const {
  if (cache.version != version_) throw DomainError("Mlp::backward: cache is stale (parameters changed since forward)");
  if (cache.inputs.size() != layers_.size()) throw DomainError("Mlp::backward: cache does not match this network");
  const std::size_t batch = cache.output.rows();
  if (d_out.rows() != batch || static_cast<int>(d_out.cols()) != output_size())
    throw DomainError("Mlp::backward: output gradient has the wrong shape");
  const auto& k = kernels::active();
  Matrix g = d_out;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    if (l.act == Activation::ReLU) {
      // ReLU outputs are positive exactly where the pre-activation was.
      const auto& z = (li + 1 < layers_.size() ? cache.inputs[li + 1] : cache.output).storage();
      auto& gs = g.storage();
      for (std::size_t i = 0; i < gs.size(); ++i)
        if (!(z[i] > 0.0)) gs[i] = 0.0;
    }
    if (grads)
      k.dense_backward_params(cache.inputs[li].data(), g.data(), grads->dw[li].data(), grads->db[li].data(), batch,
                              static_cast<std::size_t>(l.in), static_cast<std::size_t>(l.out));
    if (li > 0 || want_input) {
      Matrix prev(batch, static_cast<std::size_t>(l.in));
      k.dense_backward_input(l.w.data(), g.data(), prev.data(), batch, static_cast<std::size_t>(l.in),
                             static_cast<std::size_t>(l.out));
      g = std::move(prev);
    }
  }
  return want_input ? g : Matrix{};
}

MlpGrads Mlp::backward(const ForwardCache& cache, const Matrix& d_out, Matrix* d_input) const {
  MlpGrads grads = zero_grads();
  Matrix gi = backprop(cache, d_out, &grads, d_input != nullptr);
  if (d_input) *d_input = std::move(gi);
  return grads;
}

Matrix Mlp::input_gradient(const ForwardCache& cache, const Matrix& d_out) const {
  return backprop(cache, d_out, nullptr, true);
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  for (const auto& l : layers_) {
    g.dw.emplace_back(l.w.size(), 0.0);
    g.db.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

void Mlp::copy_from(const Mlp& other) {
  layers_ = other.layers_;
  bump();
}

void Mlp::blend_from(const Mlp& source, double tau) {
  if (source.layers_.size() != layers_.size()) throw DomainError("Mlp::blend_from: architecture mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (source.layers_[l].in != layers_[l].in || source.layers_[l].out != layers_[l].out)
      throw DomainError("Mlp::blend_from: architecture mismatch");
  if (tau == 1.0) {
    copy_from(source);
    return;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    kernels::lerp(layers_[l].w, source.layers_[l].w, tau);
    kernels::lerp(layers_[l].b, source.layers_[l].b, tau);
  }
  bump();
}

bool Mlp::same_params(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.in != b.in || a.out != b.out || a.act != b.act) return false;
    if (std::memcmp(a.w.data(), b.w.data(), a.w.size() * sizeof(double)) != 0) return false;
    if (std::memcmp(a.b.data(), b.b.data(), a.b.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

void Mlp::save(BinaryWriter& w) const {
  w.tag("mlp");
  w.u64(layers_.size());
  for (const auto& l : layers_) {
    w.u32(static_cast<std::uint32_t>(l.in));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.u8(static_cast<std::uint8_t>(l.act));
    w.f64s(l.w);
    w.f64s(l.b);
  }
}

Mlp Mlp::load(BinaryReader& r) {
  r.expect_tag("mlp");
  Mlp net;
  const std::uint64_t n = r.u64();
  if (n > 64) throw CheckpointError("implausible layer count in checkpoint");
  for (std::uint64_t i = 0; i < n; ++i) {
    DenseLayer l;
    l.in = static_cast<int>(r.u32());
    l.out = static_cast<int>(r.u32());
    const auto act = r.u8();
    if (act > 1) throw CheckpointError("unknown activation in checkpoint");
    l.act = static_cast<Activation>(act);
    l.w = r.f64s();
    l.b = r.f64s();
    if (l.w.size() != static_cast<std::size_t>(l.in) * l.out || l.b.size() != static_cast<std::size_t>(l.out))
      throw CheckpointError("layer shape mismatch in checkpoint");
    if (!net.layers_.empty() && net.layers_.back().out != l.in) throw CheckpointError("layer chain mismatch in checkpoint");
    net.layers_.push_back(std::move(l));
  }
  net.bump();
  return net;
}

// ---- Adam --------------------------------------------------------------------

AdamState AdamState::for_network(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& l : net.layers()) {
    s.m_w.emplace_back(l.w.size(), 0.0);
    s.v_w.emplace_back(l.w.size(), 0.0);
    s.m_b.emplace_back(l.b.size(), 0.0);
    s.v_b.emplace_back(l.b.size(), 0.0);
  }
  return s;
}

void AdamState::apply(Mlp& net, const MlpGrads& grads) {
  if (grads.dw.size() != m_w.size()) throw DomainError("Adam: gradient/optimizer shape mismatch");
  if (!grads.finite()) throw TrainingError("Adam: non-finite gradient");
  ++step;
  const kernels::AdamCoeffs c{lr, beta1, beta2, eps, 1.0 - std::pow(beta1, static_cast<double>(step)),
                              1.0 - std::pow(beta2, static_cast<double>(step))};
  const auto& k = kernels::active();
  auto& layers = net.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    k.adam_update(layers[l].w.data(), grads.dw[l].data(), m_w[l].data(), v_w[l].data(), layers[l].w.size(), c);
    k.adam_update(layers[l].b.data(), grads.db[l].data(), m_b[l].data(), v_b[l].data(), layers[l].b.size(), c);
  }
}

void AdamState::save(BinaryWriter& w) const {
  w.tag("adam");
  w.f64(lr);
  w.f64(beta1);
  w.f64(beta2);
  w.f64(eps);
  w.u64(step);
  w.u64(m_w.size());
  for (std::size_t l = 0; l < m_w.size(); ++l) {
    w.f64s(m_w[l]);
    w.f64s(v_w[l]);
    w.f64s(m_b[l]);
    w.f64s(v_b[l]);
  }
}

AdamState AdamState::load(BinaryReader& r) {
  r.expect_tag("adam");
  AdamState s;
  s.lr = r.f64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.eps = r.f64();
  s.step = r.u64();
  const std::uint64_t n = r.u64();
  if (n > 64) throw CheckpointError("implausible optimizer layer count");
  for (std::uint64_t l = 0; l < n; ++l) {
    s.m_w.push_back(r.f64s());
    s.v_w.push_back(r.f64s());
    s.m_b.push_back(r.f64s());
    s.v_b.push_back(r.f64s());
  }
  return s;
}

void ScalarAdam::apply(double& param, double grad) {
  if (!std::isfinite(grad)) throw TrainingError("Adam: non-finite gradient");
  ++step;
  const kernels::AdamCoeffs c{lr, beta1, beta2, eps, 1.0 - std::pow(beta1, static_cast<double>(step)),
                              1.0 - std::pow(beta2, static_cast<double>(step))};
  kernels::active().adam_update(&param, &grad, &m, &v, 1, c);
}

void ScalarAdam::save(BinaryWriter& w) const {
  w.tag("sadam");
  w.f64(lr);
  w.f64(beta1);
  w.f64(beta2);
  w.f64(eps);
  w.u64(step);
  w.f64(m);
  w.f64(v);
}

ScalarAdam ScalarAdam::load(BinaryReader& r) {
  r.expect_tag("sadam");
  ScalarAdam s;
  s.lr = r.f64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.eps = r.f64();
  s.step = r.u64();
  s.m = r.f64();
  s.v = r.f64();
  return s;
}

}  // namespace sagin
