#include <cmath>

#include "sagin/kernels.hpp"

namespace sagin::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void dense_forward_scalar(const double* w, const double* bias, const double* x, double* y,
                          std::size_t batch, std::size_t in, std::size_t out) {
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x + b * in;
    double* yb = y + b * out;
    for (std::size_t o = 0; o < out; ++o) yb[o] = bias[o] + dot_scalar(w + o * in, xb, in);
  }
}

void dense_backward_input_scalar(const double* w, const double* dy, double* dx, std::size_t batch,
                                 std::size_t in, std::size_t out) {
  for (std::size_t b = 0; b < batch; ++b) {
    double* dxb = dx + b * in;
    for (std::size_t i = 0; i < in; ++i) dxb[i] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dy[b * out + o];
      if (g != 0.0) axpy_scalar(g, w + o * in, dxb, in);
    }
  }
}

void dense_backward_params_scalar(const double* x, const double* dy, double* dw, double* db,
                                  std::size_t batch, std::size_t in, std::size_t out) {
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dy[b * out + o];
      if (g == 0.0) continue;
      axpy_scalar(g, xb, dw + o * in, in);
      db[o] += g;
    }
  }
}

void adam_update_scalar(double* p, const double* g, double* m, double* v, std::size_t n,
                        const AdamCoeffs& c) {
  const double one_m_b1 = 1.0 - c.beta1;
  const double one_m_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_m_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_m_b2 * g[i] * g[i];
    const double mhat = m[i] / c.bias_correction1;
    const double vhat = v[i] / c.bias_correction2;
    p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

void lerp_scalar(double* target, const double* source, double tau, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) target[i] += tau * (source[i] - target[i]);
}

constexpr KernelTable kScalar{
    Isa::Scalar,          dot_scalar,         axpy_scalar, dense_forward_scalar,
    dense_backward_input_scalar, dense_backward_params_scalar, adam_update_scalar,
    lerp_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace sagin::kernels
