#pragma once

// Dense arithmetic kernels used by the network substrate. Every kernel has a
// scalar reference implementation and, where the CPU supports it, an AVX2/FMA
// variant. The active variant is chosen once per process from CPUID and the
// SAGIN_SIMD environment variable ("scalar", "avx2" or "auto").
//
// Layouts are row-major throughout: a weight matrix W with `out` rows and `in`
// columns stores W[o][i] at w[o * in + i]; a batch X stores sample b at
// x[b * in ...].

#include <cstddef>
#include <span>
#include <string_view>

namespace sagin::kernels {

enum class Isa { Scalar, Avx2 };

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y[b][o] = bias[o] + sum_i w[o][i] * x[b][i]
  void (*dense_forward)(const double* w, const double* bias, const double* x, double* y,
                        std::size_t batch, std::size_t in, std::size_t out);
  // dx[b][i] = sum_o dy[b][o] * w[o][i]   (overwrites dx)
  void (*dense_backward_input)(const double* w, const double* dy, double* dx, std::size_t batch,
                               std::size_t in, std::size_t out);
  // dw[o][i] += sum_b dy[b][o] * x[b][i];  db[o] += sum_b dy[b][o]
  void (*dense_backward_params)(const double* x, const double* dy, double* dw, double* db,
                                std::size_t batch, std::size_t in, std::size_t out);
  // Bias-corrected Adam on a flat parameter block.
  void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n,
                      const AdamCoeffs& c);
  // target += tau * (source - target)
  void (*lerp)(double* target, const double* source, double tau, std::size_t n);
};

const KernelTable& scalar_table();
// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool isa_supported(Isa isa);
const KernelTable& table(Isa isa);

// Process-wide selection; resolved on first call.
const KernelTable& active();
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

inline void lerp(std::span<double> target, std::span<const double> source, double tau) {
  active().lerp(target.data(), source.data(), tau, target.size());
}

}  // namespace sagin::kernels
