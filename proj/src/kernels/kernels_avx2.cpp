// Compiled with -mavx2 -mfma. Nothing in this file may run before the
// dispatcher has confirmed CPU support.

#include "sagin/kernels.hpp"

#if defined(SAGIN_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace sagin::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Layers with few inputs (the state-facing ones) are vectorised along the
// output axis instead, reading a transposed copy of the weights.
constexpr std::size_t kNarrow = 16;

const double* transposed(const double* w, std::size_t in, std::size_t out) {
  thread_local std::vector<double> wt;
  wt.resize(in * out);
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i) wt[i * out + o] = w[o * in + i];
  return wt.data();
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

// Four output rows per pass so each input vector load feeds four FMAs.
void dense_forward_narrow(const double* w, const double* bias, const double* x, double* y,
                          std::size_t batch, std::size_t in, std::size_t out) {
  const double* wt = transposed(w, in, out);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x + b * in;
    double* yb = y + b * out;
    std::size_t o = 0;
    for (; o + 16 <= out; o += 16) {
      __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
      __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
      for (std::size_t i = 0; i < in; ++i) {
        const __m256d xv = _mm256_set1_pd(xb[i]);
        const double* wi = wt + i * out + o;
        a0 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wi), a0);
        a1 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wi + 4), a1);
        a2 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wi + 8), a2);
        a3 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(wi + 12), a3);
      }
      _mm256_storeu_pd(yb + o, _mm256_add_pd(_mm256_loadu_pd(bias + o), a0));
      _mm256_storeu_pd(yb + o + 4, _mm256_add_pd(_mm256_loadu_pd(bias + o + 4), a1));
      _mm256_storeu_pd(yb + o + 8, _mm256_add_pd(_mm256_loadu_pd(bias + o + 8), a2));
      _mm256_storeu_pd(yb + o + 12, _mm256_add_pd(_mm256_loadu_pd(bias + o + 12), a3));
    }
    for (; o < out; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < in; ++i) s += wt[i * out + o] * xb[i];
      yb[o] = bias[o] + s;
    }
  }
}

void dense_forward_avx2(const double* w, const double* bias, const double* x, double* y,
                        std::size_t batch, std::size_t in, std::size_t out) {
  if (in < kNarrow && out >= kNarrow) return dense_forward_narrow(w, bias, x, y, batch, in, out);
  std::size_t b = 0;
  // Two samples per pass share every weight load.
  for (; b + 2 <= batch && in % 4 == 0 && out % 4 == 0; b += 2) {
    const double* x0 = x + b * in;
    const double* x1 = x0 + in;
    for (std::size_t o = 0; o < out; o += 4) {
      const double* w0 = w + o * in;
      const double* w1 = w0 + in;
      const double* w2 = w1 + in;
      const double* w3 = w2 + in;
      __m256d p0 = _mm256_setzero_pd(), p1 = _mm256_setzero_pd(), p2 = _mm256_setzero_pd(), p3 = _mm256_setzero_pd();
      __m256d q0 = _mm256_setzero_pd(), q1 = _mm256_setzero_pd(), q2 = _mm256_setzero_pd(), q3 = _mm256_setzero_pd();
      for (std::size_t i = 0; i < in; i += 4) {
        const __m256d u = _mm256_loadu_pd(x0 + i);
        const __m256d v = _mm256_loadu_pd(x1 + i);
        __m256d wv = _mm256_loadu_pd(w0 + i);
        p0 = _mm256_fmadd_pd(wv, u, p0);
        q0 = _mm256_fmadd_pd(wv, v, q0);
        wv = _mm256_loadu_pd(w1 + i);
        p1 = _mm256_fmadd_pd(wv, u, p1);
        q1 = _mm256_fmadd_pd(wv, v, q1);
        wv = _mm256_loadu_pd(w2 + i);
        p2 = _mm256_fmadd_pd(wv, u, p2);
        q2 = _mm256_fmadd_pd(wv, v, q2);
        wv = _mm256_loadu_pd(w3 + i);
        p3 = _mm256_fmadd_pd(wv, u, p3);
        q3 = _mm256_fmadd_pd(wv, v, q3);
      }
      double* y0 = y + b * out + o;
      double* y1 = y0 + out;
      y0[0] = bias[o] + hsum(p0);
      y0[1] = bias[o + 1] + hsum(p1);
      y0[2] = bias[o + 2] + hsum(p2);
      y0[3] = bias[o + 3] + hsum(p3);
      y1[0] = bias[o] + hsum(q0);
      y1[1] = bias[o + 1] + hsum(q1);
      y1[2] = bias[o + 2] + hsum(q2);
      y1[3] = bias[o + 3] + hsum(q3);
    }
  }
  for (; b < batch; ++b) {
    const double* xb = x + b * in;
    double* yb = y + b * out;
    std::size_t o = 0;
    for (; o + 4 <= out; o += 4) {
      const double* w0 = w + o * in;
      const double* w1 = w0 + in;
      const double* w2 = w1 + in;
      const double* w3 = w2 + in;
      __m256d a0 = _mm256_setzero_pd();
      __m256d a1 = _mm256_setzero_pd();
      __m256d a2 = _mm256_setzero_pd();
      __m256d a3 = _mm256_setzero_pd();
      std::size_t i = 0;
      for (; i + 4 <= in; i += 4) {
        const __m256d xv = _mm256_loadu_pd(xb + i);
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + i), xv, a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + i), xv, a1);
        a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + i), xv, a2);
        a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + i), xv, a3);
      }
      double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
      for (; i < in; ++i) {
        s0 += w0[i] * xb[i];
        s1 += w1[i] * xb[i];
        s2 += w2[i] * xb[i];
        s3 += w3[i] * xb[i];
      }
      yb[o] = bias[o] + s0;
      yb[o + 1] = bias[o + 1] + s1;
      yb[o + 2] = bias[o + 2] + s2;
      yb[o + 3] = bias[o + 3] + s3;
    }
    for (; o < out; ++o) yb[o] = bias[o] + dot_avx2(w + o * in, xb, in);
  }
}

// Both backward kernels keep a 16-wide slice of the result in registers and
// stream over the reduction axis, so each FMA costs one load instead of a
// load-modify-store of the accumulator row.
void dense_backward_input_avx2(const double* w, const double* dy, double* dx, std::size_t batch,
                               std::size_t in, std::size_t out) {
  if (in < kNarrow && out >= kNarrow) {
    const double* wt = transposed(w, in, out);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < in; ++i) dx[b * in + i] = dot_avx2(dy + b * out, wt + i * out, out);
    return;
  }
  for (std::size_t b = 0; b < batch; ++b) {
    const double* gb = dy + b * out;
    double* dxb = dx + b * in;
    std::size_t i = 0;
    for (; i + 16 <= in; i += 16) {
      __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
      __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
      for (std::size_t o = 0; o < out; ++o) {
        if (gb[o] == 0.0) continue;
        const __m256d g = _mm256_set1_pd(gb[o]);
        const double* wo = w + o * in + i;
        a0 = _mm256_fmadd_pd(g, _mm256_loadu_pd(wo), a0);
        a1 = _mm256_fmadd_pd(g, _mm256_loadu_pd(wo + 4), a1);
        a2 = _mm256_fmadd_pd(g, _mm256_loadu_pd(wo + 8), a2);
        a3 = _mm256_fmadd_pd(g, _mm256_loadu_pd(wo + 12), a3);
      }
      _mm256_storeu_pd(dxb + i, a0);
      _mm256_storeu_pd(dxb + i + 4, a1);
      _mm256_storeu_pd(dxb + i + 8, a2);
      _mm256_storeu_pd(dxb + i + 12, a3);
    }
    for (; i + 4 <= in; i += 4) {
      __m256d a = _mm256_setzero_pd();
      for (std::size_t o = 0; o < out; ++o)
        if (gb[o] != 0.0) a = _mm256_fmadd_pd(_mm256_set1_pd(gb[o]), _mm256_loadu_pd(w + o * in + i), a);
      _mm256_storeu_pd(dxb + i, a);
    }
    for (; i < in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < out; ++o)
        if (gb[o] != 0.0) s += gb[o] * w[o * in + i];
      dxb[i] = s;
    }
  }
}

void dense_backward_params_avx2(const double* x, const double* dy, double* dw, double* db,
                                std::size_t batch, std::size_t in, std::size_t out) {
  if (in < kNarrow && out >= kNarrow) {
    double buf[16];
    for (std::size_t o = 0; o + 16 <= out || o < out; o += 16) {
      const std::size_t width = std::min<std::size_t>(16, out - o);
      if (width < 16) {
        for (std::size_t oo = o; oo < out; ++oo) {
          for (std::size_t i = 0; i < in; ++i) {
            double s = 0.0;
            for (std::size_t b = 0; b < batch; ++b) s += dy[b * out + oo] * x[b * in + i];
            dw[oo * in + i] += s;
          }
          for (std::size_t b = 0; b < batch; ++b) db[oo] += dy[b * out + oo];
        }
        break;
      }
      for (std::size_t i = 0; i < in; ++i) {
        __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
        __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
        for (std::size_t b = 0; b < batch; ++b) {
          const __m256d xv = _mm256_set1_pd(x[b * in + i]);
          const double* g = dy + b * out + o;
          a0 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(g), a0);
          a1 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(g + 4), a1);
          a2 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(g + 8), a2);
          a3 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(g + 12), a3);
        }
        _mm256_storeu_pd(buf, a0);
        _mm256_storeu_pd(buf + 4, a1);
        _mm256_storeu_pd(buf + 8, a2);
        _mm256_storeu_pd(buf + 12, a3);
        for (std::size_t k = 0; k < 16; ++k) dw[(o + k) * in + i] += buf[k];
      }
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < 16; ++k) db[o + k] += dy[b * out + o + k];
    }
    return;
  }
  for (std::size_t o = 0; o < out; ++o) {
    double* dwo = dw + o * in;
    std::size_t i = 0;
    for (; i + 16 <= in; i += 16) {
      __m256d a0 = _mm256_loadu_pd(dwo + i), a1 = _mm256_loadu_pd(dwo + i + 4);
      __m256d a2 = _mm256_loadu_pd(dwo + i + 8), a3 = _mm256_loadu_pd(dwo + i + 12);
      for (std::size_t b = 0; b < batch; ++b) {
        const double gv = dy[b * out + o];
        if (gv == 0.0) continue;
        const __m256d g = _mm256_set1_pd(gv);
        const double* xb = x + b * in + i;
        a0 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xb), a0);
        a1 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xb + 4), a1);
        a2 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xb + 8), a2);
        a3 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xb + 12), a3);
      }
      _mm256_storeu_pd(dwo + i, a0);
      _mm256_storeu_pd(dwo + i + 4, a1);
      _mm256_storeu_pd(dwo + i + 8, a2);
      _mm256_storeu_pd(dwo + i + 12, a3);
    }
    for (; i + 4 <= in; i += 4) {
      __m256d a = _mm256_loadu_pd(dwo + i);
      for (std::size_t b = 0; b < batch; ++b) {
        const double gv = dy[b * out + o];
        if (gv != 0.0) a = _mm256_fmadd_pd(_mm256_set1_pd(gv), _mm256_loadu_pd(x + b * in + i), a);
      }
      _mm256_storeu_pd(dwo + i, a);
    }
    for (; i < in; ++i)
      for (std::size_t b = 0; b < batch; ++b) {
        const double gv = dy[b * out + o];
        if (gv != 0.0) dwo[i] += gv * x[b * in + i];
      }
    for (std::size_t b = 0; b < batch; ++b) db[o] += dy[b * out + o];
  }
}

void adam_update_avx2(double* p, const double* g, double* m, double* v, std::size_t n,
                      const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, gv));
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(_mm256_mul_pd(omb2, gv), gv));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(mv, bc1);
    const __m256d vhat = _mm256_div_pd(vv, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  const double one_m_b1 = 1.0 - c.beta1;
  const double one_m_b2 = 1.0 - c.beta2;
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_m_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_m_b2 * g[i] * g[i];
    p[i] -= c.lr * (m[i] / c.bias_correction1) / (std::sqrt(v[i] / c.bias_correction2) + c.eps);
  }
}

void lerp_avx2(double* target, const double* source, double tau, std::size_t n) {
  const __m256d t = _mm256_set1_pd(tau);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d cur = _mm256_loadu_pd(target + i);
    const __m256d gap = _mm256_sub_pd(_mm256_loadu_pd(source + i), cur);
    _mm256_storeu_pd(target + i, _mm256_add_pd(cur, _mm256_mul_pd(t, gap)));
  }
  for (; i < n; ++i) target[i] += tau * (source[i] - target[i]);
}

constexpr KernelTable kAvx2{
    Isa::Avx2,          dot_avx2,         axpy_avx2, dense_forward_avx2,
    dense_backward_input_avx2, dense_backward_params_avx2, adam_update_avx2,
    lerp_avx2,
};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2; }

}  // namespace sagin::kernels

#else

namespace sagin::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace sagin::kernels

#endif
