#include "driveimit/kernels.hpp"

#if defined(DRIVEIMIT_HAVE_AVX2)
#include <immintrin.h>
#endif

namespace driveimit::kernels::avx2 {

#if defined(DRIVEIMIT_HAVE_AVX2)

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

bool compiled() { return true; }

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b,
          double* y) {
  std::size_t r = 0;
  // Four rows share each load of x.
  for (; r + 4 <= rows; r += 4) {
    const double* w0 = w + r * cols;
    const double* w1 = w0 + cols;
    const double* w2 = w1 + cols;
    const double* w3 = w2 + cols;
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + c), vx, a0);
      a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + c), vx, a1);
      a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + c), vx, a2);
      a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + c), vx, a3);
    }
    double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
    for (; c < cols; ++c) {
      s0 += w0[c] * x[c];
      s1 += w1[c] * x[c];
      s2 += w2[c] * x[c];
      s3 += w3[c] * x[c];
    }
    y[r] = s0 + (b ? b[r] : 0.0);
    y[r + 1] = s1 + (b ? b[r + 1] : 0.0);
    y[r + 2] = s2 + (b ? b[r + 2] : 0.0);
    y[r + 3] = s3 + (b ? b[r + 3] : 0.0);
  }
  for (; r < rows; ++r) y[r] = dot(w + r * cols, x, cols) + (b ? b[r] : 0.0);
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (dy[r] != 0.0) axpy(dy[r], w + r * cols, dx, cols);
  }
}

void ger_acc(std::size_t rows, std::size_t cols, const double* dy, const double* x, double* dw) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (dy[r] != 0.0) axpy(dy[r], x, dw + r * cols, cols);
  }
}

#else

bool compiled() { return false; }
double dot(const double* a, const double* b, std::size_t n) { return scalar::dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { scalar::axpy(alpha, x, y, n); }
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b,
          double* y) {
  scalar::gemv(w, rows, cols, x, b, y);
}
void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                double* dx) {
  scalar::gemv_t_acc(w, rows, cols, dy, dx);
}
void ger_acc(std::size_t rows, std::size_t cols, const double* dy, const double* x, double* dw) {
  scalar::ger_acc(rows, cols, dy, x, dw);
}

#endif

}  // namespace driveimit::kernels::avx2
