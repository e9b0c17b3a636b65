#include "driveimit/kernels.hpp"

namespace driveimit::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b,
          double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot(w + r * cols, x, cols) + (b ? b[r] : 0.0);
  }
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

}  // namespace driveimit::kernels::scalar
