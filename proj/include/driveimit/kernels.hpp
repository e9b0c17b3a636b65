#pragma once

// Dense linear-algebra inner loops used by the network layers.
//
// Every kernel has a portable scalar reference and (on x86-64) an AVX2/FMA
// variant. The active table is chosen once at startup from CPUID; the
// DRIVEIMIT_ISA environment variable ("scalar" or "avx2") overrides it.
// Matrices are row-major, `rows x cols`.

#include <cstddef>
#include <string_view>

namespace driveimit::kernels {

enum class Isa { kScalar, kAvx2 };

struct Table {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = W x + b   (b may be null)
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x,
               const double* b, double* y);
  // dx += W^T dy
  void (*gemv_t_acc)(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                     double* dx);
  // dW += dy x^T
  void (*ger_acc)(std::size_t rows, std::size_t cols, const double* dy, const double* x,
                  double* dw);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b,
          double* y);
void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                double* dx);
void ger_acc(std::size_t rows, std::size_t cols, const double* dy, const double* x, double* dw);
}  // namespace scalar

namespace avx2 {
bool compiled();
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b,
          double* y);
void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                double* dx);
void ger_acc(std::size_t rows, std::size_t cols, const double* dy, const double* x, double* dw);
}  // namespace avx2

bool cpu_supports(Isa isa);
const Table& table_for(Isa isa);

// Currently active table.
const Table& active();
Isa active_isa();
// Switches the active table; returns false (and leaves it unchanged) if the
// CPU or build lacks the ISA.
bool select(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x,
                 const double* b, double* y) {
  active().gemv(w, rows, cols, x, b, y);
}
inline void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* dy,
                       double* dx) {
  active().gemv_t_acc(w, rows, cols, dy, dx);
}
inline void ger_acc(std::size_t rows, std::size_t cols, const double* dy, const double* x,
                    double* dw) {
  active().ger_acc(rows, cols, dy, x, dw);
}

}  // namespace driveimit::kernels
