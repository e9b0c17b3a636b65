#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "driveimit/kernels.hpp"

using namespace driveimit;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

}  // namespace

TEST_CASE("scalar kernels against direct loops") {
  const double w[6] = {1, 2, 3, 4, 5, 6};  // 2 x 3
  const double x[3] = {1, -1, 2};
  const double b[2] = {0.5, -0.5};
  double y[2];
  kernels::scalar::gemv(w, 2, 3, x, b, y);
  CHECK(y[0] == doctest::Approx(1 - 2 + 6 + 0.5));
  CHECK(y[1] == doctest::Approx(4 - 5 + 12 - 0.5));
  kernels::scalar::gemv(w, 2, 3, x, nullptr, y);
  CHECK(y[0] == doctest::Approx(5.0));

  const double dy[2] = {1, 2};
  double dx[3] = {1, 1, 1};
  kernels::scalar::gemv_t_acc(w, 2, 3, dy, dx);
  CHECK(dx[0] == doctest::Approx(1 + 1 + 8));
  CHECK(dx[2] == doctest::Approx(1 + 3 + 12));

  double dw[6] = {};
  kernels::scalar::ger_acc(2, 3, dy, x, dw);
  CHECK(dw[0] == 1.0);
  CHECK(dw[5] == 4.0);

  CHECK(kernels::scalar::dot(x, x, 3) == 6.0);
  double acc[3] = {0, 0, 0};
  kernels::scalar::axpy(2.0, x, acc, 3);
  CHECK(acc[2] == 4.0);
}

TEST_CASE("avx2 kernels match scalar on odd sizes") {
  if (!kernels::cpu_supports(kernels::Isa::kAvx2)) {
    MESSAGE("AVX2 unavailable; equivalence not exercised");
    return;
  }
  std::mt19937_64 rng(3);
  for (std::size_t rows : {1u, 3u, 4u, 7u, 32u, 51u}) {
    for (std::size_t cols : {1u, 2u, 5u, 8u, 13u, 53u, 256u}) {
      const auto w = random_vec(rows * cols, rng);
      const auto x = random_vec(cols, rng);
      const auto b = random_vec(rows, rng);
      const auto dy = random_vec(rows, rng);

      std::vector<double> ys(rows), ya(rows);
      kernels::scalar::gemv(w.data(), rows, cols, x.data(), b.data(), ys.data());
      kernels::avx2::gemv(w.data(), rows, cols, x.data(), b.data(), ya.data());
      check_close(ys, ya);

      std::vector<double> ds(cols, 0.25), da(cols, 0.25);
      kernels::scalar::gemv_t_acc(w.data(), rows, cols, dy.data(), ds.data());
      kernels::avx2::gemv_t_acc(w.data(), rows, cols, dy.data(), da.data());
      check_close(ds, da);

      std::vector<double> gs(w), ga(w);
      kernels::scalar::ger_acc(rows, cols, dy.data(), x.data(), gs.data());
      kernels::avx2::ger_acc(rows, cols, dy.data(), x.data(), ga.data());
      check_close(gs, ga);

      CHECK(kernels::avx2::dot(w.data(), w.data(), cols) ==
            doctest::Approx(kernels::scalar::dot(w.data(), w.data(), cols)).epsilon(1e-12));
      std::vector<double> as(x), aa(x);
      kernels::scalar::axpy(-0.7, w.data(), as.data(), cols);
      kernels::avx2::axpy(-0.7, w.data(), aa.data(), cols);
      check_close(as, aa);
    }
  }
}

TEST_CASE("runtime selection switches the active table") {
  const kernels::Isa before = kernels::active_isa();
  REQUIRE(kernels::select(kernels::Isa::kScalar));
  CHECK(kernels::active_isa() == kernels::Isa::kScalar);
  CHECK(&kernels::active() == &kernels::table_for(kernels::Isa::kScalar));
  const double a[3] = {1, 2, 3};
  CHECK(kernels::dot(a, a, 3) == 14.0);
  if (kernels::cpu_supports(kernels::Isa::kAvx2)) {
    CHECK(kernels::select(kernels::Isa::kAvx2));
    CHECK(kernels::active_isa() == kernels::Isa::kAvx2);
    CHECK(kernels::dot(a, a, 3) == 14.0);
  } else {
    CHECK_FALSE(kernels::select(kernels::Isa::kAvx2));
  }
  kernels::select(before);
  CHECK(kernels::isa_name(kernels::Isa::kScalar) == "scalar");
}
