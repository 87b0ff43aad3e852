#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include "mcl/rng.hpp"
#include "mcl/tensor.hpp"

using namespace mcl;

namespace {

DenseTensor random_tensor(TensorShape shape, Rng& rng) {
  DenseTensor t(std::move(shape));
  for (double& x : t.values()) x = rng.uniform(-1.0, 1.0);
  return t;
}

double rel_error(const DenseTensor& a, const DenseTensor& b) {
  REQUIRE(a.shape() == b.shape());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::sqrt(den);
}

DenseTensor reconstruct(const HosvdResult& h) {
  std::vector<FactorMatrix> t;
  for (const auto& f : h.factors) t.push_back(f.transposed());
  return multilinear_map(h.core, t);
}

FactorMatrix matmul(const FactorMatrix& a, const FactorMatrix& b) {
  REQUIRE(a.cols == b.rows);
  FactorMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += a.at(i, k) * b.at(k, j);
  return c;
}

}  // namespace

TEST_CASE("unfold: matrix is its own mode-1 unfolding") {
  const DenseTensor t({2, 2}, {1, 2, 3, 4});
  const FactorMatrix u = unfold(t, 1);
  CHECK(u.rows == 2);
  CHECK(u.cols == 2);
  CHECK(u.data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("unfold: mode-3 fibers of a 2x2x2 tensor") {
  // entries 1..8 in row-major order; fibers along mode 3 are (1,2), (3,4), ...
  const DenseTensor t({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const FactorMatrix u = unfold(t, 3);
  CHECK(u.rows == 2);
  CHECK(u.cols == 4);
  CHECK(u.data == std::vector<double>{1, 3, 5, 7, 2, 4, 6, 8});
}

TEST_CASE("unfold/fold: exact inverses on every mode") {
  Rng rng(42);
  const DenseTensor t = random_tensor({3, 4, 2}, rng);
  for (std::size_t k = 1; k <= 3; ++k) {
    const DenseTensor back = fold(unfold(t, k), t.shape(), k);
    CHECK(back == t);
  }
}

TEST_CASE("unfold: invalid mode index") {
  const DenseTensor t({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(unfold(t, 0), std::invalid_argument);
  CHECK_THROWS_AS(unfold(t, 3), std::invalid_argument);
}

TEST_CASE("mode_k_product: identity leaves tensor unchanged") {
  Rng rng(7);
  const DenseTensor t = random_tensor({3, 4, 2}, rng);
  for (std::size_t k = 1; k <= 3; ++k)
    CHECK(mode_k_product(t, FactorMatrix::identity(t.shape().dims[k - 1]), k) == t);
}

TEST_CASE("mode_k_product: hand-computed 2x2 examples") {
  const DenseTensor t({2, 2}, {1, 2, 3, 4});
  const FactorMatrix ones(1, 2, {1, 1});

  const DenseTensor r1 = mode_k_product(t, ones, 1);
  CHECK(r1.shape() == TensorShape{1, 2});
  CHECK(r1.values()[0] == 4);
  CHECK(r1.values()[1] == 6);

  const DenseTensor r2 = mode_k_product(t, ones, 2);
  CHECK(r2.shape() == TensorShape{2, 1});
  CHECK(r2.values()[0] == 3);
  CHECK(r2.values()[1] == 7);
}

TEST_CASE("mode_k_product: dimension mismatch") {
  const DenseTensor t({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(mode_k_product(t, FactorMatrix(2, 3), 1), std::invalid_argument);
}

TEST_CASE("mode_k_product: products on distinct modes commute") {
  Rng rng(3);
  const DenseTensor t = random_tensor({3, 3, 2}, rng);
  const FactorMatrix a(2, 3, {1, 0.5, -1, 0, 2, 1});
  const FactorMatrix b(4, 2, {1, 2, -1, 0, 0.5, 0.5, 3, -2});
  const DenseTensor ab = mode_k_product(mode_k_product(t, a, 1), b, 3);
  const DenseTensor ba = mode_k_product(mode_k_product(t, b, 3), a, 1);
  CHECK(rel_error(ab, ba) < 1e-12);
}

TEST_CASE("mode_k_product: composition on the same mode matches matrix product") {
  Rng rng(4);
  const DenseTensor t = random_tensor({3, 4, 2}, rng);
  FactorMatrix a(2, 3), b(3, 4);
  for (double& x : a.data) x = rng.uniform(-1, 1);
  for (double& x : b.data) x = rng.uniform(-1, 1);
  const DenseTensor lhs = mode_k_product(t, matmul(a, b), 2);
  const DenseTensor rhs = mode_k_product(mode_k_product(t, b, 2), a, 2);
  CHECK(rel_error(lhs, rhs) < 1e-12);
}

TEST_CASE("multilinear_map: identities, K=1 vector case, factor count errors") {
  Rng rng(5);
  const DenseTensor t = random_tensor({3, 4, 2}, rng);
  const std::vector<FactorMatrix> ids{FactorMatrix::identity(3), FactorMatrix::identity(4),
                                      FactorMatrix::identity(2)};
  CHECK(multilinear_map(t, ids) == t);

  // K=1 reduces to plain matrix-vector compression.
  const DenseTensor y({3}, {1, 2, 3});
  const FactorMatrix phi(2, 3, {1, 0, 1, 0, 1, 0});
  const DenseTensor z = multilinear_map(y, {phi});
  CHECK(z.shape() == TensorShape{2});
  CHECK(z.values()[0] == 4);
  CHECK(z.values()[1] == 2);

  CHECK_THROWS_AS(multilinear_map(t, {FactorMatrix::identity(3)}), std::invalid_argument);
}

TEST_CASE("multilinear_map: application order does not matter") {
  Rng rng(6);
  const DenseTensor t = random_tensor({3, 3, 2}, rng);
  std::vector<FactorMatrix> f{FactorMatrix(2, 3), FactorMatrix(2, 3), FactorMatrix(2, 2)};
  for (auto& m : f)
    for (double& x : m.data) x = rng.uniform(-1, 1);

  const DenseTensor in_order = multilinear_map(t, f);
  DenseTensor other = mode_k_product(t, f[2], 3);
  other = mode_k_product(other, f[0], 1);
  other = mode_k_product(other, f[1], 2);
  CHECK(rel_error(in_order, other) < 1e-12);
}

TEST_CASE("frobenius_norm") {
  CHECK(frobenius_norm(DenseTensor({1, 2}, {3, 4})) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(frobenius_norm(DenseTensor({3, 3})) == 0.0);

  Rng rng(8);
  const DenseTensor t = random_tensor({4, 4, 2}, rng);
  double acc = 0.0;
  for (double x : t.values()) acc += x * x;
  CHECK(frobenius_norm(t) == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));
}

TEST_CASE("hosvd: full target reconstructs exactly") {
  Rng rng(9);
  const DenseTensor t = random_tensor({8, 8, 3}, rng);
  const HosvdResult h = hosvd(t, t.shape());
  CHECK(rel_error(reconstruct(h), t) < 1e-10);
}

TEST_CASE("hosvd: factors have orthonormal rows") {
  Rng rng(10);
  const DenseTensor t = random_tensor({6, 5, 4}, rng);
  const HosvdResult h = hosvd(t, TensorShape{3, 2, 2});
  for (const FactorMatrix& f : h.factors) {
    const FactorMatrix g = matmul(f, f.transposed());
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t j = 0; j < g.cols; ++j)
        CHECK(g.at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
  }
}

TEST_CASE("hosvd: K=2 truncation error equals truncated SVD error") {
  Rng rng(11);
  const DenseTensor t = random_tensor({5, 4}, rng);
  const HosvdResult h = hosvd(t, TensorShape{2, 2});
  const double hosvd_err = frobenius_norm([&] {
    DenseTensor d = reconstruct(h);
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] -= t[i];
    return d;
  }());

  Eigen::MatrixXd m(5, 4);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = t[static_cast<std::size_t>(i * 4 + j)];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd rank2 = svd.matrixU().leftCols(2) *
                          svd.singularValues().head(2).asDiagonal() *
                          svd.matrixV().leftCols(2).transpose();
  const double svd_err = (m - rank2).norm();
  CHECK(hosvd_err == doctest::Approx(svd_err).epsilon(1e-10));
}

TEST_CASE("hosvd: rank-1 tensor with unit factors has unit core") {
  // positive unit vectors so the sign convention keeps them as-is
  auto unit = [](std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
  };
  const std::vector<double> u = unit({1, 2, 2}), v = unit({3, 4}), w = unit({1, 1});
  DenseTensor t({3, 2, 2});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k) t[(i * 2 + j) * 2 + k] = u[i] * v[j] * w[k];

  const HosvdResult h = hosvd(t, TensorShape{1, 1, 1});
  CHECK(h.core.numel() == 1);
  CHECK(h.core[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("hosvd: nested targets give monotone truncation error") {
  Rng rng(12);
  const DenseTensor t = random_tensor({6, 5, 4}, rng);
  const std::vector<TensorShape> targets{{1, 1, 1}, {2, 2, 2}, {4, 3, 3}, {6, 5, 4}};
  double prev = 1e300;
  for (const TensorShape& target : targets) {
    DenseTensor d = reconstruct(hosvd(t, target));
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] -= t[i];
    const double err = frobenius_norm(d);
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
}

TEST_CASE("hosvd: target exceeding source extent is rejected") {
  Rng rng(13);
  const DenseTensor t = random_tensor({3, 3}, rng);
  CHECK_THROWS_AS(hosvd(t, TensorShape{4, 2}), std::invalid_argument);
}

TEST_CASE("multilinear_map: norm bounded by product of spectral norms") {
  Rng rng(14);
  const DenseTensor t = random_tensor({4, 3, 3}, rng);
  std::vector<FactorMatrix> f{FactorMatrix(2, 4), FactorMatrix(3, 3), FactorMatrix(2, 3)};
  double bound = frobenius_norm(t);
  for (auto& m : f) {
    for (double& x : m.data) x = rng.uniform(-1, 1);
    Eigen::MatrixXd em(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j)
        em(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.at(i, j);
    bound *= Eigen::JacobiSVD<Eigen::MatrixXd>(em).singularValues()(0);
  }
  CHECK(frobenius_norm(multilinear_map(t, f)) <= bound * (1 + 1e-12));
}

TEST_CASE("downsample: constants, identity, checkerboard") {
  DenseTensor c({4, 4}, std::vector<double>(16, 0.7));
  const DenseTensor down = downsample(c, TensorShape{2, 2});
  for (double x : down.values()) CHECK(x == doctest::Approx(0.7).epsilon(1e-15));

  Rng rng(15);
  const DenseTensor t = random_tensor({5, 3, 2}, rng);
  CHECK(downsample(t, t.shape()) == t);

  DenseTensor board({4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) board[i * 4 + j] = static_cast<double>((i + j) % 2);
  const DenseTensor half = downsample(board, TensorShape{2, 2});
  for (double x : half.values()) CHECK(x == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("downsample: stays within the source range, rejects upsampling") {
  Rng rng(16);
  const DenseTensor t = random_tensor({7, 5, 3}, rng);
  double lo = t[0], hi = t[0];
  for (double x : t.values()) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const DenseTensor d = downsample(t, TensorShape{3, 2, 3});
  CHECK(d.shape() == TensorShape{3, 2, 3});
  for (double x : d.values()) {
    CHECK(x >= lo - 1e-12);
    CHECK(x <= hi + 1e-12);
  }
  CHECK_THROWS_AS(downsample(t, TensorShape{8, 5, 3}), std::invalid_argument);
}
