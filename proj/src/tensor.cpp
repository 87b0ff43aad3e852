#include "mcl/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mcl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void check_mode(const TensorShape& shape, std::size_t mode) {
  if (mode < 1 || mode > shape.order())
    throw std::invalid_argument("mode " + std::to_string(mode) +
                                " out of range for order-" + std::to_string(shape.order()) +
                                " tensor");
}

// Splits the element count around mode k (0-based): linear index
// decomposes as (pre * dims[k] + fiber) * post + rest.
struct ModeSplit {
  std::size_t pre = 1, dim = 1, post = 1;
};

ModeSplit split_at(const TensorShape& shape, std::size_t mode0) {
  ModeSplit s;
  for (std::size_t j = 0; j < mode0; ++j) s.pre *= shape.dims[j];
  s.dim = shape.dims[mode0];
  for (std::size_t j = mode0 + 1; j < shape.order(); ++j) s.post *= shape.dims[j];
  return s;
}

}  // namespace

std::size_t TensorShape::numel() const {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return n;
}

std::string TensorShape::str() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k) os << 'x';
    os << dims[k];
  }
  return os.str();
}

void TensorShape::validate() const {
  if (dims.empty()) throw std::invalid_argument("tensor shape needs at least one mode");
  for (std::size_t d : dims)
    if (d == 0) throw std::invalid_argument("tensor extents must be positive");
}

DenseTensor::DenseTensor(TensorShape shape, double fill)
    : shape_(std::move(shape)), data_(shape_.numel(), fill) {}

DenseTensor::DenseTensor(TensorShape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_.numel())
    throw std::invalid_argument("data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_.str());
}

FactorMatrix::FactorMatrix(std::size_t r, std::size_t c, double fill)
    : rows(r), cols(c), data(r * c, fill) {}

FactorMatrix::FactorMatrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != rows * cols)
    throw std::invalid_argument("factor matrix data length does not match rows*cols");
}

FactorMatrix FactorMatrix::identity(std::size_t n) {
  FactorMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

FactorMatrix FactorMatrix::transposed() const {
  FactorMatrix t(cols, rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t.at(c, r) = at(r, c);
  return t;
}

FactorMatrix unfold(const DenseTensor& t, std::size_t mode) {
  check_mode(t.shape(), mode);
  const ModeSplit s = split_at(t.shape(), mode - 1);
  FactorMatrix out(s.dim, s.pre * s.post);
  const double* src = t.data();
  for (std::size_t a = 0; a < s.pre; ++a)
    for (std::size_t b = 0; b < s.dim; ++b)
      for (std::size_t c = 0; c < s.post; ++c)
        out.data[b * (s.pre * s.post) + a * s.post + c] = src[(a * s.dim + b) * s.post + c];
  return out;
}

DenseTensor fold(const FactorMatrix& m, const TensorShape& shape, std::size_t mode) {
  check_mode(shape, mode);
  const ModeSplit s = split_at(shape, mode - 1);
  if (m.rows != s.dim || m.cols != s.pre * s.post)
    throw std::invalid_argument("matrix " + std::to_string(m.rows) + "x" +
                                std::to_string(m.cols) + " cannot fold into " + shape.str() +
                                " at mode " + std::to_string(mode));
  DenseTensor out(shape);
  double* dst = out.data();
  for (std::size_t a = 0; a < s.pre; ++a)
    for (std::size_t b = 0; b < s.dim; ++b)
      for (std::size_t c = 0; c < s.post; ++c)
        dst[(a * s.dim + b) * s.post + c] = m.data[b * (s.pre * s.post) + a * s.post + c];
  return out;
}

DenseTensor mode_k_product(const DenseTensor& t, const FactorMatrix& a, std::size_t mode) {
  check_mode(t.shape(), mode);
  const ModeSplit s = split_at(t.shape(), mode - 1);
  if (a.cols != s.dim)
    throw std::invalid_argument("mode-" + std::to_string(mode) + " product: factor has " +
                                std::to_string(a.cols) + " columns but tensor extent is " +
                                std::to_string(s.dim));
  TensorShape out_shape = t.shape();
  out_shape.dims[mode - 1] = a.rows;
  DenseTensor out(out_shape);

  // For fixed leading index the (dim x post) slab is contiguous, so the
  // product runs as one GEMM per slab.
  ConstMapMat A(a.data.data(), static_cast<Eigen::Index>(a.rows),
                static_cast<Eigen::Index>(a.cols));
  for (std::size_t pre = 0; pre < s.pre; ++pre) {
    ConstMapMat in(t.data() + pre * s.dim * s.post, static_cast<Eigen::Index>(s.dim),
                   static_cast<Eigen::Index>(s.post));
    MapMat dst(out.data() + pre * a.rows * s.post, static_cast<Eigen::Index>(a.rows),
               static_cast<Eigen::Index>(s.post));
    dst.noalias() = A * in;
  }
  return out;
}

DenseTensor multilinear_map(const DenseTensor& t, const std::vector<FactorMatrix>& factors) {
  if (factors.size() != t.order())
    throw std::invalid_argument("multilinear map needs exactly " + std::to_string(t.order()) +
                                " factors, got " + std::to_string(factors.size()));
  DenseTensor out = t;
  for (std::size_t k = 0; k < factors.size(); ++k)
    out = mode_k_product(out, factors[k], k + 1);
  return out;
}

double frobenius_norm(const DenseTensor& t) {
  double acc = 0.0;
  for (double x : t.values()) acc += x * x;
  return std::sqrt(acc);
}

void accumulate_gram(const DenseTensor& t, std::size_t mode, FactorMatrix& gram) {
  check_mode(t.shape(), mode);
  const ModeSplit s = split_at(t.shape(), mode - 1);
  if (gram.rows != s.dim || gram.cols != s.dim)
    throw std::invalid_argument("accumulate_gram: gram extent must equal the mode extent");
  const auto d = static_cast<Eigen::Index>(s.dim);
  MapMat g(gram.data.data(), d, d);
  for (std::size_t pre = 0; pre < s.pre; ++pre) {
    ConstMapMat slab(t.data() + pre * s.dim * s.post, d, static_cast<Eigen::Index>(s.post));
    g.noalias() += slab * slab.transpose();
  }
}

FactorMatrix leading_eigenvectors(const FactorMatrix& gram, std::size_t m) {
  if (gram.rows != gram.cols)
    throw std::invalid_argument("leading_eigenvectors: matrix must be square");
  if (m > gram.rows)
    throw std::invalid_argument("leading_eigenvectors: requested " + std::to_string(m) +
                                " vectors from extent " + std::to_string(gram.rows));
  const auto d = static_cast<Eigen::Index>(gram.rows);
  ConstMapMat g(gram.data.data(), d, d);
  Eigen::SelfAdjointEigenSolver<RowMat> es(g);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("leading_eigenvectors: eigendecomposition failed");

  // Eigenvalues come back ascending; keep the top m, earlier index first
  // among equals.
  FactorMatrix out(m, gram.rows);
  for (std::size_t r = 0; r < m; ++r) {
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - static_cast<Eigen::Index>(r));
    // Sign fix: largest-magnitude entry made nonnegative.
    Eigen::Index imax = 0;
    for (Eigen::Index i = 1; i < d; ++i)
      if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
    if (v[imax] < 0.0) v = -v;
    for (std::size_t c = 0; c < gram.rows; ++c) out.at(r, c) = v[static_cast<Eigen::Index>(c)];
  }
  return out;
}

HosvdResult hosvd(const DenseTensor& t, const TensorShape& target) {
  if (target.order() != t.order())
    throw std::invalid_argument("hosvd target order differs from tensor order");
  for (std::size_t k = 0; k < target.order(); ++k)
    if (target.dims[k] > t.shape().dims[k])
      throw std::invalid_argument("hosvd target extent " + std::to_string(target.dims[k]) +
                                  " exceeds source extent " +
                                  std::to_string(t.shape().dims[k]) + " at mode " +
                                  std::to_string(k + 1));

  HosvdResult res;
  res.factors.reserve(t.order());
  for (std::size_t k = 0; k < t.order(); ++k) {
    FactorMatrix gram(t.shape().dims[k], t.shape().dims[k]);
    accumulate_gram(t, k + 1, gram);
    res.factors.push_back(leading_eigenvectors(gram, target.dims[k]));
  }
  res.core = multilinear_map(t, res.factors);
  return res;
}

DenseTensor downsample(const DenseTensor& t, const TensorShape& target) {
  if (target.order() != t.order())
    throw std::invalid_argument("downsample target order differs from tensor order");
  DenseTensor out = t;
  for (std::size_t k = 0; k < target.order(); ++k) {
    const std::size_t src = t.shape().dims[k];
    const std::size_t dst = target.dims[k];
    if (dst > src)
      throw std::invalid_argument("downsample target extent " + std::to_string(dst) +
                                  " exceeds source extent " + std::to_string(src) +
                                  " at mode " + std::to_string(k + 1));
    if (dst == src) continue;

    // Box filter: output cell j averages the source interval [j*r, (j+1)*r).
    const double r = static_cast<double>(src) / static_cast<double>(dst);
    FactorMatrix box(dst, src);
    for (std::size_t j = 0; j < dst; ++j) {
      const double lo = static_cast<double>(j) * r;
      const double hi = static_cast<double>(j + 1) * r;
      const auto first = static_cast<std::size_t>(std::floor(lo));
      for (std::size_t i = first; i < src && static_cast<double>(i) < hi; ++i) {
        const double overlap =
            std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
        if (overlap > 0.0) box.at(j, i) = overlap / r;
      }
    }
    out = mode_k_product(out, box, k + 1);
  }
  return out;
}

}  // namespace mcl
