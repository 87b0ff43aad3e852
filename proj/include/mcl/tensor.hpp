#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mcl {

/// Extents of a K-mode tensor. Mode indices are 1-based at the API
/// boundary (matching the x_k notation) and 0-based internally.
struct TensorShape {
  std::vector<std::size_t> dims;

  TensorShape() = default;
  TensorShape(std::initializer_list<std::size_t> d) : dims(d) { validate(); }
  explicit TensorShape(std::vector<std::size_t> d) : dims(std::move(d)) { validate(); }

  std::size_t order() const { return dims.size(); }
  std::size_t numel() const;
  std::size_t operator[](std::size_t mode0) const { return dims[mode0]; }
  bool operator==(const TensorShape&) const = default;

  /// "8x8x3"
  std::string str() const;

  void validate() const;
};

/// Dense K-mode tensor of doubles, row-major with the last mode fastest.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(TensorShape shape, double fill = 0.0);
  DenseTensor(TensorShape shape, std::vector<double> values);

  const TensorShape& shape() const { return shape_; }
  std::size_t order() const { return shape_.order(); }
  std::size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool operator==(const DenseTensor&) const = default;

 private:
  TensorShape shape_;
  std::vector<double> data_;
};

/// Row-major dense matrix. Used for mode-k unfoldings and for the
/// per-mode factor matrices (sensing/synthesis operators, HOSVD bases).
struct FactorMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  FactorMatrix() = default;
  FactorMatrix(std::size_t r, std::size_t c, double fill = 0.0);
  FactorMatrix(std::size_t r, std::size_t c, std::vector<double> values);

  static FactorMatrix identity(std::size_t n);

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  FactorMatrix transposed() const;

  bool operator==(const FactorMatrix&) const = default;
};

struct HosvdResult {
  DenseTensor core;
  std::vector<FactorMatrix> factors;  // factor k: target_k x dims[k], orthonormal rows
};

/// Mode-k unfolding: rows are mode-k fibers, columns ordered by the
/// row-major order of the remaining modes. `mode` is 1-based.
FactorMatrix unfold(const DenseTensor& t, std::size_t mode);

/// Exact inverse of unfold for the given full shape.
DenseTensor fold(const FactorMatrix& m, const TensorShape& shape, std::size_t mode);

/// t x_mode a. Requires a.cols == dims[mode]; the result replaces
/// dims[mode] with a.rows.
DenseTensor mode_k_product(const DenseTensor& t, const FactorMatrix& a, std::size_t mode);

/// Sequential mode-k products over all K modes (one factor per mode).
DenseTensor multilinear_map(const DenseTensor& t, const std::vector<FactorMatrix>& factors);

double frobenius_norm(const DenseTensor& t);

/// Truncated higher-order SVD. Factor k holds the top-target_k left
/// singular vectors of unfold(t, k) as rows; core = multilinear_map(t, factors).
HosvdResult hosvd(const DenseTensor& t, const TensorShape& target);

/// gram += unfold(t, mode) * unfold(t, mode)^T. gram must be square with
/// extent dims[mode]. Lets dataset-level decompositions accumulate
/// mode-k scatter matrices sample by sample.
void accumulate_gram(const DenseTensor& t, std::size_t mode, FactorMatrix& gram);

/// Top-m eigenvectors of a symmetric PSD matrix as rows, in descending
/// eigenvalue order, each with its largest-magnitude entry nonnegative.
FactorMatrix leading_eigenvectors(const FactorMatrix& gram, std::size_t m);

/// Area-average (box) resampling per mode. Modes with unchanged extent
/// pass through untouched.
DenseTensor downsample(const DenseTensor& t, const TensorShape& target);

}  // namespace mcl
