#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mcl/tensor.hpp"

namespace mcl {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Samples at the maximum feasible resolution, with class labels and a
/// train/val/test split over sample indices.
struct LabeledDataset {
  std::string name = "dataset";
  std::vector<DenseTensor> samples;
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;
  SplitIndices split;

  std::size_t size() const { return samples.size(); }
  const TensorShape& sample_shape() const;
  void validate() const;
};

struct SyntheticSpec {
  std::size_t class_count = 3;
  std::size_t samples_per_class = 100;
  TensorShape shape;                 // resolution of the generated samples
  std::vector<std::size_t> rank;     // multilinear rank per mode
  double noise_std = 0.0;
  std::uint64_t seed = 1;
};

/// Per class, samples are multilinear maps of random cores through a
/// class-specific factor set, plus optional Gaussian noise, rescaled to
/// [0,1]. With zero noise every sample has exact multilinear rank
/// `spec.rank`.
LabeledDataset make_synthetic(const SyntheticSpec& spec);

/// Seeded per-class split. val/test get floor(fraction * n_c) samples
/// each, the remainder goes to train. Every class needs >= 3 samples.
SplitIndices stratified_split(const LabeledDataset& ds,
                              std::array<double, 3> fractions = {0.6, 0.2, 0.2},
                              std::uint64_t seed = 1);

// Tensor container (.mclt): magic "MCLT", u32 version=1, u32 K,
// K x u32 dims, then f64 little-endian row-major payload.
void save_tensor(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor load_tensor(const std::filesystem::path& path);

// A dataset directory holds manifest.csv (header `file,label`) plus one
// container file per sample, in manifest order.
void save_dataset(const std::filesystem::path& dir, const LabeledDataset& ds);

/// Loads a dataset directory. Values are normalized to [0,1]: when the
/// stored values exceed 1 they are treated as 8-bit pixels and divided
/// by 255.
LabeledDataset load_dataset(const std::filesystem::path& dir);

/// Copy of the dataset with every sample down-sampled to `target`.
/// Labels, split, and name are shared.
LabeledDataset at_resolution(const LabeledDataset& ds, const TensorShape& target);

}  // namespace mcl
