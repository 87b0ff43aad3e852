#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "mcl/data.hpp"
#include "mcl/rng.hpp"
#include "mcl/tensor.hpp"

using namespace mcl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mcl_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

LabeledDataset tiny_dataset(std::size_t n_per_class, std::size_t classes, TensorShape shape,
                            std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset ds;
  ds.class_count = classes;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < n_per_class; ++i) {
      DenseTensor t(shape);
      for (double& x : t.values()) x = rng.uniform();
      ds.samples.push_back(std::move(t));
      ds.labels.push_back(c);
    }
  return ds;
}

}  // namespace

TEST_CASE("tensor container round-trips exactly") {
  const fs::path dir = fresh_dir("container");
  Rng rng(1);
  for (TensorShape shape : {TensorShape{3}, TensorShape{4, 2}, TensorShape{3, 4, 2}}) {
    DenseTensor t(shape);
    for (double& x : t.values()) x = rng.uniform(-5, 5);
    save_tensor(dir / "t.mclt", t);
    CHECK(load_tensor(dir / "t.mclt") == t);
  }
}

TEST_CASE("load_tensor: rejects bad magic") {
  const fs::path dir = fresh_dir("badmagic");
  std::ofstream(dir / "junk.mclt") << "not a tensor";
  CHECK_THROWS(load_tensor(dir / "junk.mclt"));
}

TEST_CASE("save/load dataset: manifest order and shapes") {
  const fs::path dir = fresh_dir("dataset");
  LabeledDataset ds = tiny_dataset(1, 2, TensorShape{8, 8, 3}, 2);
  save_dataset(dir, ds);

  const LabeledDataset back = load_dataset(dir);
  CHECK(back.size() == 2);
  CHECK(back.class_count == 2);
  CHECK(back.sample_shape() == TensorShape{8, 8, 3});
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.labels[i] == ds.labels[i]);
    CHECK(back.samples[i] == ds.samples[i]);  // already in [0,1], no rescale
  }
}

TEST_CASE("load_dataset: shape mismatch names the file") {
  const fs::path dir = fresh_dir("mismatch");
  LabeledDataset ds = tiny_dataset(2, 2, TensorShape{4, 4, 2}, 3);
  save_dataset(dir, ds);
  save_tensor(dir / "sample_00002.mclt", DenseTensor(TensorShape{4, 3, 2}, 0.5));
  try {
    load_dataset(dir);
    FAIL("expected a shape mismatch error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("sample_00002") != std::string::npos);
  }
}

TEST_CASE("load_dataset: missing sample file and unknown label") {
  const fs::path dir = fresh_dir("manifest_errors");
  fs::create_directories(dir);
  {
    std::ofstream m(dir / "manifest.csv");
    m << "file,label\nmissing.mclt,0\n";
  }
  CHECK_THROWS(load_dataset(dir));
  {
    std::ofstream m(dir / "manifest.csv");
    m << "file,label\nsample.mclt,giraffe\n";
  }
  save_tensor(dir / "sample.mclt", DenseTensor(TensorShape{2, 2}, 0.1));
  try {
    load_dataset(dir);
    FAIL("expected an unknown-label error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("giraffe") != std::string::npos);
  }
}

TEST_CASE("load_dataset: 8-bit style values are scaled by 255") {
  const fs::path dir = fresh_dir("pixels");
  LabeledDataset ds = tiny_dataset(2, 2, TensorShape{3, 3}, 4);
  Rng rng(5);
  for (DenseTensor& t : ds.samples)
    for (double& x : t.values()) x = static_cast<double>(rng.bounded(256));
  save_dataset(dir, ds);

  const LabeledDataset back = load_dataset(dir);
  for (std::size_t i = 0; i < back.size(); ++i)
    for (std::size_t j = 0; j < back.samples[i].numel(); ++j)
      CHECK(back.samples[i][j] ==
            doctest::Approx(ds.samples[i][j] / 255.0).epsilon(1e-12));
}

TEST_CASE("stratified_split: 10 per class gives 6/2/2") {
  LabeledDataset ds = tiny_dataset(10, 3, TensorShape{2, 2}, 6);
  const SplitIndices s = stratified_split(ds, {0.6, 0.2, 0.2}, 11);
  CHECK(s.train.size() == 18);
  CHECK(s.val.size() == 6);
  CHECK(s.test.size() == 6);
  for (std::size_t c = 0; c < 3; ++c) {
    auto count = [&](const std::vector<std::size_t>& part) {
      std::size_t n = 0;
      for (std::size_t i : part)
        if (ds.labels[i] == c) ++n;
      return n;
    };
    CHECK(count(s.train) == 6);
    CHECK(count(s.val) == 2);
    CHECK(count(s.test) == 2);
  }
}

TEST_CASE("stratified_split: floor-remainder rule and tiny classes") {
  LabeledDataset ds = tiny_dataset(5, 1, TensorShape{2}, 7);
  const SplitIndices s = stratified_split(ds, {0.6, 0.2, 0.2}, 1);
  CHECK(s.train.size() == 3);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);

  LabeledDataset big = tiny_dataset(100, 1, TensorShape{2}, 8);
  const SplitIndices sb = stratified_split(big, {0.6, 0.2, 0.2}, 1);
  CHECK(sb.train.size() == 60);
  CHECK(sb.val.size() == 20);
  CHECK(sb.test.size() == 20);

  LabeledDataset small = tiny_dataset(2, 1, TensorShape{2}, 9);
  CHECK_THROWS_AS(stratified_split(small, {0.6, 0.2, 0.2}, 1), std::invalid_argument);
}

TEST_CASE("stratified_split: disjoint cover for any seed") {
  LabeledDataset ds = tiny_dataset(7, 4, TensorShape{2}, 10);
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL, 12345ULL}) {
    const SplitIndices s = stratified_split(ds, {0.6, 0.2, 0.2}, seed);
    std::set<std::size_t> seen;
    for (const auto* part : {&s.train, &s.val, &s.test})
      for (std::size_t i : *part) CHECK(seen.insert(i).second);
    CHECK(seen.size() == ds.size());
  }
}

TEST_CASE("make_synthetic: zero noise gives exact multilinear rank") {
  SyntheticSpec spec;
  spec.class_count = 2;
  spec.samples_per_class = 5;
  spec.shape = TensorShape{6, 6, 2};
  spec.rank = {2, 2, 1};
  spec.noise_std = 0.0;
  spec.seed = 21;
  const LabeledDataset ds = make_synthetic(spec);
  for (const DenseTensor& t : ds.samples) {
    const HosvdResult h = hosvd(t, TensorShape{2, 2, 1});
    std::vector<FactorMatrix> ft;
    for (const auto& f : h.factors) ft.push_back(f.transposed());
    DenseTensor rec = multilinear_map(h.core, ft);
    for (std::size_t i = 0; i < rec.numel(); ++i) rec[i] -= t[i];
    CHECK(frobenius_norm(rec) < 1e-10 * std::max(1.0, frobenius_norm(t)));
  }
}

TEST_CASE("make_synthetic: deterministic, balanced, in unit range") {
  SyntheticSpec spec;
  spec.class_count = 3;
  spec.samples_per_class = 100;
  spec.shape = TensorShape{4, 4, 2};
  spec.rank = {2, 2, 1};
  spec.noise_std = 0.1;
  spec.seed = 22;
  const LabeledDataset a = make_synthetic(spec);
  const LabeledDataset b = make_synthetic(spec);
  CHECK(a.size() == 300);
  CHECK(a.labels == b.labels);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i] == b.samples[i]);

  std::vector<std::size_t> counts(3, 0);
  for (std::size_t c : a.labels) counts[c]++;
  CHECK(counts == std::vector<std::size_t>{100, 100, 100});
  for (const DenseTensor& t : a.samples)
    for (double x : t.values()) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
}

TEST_CASE("make_synthetic: rank exceeding shape is rejected") {
  SyntheticSpec spec;
  spec.shape = TensorShape{4, 4};
  spec.rank = {5, 2};
  CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
}

TEST_CASE("at_resolution: downsamples samples, keeps labels and split") {
  SyntheticSpec spec;
  spec.class_count = 2;
  spec.samples_per_class = 5;
  spec.shape = TensorShape{8, 8, 2};
  spec.rank = {2, 2, 1};
  spec.seed = 23;
  const LabeledDataset ds = make_synthetic(spec);
  const LabeledDataset low = at_resolution(ds, TensorShape{4, 4, 2});
  CHECK(low.sample_shape() == TensorShape{4, 4, 2});
  CHECK(low.labels == ds.labels);
  CHECK(low.split.train == ds.split.train);
}
