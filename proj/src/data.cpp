#include "mcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "mcl/rng.hpp"

namespace mcl {

namespace fs = std::filesystem;

const TensorShape& LabeledDataset::sample_shape() const {
  if (samples.empty()) throw std::runtime_error("dataset is empty");
  return samples.front().shape();
}

void LabeledDataset::validate() const {
  if (samples.size() != labels.size())
    throw std::invalid_argument("dataset: sample and label counts differ");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (labels[i] >= class_count)
      throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) +
                                  " at sample " + std::to_string(i) + " exceeds class count");
    if (!(samples[i].shape() == samples.front().shape()))
      throw std::invalid_argument("dataset: sample " + std::to_string(i) +
                                  " shape differs from the rest");
  }
}

LabeledDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.class_count < 1 || spec.samples_per_class < 1)
    throw std::invalid_argument("synthetic: class_count and samples_per_class must be positive");
  if (spec.rank.size() != spec.shape.order())
    throw std::invalid_argument("synthetic: rank list length must equal tensor order");
  for (std::size_t k = 0; k < spec.rank.size(); ++k)
    if (spec.rank[k] == 0 || spec.rank[k] > spec.shape.dims[k])
      throw std::invalid_argument("synthetic: rank at mode " + std::to_string(k + 1) +
                                  " must be in [1, extent]");
  if (spec.noise_std < 0.0) throw std::invalid_argument("synthetic: noise_std must be >= 0");

  Rng rng(spec.seed);
  LabeledDataset ds;
  ds.name = "synthetic";
  ds.class_count = spec.class_count;

  TensorShape core_shape{std::vector<std::size_t>(spec.rank)};
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    // Class factor matrices. The first column spans the constant vector
    // so the final affine rescale to [0,1] cannot raise the multilinear
    // rank of any sample.
    std::vector<FactorMatrix> factors;
    for (std::size_t k = 0; k < spec.shape.order(); ++k) {
      FactorMatrix f(spec.shape.dims[k], spec.rank[k]);
      for (std::size_t r = 0; r < f.rows; ++r) f.at(r, 0) = 1.0;
      for (std::size_t r = 0; r < f.rows; ++r)
        for (std::size_t col = 1; col < f.cols; ++col) f.at(r, col) = rng.gaussian();
      factors.push_back(std::move(f));
    }
    // Per-class prototype core; samples scatter around it, so classes keep
    // stable structure that compression can erode.
    DenseTensor prototype(core_shape);
    for (double& x : prototype.values()) x = rng.gaussian();
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      DenseTensor core = prototype;
      for (double& x : core.values()) x += 0.75 * rng.gaussian();
      DenseTensor sample = multilinear_map(core, factors);
      if (spec.noise_std > 0.0)
        for (double& x : sample.values()) x += spec.noise_std * rng.gaussian();
      ds.samples.push_back(std::move(sample));
      ds.labels.push_back(c);
    }
  }

  double lo = ds.samples.front()[0], hi = lo;
  for (const DenseTensor& t : ds.samples)
    for (double x : t.values()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  const double span = hi > lo ? hi - lo : 1.0;
  for (DenseTensor& t : ds.samples)
    for (double& x : t.values()) x = (x - lo) / span;

  ds.split = stratified_split(ds, {0.6, 0.2, 0.2}, spec.seed);
  return ds;
}

SplitIndices stratified_split(const LabeledDataset& ds, std::array<double, 3> fractions,
                              std::uint64_t seed) {
  ds.validate();
  std::vector<std::vector<std::size_t>> by_class(ds.class_count);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  Rng rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 3)
      throw std::invalid_argument("stratified split: class " + std::to_string(c) + " has " +
                                  std::to_string(idx.size()) + " samples, needs >= 3");
    rng.shuffle(idx);
    const auto n = static_cast<double>(idx.size());
    const auto n_val = static_cast<std::size_t>(std::floor(fractions[1] * n));
    const auto n_test = static_cast<std::size_t>(std::floor(fractions[2] * n));
    const std::size_t n_train = idx.size() - n_val - n_test;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < n_train)
        out.train.push_back(idx[i]);
      else if (i < n_train + n_val)
        out.val.push_back(idx[i]);
      else
        out.test.push_back(idx[i]);
    }
  }
  return out;
}

void save_tensor(const fs::path& path, const DenseTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  wire::put_magic(os, "MCLT");
  wire::put_u32(os, 1);
  wire::put_u32(os, static_cast<std::uint32_t>(t.order()));
  for (std::size_t d : t.shape().dims) wire::put_u32(os, static_cast<std::uint32_t>(d));
  for (double x : t.values()) wire::put_f64(os, x);
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

DenseTensor load_tensor(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  wire::check_magic(is, "MCLT", path.string());
  const std::uint32_t version = wire::get_u32(is, "version");
  if (version != 1)
    throw std::runtime_error(path.string() + ": unsupported container version " +
                             std::to_string(version));
  const std::uint32_t order = wire::get_u32(is, "order");
  std::vector<std::size_t> dims(order);
  for (auto& d : dims) d = wire::get_u32(is, "dims");
  DenseTensor t{TensorShape{std::move(dims)}};
  for (double& x : t.values()) x = wire::get_f64(is, "payload");
  return t;
}

void save_dataset(const fs::path& dir, const LabeledDataset& ds) {
  ds.validate();
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
  manifest << "file,label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::ostringstream name;
    name << "sample_" << std::setw(5) << std::setfill('0') << i << ".mclt";
    save_tensor(dir / name.str(), ds.samples[i]);
    manifest << name.str() << ',' << ds.labels[i] << '\n';
  }
}

LabeledDataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.csv";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("missing manifest: " + manifest_path.string());

  LabeledDataset ds;
  ds.name = dir.filename().string().empty() ? dir.parent_path().filename().string()
                                            : dir.filename().string();
  std::string line;
  if (!std::getline(manifest, line) || line != "file,label")
    throw std::runtime_error(manifest_path.string() + ": expected header `file,label`");

  std::size_t max_label = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(manifest_path.string() + ": malformed row `" + line + "`");
    const std::string file = line.substr(0, comma);
    const std::string label_str = line.substr(comma + 1);
    std::size_t pos = 0;
    long label = -1;
    try {
      label = std::stol(label_str, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != label_str.size() || label < 0)
      throw std::runtime_error(manifest_path.string() + ": unknown label `" + label_str +
                               "` for file " + file);

    DenseTensor t = load_tensor(dir / file);
    if (!ds.samples.empty() && !(t.shape() == ds.samples.front().shape()))
      throw std::runtime_error(file + ": shape " + t.shape().str() +
                               " does not match dataset shape " +
                               ds.samples.front().shape().str());
    ds.samples.push_back(std::move(t));
    ds.labels.push_back(static_cast<std::size_t>(label));
    max_label = std::max(max_label, static_cast<std::size_t>(label));
  }
  if (ds.samples.empty()) throw std::runtime_error(dir.string() + ": dataset is empty");
  ds.class_count = max_label + 1;

  // 8-bit pixel payloads are mapped onto the unit range.
  double hi = 0.0;
  for (const DenseTensor& t : ds.samples)
    for (double x : t.values()) hi = std::max(hi, std::abs(x));
  if (hi > 1.0)
    for (DenseTensor& t : ds.samples)
      for (double& x : t.values()) x /= 255.0;

  ds.validate();
  return ds;
}

LabeledDataset at_resolution(const LabeledDataset& ds, const TensorShape& target) {
  LabeledDataset out;
  out.name = ds.name;
  out.labels = ds.labels;
  out.class_count = ds.class_count;
  out.split = ds.split;
  out.samples.reserve(ds.samples.size());
  for (const DenseTensor& t : ds.samples) out.samples.push_back(downsample(t, target));
  return out;
}

}  // namespace mcl
