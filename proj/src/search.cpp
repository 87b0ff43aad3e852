#include "mcl/search.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "mcl/rng.hpp"

namespace mcl {

namespace {

std::uint64_t config_stream(std::uint64_t base, const ConfigPoint& c) {
  // FNV-1a over the dims, so per-config seeds survive record reordering
  // and top-k subsetting.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::size_t v) {
    h ^= static_cast<std::uint64_t>(v);
    h *= 1099511628211ULL;
  };
  for (std::size_t d : c.resolution.dims) mix(d);
  mix(0);
  for (std::size_t d : c.measurements.dims) mix(d);
  return derive_seed(base, h);
}

// Runs fn(0..n-1) on up to `jobs` threads. Results must be written to
// per-index slots; the first exception in index order is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("results csv: cannot parse " + what + " from `" + s + "`");
  return v;
}

}  // namespace

TensorShape ConfigGrid::max_resolution() const {
  if (resolutions.empty()) throw std::invalid_argument("grid: no resolutions");
  std::vector<std::size_t> dims = resolutions.front().dims;
  for (const TensorShape& r : resolutions)
    for (std::size_t k = 0; k < dims.size(); ++k) dims[k] = std::max(dims[k], r.dims[k]);
  return TensorShape{std::move(dims)};
}

void ConfigGrid::validate() const {
  if (resolutions.empty() || measurements.empty())
    throw std::invalid_argument("grid: resolutions and measurements must be nonempty");
  const std::size_t K = resolutions.front().order();
  for (const TensorShape& r : resolutions)
    if (r.order() != K) throw std::invalid_argument("grid: resolution orders differ");
  for (const TensorShape& m : measurements)
    if (m.order() != K)
      throw std::invalid_argument("grid: measurement order differs from resolution order");
  const TensorShape imax = max_resolution();
  for (const TensorShape& m : measurements)
    for (std::size_t k = 0; k < K; ++k)
      if (m.dims[k] > imax.dims[k])
        throw std::invalid_argument("grid: M_" + std::to_string(k + 1) + "=" +
                                    std::to_string(m.dims[k]) +
                                    " exceeds the maximum resolution " + imax.str());
}

std::vector<ConfigPoint> enumerate_grid(const ConfigGrid& g) {
  g.validate();
  std::vector<TensorShape> rs = g.resolutions;
  std::vector<TensorShape> ms = g.measurements;
  auto desc = [](const TensorShape& a, const TensorShape& b) { return a.dims > b.dims; };
  std::sort(rs.begin(), rs.end(), desc);
  std::sort(ms.begin(), ms.end(), desc);
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());

  std::vector<ConfigPoint> out;
  out.reserve(rs.size() * ms.size());
  for (const TensorShape& r : rs)
    for (const TensorShape& m : ms) out.push_back({r, m});
  return out;
}

double compression_rate(const ConfigPoint& c) {
  return static_cast<double>(c.resolution.numel()) /
         static_cast<double>(c.measurements.numel());
}

std::vector<EvalRecord> surrogate_scan(const LabeledDataset& ds, const ConfigGrid& g,
                                       const OptimizerConfig& init_opt, std::size_t jobs) {
  const std::vector<ConfigPoint> points = enumerate_grid(g);
  std::vector<EvalRecord> records(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t i) {
    const ConfigPoint& cfg = points[i];
    const auto t0 = std::chrono::steady_clock::now();
    OptimizerConfig opt = init_opt;
    opt.seed = config_stream(init_opt.seed, cfg);
    EvalRecord rec;
    rec.dataset = ds.name;
    rec.config = cfg;
    rec.compression_rate = compression_rate(cfg);
    rec.seed = init_opt.seed;
    try {
      const ReconInitResult init = init_reconstruction(ds, cfg, opt);
      rec.init_mse = reconstruction_mse(init.cs, init.fs, ds, ds.split.test, cfg.resolution);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.epoch(), std::string(e.what()) + " [config " + cfg.str() + "]");
    }
    rec.runtime_s = seconds_since(t0);
    records[i] = std::move(rec);
  });
  return records;
}

std::vector<EvalRecord> surrogate_scan_avg(const LabeledDataset& ds, const ConfigGrid& g,
                                           const OptimizerConfig& init_opt,
                                           std::span<const std::uint64_t> seeds,
                                           std::size_t jobs) {
  if (seeds.empty()) throw std::invalid_argument("surrogate scan: seed list is empty");
  std::vector<EvalRecord> avg;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    OptimizerConfig opt = init_opt;
    opt.seed = seeds[s];
    std::vector<EvalRecord> one = surrogate_scan(ds, g, opt, jobs);
    if (s == 0) {
      avg = std::move(one);
    } else {
      for (std::size_t i = 0; i < avg.size(); ++i) {
        avg[i].init_mse += one[i].init_mse;
        if (avg[i].runtime_s && one[i].runtime_s) *avg[i].runtime_s += *one[i].runtime_s;
      }
    }
  }
  const auto n = static_cast<double>(seeds.size());
  for (EvalRecord& r : avg) {
    r.init_mse /= n;
    if (r.runtime_s) *r.runtime_s /= n;
    r.seed = seeds.front();
  }
  return avg;
}

std::vector<EvalRecord> rank_by_mse(std::vector<EvalRecord> records) {
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    if (a.init_mse != b.init_mse) return a.init_mse < b.init_mse;
    if (a.config.resolution.dims != b.config.resolution.dims)
      return a.config.resolution.dims > b.config.resolution.dims;
    return a.config.measurements.dims > b.config.measurements.dims;
  });
  return records;
}

void full_evaluate(const LabeledDataset& ds, std::vector<EvalRecord>& records,
                   const OptimizerConfig& init_opt, const OptimizerConfig& train_opt,
                   std::optional<std::size_t> top_k, std::span<const std::uint64_t> seeds,
                   std::size_t jobs) {
  if (seeds.empty()) throw std::invalid_argument("full_evaluate: seed list is empty");
  if (top_k && *top_k == 0) return;

  // Selection by MSE rank; records themselves stay in caller order.
  std::vector<std::size_t> selected;
  if (!top_k || *top_k >= records.size()) {
    selected.resize(records.size());
    std::iota(selected.begin(), selected.end(), 0);
  } else {
    const std::vector<EvalRecord> ranked = rank_by_mse(records);
    for (std::size_t r = 0; r < *top_k; ++r)
      for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].config == ranked[r].config) {
          selected.push_back(i);
          break;
        }
  }

  std::vector<double> acc_sum(records.size(), 0.0);
  std::vector<double> mse_sum(records.size(), 0.0);
  std::vector<double> time_sum(records.size(), 0.0);

  for (std::uint64_t seed : seeds) {
    OptimizerConfig head_opt = train_opt;
    head_opt.seed = seed;
    const TaskHead head = init_task_head(ds, head_opt);

    parallel_for(selected.size(), jobs, [&](std::size_t si) {
      const std::size_t i = selected[si];
      const ConfigPoint& cfg = records[i].config;
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t run_seed = config_stream(seed, cfg);

      OptimizerConfig io = init_opt;
      io.seed = run_seed;
      OptimizerConfig jo = train_opt;
      jo.seed = run_seed;
      try {
        const ReconInitResult init = init_reconstruction(ds, cfg, io);
        mse_sum[i] += reconstruction_mse(init.cs, init.fs, ds, ds.split.test, cfg.resolution);

        MclModel model;
        model.cs = init.cs;
        model.fs = init.fs;
        model.head = head;
        model.config = cfg;
        const MclModel trained = train_joint(model, ds, jo);
        acc_sum[i] += evaluate(trained, ds, ds.split.test).accuracy;
      } catch (const DivergenceError& e) {
        throw DivergenceError(e.epoch(),
                              std::string(e.what()) + " [config " + cfg.str() + "]");
      }
      time_sum[i] += seconds_since(t0);
    });
  }

  const auto n = static_cast<double>(seeds.size());
  for (std::size_t i : selected) {
    EvalRecord& r = records[i];
    r.accuracy = acc_sum[i] / n;
    r.ce = 1.0 - *r.accuracy;
    r.init_mse = mse_sum[i] / n;
    r.seed = seeds.front();
    r.runtime_s = (r.runtime_s ? *r.runtime_s : 0.0) + time_sum[i] / n;
  }
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson: undefined correlation (zero variance)");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  return pearson(rx, ry);
}

ReportBundle build_report(std::span<const EvalRecord> records) {
  ReportBundle out;
  std::vector<double> mse, ce, rate;
  for (const EvalRecord& r : records) {
    if (!r.ce) continue;
    mse.push_back(r.init_mse);
    ce.push_back(*r.ce);
    rate.push_back(r.compression_rate);
    out.ce_vs_mse.push_back({r.init_mse, *r.ce, r.config});
    out.ce_vs_rate.push_back({r.compression_rate, *r.ce, r.config});
  }
  if (ce.size() < 2)
    throw std::invalid_argument("report: need at least 2 records with both ce and init_mse");
  out.correlation.n = ce.size();
  out.correlation.pearson_ce_mse = pearson(ce, mse);
  out.correlation.pearson_ce_rate = pearson(ce, rate);
  return out;
}

void write_results_csv(const std::filesystem::path& path, std::span<const EvalRecord> records) {
  if (records.empty()) throw std::invalid_argument("results csv: no records");
  const std::size_t K = records.front().config.resolution.order();

  std::string out = "dataset";
  for (std::size_t k = 1; k <= K; ++k) out += ",I" + std::to_string(k);
  for (std::size_t k = 1; k <= K; ++k) out += ",M" + std::to_string(k);
  out += ",compression_rate,init_mse,accuracy,ce,seed,runtime_s\n";

  for (const EvalRecord& r : records) {
    if (r.config.resolution.order() != K)
      throw std::invalid_argument("results csv: records have mixed tensor orders");
    out += r.dataset;
    for (std::size_t d : r.config.resolution.dims) out += ',' + std::to_string(d);
    for (std::size_t d : r.config.measurements.dims) out += ',' + std::to_string(d);
    out += ',';
    append_double(out, r.compression_rate);
    out += ',';
    append_double(out, r.init_mse);
    out += ',';
    if (r.accuracy) append_double(out, *r.accuracy);
    out += ',';
    if (r.ce) append_double(out, *r.ce);
    out += ',' + std::to_string(r.seed) + ',';
    if (r.runtime_s) append_double(out, *r.runtime_s);
    out += '\n';
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << out;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::vector<EvalRecord> read_results_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path.string() + ": empty file");

  const std::vector<std::string> header = split_csv_line(line);
  std::size_t K = 0;
  while (1 + K < header.size() && header[1 + K] == "I" + std::to_string(K + 1)) ++K;
  if (K == 0 || header.size() != 1 + 2 * K + 6)
    throw std::runtime_error(path.string() + ": unrecognized results header");

  std::vector<EvalRecord> records;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": wrong field count");
    EvalRecord r;
    r.dataset = f[0];
    std::vector<std::size_t> rdims(K), mdims(K);
    for (std::size_t k = 0; k < K; ++k)
      rdims[k] = static_cast<std::size_t>(parse_double(f[1 + k], "I dims"));
    for (std::size_t k = 0; k < K; ++k)
      mdims[k] = static_cast<std::size_t>(parse_double(f[1 + K + k], "M dims"));
    r.config.resolution = TensorShape{std::move(rdims)};
    r.config.measurements = TensorShape{std::move(mdims)};
    r.compression_rate = parse_double(f[1 + 2 * K], "compression_rate");
    r.init_mse = parse_double(f[2 + 2 * K], "init_mse");
    if (!f[3 + 2 * K].empty()) r.accuracy = parse_double(f[3 + 2 * K], "accuracy");
    if (!f[4 + 2 * K].empty()) r.ce = parse_double(f[4 + 2 * K], "ce");
    if (!f[5 + 2 * K].empty())
      r.seed = static_cast<std::uint64_t>(parse_double(f[5 + 2 * K], "seed"));
    if (!f[6 + 2 * K].empty()) r.runtime_s = parse_double(f[6 + 2 * K], "runtime_s");
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace mcl
