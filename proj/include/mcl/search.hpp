#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcl/data.hpp"
#include "mcl/model.hpp"
#include "mcl/optim.hpp"

namespace mcl {

/// Feasible sensor configurations: candidate resolutions I and candidate
/// measurement dims M. Every M must fit within the maximum resolution.
struct ConfigGrid {
  std::vector<TensorShape> resolutions;
  std::vector<TensorShape> measurements;

  /// Elementwise upper bound of the candidate resolutions (the fixed
  /// synthesis output dims).
  TensorShape max_resolution() const;
  void validate() const;
};

/// Cartesian product of I choices x M choices in deterministic
/// lexicographic order: descending I, then descending M.
std::vector<ConfigPoint> enumerate_grid(const ConfigGrid& g);

/// (prod I_k) / (prod M_k)
double compression_rate(const ConfigPoint& c);

/// One configuration's outcome. accuracy/ce stay empty until full
/// evaluation; init_mse is the reconstruction-initialization MSE on the
/// test split (the surrogate).
struct EvalRecord {
  std::string dataset;
  ConfigPoint config;
  double compression_rate = 0.0;
  double init_mse = 0.0;
  std::optional<double> accuracy;  // fraction
  std::optional<double> ce;        // 1 - accuracy
  std::uint64_t seed = 0;
  std::optional<double> runtime_s;
};

/// Runs reconstruction initialization for every grid point and records
/// the test-split MSE and compression rate, in grid order. Per-config
/// seeds are derived from init_opt.seed and the config dims, so results
/// do not depend on the worker count.
std::vector<EvalRecord> surrogate_scan(const LabeledDataset& ds, const ConfigGrid& g,
                                       const OptimizerConfig& init_opt, std::size_t jobs = 1);

/// surrogate_scan repeated for each seed, init_mse averaged per config.
std::vector<EvalRecord> surrogate_scan_avg(const LabeledDataset& ds, const ConfigGrid& g,
                                           const OptimizerConfig& init_opt,
                                           std::span<const std::uint64_t> seeds,
                                           std::size_t jobs = 1);

/// Ascending init_mse; ties broken by (I, M) descending.
std::vector<EvalRecord> rank_by_mse(std::vector<EvalRecord> records);

/// Trains and evaluates the selected records in place: the task head is
/// initialized once per dataset per seed and reused across configs; each
/// selected record gets init -> joint training -> test evaluation,
/// averaged over the seeds. With top_k set, only the top_k records by
/// MSE rank are evaluated; top_k = 0 leaves all records untouched.
void full_evaluate(const LabeledDataset& ds, std::vector<EvalRecord>& records,
                   const OptimizerConfig& init_opt, const OptimizerConfig& train_opt,
                   std::optional<std::size_t> top_k, std::span<const std::uint64_t> seeds,
                   std::size_t jobs = 1);

/// Sample Pearson correlation. Throws on length < 2 or zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Rank correlation with average ranks for ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct CorrelationReport {
  double pearson_ce_mse = 0.0;
  double pearson_ce_rate = 0.0;
  std::size_t n = 0;
};

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  ConfigPoint config;
};

struct ReportBundle {
  CorrelationReport correlation;
  std::vector<PlotPoint> ce_vs_mse;   // (init_mse, ce) in record order
  std::vector<PlotPoint> ce_vs_rate;  // (compression_rate, ce) in record order
};

/// Correlation report plus the two plot series, over the records that
/// carry both ce and init_mse (at least 2 required).
ReportBundle build_report(std::span<const EvalRecord> records);

// Results CSV, fixed column order:
// dataset,I1,...,IK,M1,...,MK,compression_rate,init_mse,accuracy,ce,seed,runtime_s
// accuracy/ce/runtime_s are empty when absent.
void write_results_csv(const std::filesystem::path& path, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_results_csv(const std::filesystem::path& path);

}  // namespace mcl
