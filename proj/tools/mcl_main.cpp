// Command-line front end for the multilinear compressive learning
// pipeline: synthetic data generation, surrogate scans, single-config
// training, ranked search, and correlation reports.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mcl/data.hpp"
#include "mcl/model.hpp"
#include "mcl/optim.hpp"
#include "mcl/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommandOutcome {
  int exit_code = 0;
  std::vector<fs::path> artifacts;
  std::string summary;
};

/// Malformed run configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& why)
      : std::runtime_error("config field `" + field + "`: " + why) {}
};

struct RunConfig {
  std::optional<fs::path> dataset;
  std::optional<mcl::SyntheticSpec> synthetic;
  std::optional<mcl::ConfigGrid> grid;
  std::optional<mcl::ConfigPoint> point;
  mcl::OptimizerConfig init_opt;
  mcl::OptimizerConfig train_opt;
  std::vector<std::uint64_t> seeds{1};
  std::optional<std::size_t> top_k;
};

mcl::OptimizerConfig default_init_opt() {
  mcl::OptimizerConfig o;
  o.epochs = 35;
  o.lr_stages = {{1, 1e-3}, {6, 1e-4}, {26, 1e-5}};
  o.weight_decay = 5e-5;
  return o;
}

mcl::OptimizerConfig default_train_opt() {
  mcl::OptimizerConfig o;
  o.epochs = 120;
  o.lr_stages = {{1, 1e-3}, {21, 1e-4}, {101, 1e-5}};
  o.weight_decay = 1e-4;
  return o;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// --- json parsing -------------------------------------------------------

std::vector<std::size_t> parse_dims(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a nonempty array of extents");
  std::vector<std::size_t> dims;
  for (const auto& v : j) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
      throw ConfigError(field, "extents must be positive integers");
    dims.push_back(v.get<std::size_t>());
  }
  return dims;
}

mcl::TensorShape parse_shape(const json& j, const std::string& field) {
  return mcl::TensorShape{parse_dims(j, field)};
}

mcl::OptimizerConfig parse_opt(const json& j, const std::string& field,
                               mcl::OptimizerConfig o) {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
  for (const auto& [key, val] : j.items()) {
    if (key == "epochs")
      o.epochs = val.get<std::size_t>();
    else if (key == "lr_stages") {
      o.lr_stages.clear();
      for (const auto& s : val) {
        if (!s.is_array() || s.size() != 2)
          throw ConfigError(field + ".lr_stages", "each stage is [start_epoch, rate]");
        o.lr_stages.push_back({s[0].get<std::size_t>(), s[1].get<double>()});
      }
    } else if (key == "weight_decay")
      o.weight_decay = val.get<double>();
    else if (key == "beta1")
      o.beta1 = val.get<double>();
    else if (key == "beta2")
      o.beta2 = val.get<double>();
    else if (key == "epsilon")
      o.epsilon = val.get<double>();
    else if (key == "batch_size")
      o.batch_size = val.get<std::size_t>();
    else if (key == "seed")
      o.seed = val.get<std::uint64_t>();
    else
      throw ConfigError(field + "." + key, "unknown key");
  }
  try {
    o.validate();
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
  return o;
}

mcl::SyntheticSpec parse_synthetic(const json& j) {
  if (!j.is_object()) throw ConfigError("synthetic", "expected an object");
  mcl::SyntheticSpec s;
  bool have_shape = false, have_rank = false;
  for (const auto& [key, val] : j.items()) {
    if (key == "classes")
      s.class_count = val.get<std::size_t>();
    else if (key == "samples_per_class")
      s.samples_per_class = val.get<std::size_t>();
    else if (key == "shape") {
      s.shape = parse_shape(val, "synthetic.shape");
      have_shape = true;
    } else if (key == "rank") {
      s.rank = parse_dims(val, "synthetic.rank");
      have_rank = true;
    } else if (key == "noise_std")
      s.noise_std = val.get<double>();
    else if (key == "seed")
      s.seed = val.get<std::uint64_t>();
    else
      throw ConfigError("synthetic." + key, "unknown key");
  }
  if (!have_shape) throw ConfigError("synthetic.shape", "required");
  if (!have_rank) throw ConfigError("synthetic.rank", "required");
  return s;
}

std::vector<mcl::TensorShape> expand_range(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("min") || !j.contains("max"))
    throw ConfigError(field, "expected {min, max, step} arrays");
  const auto lo = parse_dims(j.at("min"), field + ".min");
  const auto hi = parse_dims(j.at("max"), field + ".max");
  std::vector<std::size_t> step(lo.size(), 0);
  if (j.contains("step")) {
    step.clear();
    for (const auto& v : j.at("step")) step.push_back(v.get<std::size_t>());
  }
  if (hi.size() != lo.size() || step.size() != lo.size())
    throw ConfigError(field, "min/max/step lengths differ");

  std::vector<mcl::TensorShape> out;
  std::vector<std::size_t> cur = lo;
  while (true) {
    for (std::size_t k = 0; k < cur.size(); ++k)
      if (cur[k] > hi[k]) return out;
    out.push_back(mcl::TensorShape{cur});
    bool moves = false;
    for (std::size_t k = 0; k < cur.size(); ++k) {
      cur[k] += step[k];
      if (step[k] > 0) moves = true;
    }
    if (!moves) return out;
  }
}

mcl::ConfigGrid parse_grid(const json& j) {
  if (!j.is_object()) throw ConfigError("grid", "expected an object");
  mcl::ConfigGrid g;
  for (const auto& [key, val] : j.items()) {
    if (key == "resolutions")
      for (const auto& s : val) g.resolutions.push_back(parse_shape(s, "grid.resolutions"));
    else if (key == "measurements")
      for (const auto& s : val) g.measurements.push_back(parse_shape(s, "grid.measurements"));
    else if (key == "resolution_range")
      g.resolutions = expand_range(val, "grid.resolution_range");
    else if (key == "measurement_range")
      g.measurements = expand_range(val, "grid.measurement_range");
    else
      throw ConfigError("grid." + key, "unknown key");
  }
  try {
    g.validate();
  } catch (const std::exception& e) {
    throw ConfigError("grid", e.what());
  }
  return g;
}

RunConfig parse_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("<root>", std::string("invalid json: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<root>", "expected a json object");

  RunConfig cfg;
  cfg.init_opt = default_init_opt();
  cfg.train_opt = default_train_opt();
  for (const auto& [key, val] : j.items()) {
    if (key == "dataset")
      cfg.dataset = fs::path(val.get<std::string>());
    else if (key == "synthetic")
      cfg.synthetic = parse_synthetic(val);
    else if (key == "grid")
      cfg.grid = parse_grid(val);
    else if (key == "point") {
      if (!val.is_object() || !val.contains("I") || !val.contains("M"))
        throw ConfigError("point", "expected {I, M} arrays");
      cfg.point = mcl::ConfigPoint{parse_shape(val.at("I"), "point.I"),
                                   parse_shape(val.at("M"), "point.M")};
    } else if (key == "init_opt")
      cfg.init_opt = parse_opt(val, "init_opt", default_init_opt());
    else if (key == "train_opt")
      cfg.train_opt = parse_opt(val, "train_opt", default_train_opt());
    else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& s : val) cfg.seeds.push_back(s.get<std::uint64_t>());
      if (cfg.seeds.empty()) throw ConfigError("seeds", "must be nonempty");
    } else if (key == "top_k")
      cfg.top_k = val.get<std::size_t>();
    else
      throw ConfigError(key, "unknown key");
  }
  if (cfg.dataset.has_value() == cfg.synthetic.has_value())
    throw ConfigError("dataset", "exactly one data source (dataset or synthetic) is required");
  return cfg;
}

// --- shared command plumbing ---------------------------------------------

mcl::LabeledDataset resolve_dataset(const RunConfig& cfg) {
  if (cfg.synthetic) return mcl::make_synthetic(*cfg.synthetic);
  mcl::LabeledDataset ds = mcl::load_dataset(*cfg.dataset);
  ds.split = mcl::stratified_split(ds, {0.6, 0.2, 0.2}, cfg.seeds.front());
  return ds;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  return buf;
}

// Wall-clock timings and the timestamp live in the sidecar so the
// results CSV stays byte-identical across reruns.
void write_sidecar(const fs::path& out_dir, const std::string& command,
                   const RunConfig& cfg, std::span<const mcl::EvalRecord> records) {
  nlohmann::ordered_json meta;
  meta["command"] = command;
  meta["timestamp_utc"] = timestamp_utc();
  meta["seeds"] = cfg.seeds;
  nlohmann::ordered_json timings = nlohmann::ordered_json::object();
  for (const auto& r : records)
    if (r.runtime_s) timings[r.config.str()] = *r.runtime_s;
  meta["runtime_s"] = timings;
  std::ofstream os(out_dir / "run_meta.json");
  os << meta.dump(2) << '\n';
}

void strip_runtimes(std::vector<mcl::EvalRecord>& records) {
  for (auto& r : records) r.runtime_s.reset();
}

void log_records(std::span<const mcl::EvalRecord> records) {
  for (const auto& r : records) {
    std::cerr << "config " << r.config.str() << " init_mse=" << r.init_mse;
    if (r.accuracy) std::cerr << " accuracy=" << *r.accuracy;
    std::cerr << '\n';
  }
}

fs::path fixture_path(const std::string& name, const std::string& fixtures_dir) {
  if (name != "pubfig83" && name != "caltech101")
    throw std::runtime_error("unknown fixture `" + name + "` (try pubfig83 or caltech101)");
  fs::path dir = fixtures_dir;
  if (fixtures_dir.empty()) {
    if (const char* env = std::getenv("MCL_FIXTURES_DIR"))
      dir = env;
    else
      dir = "fixtures";
  }
  return dir / (name + ".csv");
}

std::vector<mcl::EvalRecord> resolve_records(const std::string& results,
                                             const std::string& fixture,
                                             const std::string& fixtures_dir) {
  if (results.empty() == fixture.empty())
    throw std::runtime_error("exactly one of --results or --fixture is required");
  if (!results.empty()) return mcl::read_results_csv(results);
  return mcl::read_results_csv(fixture_path(fixture, fixtures_dir));
}

void write_series_csv(const fs::path& path, std::span<const mcl::PlotPoint> points) {
  std::string out = "x,y,I,M\n";
  for (const auto& p : points) {
    out += format_double(p.x);
    out += ',';
    out += format_double(p.y);
    out += ',' + p.config.resolution.str() + ',' + p.config.measurements.str() + '\n';
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << out;
}

// --- commands --------------------------------------------------------------

CommandOutcome cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
  if (!cfg.synthetic) throw ConfigError("synthetic", "required by the synth command");
  const mcl::LabeledDataset ds = mcl::make_synthetic(*cfg.synthetic);
  const fs::path dir = out_dir / "dataset";
  mcl::save_dataset(dir, ds);
  CommandOutcome oc;
  oc.artifacts.push_back(dir / "manifest.csv");
  oc.summary = "synth: " + std::to_string(ds.size()) + " samples of shape " +
               ds.sample_shape().str() + ", " + std::to_string(ds.class_count) +
               " classes -> " + dir.string();
  return oc;
}

CommandOutcome cmd_scan(const RunConfig& cfg, const fs::path& out_dir, std::size_t jobs,
                        bool timings, bool per_seed) {
  if (!cfg.grid) throw ConfigError("grid", "required by the scan command");
  const mcl::LabeledDataset ds = resolve_dataset(cfg);
  std::vector<mcl::EvalRecord> records =
      mcl::surrogate_scan_avg(ds, *cfg.grid, cfg.init_opt, cfg.seeds, jobs);
  log_records(records);

  CommandOutcome oc;
  fs::create_directories(out_dir);
  if (per_seed) {
    std::vector<mcl::EvalRecord> rows;
    for (std::uint64_t seed : cfg.seeds) {
      mcl::OptimizerConfig o = cfg.init_opt;
      o.seed = seed;
      std::vector<mcl::EvalRecord> one = mcl::surrogate_scan(ds, *cfg.grid, o, jobs);
      strip_runtimes(one);
      rows.insert(rows.end(), one.begin(), one.end());
    }
    mcl::write_results_csv(out_dir / "results_per_seed.csv", rows);
    oc.artifacts.push_back(out_dir / "results_per_seed.csv");
  }
  write_sidecar(out_dir, "scan", cfg, records);
  if (!timings) strip_runtimes(records);
  mcl::write_results_csv(out_dir / "results.csv", records);
  oc.artifacts.insert(oc.artifacts.begin(), out_dir / "results.csv");
  oc.summary = "scan: " + std::to_string(records.size()) + " configs -> " +
               (out_dir / "results.csv").string();
  return oc;
}

CommandOutcome cmd_train(const RunConfig& cfg, const fs::path& out_dir) {
  if (!cfg.point) throw ConfigError("point", "required by the train command");
  const mcl::LabeledDataset ds = resolve_dataset(cfg);

  mcl::OptimizerConfig io = cfg.init_opt;
  io.seed = cfg.seeds.front();
  mcl::OptimizerConfig to = cfg.train_opt;
  to.seed = cfg.seeds.front();

  const mcl::ReconInitResult init = mcl::init_reconstruction(ds, *cfg.point, io);
  for (std::size_t e = 0; e < init.epoch_mse.size(); ++e)
    std::cerr << "init epoch=" << (e + 1) << " mse=" << init.epoch_mse[e] << '\n';
  const double init_mse =
      mcl::reconstruction_mse(init.cs, init.fs, ds, ds.split.test, cfg.point->resolution);
  std::cerr << "init test mse=" << init_mse << '\n';

  mcl::MclModel model;
  model.cs = init.cs;
  model.fs = init.fs;
  model.head = mcl::init_task_head(ds, to);
  model.config = *cfg.point;
  const mcl::MclModel trained = mcl::train_joint(model, ds, to);
  const mcl::EvalResult ev = mcl::evaluate(trained, ds, ds.split.test);

  fs::create_directories(out_dir);
  const fs::path model_path = out_dir / "model.mclm";
  mcl::save_model(model_path, trained);

  mcl::EvalRecord rec;
  rec.dataset = ds.name;
  rec.config = *cfg.point;
  rec.compression_rate = mcl::compression_rate(*cfg.point);
  rec.init_mse = init_mse;
  rec.accuracy = ev.accuracy;
  rec.ce = ev.ce;
  rec.seed = cfg.seeds.front();
  std::vector<mcl::EvalRecord> records{rec};
  mcl::write_results_csv(out_dir / "results.csv", records);
  write_sidecar(out_dir, "train", cfg, records);

  CommandOutcome oc;
  oc.artifacts = {model_path, out_dir / "results.csv"};
  char pct[32];
  std::snprintf(pct, sizeof(pct), "%.2f", 100.0 * ev.ce);
  oc.summary = "train " + cfg.point->str() + ": accuracy=" + format_double(ev.accuracy) +
               " ce%=" + pct + " test_mse=" + format_double(ev.mse);
  return oc;
}

CommandOutcome cmd_search(const RunConfig& cfg, const fs::path& out_dir, std::size_t jobs,
                          std::optional<std::size_t> top_k_flag, bool timings, bool per_seed) {
  if (!cfg.grid) throw ConfigError("grid", "required by the search command");
  const mcl::LabeledDataset ds = resolve_dataset(cfg);
  const std::optional<std::size_t> top_k = top_k_flag ? top_k_flag : cfg.top_k;

  std::vector<mcl::EvalRecord> records =
      mcl::surrogate_scan_avg(ds, *cfg.grid, cfg.init_opt, cfg.seeds, jobs);
  std::cerr << "scan done (" << records.size() << " configs), evaluating top_k="
            << (top_k ? std::to_string(*top_k) : std::string("all")) << '\n';
  mcl::full_evaluate(ds, records, cfg.init_opt, cfg.train_opt, top_k, cfg.seeds, jobs);
  log_records(records);

  fs::create_directories(out_dir);
  CommandOutcome oc;
  if (per_seed) {
    // Unaveraged rows: one scan per seed (full per-seed evaluation is the
    // averaged path's job).
    std::vector<mcl::EvalRecord> rows;
    for (std::uint64_t seed : cfg.seeds) {
      mcl::OptimizerConfig o = cfg.init_opt;
      o.seed = seed;
      std::vector<mcl::EvalRecord> one = mcl::surrogate_scan(ds, *cfg.grid, o, jobs);
      strip_runtimes(one);
      rows.insert(rows.end(), one.begin(), one.end());
    }
    mcl::write_results_csv(out_dir / "results_per_seed.csv", rows);
    oc.artifacts.push_back(out_dir / "results_per_seed.csv");
  }
  write_sidecar(out_dir, "search", cfg, records);
  if (!timings) strip_runtimes(records);
  mcl::write_results_csv(out_dir / "results.csv", records);
  oc.artifacts.insert(oc.artifacts.begin(), out_dir / "results.csv");

  const mcl::EvalRecord* best = nullptr;
  for (const auto& r : records)
    if (r.accuracy && (!best || *r.accuracy > *best->accuracy)) best = &r;
  oc.summary = "search: " + std::to_string(records.size()) + " configs";
  if (best)
    oc.summary += ", best " + best->config.str() + " accuracy=" + format_double(*best->accuracy);
  return oc;
}

CommandOutcome cmd_correlate(const std::string& results, const std::string& fixture,
                             const std::string& fixtures_dir, const std::string& out_str) {
  const std::vector<mcl::EvalRecord> records =
      resolve_records(results, fixture, fixtures_dir);
  const mcl::ReportBundle rb = mcl::build_report(records);

  char line[256];
  std::snprintf(line, sizeof(line), "n = %zu\npearson_ce_mse = %.4f\npearson_ce_rate = %.4f",
                rb.correlation.n, rb.correlation.pearson_ce_mse,
                rb.correlation.pearson_ce_rate);
  std::cout << line << '\n';

  CommandOutcome oc;
  if (!out_str.empty()) {
    const fs::path out_dir = out_str;
    fs::create_directories(out_dir);
    nlohmann::ordered_json j;
    j["n"] = rb.correlation.n;
    j["pearson_ce_mse"] = rb.correlation.pearson_ce_mse;
    j["pearson_ce_rate"] = rb.correlation.pearson_ce_rate;
    std::ofstream os(out_dir / "correlation.json");
    os << j.dump(2) << '\n';
    oc.artifacts.push_back(out_dir / "correlation.json");
  }
  oc.summary = "correlate: n=" + std::to_string(rb.correlation.n);
  return oc;
}

CommandOutcome cmd_report(const std::string& results, const std::string& fixture,
                          const std::string& fixtures_dir, const fs::path& out_dir) {
  const std::vector<mcl::EvalRecord> records =
      resolve_records(results, fixture, fixtures_dir);
  const mcl::ReportBundle rb = mcl::build_report(records);
  fs::create_directories(out_dir);
  write_series_csv(out_dir / "ce_vs_mse.csv", rb.ce_vs_mse);
  write_series_csv(out_dir / "ce_vs_rate.csv", rb.ce_vs_rate);
  CommandOutcome oc;
  oc.artifacts = {out_dir / "ce_vs_mse.csv", out_dir / "ce_vs_rate.csv"};
  oc.summary = "report: " + std::to_string(rb.correlation.n) + " points -> " + out_dir.string();
  return oc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilinear compressive learning: surrogate-based sensor configuration search"};
  app.require_subcommand(1);

  std::string config_path, out_str = "out", results, fixture, fixtures_dir;
  std::size_t jobs = 1;
  std::optional<std::size_t> top_k_flag;
  std::vector<std::uint64_t> seeds_flag;
  bool timings = false, per_seed = false;

  auto add_config = [&](CLI::App* cmd, bool required) {
    cmd->add_option("--config", config_path, "run config (json)")->required(required);
    cmd->add_option("--out", out_str, "output directory");
    cmd->add_option("--seeds", seeds_flag, "seed list override")->delimiter(',');
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_config(synth, true);

  CLI::App* scan = app.add_subcommand("scan", "surrogate MSE scan over the config grid");
  add_config(scan, true);
  scan->add_option("--jobs", jobs, "worker threads");
  scan->add_flag("--timings", timings, "include wall times in the results csv");
  scan->add_flag("--per-seed", per_seed, "also write unaveraged per-seed rows");

  CLI::App* train = app.add_subcommand("train", "full pipeline for one config point");
  add_config(train, true);

  CLI::App* search = app.add_subcommand("search", "scan, rank, and evaluate the top configs");
  add_config(search, true);
  search->add_option("--jobs", jobs, "worker threads");
  search->add_option("--top-k", top_k_flag, "evaluate only the top k configs by surrogate MSE");
  search->add_flag("--timings", timings, "include wall times in the results csv");
  search->add_flag("--per-seed", per_seed, "also write unaveraged per-seed rows");

  CLI::App* correlate = app.add_subcommand("correlate", "correlation report from a results csv");
  correlate->add_option("--results", results, "results csv path");
  correlate->add_option("--fixture", fixture, "bundled reference table (pubfig83|caltech101)");
  correlate->add_option("--fixtures-dir", fixtures_dir, "fixture directory override");
  correlate->add_option("--out", out_str, "write correlation.json here");

  CLI::App* report = app.add_subcommand("report", "emit ce-vs-mse and ce-vs-rate plot series");
  report->add_option("--results", results, "results csv path");
  report->add_option("--fixture", fixture, "bundled reference table (pubfig83|caltech101)");
  report->add_option("--fixtures-dir", fixtures_dir, "fixture directory override");
  report->add_option("--out", out_str, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << '\n';
    return 2;
  }

  try {
    CommandOutcome oc;
    const fs::path out_dir = out_str;
    if (synth->parsed() || scan->parsed() || train->parsed() || search->parsed()) {
      RunConfig cfg = parse_run_config(config_path);
      if (!seeds_flag.empty()) cfg.seeds = seeds_flag;
      if (synth->parsed()) oc = cmd_synth(cfg, out_dir);
      if (scan->parsed()) oc = cmd_scan(cfg, out_dir, jobs, timings, per_seed);
      if (train->parsed()) oc = cmd_train(cfg, out_dir);
      if (search->parsed()) oc = cmd_search(cfg, out_dir, jobs, top_k_flag, timings, per_seed);
    } else if (correlate->parsed()) {
      oc = cmd_correlate(results, fixture, fixtures_dir,
                         correlate->count("--out") ? out_str : "");
    } else if (report->parsed()) {
      oc = cmd_report(results, fixture, fixtures_dir, out_dir);
    }
    for (const auto& p : oc.artifacts) std::cout << "wrote: " << p.string() << '\n';
    std::cout << oc.summary << '\n';
    return oc.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
