#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mcl/data.hpp"
#include "mcl/search.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = MCL_CLI_PATH;
const std::string kFixtures = MCL_FIXTURES_DIR;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mcl_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      kCli + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

void write_small_config(const fs::path& path, const std::string& extra = "") {
  std::ofstream os(path);
  os << R"({
  "synthetic": {"classes": 3, "samples_per_class": 10, "shape": [8,8,2],
                "rank": [3,3,1], "noise_std": 0.05, "seed": 5},
  "grid": {"resolutions": [[8,8,2],[4,4,2]], "measurements": [[3,3,1],[2,2,1]]},
  "init_opt": {"epochs": 3, "lr_stages": [[1, 1e-3]], "weight_decay": 5e-5},
  "train_opt": {"epochs": 3, "lr_stages": [[1, 1e-3]], "weight_decay": 1e-4},
  "seeds": [1])" << extra
     << "\n}\n";
}

}  // namespace

TEST_CASE("cli: correlate on the bundled reference table") {
  const fs::path dir = fresh_dir("correlate");
  const RunResult r =
      run_cli("correlate --fixture pubfig83 --fixtures-dir " + kFixtures, dir);
  CHECK(r.exit_code == 0);
  const auto pos = r.out.find("pearson_ce_mse = ");
  REQUIRE(pos != std::string::npos);
  const double v = std::stod(r.out.substr(pos + 17));
  CHECK(std::abs(v - 0.65) < 0.05);
  CHECK(r.out.find("pearson_ce_rate = ") != std::string::npos);
}

TEST_CASE("cli: scan writes one results row per grid point") {
  const fs::path dir = fresh_dir("scan");
  write_small_config(dir / "cfg.json");
  const RunResult r = run_cli("scan --config " + (dir / "cfg.json").string() + " --out " +
                                  (dir / "o").string(),
                              dir);
  CHECK(r.exit_code == 0);
  const std::vector<mcl::EvalRecord> records =
      mcl::read_results_csv(dir / "o" / "results.csv");
  CHECK(records.size() == 4);
  for (const auto& rec : records) CHECK_FALSE(rec.accuracy.has_value());
  CHECK(fs::exists(dir / "o" / "run_meta.json"));
}

TEST_CASE("cli: unknown command exits nonzero with usage text") {
  const fs::path dir = fresh_dir("unknown");
  const RunResult r = run_cli("frobnicate", dir);
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("Usage") != std::string::npos);
}

TEST_CASE("cli: malformed config names the offending field") {
  const fs::path dir = fresh_dir("badcfg");
  std::ofstream(dir / "bad.json") << R"({"grid": {"resolutions": [[4,4]], "measurements": [[2,2]]}})";
  const RunResult r = run_cli("scan --config " + (dir / "bad.json").string() + " --out " +
                                  (dir / "o").string(),
                              dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("dataset") != std::string::npos);
}

TEST_CASE("cli: synth output loads back and feeds a dataset-path scan") {
  const fs::path dir = fresh_dir("synth");
  write_small_config(dir / "cfg.json");
  const RunResult r = run_cli("synth --config " + (dir / "cfg.json").string() + " --out " +
                                  (dir / "o").string(),
                              dir);
  CHECK(r.exit_code == 0);
  const mcl::LabeledDataset ds = mcl::load_dataset(dir / "o" / "dataset");
  CHECK(ds.size() == 30);
  CHECK(ds.class_count == 3);

  std::ofstream(dir / "scan.json") << R"({
    "dataset": ")" << (dir / "o" / "dataset").string() << R"(",
    "grid": {"resolutions": [[8,8,2]], "measurements": [[2,2,1]]},
    "init_opt": {"epochs": 2, "lr_stages": [[1, 1e-3]]},
    "seeds": [1]
  })";
  const RunResult r2 = run_cli("scan --config " + (dir / "scan.json").string() + " --out " +
                                   (dir / "o2").string(),
                               dir);
  CHECK(r2.exit_code == 0);
  CHECK(mcl::read_results_csv(dir / "o2" / "results.csv").size() == 1);
}

TEST_CASE("cli: train runs the full pipeline for one config point") {
  const fs::path dir = fresh_dir("train");
  write_small_config(dir / "cfg.json", R"(,
  "point": {"I": [4,4,2], "M": [2,2,1]})");
  const RunResult r = run_cli("train --config " + (dir / "cfg.json").string() + " --out " +
                                  (dir / "o").string(),
                              dir);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "o" / "model.mclm"));
  const std::vector<mcl::EvalRecord> records =
      mcl::read_results_csv(dir / "o" / "results.csv");
  REQUIRE(records.size() == 1);
  CHECK(records[0].accuracy.has_value());
  CHECK(r.out.find("accuracy=") != std::string::npos);
}

TEST_CASE("cli: search fills top-k records and report emits the two plot series") {
  const fs::path dir = fresh_dir("search");
  write_small_config(dir / "cfg.json");
  const RunResult r = run_cli("search --config " + (dir / "cfg.json").string() +
                                  " --top-k 2 --out " + (dir / "o").string(),
                              dir);
  CHECK(r.exit_code == 0);
  const std::vector<mcl::EvalRecord> records =
      mcl::read_results_csv(dir / "o" / "results.csv");
  REQUIRE(records.size() == 4);
  std::size_t filled = 0;
  for (const auto& rec : records)
    if (rec.accuracy) ++filled;
  CHECK(filled == 2);

  // report needs ce variance across rows; the bundled table provides it
  const RunResult r2 = run_cli("report --fixture caltech101 --fixtures-dir " + kFixtures +
                                   " --out " + (dir / "rep").string(),
                               dir);
  CHECK(r2.exit_code == 0);
  const std::string mse_series = slurp(dir / "rep" / "ce_vs_mse.csv");
  CHECK(mse_series.rfind("x,y,I,M\n", 0) == 0);
  CHECK(std::count(mse_series.begin(), mse_series.end(), '\n') == 31);
  CHECK(fs::exists(dir / "rep" / "ce_vs_rate.csv"));
}
