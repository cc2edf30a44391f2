#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "dpsco_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(DPSCO_CLI_PATH) + " " + args + " >" + (kDir / "stdout.txt").string() + " 2>" +
                          (kDir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write(const std::string& name, const std::string& text) {
  fs::create_directories(kDir);
  const fs::path p = kDir / name;
  std::ofstream(p) << text;
  return p;
}

const char* kTinySweep =
    R"({"dims": [10, 12], "metrics": ["linear"], "seeds": [0, 1], "n_train": 50, "n_test": 50, "steps": 200})";
const char* kTinyRetrain =
    R"({"dims": [20], "metrics": ["linear"], "seeds": [0], "n_train": 50, "n_test": 50, "steps": 200,
        "trace_multiplier": 2, "trace_rows": 40})";

}  // namespace

TEST_CASE("sweep writes the CSV and is byte-stable across invocations") {
  const auto cfg = write("sweep.json", kTinySweep);
  REQUIRE(run("sweep --config " + cfg.string() + " --out " + (kDir / "a.csv").string() + " --workers 1") == 0);
  REQUIRE(run("sweep --config " + cfg.string() + " --out " + (kDir / "b.csv").string() + " --workers 3") == 0);
  const std::string a = slurp(kDir / "a.csv");
  CHECK(a == slurp(kDir / "b.csv"));
  CHECK(a.rfind("metric,d,seed,T,", 0) == 0);
  REQUIRE(run("sweep --config " + cfg.string()) == 0);
  CHECK(slurp(kDir / "stdout.txt") == a);
}

TEST_CASE("errors exit nonzero with a message") {
  const auto bad = write("bad.json", R"({"stepz": 3})");
  CHECK(run("sweep --config " + bad.string()) == 1);
  CHECK(slurp(kDir / "stderr.txt").find("stepz") != std::string::npos);
  CHECK(run("sweep --config /nonexistent.json") != 0);
  CHECK(run("") != 0);
  CHECK(run("bound --k 5 --auto-k") != 0);
}

TEST_CASE("retrain, trace and spectral subcommands") {
  const auto cfg = write("retrain.json", kTinyRetrain);
  REQUIRE(run("retrain --config " + cfg.string() + " --k 1,3") == 0);
  const std::string csv = slurp(kDir / "stdout.txt");
  CHECK(csv.rfind("metric,d,seed,k,emp_loss,pop_loss,rel_change\nlinear,20,0,full,", 0) == 0);

  const auto trace = kDir / "t.gtrc";
  REQUIRE(run("trace --config " + cfg.string() + " --out " + trace.string()) == 0);
  CHECK(fs::file_size(trace) == 16 + 40 * 20 * 8);

  const auto summary = kDir / "summary.json";
  REQUIRE(run("spectral --trace " + trace.string() + " --k 8 --summary " + summary.string() + " --robustness") == 0);
  const std::string values = slurp(kDir / "stdout.txt");
  CHECK(values.rfind("rank,singular_value\n1,", 0) == 0);
  const auto j = nlohmann::json::parse(slurp(summary));
  CHECK(j.at("k") == 8);
  CHECK(j.at("iters") == 10);
  CHECK(j.at("robustness").at("slopes").size() == 3);

  REQUIRE(run("trace --config " + cfg.string() + " --csv --out " + (kDir / "t.csv").string()) == 0);
  REQUIRE(run("spectral --trace " + (kDir / "t.csv").string() + " --k 8 --fit-lo 2 --fit-hi 6") == 0);
  const auto fit = nlohmann::json::parse(slurp(kDir / "stderr.txt"));
  CHECK(fit.at("fit_lo") == 2);
  CHECK(fit.at("fit_hi") == 6);
}

TEST_CASE("bound prints theorem parameters") {
  REQUIRE(run("bound --metric linear --d 64 --n 1000 --k 4") == 0);
  const std::string out = slurp(kDir / "stdout.txt");
  CHECK(out.find("up to constants") != std::string::npos);
  CHECK(out.find("decay-rate bound") != std::string::npos);
  REQUIRE(run("bound --metric const --d 16 --n 1000") == 0);
  REQUIRE(run("bound --auto-k --c 1.5 --d 500 --n 2000") == 0);
  const auto metric = write("metric.csv", "a\n1\n0.5\n0.25\n");
  REQUIRE(run("bound --metric-csv " + metric.string() + " --n 100 --k 2") == 0);
  CHECK(slurp(kDir / "stdout.txt").find("metric=custom d=3") != std::string::npos);
}
