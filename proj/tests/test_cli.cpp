#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "alma/dataset.hpp"
#include "alma/harness.hpp"

using namespace alma;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string output;
};

const fs::path& scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "alma_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI binary named by ALMA_CLI with stdout and stderr captured.
Run cli(const std::string& args) {
  const char* exe = std::getenv("ALMA_CLI");
  REQUIRE_MESSAGE(exe != nullptr, "ALMA_CLI must point at the alma executable");
  const fs::path log = scratch() / "out.txt";
  const std::string cmd = std::string("'") + exe + "' " + args + " > '" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_file(log)};
}

std::string data_path(const char* name) { return std::string(ALMA_DATA_DIR) + "/" + name; }

}  // namespace

TEST_CASE("help and argument errors") {
  const Run help = cli("--help");
  CHECK(help.status == 0);
  for (const char* sub : {"attack", "penalty-attack", "bisect-budget", "train-ref", "make-data", "alm-demo", "report"}) {
    CHECK(help.output.find(sub) != std::string::npos);
  }
  CHECK(cli("").status != 0);
  CHECK(cli("attack --distance linf --samples 1").status != 0);
  const Run missing = cli("attack --model /nonexistent/model.bin --samples 1");
  CHECK(missing.status == 1);
  CHECK(missing.output.find("error:") != std::string::npos);
}

TEST_CASE("make-data writes a loadable dataset") {
  const fs::path out = scratch() / "d.bin";
  const Run r = cli("make-data --count 20 --seed 3 --out " + out.string());
  CHECK(r.status == 0);
  CHECK(load_dataset(out) == make_desk_dataset(20, 3));
}

TEST_CASE("attack campaign writes reports and the report command reproduces them") {
  const fs::path dir = scratch() / "attack";
  const Run r = cli("attack --model " + data_path("reference_model.bin") + " --data " + data_path("desk_test.bin") +
                    " --samples 3 --iterations 40 --out " + dir.string());
  REQUIRE(r.status == 0);
  CHECK(r.output.find("ASR") != std::string::npos);
  const auto records = records_from_csv(read_file(dir / "samples.csv"));
  REQUIRE(records.size() == 3);
  for (const auto& rec : records) CHECK(rec.forwards == 40);
  CHECK(fs::exists(dir / "report.json"));

  const fs::path curve = scratch() / "curve.dat";
  const Run rep = cli("report " + (dir / "samples.csv").string() + " --curve --out " + curve.string());
  CHECK(rep.status == 0);
  CHECK(rep.output.find("ASR") != std::string::npos);
  CHECK(read_file(curve) == read_file(dir / "curve.dat"));
}

TEST_CASE("config files mirror flags and explicit flags win") {
  const fs::path cfg = scratch() / "run.cfg";
  std::ofstream(cfg) << "# campaign settings\niterations = 15\nsamples=2\ndistance=l1\n";
  const std::string base = "attack --config " + cfg.string() + " --model " + data_path("reference_model.bin") +
                           " --data " + data_path("desk_test.bin");
  const fs::path a = scratch() / "cfg_a", b = scratch() / "cfg_b";
  REQUIRE(cli(base + " --out " + a.string()).status == 0);
  REQUIRE(cli(base + " --iterations 25 --out " + b.string()).status == 0);
  const auto ra = records_from_csv(read_file(a / "samples.csv"));
  const auto rb = records_from_csv(read_file(b / "samples.csv"));
  REQUIRE(ra.size() == 2);
  REQUIRE(rb.size() == 2);
  CHECK(ra[0].forwards == 15);
  CHECK(rb[0].forwards == 25);
  CHECK(read_file(a / "report.json").find("\"l1\"") != std::string::npos);
}

TEST_CASE("baseline subcommands") {
  const std::string common = " --model " + data_path("reference_model.bin") + " --data " + data_path("desk_test.bin") +
                             " --samples 2";
  const Run pen = cli("penalty-attack" + common + " --search-steps 2 --iterations 30");
  CHECK(pen.status == 0);
  CHECK(pen.output.find("60.0 forwards") != std::string::npos);
  const Run bis = cli("bisect-budget" + common + " --pgd-steps 10 --precision 0.05");
  CHECK(bis.status == 0);
  const Run demo = cli("alm-demo --penalty p2");
  CHECK(demo.status == 0);
  CHECK(demo.output.find("active-bound / p2") != std::string::npos);
  CHECK(demo.output.find("solution error") != std::string::npos);
  CHECK(cli("alm-demo --rho-factor 1").status == 1);
}

TEST_CASE("train-ref rejects data it cannot fit") {
  const fs::path tiny = scratch() / "tiny.bin";
  REQUIRE(cli("make-data --count 30 --seed 9 --out " + tiny.string()).status == 0);
  const fs::path model = scratch() / "m.bin";
  const Run r = cli("train-ref --data " + tiny.string() + " --epochs 1 --lr 1e-9 --out " + model.string());
  CHECK(r.status == 1);
  CHECK(r.output.find("training") != std::string::npos);
  CHECK_FALSE(fs::exists(model));
}
