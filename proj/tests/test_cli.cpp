#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

#include "calib/data_io.hpp"
#include "calib/metrics.hpp"
#include "calib/report.hpp"
#include "calib/rng.hpp"

#include "oracles.hpp"
#include "subprocess.hpp"

using json = nlohmann::json;
using testing::run_command;
using calib::Rng;
namespace fs = std::filesystem;

namespace {

const std::string kCli = CALIB_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("calib_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// The 4-sample hand case as logit files (logit 0 vs ln(odds) trick: for a
// two-class row with confidence c on class 0, logits (ln c, ln(1-c))
// softmax back to (c, 1-c)).
void write_hand_case(const TempDir& dir) {
  std::ostringstream z;
  z << "l0,l1\n";
  for (const double c : {0.95, 0.95, 0.65, 0.55})
    z << calib::format_double(std::log(c)) << "," << calib::format_double(std::log(1.0 - c))
      << "\n";
  write_file(dir.file("z.csv"), z.str());
  write_file(dir.file("y.csv"), "label\n0\n1\n0\n0\n");
}

}  // namespace

TEST_CASE("eval reports zero error for perfect one-hot logits") {
  TempDir dir;
  write_file(dir.file("z.csv"), "l0,l1\n100,0\n0,100\n100,0\n");
  write_file(dir.file("y.csv"), "label\n0\n1\n0\n");
  const auto r = run_command(kCli + " eval --logits " + dir.file("z.csv") +
                             " --labels " + dir.file("y.csv"));
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.stdout_text);
  CHECK(doc["ece"].get<double>() == 0.0);
  CHECK(doc["mce"].get<double>() == 0.0);
  CHECK(doc["accuracy"].get<double>() == 1.0);
}

TEST_CASE("eval reproduces the hand-binned case from files") {
  TempDir dir;
  write_hand_case(dir);
  const auto r = run_command(kCli + " eval --logits " + dir.file("z.csv") +
                             " --labels " + dir.file("y.csv"));
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.stdout_text);
  CHECK(std::abs(doc["ece"].get<double>() - 0.425) < 1e-9);
  CHECK(std::abs(doc["mce"].get<double>() - 0.45) < 1e-9);
  CHECK(doc["ece_percent"].get<double>() == doctest::Approx(42.5));
}

TEST_CASE("eval with --temperature 1 matches the flag-free body") {
  TempDir dir;
  write_hand_case(dir);
  const std::string base = kCli + " eval --logits " + dir.file("z.csv") +
                           " --labels " + dir.file("y.csv");
  const auto without = run_command(base);
  const auto with_t1 = run_command(base + " --temperature 1");
  REQUIRE(without.exit_code == 0);
  REQUIRE(with_t1.exit_code == 0);
  json a = json::parse(without.stdout_text);
  json b = json::parse(with_t1.stdout_text);
  CHECK(a["config"] != b["config"]);
  a.erase("config");
  b.erase("config");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("eval report documents are self-consistent") {
  TempDir dir;
  Rng rng(404);
  calib::save_logits(dir.file("z.csv"), calib::LogitBatch(oracle::random_logits(rng, 64, 4)));
  std::ostringstream y;
  y << "label\n";
  for (int v : oracle::random_labels(rng, 64, 4)) y << v << "\n";
  write_file(dir.file("y.csv"), y.str());

  const auto r = run_command(kCli + " eval --logits " + dir.file("z.csv") +
                             " --labels " + dir.file("y.csv") + " --bins 15 --out " +
                             dir.file("report.json"));
  REQUIRE(r.exit_code == 0);
  const calib::OrderedJson doc = calib::OrderedJson::parse(r.stdout_text);
  const auto bins = calib::bins_from_json(doc["bins"]);
  const auto n = doc["n"].get<std::size_t>();
  CHECK(std::abs(doc["ece"].get<double>() - calib::ece_from_bins(bins, n)) < 1e-9);
  CHECK(std::abs(doc["mce"].get<double>() - calib::mce_from_bins(bins)) < 1e-9);

  // --out carries the same document as stdout
  std::ifstream file(dir.file("report.json"));
  std::stringstream buffer;
  buffer << file.rdbuf();
  CHECK(buffer.str() == r.stdout_text);
}

TEST_CASE("distinct exit codes for parse, shape and range failures") {
  TempDir dir;
  write_file(dir.file("z.csv"), "l0,l1\n1,2\n3,4\n");
  write_file(dir.file("y.csv"), "label\n0\n1\n");

  CHECK(run_command(kCli + " eval --logits " + dir.file("missing.csv") + " --labels " +
                    dir.file("y.csv")).exit_code == 3);

  write_file(dir.file("bad.csv"), "l0,l1\n1,huh\n3,4\n");
  CHECK(run_command(kCli + " eval --logits " + dir.file("bad.csv") + " --labels " +
                    dir.file("y.csv")).exit_code == 3);

  write_file(dir.file("short.csv"), "label\n0\n");
  CHECK(run_command(kCli + " eval --logits " + dir.file("z.csv") + " --labels " +
                    dir.file("short.csv")).exit_code == 4);

  write_file(dir.file("range.csv"), "label\n0\n7\n");
  CHECK(run_command(kCli + " eval --logits " + dir.file("z.csv") + " --labels " +
                    dir.file("range.csv")).exit_code == 5);

  CHECK(run_command(kCli + " eval --no-such-flag").exit_code == 2);
  CHECK(run_command(kCli + " train-demo --loss ce+mdca+ts --alpha 0.5 --beta 0.2 --gamma 0.2")
            .exit_code == 6);
}

TEST_CASE("fit-temp recovers 1x and 3x factors from files") {
  TempDir dir;
  const auto [z, y] = oracle::exactly_calibrated_pair();
  std::ostringstream ys;
  ys << "label\n";
  for (int v : y) ys << v << "\n";
  write_file(dir.file("y.csv"), ys.str());

  calib::save_logits(dir.file("z1.csv"), calib::LogitBatch(z));
  calib::Matrix z3 = z;
  for (double& v : z3.data()) v *= 3.0;
  calib::save_logits(dir.file("z3.csv"), calib::LogitBatch(z3));

  const auto r1 = run_command(kCli + " fit-temp --logits " + dir.file("z1.csv") +
                              " --labels " + dir.file("y.csv"));
  REQUIRE(r1.exit_code == 0);
  const json doc1 = json::parse(r1.stdout_text);
  CHECK(std::abs(doc1["temperature"].get<double>() - 1.0) < 0.05);
  CHECK(doc1["nll_after"].get<double>() <= doc1["nll_before"].get<double>() + 1e-12);

  const auto r3 = run_command(kCli + " fit-temp --logits " + dir.file("z3.csv") +
                              " --labels " + dir.file("y.csv"));
  REQUIRE(r3.exit_code == 0);
  const json doc3 = json::parse(r3.stdout_text);
  CHECK(std::abs(doc3["temperature"].get<double>() - 3.0) < 0.05);
}

TEST_CASE("fit-temp flags degenerate constant logits") {
  TempDir dir;
  write_file(dir.file("z.csv"), "l0,l1\n2,2\n2,2\n");
  write_file(dir.file("y.csv"), "label\n0\n1\n");
  const auto r = run_command(kCli + " fit-temp --logits " + dir.file("z.csv") +
                             " --labels " + dir.file("y.csv"));
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.stdout_text);
  CHECK(doc["converged"].get<bool>() == false);
  CHECK(doc["temperature"].get<double>() == 1.0);
}

TEST_CASE("reliability writes a complete plot-ready table") {
  TempDir dir;
  write_hand_case(dir);
  const std::string out = dir.file("bins.csv");
  const auto r = run_command(kCli + " reliability --logits " + dir.file("z.csv") +
                             " --labels " + dir.file("y.csv") + " --out " + out);
  REQUIRE(r.exit_code == 0);

  std::ifstream in(out);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 11);  // header + 10 bins
  CHECK(lines[0] == "bin_lo,bin_hi,count,avg_confidence,accuracy,gap");
  CHECK(lines[1].substr(0, 8) == "0,0.1,0,");  // empty bin, empty stats

  const auto fields = [&](std::size_t row) {
    std::vector<std::string> out;
    std::stringstream ss(lines[row]);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
  };
  long total = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) total += std::stol(fields(i)[2]);
  CHECK(total == 4);

  // bins 5, 6 and 9 carry the hand-binned statistics
  const auto bin5 = fields(1 + 5), bin6 = fields(1 + 6), bin9 = fields(1 + 9);
  CHECK(bin5[2] == "1");
  CHECK(std::stod(bin5[3]) == doctest::Approx(0.55).epsilon(1e-9));
  CHECK(std::stod(bin5[4]) == doctest::Approx(1.0));
  CHECK(bin6[2] == "1");
  CHECK(std::stod(bin6[3]) == doctest::Approx(0.65).epsilon(1e-9));
  CHECK(bin9[2] == "2");
  CHECK(std::stod(bin9[3]) == doctest::Approx(0.95).epsilon(1e-9));
  CHECK(std::stod(bin9[4]) == doctest::Approx(0.5));
  CHECK(std::stod(bin9[5]) == doctest::Approx(0.45).epsilon(1e-9));

  // file and stdout carry the same table
  std::ifstream whole(out);
  std::stringstream buffer;
  buffer << whole.rdbuf();
  CHECK(buffer.str() == r.stdout_text);
}

TEST_CASE("train-demo is deterministic and honors degenerate weights") {
  const std::string demo = kCli + " train-demo --epochs 25 --seed 42";
  const auto a = run_command(demo + " --loss ce");
  const auto b = run_command(demo + " --loss ce");
  REQUIRE(a.exit_code == 0);
  CHECK(a.stdout_text == b.stdout_text);

  const auto c = run_command(demo + " --loss ce+mdca+ts --alpha 1 --beta 0 --gamma 0");
  REQUIRE(c.exit_code == 0);
  const json ce = json::parse(a.stdout_text);
  const json composite = json::parse(c.stdout_text);
  CHECK(ce["loss_curve"] == composite["loss_curve"]);
  CHECK(ce["confidence_curve"] == composite["confidence_curve"]);
  CHECK(ce["report_before"]["ece"] == composite["report_before"]["ece"]);
}

TEST_CASE("train-demo curves have one entry per epoch") {
  const auto r = run_command(kCli + " train-demo --epochs 12 --seed 7 --loss ce+mdca+ts --temp-scale");
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.stdout_text);
  CHECK(doc["loss_curve"].size() == 12);
  CHECK(doc["confidence_curve"].size() == 12);
  CHECK(!doc["temperature_fit"].is_null());
  CHECK(!doc["report_after"].is_null());
  CHECK(doc["report_before"]["accuracy"] == doc["report_after"]["accuracy"]);
}

TEST_CASE("gradcheck passes by default and supports --trials 1") {
  const auto quick = run_command(kCli + " gradcheck --trials 1");
  CHECK(quick.exit_code == 0);
  CHECK(quick.stdout_text.find("cross_entropy") != std::string::npos);
  CHECK(quick.stdout_text.find("non-differentiable") != std::string::npos);

  const auto r = run_command(kCli + " gradcheck --trials 20 --seed 3");
  CHECK(r.exit_code == 0);
  CHECK(r.stdout_text.find("FAIL") == std::string::npos);
  // run twice: identical table
  const auto again = run_command(kCli + " gradcheck --trials 20 --seed 3");
  CHECK(r.stdout_text == again.stdout_text);
}
