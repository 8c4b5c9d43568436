#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "metagen/report_io.hpp"

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "metagen");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = metagen::cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("metagen_cli_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(call({}).code == 2);
  const auto r = call({"run", "--config", METAGEN_SOURCE_DIR "/configs/small.cfg", "--bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--bogus") != std::string::npos);
  CHECK(call({"run"}).code == 2);
  CHECK(call({"run", "--config", "/nonexistent.cfg"}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("run writes outputs; bad config exits 1") {
  const auto dir = scratch("run");
  const auto out = (dir / "out").string();
  const auto r = call({"run", "--config", METAGEN_SOURCE_DIR "/configs/small.cfg", "--out", out,
                       "--quiet", "--jobs", "2", "--seed", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.find("sqrt_delta_mi") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "out" / "results.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "report.json"));

  const auto svg = (dir / "chart.svg").string();
  const auto p = call({"plot", "--csv", (dir / "out" / "results.csv").string(), "--out", svg});
  CHECK(p.code == 0);
  std::ifstream in(svg);
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str().rfind("<svg", 0) == 0);
  CHECK(buf.str().find("|gap|") != std::string::npos);

  const auto bad = dir / "bad.cfg";
  std::ofstream(bad) << "t1 = 0\n";
  const auto b = call({"run", "--config", bad.string()});
  CHECK(b.code == 1);
  CHECK(b.err.find("t1") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("gradcheck and oracle subcommands") {
  const auto g = call({"gradcheck", "--nets", "3"});
  CHECK(g.code == 0);
  CHECK(g.out.find("nets=3") != std::string::npos);
  const auto s = metagen::cli::gradcheck_suite(5, 2);
  CHECK(s.nets == 5);
  CHECK(s.checked > 0);
  CHECK(s.max_rel_error <= 1e-5);

  const auto o = call({"oracle", "--joints", "20", "--inversions", "50"});
  CHECK(o.code == 0);
  const auto os = metagen::cli::oracle_suite(50, 100, 3);
  CHECK(os.joints == 50);
  CHECK(os.range_violations == 0);
  CHECK(os.max_form_disagreement <= 1e-12);
  CHECK(os.max_inversion_error <= 1e-9);
}
