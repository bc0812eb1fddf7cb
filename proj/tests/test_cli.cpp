#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "neuroloop/cli.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "neuroloop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = neuroloop::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Dir {
  std::filesystem::path path;
  Dir() : path(std::filesystem::temp_directory_path() / ("neuroloop_cli_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~Dir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({}).err.find("serve") != std::string::npos);
  CHECK(cli({"bench", "--bogus"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"classify"}).code == 2);
  CHECK(cli({"replay"}).code == 2);  // --in is required
  CHECK(cli({"simulate", "--scenario", "/nonexistent.json"}).code == 2);
  CHECK(cli({"replay", "--in", "/etc/hostname", "--policy", "sideways"}).code == 2);
}

TEST_CASE("--help lists subcommands and flags") {
  auto top = cli({"--help"});
  CHECK(top.code == 0);
  for (const char* s : {"serve", "simulate", "replay", "iaf", "classify", "bench"})
    CHECK(top.out.find(s) != std::string::npos);
  auto serve = cli({"serve", "--help"});
  CHECK(serve.code == 0);
  for (const char* f : {"--bind", "--policy", "--threshold", "--window-seconds", "--stream-initial",
                        "--stream-floor", "--stream-ceiling", "--montage"})
    CHECK(serve.out.find(f) != std::string::npos);
  auto sim = cli({"simulate", "--help"});
  for (const char* f : {"--scenario", "--seed", "--out"}) CHECK(sim.out.find(f) != std::string::npos);
}

TEST_CASE("simulate, replay and iaf") {
  Dir d;
  {
    std::ofstream s(d / "s.json");
    s << R"({"seed": 4, "segments": [{"state": "neutral", "duration_s": 40}, {"state": "internal", "duration_s": 40},
             {"state": "external", "duration_s": 40}]})";
  }
  auto r = cli({"simulate", "--scenario", d / "s.json", "--policy", "negative", "--out", d / "live.jsonl",
                "--record", d / "rec.jsonl"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["decisions"] == 5);

  REQUIRE(cli({"replay", "--in", d / "rec.jsonl", "--policy", "negative", "--out", d / "a.jsonl"}).code == 0);
  REQUIRE(cli({"replay", "--in", d / "rec.jsonl", "--policy", "negative", "--out", d / "b.jsonl"}).code == 0);
  const auto a = slurp(d / "a.jsonl");
  CHECK(a == slurp(d / "b.jsonl"));
  CHECK(a == slurp(d / "live.jsonl"));
  std::istringstream lines(a);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    auto j = json::parse(line);
    for (const char* k : {"t", "window_index", "delta_alpha", "delta_theta", "alpha_sig", "theta_sig", "policy",
                          "action", "stream_after"})
      CHECK(j.contains(k));
    CHECK(j["policy"] == "Negative");
    ++n;
  }
  CHECK(n == 5);

  // stdout when --out is omitted
  auto so = cli({"replay", "--in", d / "rec.jsonl", "--policy", "negative"});
  CHECK(so.out == a);

  auto i = cli({"iaf", "--in", d / "rec.jsonl"});
  REQUIRE(i.code == 0);
  auto e = json::parse(i.out);
  CHECK(e.size() == 5);
  for (const char* k : {"paf", "cog", "f_low", "f_high", "quality"}) CHECK(e.contains(k));

  {
    std::ofstream bad(d / "bad.jsonl");
    bad << "{\"type\":\"eeg\"\n";
  }
  auto b = cli({"replay", "--in", d / "bad.jsonl"});
  CHECK(b.code == 1);
  CHECK(b.err.find("line 1") != std::string::npos);
}

TEST_CASE("classify synth, train, eval") {
  Dir d;
  REQUIRE(cli({"classify", "synth", "--out", d / "f.csv", "--seed", "3", "--participants", "10"}).code == 0);
  auto t = cli({"classify", "train", "--features", d / "f.csv", "--seed", "5", "--out", d / "m.json"});
  REQUIRE(t.code == 0);
  auto rep = json::parse(t.out);
  for (const char* k : {"accuracy", "f1_external", "weights", "bias", "split"}) CHECK(rep.contains(k));
  CHECK(rep["weights"].size() == 5);
  CHECK(rep["accuracy"].get<double>() >= 0.9);
  auto e = cli({"classify", "eval", "--model", d / "m.json", "--features", d / "f.csv"});
  REQUIRE(e.code == 0);
  CHECK(json::parse(e.out)["accuracy"].get<double>() >= 0.9);
  // same seed, same report
  CHECK(cli({"classify", "train", "--features", d / "f.csv", "--seed", "5"}).out == t.out);

  {
    std::ofstream m(d / "junk.json");
    m << "{";
  }
  CHECK(cli({"classify", "eval", "--model", d / "junk.json", "--features", d / "f.csv"}).code == 1);
}

TEST_CASE("bench prints latency stats") {
  auto b = cli({"bench", "--window-seconds", "20", "--channels", "64", "--iterations", "2"});
  REQUIRE(b.code == 0);
  auto j = json::parse(b.out);
  CHECK(j["channels"] == 64);
  CHECK(j["window_s"] == 20.0);
  for (const char* k : {"min_ms", "median_ms", "p95_ms", "max_ms", "mean_ms", "realtime_factor"})
    CHECK(j[k].get<double>() > 0.0);
  CHECK(cli({"bench", "--channels", "4"}).code == 1);
}
