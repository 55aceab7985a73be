#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfmsa/cli.hpp"
#include "cfmsa/digest.hpp"

using namespace cfmsa;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cfmsa_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// Small, fast run configuration shared by the tests.
fs::path small_config(const fs::path& dir) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << R"({"synthetic":{"n_train":150,"n_val":30,"n_test":60,"d_t":6,"d_i":6},
                          "train":{"epochs":2,"hidden_dim":8}})";
  return p;
}

}  // namespace

TEST_CASE("synth writes deterministic splits") {
  const fs::path dir = scratch("synth");
  const std::string cfg = small_config(dir).string();
  const char* files[] = {"train.jsonl", "val.jsonl", "test.jsonl", "synth_config.json"};
  std::vector<std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(dir / "a");
    const Run r = run({"synth", "--config", cfg, "--seed", "3", "--out", (dir / "a").string(),
                       "--no-timestamp"});
    REQUIRE(r.code == 0);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(fs::exists(dir / "a" / files[k]));
      if (pass == 0) {
        first.push_back(slurp(dir / "a" / files[k]));
      } else {
        CHECK(slurp(dir / "a" / files[k]) == first[k]);
      }
    }
  }
  const Run other = run({"synth", "--config", cfg, "--seed", "4", "--out", (dir / "c").string(),
                         "--no-timestamp"});
  REQUIRE(other.code == 0);
  CHECK(slurp(dir / "c" / "train.jsonl") != slurp(dir / "a" / "train.jsonl"));
}

TEST_CASE("usage errors exit 2 and name the field") {
  const fs::path dir = scratch("usage");
  Run r = run({"synth", "--bias-strength", "1.5", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("bias_strength") != std::string::npos);

  r = run({"train", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("data") != std::string::npos);

  r = run({"train", "--data", (dir / "missing").string(), "--out", dir.string()});
  CHECK(r.code == 2);

  r = run({"train", "--c-mode", "banana", "--data", dir.string(), "--out", dir.string()});
  CHECK(r.code == 2);

  r = run({"frobnicate"});
  CHECK(r.code == 2);

  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("train, eval and infer end to end") {
  const fs::path dir = scratch("e2e");
  const std::string cfg = small_config(dir).string();
  const std::string data = (dir / "data").string();
  REQUIRE(run({"synth", "--config", cfg, "--out", data, "--no-timestamp"}).code == 0);

  std::vector<std::string> digests;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(dir / "m1");
    const Run r = run({"train", "--config", cfg, "--data", data, "--out", (dir / "m1").string(),
                       "--no-timestamp"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    digests.push_back(file_sha256_hex(dir / "m1" / "checkpoint.json") +
                      file_sha256_hex(dir / "m1" / "history.jsonl"));
  }
  CHECK(digests[0] == digests[1]);

  // One provenance line plus one line per epoch.
  std::ifstream hist(dir / "m1" / "history.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(hist, l);) ++lines;
  CHECK(lines == 3);

  const std::string ckpt = (dir / "m1" / "checkpoint.json").string();
  std::vector<std::string> reports;
  for (int pass = 0; pass < 2; ++pass) {
    const Run r = run({"eval", "--checkpoint", ckpt, "--data", data, "--modes", "all", "--out",
                       (dir / "r1").string(), "--no-timestamp"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("Baseline (TE)") != std::string::npos);
    CHECK(r.out.find("Removing Text Bias") != std::string::npos);
    CHECK(r.out.find("Removing Image Bias") != std::string::npos);
    CHECK(r.out.find("Removing Text-Image Bias") != std::string::npos);
    reports.push_back(slurp(dir / "r1" / "report.json") + slurp(dir / "r1" / "report.txt"));
  }
  CHECK(reports[0] == reports[1]);

  Run r = run({"eval", "--checkpoint", ckpt, "--data", data, "--modes", "te,tie-text"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Removing Image Bias") == std::string::npos);

  r = run({"infer", "--checkpoint", ckpt, "--data", data, "--id", "test-0"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["id"] == "test-0");
  CHECK(j["modes"]["tie-text"]["available"] == true);

  r = run({"infer", "--checkpoint", ckpt, "--modes", "all"},
          R"({"text":[0,0,0,0,0,1],"image":null})");
  INFO(r.err);
  REQUIRE(r.code == 0);
  j = nlohmann::json::parse(r.out);
  CHECK(j["modes"]["te"]["available"] == true);
  CHECK(j["modes"]["tie-text"]["available"] == false);
  CHECK(j["modes"]["tie-image"]["available"] == false);
  CHECK(j["modes"]["tie-joint"]["available"] == false);

  r = run({"infer", "--checkpoint", ckpt}, R"({"text":[0,0],"image":null})");
  CHECK(r.code == 1);
  r = run({"infer", "--checkpoint", ckpt, "--data", data, "--id", "nope"});
  CHECK(r.code == 2);
}

TEST_CASE("gradcheck command") {
  const fs::path dir = scratch("grad");
  const Run r = run({"gradcheck", "--points", "5", "--out", dir.string(), "--no-timestamp"});
  INFO(r.out << r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "gradcheck.json"));
  CHECK(j["passed"] == true);
}
