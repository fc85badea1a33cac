#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rectnet/cli.hpp"
#include "rectnet/volume_io.hpp"

namespace fs = std::filesystem;
using namespace rectnet;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("describe prints the parameter counts of the full-size presets") {
    const auto cnn = run({"describe", "--arch", "cnn", "--preset", "paper"});
    CHECK(cnn.code == cli::kExitOk);
    CHECK(cnn.out.find("1686598") != std::string::npos);
    const auto rect = run({"describe", "--arch", "rectnet", "--preset", "paper", "--json"});
    CHECK(rect.code == cli::kExitOk);
    CHECK(rect.out.find("\"parameters\": 10687054") != std::string::npos);
  }

  TEST_CASE("usage errors exit 1") {
    CHECK(run({"describe", "--no-such-flag"}).code == cli::kExitUsage);
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"detect", "--model", "m.ckpt"}).code == cli::kExitUsage);
  }

  TEST_CASE("runtime failures exit 2") {
    CHECK(run({"segment", "--volume", "/nonexistent/v.json", "--out", "/tmp/x.json"}).code == cli::kExitRuntime);
  }

  TEST_CASE("config file supplies defaults and rejects unknown keys") {
    const auto dir = fs::temp_directory_path() / "rectnet_unit_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << R"({"describe": {"bogus": 1}})";
    CHECK(run({"--config", (dir / "bad.json").string(), "describe"}).code == cli::kExitUsage);
    std::ofstream(dir / "good.json") << R"({"describe": {"arch": "cnn", "preset": "paper"}})";
    const auto r = run({"--config", (dir / "good.json").string(), "describe"});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("1686598") != std::string::npos);
    CHECK(r.err.find("resolved config (describe)") != std::string::npos);
    const auto flag_wins = run({"--config", (dir / "good.json").string(), "describe", "--preset", "desk"});
    CHECK(flag_wins.out.find("1686598") == std::string::npos);
  }

  TEST_CASE("phantom and segment subcommands") {
    const auto dir = fs::temp_directory_path() / "rectnet_unit_cli_ph";
    fs::remove_all(dir);
    const auto r = run({"--seed", "4", "phantom", "--out", dir.string(), "--count", "2", "--size", "48", "48", "12"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(cli::list_volumes(dir) == std::vector<std::string>{"phantom_000", "phantom_001"});
    CHECK(fs::exists(dir / "phantom_000.nodules.json"));
    const auto seg = run({"segment", "--volume", (dir / "phantom_000.json").string(), "--out",
                          (dir / "masks" / "phantom_000.json").string(), "--truth",
                          (dir / "phantom_000.lung.json").string()});
    CHECK(seg.code == cli::kExitOk);
    CHECK(read_mask(dir / "masks" / "phantom_000.json").dims() == Dims{48, 48, 12});
  }

  TEST_CASE("selftest passes") {
    const auto r = run({"selftest"});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("selftest passed") != std::string::npos);
  }
}
