#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("kiri_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

// Runs the CLI with stdout/stderr captured to `log`; returns the exit status.
int run(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(KIRI_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen, replay from the echo and eval") {
    Sandbox box;
    const std::string ds = box / "ds", log = box / "log";
    REQUIRE(run("--profile desk --grid 4x4 --seed 5 gen --count 4 --out " + ds, log) == 0);
    CHECK(fs::exists(ds + "/manifest.json"));
    CHECK(fs::exists(ds + "/config.json"));
    REQUIRE(fs::exists(ds + "/config.ini"));

    const std::string ds2 = box / "ds2";
    REQUIRE(run("--config " + ds + "/config.ini gen --out " + ds2, log) == 0);
    for (const char* split : {"train", "val", "test"}) {
      for (int i = 0; i < 4; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "/%s/%s-%06d.y.pgm", split, split, i);
        CHECK(slurp(ds + name) == slurp(ds2 + name));
      }
    }
    const auto a = nlohmann::json::parse(slurp(ds + "/config.json"));
    const auto b = nlohmann::json::parse(slurp(ds2 + "/config.json"));
    CHECK(a["global"] == b["global"]);
    CHECK(a["params"]["config_hash"] == b["params"]["config_hash"]);

    const std::string out = box / "eval.json";
    REQUIRE(run("--grid 4x4 eval --pred " + ds + "/test/test-000000.x.txt --target " + ds +
                    "/test/test-000000.y.pgm --report-tv",
                out) == 0);
    const auto j = nlohmann::json::parse(slurp(out));
    CHECK(j["siou"].get<double>() == doctest::Approx(1.0));
    CHECK(j["success"].get<bool>());
    CHECK(j.contains("tv"));
  }

  TEST_CASE("configuration errors exit with 2") {
    Sandbox box;
    const std::string log = box / "log";
    CHECK(run("--phi 4 gen --out " + (box / "x"), log) == 2);
    CHECK(run("gen --bogus", log) == 2);
    CHECK(run("--grid 0x3 gen --out " + (box / "x"), log) == 2);
    CHECK(run("eval --pred " + (box / "missing.txt") + " --target circle", log) == 2);
  }

  TEST_CASE("export refuses infeasible fields with 5") {
    Sandbox box;
    const std::string field = box / "ones.txt";
    std::ofstream(field) << "1 1\n1 1\n";
    CHECK(run("--phi 1.5707963267948966 export --field " + field + " --out " + (box / "o.dxf"), box / "log") == 5);
    CHECK_FALSE(fs::exists(box / "o.dxf"));
  }

  TEST_CASE("export and targets write files") {
    Sandbox box;
    const std::string field = box / "ones.txt";
    std::ofstream(field) << "1 1\n1 1\n";
    REQUIRE(run("--tau-ov 0.05 export --field " + field + " --fit-mm 100 --out " + (box / "o.dxf"), box / "log") == 0);
    CHECK(slurp(box / "o.dxf").find("CONNECTOR") != std::string::npos);
    REQUIRE(run("targets --out " + (box / "tg"), box / "log") == 0);
    for (const char* name : {"circle", "heart", "hexagon"}) CHECK(fs::exists(box / ("tg/" + std::string(name) + ".pgm")));
  }
}
