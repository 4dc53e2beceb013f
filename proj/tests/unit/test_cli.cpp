#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
    int status = -1;
    std::string output;
};

Result run(const fs::path& dir, const std::string& args) {
    const fs::path log = dir / "cli.log";
    const std::string cmd = "cd '" + dir.string() + "' && '" CARSHARE_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
    const int raw = std::system(cmd.c_str());
    Result r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(log);
    std::ostringstream s;
    s << in.rdbuf();
    r.output = s.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("unknown subcommand prints usage and exits 2") {
    TempDir d("carshare_unit_cli_a");
    const auto r = run(d.path, "frobnicate");
    CHECK(r.status == 2);
    CHECK(r.output.find("Usage") != std::string::npos);
}

TEST_CASE("missing input exits 2") {
    TempDir d("carshare_unit_cli_b");
    CHECK(run(d.path, "trips --snapshots nowhere.csv --area nowhere.geojson").status == 2);
}

TEST_CASE("synth then trips reproduces the ground truth") {
    TempDir d("carshare_unit_cli_c");
    REQUIRE(run(d.path, "--seed 3 synth --days 2 --fleet-size 15").status == 0);
    REQUIRE(run(d.path, "trips --snapshots out/snapshots.csv --area out/area.geojson").status == 0);
    const auto truth = slurp(d.path / "out" / "trips_truth.csv");
    CHECK_FALSE(truth.empty());
    CHECK(slurp(d.path / "out" / "trips.csv") == truth);
    CHECK(fs::exists(d.path / "out" / "synth.manifest.json"));
    CHECK(fs::exists(d.path / "out" / "trips.manifest.json"));
}

TEST_CASE("rerun gives identical bytes") {
    TempDir d("carshare_unit_cli_d");
    REQUIRE(run(d.path, "--seed 5 -o first synth --days 1 --fleet-size 10").status == 0);
    REQUIRE(run(d.path, "--seed 5 -o second synth --days 1 --fleet-size 10").status == 0);
    for (const char* f : {"snapshots.csv", "trips_truth.csv", "classes.csv", "area.geojson"})
        CHECK(slurp(d.path / "first" / f) == slurp(d.path / "second" / f));
}

}  // TEST_SUITE
