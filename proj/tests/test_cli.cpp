#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch() {
    const auto dir = fs::temp_directory_path() / ("pfeller_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

Run run(const std::string& args) {
    const auto dir = scratch();
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + PFELLER_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string fixture(const char* name) { return std::string("\"") + PFELLER_FIXTURE_DIR + "/" + name + "\""; }

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("classify") {
    const auto hyp = run("classify --sigma \"sinh(t)\" --m 3 --p 2");
    CHECK(hyp.code == 0);
    CHECK(contains(hyp.out, "hyperbolic:   yes"));
    CHECK(contains(hyp.out, "complete:     yes"));
    CHECK(contains(hyp.out, "feller:       yes"));

    const auto flat = run("classify --family euclidean --m 2 --p 2");
    CHECK(flat.code == 0);
    CHECK(contains(flat.out, "hyperbolic:   no"));
    CHECK(contains(flat.out, "feller:       yes"));

    const auto bad = run("classify --sigma \"t^2\" --m 3 --p 2");
    CHECK(bad.code == 1);
    CHECK(contains(bad.err, "sigma'(0)"));

    CHECK(run("classify --family nowhere --m 3 --p 2").code == 1);
    CHECK(run("classify --bogus").code == 1);
}

TEST_CASE("solve writes artifacts matching the closed form") {
    const auto base = scratch() / "euclid";
    const auto r = run("solve --family euclidean --m 3 --p 2 --lambda 1 --R 1 --cells 512 --out \"" + base.string() +
                       "\" --format json --format svg");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(base.string() + ".json"));
    CHECK(fs::exists(base.string() + ".svg"));
    REQUIRE(fs::exists(base.string() + ".csv"));

    std::istringstream csv(slurp(base.string() + ".csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "r,u,flux");
    double worst = 0.0;
    int rows = 0;
    while (std::getline(csv, line)) {
        const double x = std::stod(line.substr(0, line.find(',')));
        const double u = std::stod(line.substr(line.find(',') + 1));
        worst = std::max(worst, std::fabs(u - std::exp(-(x - 1)) / x));
        ++rows;
    }
    CHECK(rows > 100);
    CHECK(worst <= 1e-4);

    const auto j = nlohmann::json::parse(slurp(base.string() + ".json"));
    CHECK(j.at("provenance") == "exhaustion-limit");
    CHECK(j.at("exhaustion").at("settled") == true);
}

TEST_CASE("identical configs give identical JSON") {
    const auto a = run("solve --family hyperbolic --m 3 --p 3 --cells 256");
    const auto b = run("solve --family hyperbolic --m 3 --p 3 --cells 256");
    REQUIRE(a.code == 0);
    CHECK(!a.out.empty());
    CHECK(a.out == b.out);
}

TEST_CASE("solve warnings and trivial data") {
    const auto cusp = run("solve --family cusp_cubic --m 3 --p 2 --window 20 --cells 256");
    CHECK(cusp.code == 0);
    CHECK(contains(cusp.err, "PositiveLimit"));

    const auto base = scratch() / "zero";
    const auto z = run("solve --family euclidean --m 3 --p 2 --inner 0 --out \"" + base.string() + "\" --format csv");
    REQUIRE(z.code == 0);
    std::istringstream csv(slurp(base.string() + ".csv"));
    std::string line;
    std::getline(csv, line);
    int rows = 0;
    while (std::getline(csv, line)) {
        CHECK(std::stod(line.substr(line.find(',') + 1)) == 0.0);
        ++rows;
    }
    CHECK(rows > 0);

    CHECK(run("solve --family euclidean --m 3 --p 2 --inner -1").code == 1);
}

TEST_CASE("export round trip") {
    const auto base = scratch() / "roundtrip";
    REQUIRE(run("solve --family euclidean --m 3 --p 1.5 --cells 256 --out \"" + base.string() + "\"").code == 0);
    const auto again = run("export --input \"" + base.string() + ".json\" --format json");
    REQUIRE(again.code == 0);
    CHECK(again.out == slurp(base.string() + ".json"));
    const auto csv = run("export --input \"" + base.string() + ".json\" --format csv");
    CHECK(csv.code == 0);
    CHECK(csv.out.rfind("r,u,flux", 0) == 0);
    CHECK(run("export --input \"" + (scratch() / "missing.json").string() + "\" --format csv").code == 1);
}

TEST_CASE("verify fixture sets") {
    const auto smoke = run("verify " + fixture("smoke.json"));
    CHECK(smoke.code == 0);
    CHECK_FALSE(contains(smoke.out, "FAIL"));
    CHECK(contains(smoke.out, "PASS  cusp_cubic m=3 p=2  decay  PositiveLimit"));

    const auto corrupted = run("verify --config " + fixture("corrupted.json"));
    CHECK(corrupted.code == 4);
    CHECK(contains(corrupted.out, "FAIL  euclidean m=3 p=2  comparison"));
    CHECK(contains(corrupted.err, "failing rows"));

    const auto empty = run("verify " + fixture("empty.json"));
    CHECK(empty.code == 1);
    CHECK(contains(empty.err, "no fixtures"));
}
