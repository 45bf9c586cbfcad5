#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mam/cli.hpp"
#include "mam/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kGolden = fs::path(MAM_FIXTURE_DIR) / "golden";

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run runCli(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = mam::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "mam_cli_unit" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> goldenSolve(const fs::path& out)
{
    return {"solve", "--inputs", (kGolden / "nu_*.csv").string(), "--support",
            (kGolden / "support.csv").string(), "--tol", "1e-8", "--out", out.string()};
}

}  // namespace

TEST_CASE("cli solve on the golden fixture")
{
    const auto dir = scratch("golden");
    auto args = goldenSolve(dir / "p.csv");
    args.insert(args.end(), {"--trace", (dir / "trace.csv").string()});
    const auto r = runCli(args);
    REQUIRE(r.code == mam::cli::kOk);
    const auto p = mam::readMeasureCsv(dir / "p.csv");
    REQUIRE(p.size() == 3);
    CHECK(std::abs(p.weights()[0]) <= 1e-6);
    CHECK(std::abs(p.weights()[1] - 1.0) <= 1e-6);
    CHECK(std::abs(p.weights()[2]) <= 1e-6);

    std::ifstream trace(dir / "trace.csv");
    std::string header;
    std::getline(trace, header);
    CHECK(header == "iter,t,distL,residual,mass,seconds");

    const auto manifest = nlohmann::json::parse(slurp(dir / "p.csv.manifest.json"));
    CHECK(manifest["termination"] == "converged");
    CHECK(manifest["objective"].get<double>() == doctest::Approx(1.0));
    CHECK(manifest["inputs"].size() == 2);
    CHECK(manifest["config"]["tolerance"].get<double>() == 1e-8);
    CHECK(manifest.contains("build"));
}

TEST_CASE("cli solve output is byte-reproducible")
{
    const auto dir = scratch("repro");
    REQUIRE(runCli(goldenSolve(dir / "a.csv")).code == 0);
    REQUIRE(runCli(goldenSolve(dir / "b.csv")).code == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
}

TEST_CASE("cli exit codes")
{
    const auto dir = scratch("codes");
    auto capped = goldenSolve(dir / "p.csv");
    capped.insert(capped.end(), {"--max-iter", "1"});
    CHECK(runCli(capped).code == mam::cli::kIterationLimit);

    std::ofstream(dir / "light.csv") << "x_0,weight\n0,1\n";
    std::ofstream(dir / "heavy.csv") << "x_0,weight\n0,2\n";
    const std::vector<std::string> unbalanced{"solve", "--inputs", (dir / "light.csv").string(),
                                              (dir / "heavy.csv").string(), "--out",
                                              (dir / "u.csv").string()};
    const auto r = runCli(unbalanced);
    CHECK(r.code == mam::cli::kConfigError);
    CHECK(r.err.find("unbalanced") != std::string::npos);

    auto withGamma = unbalanced;
    withGamma.insert(withGamma.end(), {"--gamma", "1", "--tol", "1e-12"});
    CHECK(runCli(withGamma).code == mam::cli::kOk);
    CHECK(mam::readMeasureCsv(dir / "u.csv").weights()[0] == doctest::Approx(1.5).epsilon(1e-10));

    CHECK(runCli({"solve", "--inputs", (dir / "nothing_*.csv").string(), "--out", "x.csv"}).code ==
          mam::cli::kConfigError);
    std::ofstream(dir / "broken.pgm") << "P5\n2 2\n255\n";
    CHECK(runCli({"solve", "--inputs", (dir / "broken.pgm").string(), "--out",
               (dir / "x.csv").string()})
              .code == mam::cli::kIoError);
    CHECK(runCli({"solve", "--bogus"}).code == mam::cli::kConfigError);
    auto badSelect = goldenSolve(dir / "p.csv");
    badSelect.insert(badSelect.end(), {"--select", "random:x"});
    CHECK(runCli(badSelect).code == mam::cli::kConfigError);
}

TEST_CASE("cli numeric failure exit code")
{
    const auto dir = scratch("nan");
    std::ofstream(dir / "support.csv") << "x_0,weight\n1e150,1\n2e150,1\n";
    std::ofstream(dir / "a.csv") << "x_0,weight\n0,1\n";
    std::ofstream(dir / "b.csv") << "x_0,weight\n-1e150,1\n";
    const auto r = runCli({"solve", "--inputs", (dir / "a.csv").string(), (dir / "b.csv").string(),
                        "--support", (dir / "support.csv").string(), "--rho", "1e-300", "--out",
                        (dir / "p.csv").string()});
    CHECK(r.code == mam::cli::kNumericFailure);
    const auto manifest = nlohmann::json::parse(slurp(dir / "p.csv.manifest.json"));
    CHECK(manifest["termination"] == "numeric_failure");
    CHECK(manifest["output"].is_null());
}

TEST_CASE("cli randomized selection and thread fallback")
{
    const auto dir = scratch("random");
    auto args = goldenSolve(dir / "p.csv");
    args.insert(args.end(), {"--select", "random:2", "--seed", "5", "--shuffle-partition"});
    ::setenv("MAM_THREADS", "2", 1);
    const auto r = runCli(args);
    ::unsetenv("MAM_THREADS");
    REQUIRE(r.code == 0);
    const auto manifest = nlohmann::json::parse(slurp(dir / "p.csv.manifest.json"));
    CHECK(manifest["config"]["workers"] == 2);
    CHECK(manifest["config"]["selection"] == "random:2");
    CHECK(mam::readMeasureCsv(dir / "p.csv").weights()[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("cli checkpoint and resume")
{
    const auto dir = scratch("ckpt");
    auto first = goldenSolve(dir / "a.csv");
    first.insert(first.end(), {"--max-iter", "2", "--checkpoint", (dir / "state.bin").string()});
    CHECK(runCli(first).code == mam::cli::kIterationLimit);
    auto second = goldenSolve(dir / "b.csv");
    second.insert(second.end(), {"--resume", (dir / "state.bin").string()});
    CHECK(runCli(second).code == 0);
    CHECK(mam::readMeasureCsv(dir / "b.csv").weights()[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("cli eval and oracle")
{
    const auto dir = scratch("eval");
    const std::string inputs = (kGolden / "nu_*.csv").string();
    std::ofstream(dir / "spread.csv") << "x_0,weight\n0,0.5\n1,0\n2,0.5\n";
    auto r = runCli({"eval", "--p", (dir / "spread.csv").string(), "--inputs", inputs, "--oracle"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("gap 1\n") != std::string::npos);

    r = runCli({"eval", "--p", (dir / "spread.csv").string(), "--inputs", inputs});
    CHECK(r.code == 0);
    CHECK(r.out.find("objective 2\n") != std::string::npos);
    CHECK(r.out.find("gap") == std::string::npos);

    r = runCli({"oracle", "--inputs", inputs, "--support", (kGolden / "support.csv").string(), "--out",
             (dir / "exact.csv").string()});
    REQUIRE(r.code == 0);
    r = runCli({"eval", "--p", (dir / "exact.csv").string(), "--inputs", inputs, "--exact",
             (dir / "exact.csv").string()});
    CHECK(r.out.find("gap 0\n") != std::string::npos);
}

TEST_CASE("cli gen")
{
    const auto dir = scratch("gen");
    const std::vector<std::string> args{"gen", "--n", "1", "--seed", "7", "--side", "20", "--out"};
    auto a = args;
    a.push_back((dir / "a").string());
    auto b = args;
    b.push_back((dir / "b").string());
    REQUIRE(runCli(a).code == 0);
    REQUIRE(runCli(b).code == 0);
    CHECK(slurp(dir / "a" / "measure_0000.pgm") == slurp(dir / "b" / "measure_0000.pgm"));
    CHECK(fs::exists(dir / "a" / "index.csv"));

    CHECK(runCli({"gen", "--ellipses", "0", "--out", (dir / "c").string()}).code ==
          mam::cli::kConfigError);
    CHECK(runCli({"gen", "--kind", "squares", "--out", (dir / "c").string()}).code ==
          mam::cli::kConfigError);
    CHECK(runCli({"gen", "--kind", "quartered", "--side", "32", "--n", "2", "--out",
               (dir / "q").string()})
              .code == 0);
}

TEST_CASE("cli render")
{
    const auto dir = scratch("render");
    const mam::SupportGrid grid = mam::SupportGrid::pixelGrid(3, 2);
    mam::writeMeasureCsv(dir / "u.csv", mam::DiscreteMeasure(grid, std::vector<double>(6, 1.0 / 6)));
    REQUIRE(runCli({"render", "--p", (dir / "u.csv").string(), "--out", (dir / "u.pgm").string()}).code ==
            0);
    const auto uniform = mam::readPgm(dir / "u.pgm");
    for (double v : uniform.pixels)
        CHECK(v == uniform.pixels[0]);

    mam::writeMeasureCsv(dir / "s.csv", mam::DiscreteMeasure(grid, {0, 0, 0, 0, 0.7, 0}));
    REQUIRE(runCli({"render", "--p", (dir / "s.csv").string(), "--out", (dir / "s.pgm").string()}).code ==
            0);
    const auto single = mam::readPgm(dir / "s.pgm");
    CHECK(single.pixels == std::vector<double>{0, 0, 0, 0, 255, 0});

    // render(load(render(p))) == render(p).
    const auto reloaded = mam::loadImageAsMeasure(dir / "s.pgm", true);
    mam::writeMeasureCsv(dir / "s2.csv", reloaded);
    REQUIRE(runCli({"render", "--p", (dir / "s2.csv").string(), "--out", (dir / "s2.pgm").string()})
                .code == 0);
    CHECK(slurp(dir / "s2.pgm") == slurp(dir / "s.pgm"));

    CHECK(runCli({"render", "--p", (kGolden / "support.csv").string(), "--out",
               (dir / "x.pgm").string()})
              .code == mam::cli::kConfigError);
}

TEST_CASE("cli randomized and full selection reach the same objective")
{
    const auto dir = scratch("select");
    REQUIRE(runCli({"gen", "--n", "4", "--side", "8", "--seed", "3", "--out", (dir / "imgs").string()})
                .code == 0);
    const std::string inputs = (dir / "imgs" / "*.pgm").string();
    const std::vector<std::string> base{"solve", "--inputs", inputs, "--tol", "1e-7", "--max-iter", "20000"};
    auto all = base;
    all.insert(all.end(), {"--out", (dir / "all.csv").string()});
    auto rnd = base;
    rnd.insert(rnd.end(), {"--select", "random:2", "--seed", "1", "--out", (dir / "rnd.csv").string()});
    REQUIRE(runCli(all).code == 0);
    REQUIRE(runCli(rnd).code == 0);

    auto objective = [&](const fs::path& p) {
        const auto r = runCli({"eval", "--p", p.string(), "--inputs", inputs});
        REQUIRE(r.code == 0);
        return std::stod(r.out.substr(r.out.find(' ') + 1));
    };
    CHECK(std::abs(objective(dir / "all.csv") - objective(dir / "rnd.csv")) <= 1e-4);
}
