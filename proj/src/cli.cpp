#include "mam/cli.hpp"

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>
#include <json.hpp>

#include "mam/datasets.hpp"
#include "mam/io.hpp"
#include "mam/lp_oracle.hpp"
#include "mam/rng.hpp"
#include "mam/solver.hpp"

#ifndef MAM_BUILD_STAMP
#define MAM_BUILD_STAMP "unknown"
#endif

namespace mam::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Thrown for invalid flag combinations and unusable inputs (exit 3).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> expandInputs(const std::vector<std::string>& patterns)
{
    std::vector<std::string> files;
    for (const auto& pattern : patterns) {
        glob_t g{};
        const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
        if (rc == 0)
            for (std::size_t i = 0; i < g.gl_pathc; ++i)
                files.emplace_back(g.gl_pathv[i]);
        globfree(&g);
        if (rc == GLOB_NOMATCH)
            throw UsageError("no input matches '" + pattern + "'");
        if (rc != 0)
            throw IoError("cannot expand '" + pattern + "'");
    }
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    return files;
}

std::vector<DiscreteMeasure> loadInputs(const std::vector<std::string>& files, bool raw)
{
    std::vector<DiscreteMeasure> inputs;
    inputs.reserve(files.size());
    for (const auto& f : files)
        inputs.push_back(loadMeasure(f, !raw));
    return inputs;
}

// Shared support when all inputs agree, otherwise the sorted union of atoms.
SupportGrid defaultSupport(const std::vector<DiscreteMeasure>& inputs)
{
    const SupportGrid& first = inputs.front().support();
    if (std::all_of(inputs.begin(), inputs.end(),
                    [&](const DiscreteMeasure& nu) { return nu.support() == first; }))
        return first;
    std::set<std::vector<double>> atoms;
    for (const auto& nu : inputs) {
        if (nu.support().dim() != first.dim())
            throw UsageError("input measures live in different dimensions");
        for (std::size_t i = 0; i < nu.size(); ++i) {
            auto a = nu.support().atom(i);
            atoms.emplace(a.begin(), a.end());
        }
    }
    std::vector<double> coords;
    for (const auto& a : atoms)
        coords.insert(coords.end(), a.begin(), a.end());
    return SupportGrid(first.dim(), std::move(coords));
}

SupportGrid resolveSupport(const std::string& supportFile, const std::vector<DiscreteMeasure>& inputs)
{
    if (supportFile.empty())
        return defaultSupport(inputs);
    if (isMeasureCsv(supportFile))
        return readMeasureCsv(supportFile).support();
    const GrayImage img = readImage(supportFile);
    return SupportGrid::pixelGrid(img.width, img.height);
}

std::size_t resolveWorkers(int flag)
{
    if (flag > 0)
        return static_cast<std::size_t>(flag);
    if (const char* env = std::getenv("MAM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<std::size_t>(v);
        throw UsageError("MAM_THREADS must be a positive integer");
    }
    return 1;
}

Selection parseSelection(const std::string& text, bool shuffle)
{
    if (text == "all")
        return Selection::all();
    const std::string prefix = "random:";
    if (text.rfind(prefix, 0) == 0) {
        const std::string count = text.substr(prefix.size());
        std::size_t pos = 0;
        unsigned long nb = 0;
        try {
            nb = std::stoul(count, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == count.size() && nb > 0)
            return Selection::random(nb, shuffle);
    }
    throw UsageError("--select expects 'all' or 'random:<nb>', got '" + text + "'");
}

void writeTrace(const fs::path& path, const SolveReport& report)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << "iter,t,distL,residual,mass,seconds\n" << std::setprecision(17);
    for (const auto& row : report.trace)
        out << row.iteration << ',' << row.t << ',' << row.distL << ',' << row.residual << ','
            << row.mass << ',' << row.seconds << '\n';
}

// Iterates may carry small negative entries before convergence; measures
// cannot. Returns the clipped vector and the total clipped mass.
std::pair<std::vector<double>, double> clipNegative(std::vector<double> p)
{
    double clipped = 0.0;
    for (double& x : p)
        if (x < 0.0) {
            clipped -= x;
            x = 0.0;
        }
    return {std::move(p), clipped};
}

json finiteOrNull(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

// Objective is reported only when every transport subproblem fits the oracle.
// The Bland's-rule oracle is roughly cubic in plan size; beyond this many
// variables per measure the manifest objective costs more than the solve.
constexpr std::size_t kManifestOtVariables = 1000;

std::optional<double> tryObjective(std::span<const double> p, const ProblemInstance& instance)
{
    if (!instance.balanced())
        return std::nullopt;
    for (std::size_t m = 0; m < instance.measures(); ++m)
        if (instance.rows() * instance.cols(m) > kManifestOtVariables)
            return std::nullopt;
    try {
        return barycenterObjective(p, instance);
    } catch (const OracleError&) {
        return std::nullopt;
    }
}

// Max-normalized to 255; throws InstanceError off a rectangular grid.
GrayImage renderImage(const DiscreteMeasure& p)
{
    GrayImage img = measureToImage(p);
    const double peak = *std::max_element(img.pixels.begin(), img.pixels.end());
    for (double& v : img.pixels)
        v = peak > 0.0 ? 255.0 * v / peak : 0.0;
    return img;
}

struct GenOptions {
    std::string kind = "ellipses";
    std::size_t count = 1;
    int ellipses = 1;
    std::size_t side = 60;
    std::uint64_t seed = 0;
    std::string outDir;
};

int cmdGenerate(const GenOptions& o, std::ostream& out)
{
    if (o.kind != "ellipses" && o.kind != "quartered")
        throw UsageError("--kind must be 'ellipses' or 'quartered'");
    if (o.count == 0)
        throw UsageError("--n must be positive");
    std::error_code ec;
    fs::create_directories(o.outDir, ec);
    if (ec || !fs::is_directory(o.outDir))
        throw IoError("cannot create output directory " + o.outDir);

    std::ofstream index(fs::path(o.outDir) / "index.csv");
    if (!index)
        throw IoError("cannot write index in " + o.outDir);
    index << "file,density\n" << std::setprecision(17);
    double densitySum = 0.0;
    for (std::size_t i = 0; i < o.count; ++i) {
        const std::uint64_t seed = counterHash(o.seed, i);
        const GrayImage img = o.kind == "ellipses" ? nestedEllipsesImage(o.side, o.ellipses, seed)
                                                   : quarteredEllipsesImage(o.side, seed);
        std::ostringstream name;
        name << "measure_" << std::setw(4) << std::setfill('0') << i << ".pgm";
        writePgm(fs::path(o.outDir) / name.str(), img);
        const double density = imageDensity(img);
        densitySum += density;
        index << name.str() << ',' << density << '\n';
    }
    out << "generated " << o.count << " images in " << o.outDir << ", mean density "
        << std::fixed << std::setprecision(1) << 100.0 * densitySum / static_cast<double>(o.count)
        << "%\n";
    return kOk;
}

struct SolveOptions {
    std::vector<std::string> inputs;
    std::string support;
    double rho = 0.0;
    std::optional<double> gamma;
    double tol = 1e-6;
    std::size_t maxIter = 100000;
    std::string select = "all";
    bool shufflePartition = false;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string stop = "theta";
    double exponent = 2.0;
    bool raw = false;
    std::string trace;
    std::string render;
    std::string checkpoint;
    std::string resume;
    std::string manifest;
    std::string outFile;
};

int cmdSolve(const SolveOptions& o, std::ostream& out, std::ostream& err)
{
    const auto files = expandInputs(o.inputs);
    auto inputs = loadInputs(files, o.raw);
    SupportGrid support = resolveSupport(o.support, inputs);
    const std::size_t measures = inputs.size();
    const ProblemInstance full = ProblemInstance::fromMeasures(
        std::move(support), std::move(inputs), uniformWeights(measures), o.exponent);
    const PrunedInstance pruned = pruneZeroColumns(full);
    const ProblemInstance& instance = pruned.instance;

    if (!instance.balanced() && !o.gamma) {
        std::ostringstream msg;
        msg << "input measures are unbalanced (total masses differ by more than "
            << ProblemInstance::kBalanceTolerance << " relative); pass --gamma for an "
            << "unbalanced barycenter";
        throw ConfigError(msg.str());
    }

    SolverConfig config;
    config.rho = o.rho;
    config.gamma = o.gamma.value_or(SolverConfig::kInfinity);
    config.tolerance = o.tol;
    config.maxIterations = o.maxIter;
    config.selection = parseSelection(o.select, o.shufflePartition);
    config.seed = o.seed;
    config.workers = resolveWorkers(o.workers);
    if (o.stop == "theta")
        config.stoppingRule = StoppingRule::ThetaInfNorm;
    else if (o.stop == "delta")
        config.stoppingRule = StoppingRule::BarycenterDelta;
    else
        throw UsageError("--stop must be 'theta' or 'delta'");

    std::optional<MultiPlan> initial;
    if (!o.resume.empty())
        initial = loadCheckpoint(o.resume);
    MamSolver solver(instance, config, std::move(initial));
    const SolveReport report = solver.run();

    const bool failed = report.termination == Termination::NumericFailure;
    if (!o.trace.empty())
        writeTrace(o.trace, report);
    double clipped = 0.0;
    std::optional<double> objective;
    if (!failed) {
        std::vector<double> weights;
        std::tie(weights, clipped) = clipNegative(report.barycenter);
        const DiscreteMeasure barycenter(instance.support(), std::move(weights));
        writeMeasureCsv(o.outFile, barycenter);
        if (!o.checkpoint.empty())
            saveCheckpoint(o.checkpoint, solver.plan());
        if (!o.render.empty())
            writePgm(o.render, renderImage(barycenter));
        objective = tryObjective(report.barycenter, instance);
    }

    json manifest;
    manifest["inputs"] = files;
    manifest["support"] = o.support.empty() ? json(nullptr) : json(o.support);
    manifest["config"] = {
        {"rho", solver.config().rho},
        {"gamma", finiteOrNull(config.gamma)},
        {"tolerance", config.tolerance},
        {"max_iterations", config.maxIterations},
        {"selection", o.select},
        {"shuffle_partition", o.shufflePartition},
        {"seed", config.seed},
        {"workers", config.workers},
        {"stopping_rule", o.stop},
        {"exponent", o.exponent},
        {"normalized", !o.raw},
        {"resumed_from", o.resume.empty() ? json(nullptr) : json(o.resume)},
    };
    manifest["build"] = MAM_BUILD_STAMP;
    manifest["instance"] = {
        {"support_size", instance.rows()},
        {"measures", instance.measures()},
        {"columns_before_pruning", full.totalColumns()},
        {"columns_after_pruning", instance.totalColumns()},
        {"balanced", instance.balanced()},
    };
    manifest["wall_seconds"] = report.wallSeconds;
    manifest["iterations"] = report.iterations;
    manifest["termination"] = terminationName(report.termination);
    manifest["final_residual"] = report.trace.empty() ? json(nullptr) : finiteOrNull(report.trace.back().residual);
    manifest["final_dist_l"] = report.trace.empty() ? json(nullptr) : finiteOrNull(report.trace.back().distL);
    manifest["objective"] = objective ? json(*objective) : json(nullptr);
    manifest["clipped_negative_mass"] = clipped;
    manifest["output"] = failed ? json(nullptr) : json(o.outFile);
    const fs::path manifestPath = o.manifest.empty() ? fs::path(o.outFile + ".manifest.json")
                                                     : fs::path(o.manifest);
    std::ofstream mf(manifestPath);
    if (!mf)
        throw IoError("cannot write " + manifestPath.string());
    mf << manifest.dump(2) << '\n';

    out << terminationName(report.termination) << " after " << report.iterations << " iterations ("
        << std::setprecision(3) << report.wallSeconds << " s)";
    if (objective)
        out << ", objective " << std::setprecision(10) << *objective;
    out << '\n';

    if (failed) {
        err << "numeric failure: " << report.message << '\n';
        return kNumericFailure;
    }
    return report.termination == Termination::Converged ? kOk : kIterationLimit;
}

struct EvalOptions {
    std::string p;
    std::vector<std::string> inputs;
    std::string exact;
    bool oracle = false;
    double exponent = 2.0;
    bool raw = false;
};

ProblemInstance instanceOn(const SupportGrid& support, const std::vector<std::string>& patterns,
                           bool raw, double exponent)
{
    auto inputs = loadInputs(expandInputs(patterns), raw);
    const std::size_t measures = inputs.size();
    return pruneZeroColumns(ProblemInstance::fromMeasures(support, std::move(inputs),
                                                          uniformWeights(measures), exponent))
        .instance;
}

int cmdEval(const EvalOptions& o, std::ostream& out)
{
    if (!o.exact.empty() && o.oracle)
        throw UsageError("--exact and --oracle are mutually exclusive");
    const DiscreteMeasure p = readMeasureCsv(o.p);
    const ProblemInstance instance = instanceOn(p.support(), o.inputs, o.raw, o.exponent);
    const double value = barycenterObjective(p.weights(), instance);
    out << std::setprecision(17) << "objective " << value << '\n';

    std::optional<double> reference;
    if (!o.exact.empty()) {
        const DiscreteMeasure exact = readMeasureCsv(o.exact);
        if (!(exact.support() == p.support()))
            throw UsageError("exact barycenter lives on a different support");
        reference = barycenterObjective(exact.weights(), instance);
    } else if (o.oracle) {
        const auto lp = solveBarycenterLP(instance);
        if (lp.status != LpStatus::Optimal)
            throw UsageError("barycenter LP is infeasible for these inputs");
        reference = lp.value;
    }
    if (reference) {
        out << "reference " << *reference << '\n';
        out << "gap " << value - *reference << '\n';
    }
    return kOk;
}

struct OracleOptions {
    std::vector<std::string> inputs;
    std::string support;
    double exponent = 2.0;
    bool raw = false;
    std::string outFile;
};

int cmdOracle(const OracleOptions& o, std::ostream& out)
{
    auto inputs = loadInputs(expandInputs(o.inputs), o.raw);
    SupportGrid support = resolveSupport(o.support, inputs);
    const std::size_t measures = inputs.size();
    const ProblemInstance instance =
        pruneZeroColumns(ProblemInstance::fromMeasures(std::move(support), std::move(inputs),
                                                       uniformWeights(measures), o.exponent))
            .instance;
    const auto lp = solveBarycenterLP(instance);
    if (lp.status != LpStatus::Optimal)
        throw UsageError("barycenter LP is infeasible (unbalanced inputs?)");
    writeMeasureCsv(o.outFile, DiscreteMeasure(instance.support(), lp.barycenter));
    out << std::setprecision(17) << "objective " << lp.value << '\n';
    return kOk;
}

int cmdRender(const std::string& pFile, const std::string& outFile)
{
    writePgm(outFile, renderImage(readMeasureCsv(pFile)));
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Fixed-support Wasserstein barycenters by the method of averaged marginals"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* genCmd = app.add_subcommand("gen", "Generate synthetic nested-ellipse images");
    genCmd->add_option("--kind", gen.kind, "ellipses or quartered")->capture_default_str();
    genCmd->add_option("--n", gen.count, "Number of images")->capture_default_str();
    genCmd->add_option("--ellipses", gen.ellipses, "Nested ellipses per image")
        ->check(CLI::Range(1, 6))
        ->capture_default_str();
    genCmd->add_option("--side", gen.side, "Image side in pixels")
        ->check(CLI::Range(8, 4096))
        ->capture_default_str();
    genCmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    genCmd->add_option("--out", gen.outDir, "Output directory")->required();

    SolveOptions sol;
    double gammaValue = 0.0;
    auto* solveCmd = app.add_subcommand("solve", "Compute a barycenter");
    solveCmd->add_option("--inputs", sol.inputs, "Input files or glob patterns")->required();
    solveCmd->add_option("--support", sol.support, "Barycenter support (measure CSV or image)");
    solveCmd->add_option("--rho", sol.rho, "Prox parameter (0: 1/mean positive cost)")
        ->check(CLI::NonNegativeNumber);
    auto* gammaOpt = solveCmd->add_option("--gamma", gammaValue, "Unbalanced penalty (omit for balanced)")
                         ->check(CLI::NonNegativeNumber);
    solveCmd->add_option("--tol", sol.tol, "Stopping tolerance")->capture_default_str();
    solveCmd->add_option("--max-iter", sol.maxIter, "Iteration cap")->capture_default_str();
    solveCmd->add_option("--select", sol.select, "all or random:<nb>")->capture_default_str();
    solveCmd->add_flag("--shuffle-partition", sol.shufflePartition,
                       "Shuffle measures once before forming random buckets");
    solveCmd->add_option("--seed", sol.seed, "Seed for randomized selection");
    solveCmd->add_option("--workers", sol.workers, "Worker threads (default MAM_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    solveCmd->add_option("--stop", sol.stop, "theta (plan residual) or delta (barycenter change)")
        ->capture_default_str();
    solveCmd->add_option("--exponent", sol.exponent, "Ground cost exponent")->capture_default_str();
    solveCmd->add_flag("--raw", sol.raw, "Do not normalize image intensities");
    solveCmd->add_option("--trace", sol.trace, "Trace CSV output");
    solveCmd->add_option("--render", sol.render, "PGM render of the barycenter (grid supports)");
    solveCmd->add_option("--checkpoint", sol.checkpoint, "Write the final plan state here");
    solveCmd->add_option("--resume", sol.resume, "Start from a checkpoint");
    solveCmd->add_option("--manifest", sol.manifest, "Run manifest path (default <out>.manifest.json)");
    solveCmd->add_option("--out", sol.outFile, "Barycenter CSV")->required();

    EvalOptions ev;
    auto* evalCmd = app.add_subcommand("eval", "Evaluate a barycenter objective and gap");
    evalCmd->add_option("--p", ev.p, "Barycenter CSV")->required();
    evalCmd->add_option("--inputs", ev.inputs, "Input files or glob patterns")->required();
    evalCmd->add_option("--exact", ev.exact, "Reference barycenter CSV");
    evalCmd->add_flag("--oracle", ev.oracle, "Solve the exact LP as reference");
    evalCmd->add_option("--exponent", ev.exponent, "Ground cost exponent")->capture_default_str();
    evalCmd->add_flag("--raw", ev.raw, "Do not normalize image intensities");

    OracleOptions orc;
    auto* oracleCmd = app.add_subcommand("oracle", "Exact barycenter by linear programming");
    oracleCmd->add_option("--inputs", orc.inputs, "Input files or glob patterns")->required();
    oracleCmd->add_option("--support", orc.support, "Barycenter support (measure CSV or image)");
    oracleCmd->add_option("--exponent", orc.exponent, "Ground cost exponent")->capture_default_str();
    oracleCmd->add_flag("--raw", orc.raw, "Do not normalize image intensities");
    oracleCmd->add_option("--out", orc.outFile, "Barycenter CSV")->required();

    std::string renderIn;
    std::string renderOut;
    auto* renderCmd = app.add_subcommand("render", "Render a grid barycenter as PGM");
    renderCmd->add_option("--p", renderIn, "Barycenter CSV")->required();
    renderCmd->add_option("--out", renderOut, "Output PGM")->required();

    std::vector<std::string> argv{"mam"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::vector<const char*> cargv;
    for (const auto& a : argv)
        cargv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        if (*genCmd)
            return cmdGenerate(gen, out);
        if (*solveCmd) {
            if (gammaOpt->count() > 0)
                sol.gamma = gammaValue;
            return cmdSolve(sol, out, err);
        }
        if (*evalCmd)
            return cmdEval(ev, out);
        if (*oracleCmd)
            return cmdOracle(orc, out);
        if (*renderCmd)
            return cmdRender(renderIn, renderOut);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InstanceError& e) {
        err << "invalid instance: " << e.what() << '\n';
        return kConfigError;
    } catch (const OracleError& e) {
        err << "oracle error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    }
    return kConfigError;
}

}  // namespace mam::cli
