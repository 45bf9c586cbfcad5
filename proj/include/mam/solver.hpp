#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mam/measures.hpp"
#include "mam/projections.hpp"

namespace mam {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class StoppingRule {
    ThetaInfNorm,      // ||theta^{k+1} - theta^k||_inf <= tol
    BarycenterDelta,   // ||p^{k+1} - p^k||_2 <= tol (heuristic)
};

/// Which measures are updated at each iteration.
struct Selection {
    enum class Kind { AllMeasures, RandomPartition };

    Kind kind = Kind::AllMeasures;
    /// Number of buckets for RandomPartition.
    std::size_t buckets = 1;
    /// Shuffle measures once before cutting contiguous buckets.
    bool shufflePartition = false;

    static Selection all() { return {}; }
    static Selection random(std::size_t nb, bool shuffle = false)
    {
        return {Kind::RandomPartition, nb, shuffle};
    }
};

struct SolverConfig {
    static constexpr double kInfinity = std::numeric_limits<double>::infinity();

    /// Prox parameter; 0 selects the default 1 / mean(positive costs).
    double rho = 0.0;
    /// Penalty on dist_L; infinity for balanced problems.
    double gamma = kInfinity;
    double tolerance = 1e-6;
    std::size_t maxIterations = 100000;
    Selection selection;
    std::uint64_t seed = 0;
    StoppingRule stoppingRule = StoppingRule::ThetaInfNorm;
    std::size_t workers = 1;
    /// Rows kept verbatim in the trace before geometric thinning starts.
    std::size_t traceDenseRows = 10000;
};

/// rho used for a given instance when config.rho == 0.
double defaultRho(const ProblemInstance& instance);

enum class Termination { Converged, IterationLimit, NumericFailure };

std::string terminationName(Termination t);

struct TraceRow {
    std::size_t iteration = 0;
    double t = 1.0;
    double distL = 0.0;
    double residual = 0.0;
    double mass = 0.0;
    double seconds = 0.0;
};

struct SolveReport {
    std::vector<double> barycenter;
    std::size_t iterations = 0;
    Termination termination = Termination::IterationLimit;
    std::vector<TraceRow> trace;
    double wallSeconds = 0.0;
    double rho = 0.0;
    double gamma = 0.0;
    std::string message;
};

/// Product plan theta^(m)_rs = q^(m)_s / R.
MultiPlan initialState(const ProblemInstance& instance);

/// Damping t of the prox of gamma * dist_L: 1 when rho * dist <= gamma,
/// gamma / (rho * dist) otherwise.
double stepDamping(double distL, double rho, double gamma);

/// One Step 2 + Step 3 pass over slab m. Every column is replaced by
/// Proj_{Delta(q_s)}(theta_s + 2t(p - p^(m))/S - d_s/rho) - t(p - p^(m))/S and
/// the cached marginal refreshed. Returns max |theta^{k+1} - theta^k| over the slab.
///
/// scratch must hold at least 3 * rows doubles.
double updatePlan(std::size_t m, MultiPlan& theta, std::span<const double> p, double t,
                  double rho, const CostTensor& cost, std::span<const double> q,
                  std::span<double> scratch);

/// Stopping test on two consecutive states. ThetaInfNorm compares slabs that
/// appear in `updated` (all slabs when empty); BarycenterDelta compares p.
bool stoppingTest(const MultiPlan& prev, const MultiPlan& next,
                  std::span<const double> pPrev, std::span<const double> pNext,
                  const SolverConfig& config, std::span<const std::size_t> updated = {});

/// Contiguous buckets of measure indices, optionally shuffled first.
std::vector<std::vector<std::size_t>> makePartition(std::size_t measures,
                                                    const Selection& selection,
                                                    std::uint64_t seed);

/// Douglas-Rachford iteration over averaged marginals.
///
/// The solver owns the multi-plan state; run() may be called once, after
/// which plan() holds the final state for checkpointing or inspection.
class MamSolver {
public:
    MamSolver(const ProblemInstance& instance, SolverConfig config,
              std::optional<MultiPlan> initial = std::nullopt);

    SolveReport run();

    const MultiPlan& plan() const { return theta_; }
    const SolverConfig& config() const { return config_; }
    const AveragingWeights& averagingWeights() const { return a_; }
    const std::vector<std::vector<std::size_t>>& partition() const { return partition_; }

private:
    std::size_t pickBucket(std::size_t iteration) const;

    const ProblemInstance& instance_;
    SolverConfig config_;
    MultiPlan theta_;
    AveragingWeights a_;
    std::vector<std::vector<std::size_t>> partition_;
    std::vector<double> bucketCdf_;
};

SolveReport solve(const ProblemInstance& instance, const SolverConfig& config);

/// Flat little-endian checkpoint: magic, shapes, slabs, marginals.
void saveCheckpoint(const std::filesystem::path& path, const MultiPlan& theta);
MultiPlan loadCheckpoint(const std::filesystem::path& path);

}  // namespace mam
