#include "mam/solver.hpp"

#include <algorithm>
#include <cassert>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "mam/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mam {

std::string terminationName(Termination t)
{
    switch (t) {
    case Termination::Converged: return "converged";
    case Termination::IterationLimit: return "iteration_limit";
    case Termination::NumericFailure: return "numeric_failure";
    }
    return "unknown";
}

double defaultRho(const ProblemInstance& instance)
{
    const double mean = instance.cost().meanPositive();
    return mean > 0.0 ? 1.0 / mean : 1.0;
}

MultiPlan initialState(const ProblemInstance& instance)
{
    const std::size_t rows = instance.rows();
    std::vector<std::size_t> cols(instance.measures());
    std::vector<std::vector<double>> slabs(instance.measures());
    const double invR = 1.0 / static_cast<double>(rows);
    for (std::size_t m = 0; m < instance.measures(); ++m) {
        const auto& q = instance.input(m).weights();
        cols[m] = q.size();
        slabs[m].resize(rows * q.size());
        for (std::size_t s = 0; s < q.size(); ++s)
            std::fill_n(slabs[m].begin() + static_cast<std::ptrdiff_t>(s * rows), rows, q[s] * invR);
    }
    return MultiPlan(rows, std::move(cols), std::move(slabs));
}

double stepDamping(double distL, double rho, double gamma)
{
    if (std::isinf(gamma))
        return 1.0;
    const double scaled = rho * distL;
    if (scaled <= gamma)
        return 1.0;
    return gamma / scaled;
}

double updatePlan(std::size_t m, MultiPlan& theta, std::span<const double> p, double t, double rho,
                  const CostTensor& cost, std::span<const double> q, std::span<double> scratch)
{
    const std::size_t rows = theta.rows();
    const std::size_t cols = theta.cols(m);
    std::span<double> shift = scratch.subspan(0, rows);
    std::span<double> w = scratch.subspan(rows, rows);
    std::span<double> aux = scratch.subspan(2 * rows, rows);

    const auto& pm = theta.marginal(m);
    const double invS = 1.0 / static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r)
        shift[r] = t * (p[r] - pm[r]) * invS;
    const double costScale = cost.scale(m) / rho;

    std::vector<double> marginal(rows, 0.0);
    double residual = 0.0;
    for (std::size_t s = 0; s < cols; ++s) {
        std::span<double> col = theta.column(m, s);
        std::span<const double> d = cost.baseColumn(m, s);
        for (std::size_t r = 0; r < rows; ++r)
            w[r] = col[r] + 2.0 * shift[r] - costScale * d[r];
        projectSimplexUnchecked(w, q[s], w, aux);
        for (std::size_t r = 0; r < rows; ++r) {
            const double next = w[r] - shift[r];
            residual = std::max(residual, std::abs(next - col[r]));
            col[r] = next;
            marginal[r] += next;
        }
    }
    theta.setMarginal(m, std::move(marginal));
    return residual;
}

bool stoppingTest(const MultiPlan& prev, const MultiPlan& next, std::span<const double> pPrev,
                  std::span<const double> pNext, const SolverConfig& config,
                  std::span<const std::size_t> updated)
{
    if (config.stoppingRule == StoppingRule::BarycenterDelta) {
        if (pPrev.size() != pNext.size())
            throw std::invalid_argument("barycenter iterates differ in length");
        double sq = 0.0;
        for (std::size_t r = 0; r < pPrev.size(); ++r) {
            const double d = pNext[r] - pPrev[r];
            sq += d * d;
        }
        return std::sqrt(sq) <= config.tolerance;
    }
    if (!prev.sameShape(next))
        throw std::invalid_argument("multi-plans have different shapes");
    auto slabResidual = [&](std::size_t m) {
        auto a = prev.slab(m);
        auto b = next.slab(m);
        double res = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            res = std::max(res, std::abs(b[i] - a[i]));
        return res;
    };
    double residual = 0.0;
    if (updated.empty()) {
        for (std::size_t m = 0; m < prev.measures(); ++m)
            residual = std::max(residual, slabResidual(m));
    } else {
        for (std::size_t m : updated)
            residual = std::max(residual, slabResidual(m));
    }
    return residual <= config.tolerance;
}

std::vector<std::vector<std::size_t>> makePartition(std::size_t measures, const Selection& selection,
                                                    std::uint64_t seed)
{
    std::vector<std::size_t> order(measures);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (selection.kind == Selection::Kind::AllMeasures)
        return {order};
    const std::size_t nb = selection.buckets;
    if (nb == 0 || nb > measures)
        throw ConfigError("bucket count must be in [1, " + std::to_string(measures) + "], got " +
                          std::to_string(nb));
    if (selection.shufflePartition) {
        CounterRng rng(seed ^ 0x5eed5a17ULL);
        for (std::size_t i = measures; i > 1; --i)
            std::swap(order[i - 1], order[rng.next() % i]);
    }
    std::vector<std::vector<std::size_t>> buckets(nb);
    for (std::size_t i = 0; i < nb; ++i)
        buckets[i].assign(order.begin() + static_cast<std::ptrdiff_t>(i * measures / nb),
                          order.begin() + static_cast<std::ptrdiff_t>((i + 1) * measures / nb));
    return buckets;
}

MamSolver::MamSolver(const ProblemInstance& instance, SolverConfig config,
                     std::optional<MultiPlan> initial)
    : instance_(instance), config_(std::move(config))
{
    if (config_.rho == 0.0)
        config_.rho = defaultRho(instance_);
    if (!(config_.rho > 0.0) || !std::isfinite(config_.rho))
        throw ConfigError("rho must be positive and finite");
    if (!(config_.gamma >= 0.0))
        throw ConfigError("gamma must be nonnegative");
    if (std::isinf(config_.gamma) && !instance_.balanced())
        throw ConfigError("input measures have unequal total masses; a finite gamma is required "
                          "for unbalanced barycenters");
    if (!(config_.tolerance > 0.0))
        throw ConfigError("tolerance must be positive");
    if (config_.maxIterations == 0)
        throw ConfigError("maxIterations must be positive");
    if (config_.workers == 0)
        throw ConfigError("workers must be positive");

    if (initial) {
        std::vector<std::size_t> cols(instance_.measures());
        for (std::size_t m = 0; m < cols.size(); ++m)
            cols[m] = instance_.cols(m);
        if (initial->rows() != instance_.rows() || initial->colCounts() != cols)
            throw ConfigError("initial multi-plan does not match the instance shape");
        theta_ = std::move(*initial);
    } else {
        theta_ = initialState(instance_);
    }
    a_ = AveragingWeights(theta_.colCounts());

    partition_ = makePartition(instance_.measures(), config_.selection, config_.seed);
    const auto& alpha = instance_.cost().alpha();
    double acc = 0.0;
    for (const auto& bucket : partition_) {
        for (std::size_t m : bucket)
            acc += alpha[m];
        bucketCdf_.push_back(acc);
    }
}

std::size_t MamSolver::pickBucket(std::size_t iteration) const
{
    if (partition_.size() == 1)
        return 0;
    const double u = counterUniform(config_.seed, iteration) * bucketCdf_.back();
    const auto it = std::upper_bound(bucketCdf_.begin(), bucketCdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - bucketCdf_.begin()),
                                 partition_.size() - 1);
}

namespace {

bool keepTraceRow(std::size_t k, std::size_t dense)
{
    if (k < dense || dense == 0)
        return true;
    const std::size_t octave = std::bit_width(k / dense);
    const std::size_t stride = std::size_t{1} << octave;
    return k % stride == 0;
}

bool allFinite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

SolveReport MamSolver::run()
{
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

    SolveReport report;
    report.rho = config_.rho;
    report.gamma = config_.gamma;

    const std::size_t rows = theta_.rows();
    const int workers = static_cast<int>(config_.workers);
    std::vector<std::vector<double>> scratch(config_.workers, std::vector<double>(3 * rows));
    const CostTensor& cost = instance_.cost();
    const bool randomized = partition_.size() > 1;
    std::vector<double> bucketResidual(partition_.size(), std::numeric_limits<double>::infinity());
    std::vector<double> slabResidual(instance_.measures(), 0.0);

    std::vector<double> p = averageMarginals(theta_, a_);
    report.termination = Termination::IterationLimit;
    std::size_t k = 0;
    TraceRow last;
    bool lastKept = true;
    for (; k < config_.maxIterations; ++k) {
        const double dist = distBalanced(theta_, p);
        const double t = stepDamping(dist, config_.rho, config_.gamma);

        const std::size_t bucket = pickBucket(k);
        const auto& active = partition_[bucket];
        const auto count = static_cast<std::ptrdiff_t>(active.size());
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1) if (workers > 1)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            const std::size_t m = active[static_cast<std::size_t>(i)];
#ifdef _OPENMP
            const std::size_t tid = static_cast<std::size_t>(omp_get_thread_num());
#else
            const std::size_t tid = 0;
#endif
            slabResidual[m] = updatePlan(m, theta_, p, t, config_.rho, cost,
                                         instance_.input(m).weights(), scratch[tid]);
        }
        double residual = 0.0;
        bool finite = true;
        for (std::size_t m : active) {
            finite = finite && std::isfinite(slabResidual[m]);
            residual = std::max(residual, slabResidual[m]);
        }

        assert(!(theta_.marginalCacheError() > 1e-9));
        std::vector<double> pNext = averageMarginals(theta_, a_);
        last = TraceRow{k, t, dist, residual, std::accumulate(p.begin(), p.end(), 0.0), elapsed()};
        lastKept = keepTraceRow(k, config_.traceDenseRows);
        if (lastKept)
            report.trace.push_back(last);

        if (!finite || !allFinite(pNext)) {
            report.termination = Termination::NumericFailure;
            report.message = "non-finite value in iterate " + std::to_string(k);
            ++k;
            break;
        }

        bool converged = false;
        if (config_.stoppingRule == StoppingRule::BarycenterDelta) {
            double sq = 0.0;
            for (std::size_t r = 0; r < rows; ++r)
                sq += (pNext[r] - p[r]) * (pNext[r] - p[r]);
            converged = std::sqrt(sq) <= config_.tolerance;
        } else if (randomized) {
            // Only updated slabs are measured; every bucket's latest value must pass.
            bucketResidual[bucket] = residual;
            converged = *std::max_element(bucketResidual.begin(), bucketResidual.end()) <=
                        config_.tolerance;
        } else {
            converged = residual <= config_.tolerance;
        }
        p = std::move(pNext);
        if (converged) {
            report.termination = Termination::Converged;
            ++k;
            break;
        }
    }
    if (!lastKept)
        report.trace.push_back(last);
    report.iterations = k;
    report.barycenter = std::move(p);
    report.wallSeconds = elapsed();
    return report;
}

SolveReport solve(const ProblemInstance& instance, const SolverConfig& config)
{
    MamSolver solver(instance, config);
    return solver.run();
}

}  // namespace mam
