#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "instances.hpp"
#include "mam/lp_oracle.hpp"

using namespace mam;
using mam::testing::dirac;
using mam::testing::goldenInstance;
using mam::testing::lineSupport;

namespace {

// Solves the square system A x = b by Gaussian elimination with partial
// pivoting. Returns false when A is singular.
bool solveSquare(std::vector<std::vector<double>> A, std::vector<double> b, std::vector<double>& x)
{
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col]))
                piv = r;
        if (std::abs(A[piv][col]) < 1e-12)
            return false;
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col)
                continue;
            const double f = A[r][col] / A[col][col];
            for (std::size_t c = col; c < n; ++c)
                A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    x.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = b[i] / A[i][i];
    return true;
}

// Minimum over every basic feasible solution of the transportation polytope.
double vertexEnumerationOT(const std::vector<double>& p, const std::vector<double>& q,
                           const std::vector<double>& cost)
{
    const std::size_t R = p.size();
    const std::size_t S = q.size();
    const std::size_t vars = R * S;
    const std::size_t rank = R + S - 1;
    // Row sums, then the first S - 1 column sums (the last one is implied).
    std::vector<std::vector<double>> rows(rank, std::vector<double>(vars, 0.0));
    std::vector<double> rhs(rank);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t s = 0; s < S; ++s)
            rows[r][s * R + r] = 1.0;
        rhs[r] = p[r];
    }
    for (std::size_t s = 0; s + 1 < S; ++s) {
        for (std::size_t r = 0; r < R; ++r)
            rows[R + s][s * R + r] = 1.0;
        rhs[R + s] = q[s];
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 0; mask < (std::size_t{1} << vars); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != rank)
            continue;
        std::vector<std::size_t> basis;
        for (std::size_t j = 0; j < vars; ++j)
            if (mask >> j & 1)
                basis.push_back(j);
        std::vector<std::vector<double>> A(rank, std::vector<double>(rank));
        for (std::size_t i = 0; i < rank; ++i)
            for (std::size_t k = 0; k < rank; ++k)
                A[i][k] = rows[i][basis[k]];
        std::vector<double> x;
        if (!solveSquare(A, rhs, x))
            continue;
        if (std::any_of(x.begin(), x.end(), [](double v) { return v < -1e-12; }))
            continue;
        double value = 0.0;
        for (std::size_t k = 0; k < rank; ++k)
            value += cost[basis[k]] * x[k];
        best = std::min(best, value);
    }
    return best;
}

std::vector<double> randomSimplex(CounterRng& rng, std::size_t n)
{
    std::vector<double> v(n);
    for (double& x : v)
        x = rng.uniform(0.0, 1.0);
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    for (double& x : v)
        x /= s;
    return v;
}

}  // namespace

TEST_CASE("tiny standard-form LP")
{
    // min -x - y  s.t. x + y + s1 = 4, x + 3y + s2 = 6.
    StandardFormLP lp{2, 4, {1, 1, 1, 0, 1, 3, 0, 1}, {4, 6}, {-1, -1, 0, 0}};
    const auto res = solveLp(lp);
    REQUIRE(res.status == LpStatus::Optimal);
    CHECK(res.value == doctest::Approx(-4.0));
    CHECK(res.certificateResidual <= 1e-9);

    StandardFormLP unbounded{1, 2, {1, -1}, {1}, {-1, 0}};
    CHECK(solveLp(unbounded).status == LpStatus::Unbounded);

    StandardFormLP infeasible{2, 1, {1, 1}, {1, 2}, {0}};
    CHECK(solveLp(infeasible).status == LpStatus::Infeasible);
}

TEST_CASE("redundant rows are dropped")
{
    // Three copies of x + y = 1; minimum of 2x + y is 1.
    StandardFormLP lp{3, 2, {1, 1, 1, 1, 2, 2}, {1, 1, 2}, {2, 1}};
    const auto res = solveLp(lp);
    REQUIRE(res.status == LpStatus::Optimal);
    CHECK(res.value == doctest::Approx(1.0));
    CHECK(res.certificateResidual <= 1e-9);
}

TEST_CASE("OT examples")
{
    const std::vector<double> p{0.2, 0.3, 0.5};
    std::vector<double> cost(9);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t r = 0; r < 3; ++r)
            cost[s * 3 + r] = std::abs(static_cast<double>(r) - static_cast<double>(s));
    const auto same = solveOT(p, p, cost);
    CHECK(same.value == doctest::Approx(0.0));
    for (std::size_t r = 0; r < 3; ++r)
        CHECK(same.plan[r * 3 + r] == doctest::Approx(p[r]));

    const std::vector<double> d0{1, 0, 0};
    const std::vector<double> d2{0, 0, 1};
    std::vector<double> sq(9);
    for (std::size_t i = 0; i < 9; ++i)
        sq[i] = cost[i] * cost[i];
    CHECK(solveOT(d0, d2, sq).value == doctest::Approx(4.0));
}

TEST_CASE("OT matches vertex enumeration on random 3x3 instances")
{
    CounterRng rng(61);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t R = 1 + trial % 3;
        const std::size_t S = 1 + (trial / 3) % 3;
        const auto p = randomSimplex(rng, R);
        const auto q = randomSimplex(rng, S);
        std::vector<double> cost(R * S);
        for (double& c : cost)
            c = rng.uniform();
        const auto res = solveOT(p, q, cost);
        CHECK(res.value == doctest::Approx(vertexEnumerationOT(p, q, cost)).epsilon(1e-10));
        CHECK(res.certificateResidual <= 1e-9);
        for (std::size_t r = 0; r < R; ++r) {
            double row = 0.0;
            for (std::size_t s = 0; s < S; ++s) {
                CHECK(res.plan[s * R + r] >= 0.0);
                row += res.plan[s * R + r];
            }
            CHECK(row == doctest::Approx(p[r]));
        }
    }
}

TEST_CASE("OT validation")
{
    const std::vector<double> p{0.5, 0.5};
    const std::vector<double> q{0.7};
    const std::vector<double> cost{0.0, 1.0};
    CHECK_THROWS_AS(solveOT(p, q, cost), OracleError);
    const std::vector<double> big(101, 1.0 / 101);
    const std::vector<double> bigCost(101 * 101, 0.0);
    CHECK_THROWS_AS(solveOT(big, big, bigCost), OracleError);
    const std::vector<double> neg{1.5, -0.5};
    CHECK_THROWS_AS(solveOT(neg, std::vector<double>{1.0}, cost), OracleError);
}

TEST_CASE("barycenter LP on the golden instance")
{
    const auto res = solveBarycenterLP(goldenInstance());
    REQUIRE(res.status == LpStatus::Optimal);
    CHECK(res.value == doctest::Approx(1.0));
    CHECK(res.barycenter[0] == doctest::Approx(0.0));
    CHECK(res.barycenter[1] == doctest::Approx(1.0));
    CHECK(res.barycenter[2] == doctest::Approx(0.0));
    CHECK(res.certificateResidual <= 1e-9);
}

TEST_CASE("barycenter LP of identical measures")
{
    const SupportGrid g = SupportGrid::pixelGrid(2, 2);
    const DiscreteMeasure nu(g, {0.1, 0.4, 0.3, 0.2});
    const auto inst = ProblemInstance::fromMeasures(g, {nu, nu, nu}, uniformWeights(3));
    const auto res = solveBarycenterLP(inst);
    REQUIRE(res.status == LpStatus::Optimal);
    CHECK(res.value == doctest::Approx(0.0));
    for (std::size_t r = 0; r < 4; ++r)
        CHECK(res.barycenter[r] == doctest::Approx(nu.weights()[r]));
}

TEST_CASE("barycenter LP reports unbalanced inputs as infeasible")
{
    const auto inst = ProblemInstance::fromMeasures(lineSupport(2), {dirac(0.0, 1.0), dirac(1.0, 2.0)},
                                                    uniformWeights(2));
    CHECK(solveBarycenterLP(inst).status == LpStatus::Infeasible);
}

TEST_CASE("barycenter LP is a lower bound and is deterministic")
{
    CounterRng rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = mam::testing::randomInstance(rng, 1 + trial % 4, 1 + trial % 3, 4);
        const auto a = solveBarycenterLP(inst);
        REQUIRE(a.status == LpStatus::Optimal);
        CHECK(a.certificateResidual <= 1e-9);
        const auto b = solveBarycenterLP(inst);
        CHECK(a.value == b.value);
        CHECK(a.barycenter == b.barycenter);
        CHECK(barycenterObjective(a.barycenter, inst) == doctest::Approx(a.value).epsilon(1e-9));
        for (int k = 0; k < 5; ++k) {
            const auto p = randomSimplex(rng, inst.rows());
            CHECK(a.value <= barycenterObjective(p, inst) + 1e-12);
        }
    }
}

TEST_CASE("two-atom barycenter LP equals the one-dimensional minimum")
{
    CounterRng rng(71);
    for (int trial = 0; trial < 10; ++trial) {
        const auto inst = mam::testing::randomInstance(rng, 2, 3, 4);
        const auto res = solveBarycenterLP(inst);
        REQUIRE(res.status == LpStatus::Optimal);
        // The objective is convex and piecewise linear in x = p_0.
        auto f = [&](double x) {
            const std::vector<double> p{x, 1.0 - x};
            return barycenterObjective(p, inst);
        };
        double best = std::numeric_limits<double>::infinity();
        double arg = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double x = i / 1000.0;
            if (const double v = f(x); v < best) {
                best = v;
                arg = x;
            }
        }
        double lo = std::max(0.0, arg - 1e-3);
        double hi = std::min(1.0, arg + 1e-3);
        for (int i = 0; i < 100; ++i) {
            const double m1 = lo + (hi - lo) / 3;
            const double m2 = hi - (hi - lo) / 3;
            if (f(m1) < f(m2))
                hi = m2;
            else
                lo = m1;
        }
        best = std::min(best, f(0.5 * (lo + hi)));
        CHECK(std::abs(res.value - best) <= 1e-6);
    }
}

TEST_CASE("objective gap")
{
    const auto inst = goldenInstance();
    const std::vector<double> exact{0, 1, 0};
    const std::vector<double> spread{0.5, 0, 0.5};
    CHECK(objectiveGap(exact, inst, exact) == doctest::Approx(0.0));
    CHECK(objectiveGap(spread, inst, exact) == doctest::Approx(1.0));
    CHECK(barycenterObjective(spread, inst) == doctest::Approx(2.0));

    CounterRng rng(73);
    for (int k = 0; k < 20; ++k) {
        const auto p = randomSimplex(rng, 3);
        CHECK(objectiveGap(p, inst, exact) >= -1e-9);
    }
    const std::vector<double> heavy{0, 2, 0};
    CHECK_THROWS_AS(objectiveGap(heavy, inst, exact), OracleError);
}
