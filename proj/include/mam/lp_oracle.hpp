#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "mam/measures.hpp"

namespace mam {

/// min c.x s.t. A x = b, x >= 0 with A dense row-major.
struct StandardFormLP {
    std::size_t rows = 0;
    std::size_t vars = 0;
    std::vector<double> A;
    std::vector<double> b;
    std::vector<double> c;

    double& a(std::size_t i, std::size_t j) { return A[i * vars + j]; }
    double a(std::size_t i, std::size_t j) const { return A[i * vars + j]; }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0;
    std::vector<double> x;
    std::vector<double> duals;
    /// max of duality gap, dual infeasibility and |x_j * reduced cost_j|.
    double certificateResidual = 0.0;
    std::size_t pivots = 0;
};

/// Two-phase dense primal simplex with Bland's rule. Redundant equality rows
/// are dropped after phase 1; phase-1 optimum above 1e-9 means infeasible.
LpResult solveLp(const StandardFormLP& lp);

/// Desk-scale caps.
inline constexpr std::size_t kMaxOtVariables = 10000;
inline constexpr std::size_t kMaxBarycenterVariables = 100000;

class OracleError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct OtResult {
    double value = 0.0;
    /// Column-major R x S plan.
    std::vector<double> plan;
    double certificateResidual = 0.0;
};

/// Exact transportation LP min <cost, pi> with row sums p and column sums q.
/// cost is column-major R x S. Requires |sum p - sum q| <= 1e-9.
OtResult solveOT(std::span<const double> p, std::span<const double> q,
                 std::span<const double> cost);

struct BarycenterLpResult {
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0;
    std::vector<double> barycenter;
    std::vector<std::vector<double>> plans;
    double certificateResidual = 0.0;
};

/// Extensive barycenter LP over balanced multi-plans. Unbalanced instances
/// come back with status Infeasible.
BarycenterLpResult solveBarycenterLP(const ProblemInstance& instance);

/// Objective sum_m OT_{d^(m)}(p, q^(m)) (alpha is folded into the costs).
/// Entries of p down to -1e-7 * mass are clipped to zero and p is rescaled
/// onto the common input mass (mismatch up to 1e-7 * mass); anything further
/// off is rejected with OracleError.
double barycenterObjective(std::span<const double> p, const ProblemInstance& instance);

/// objective(p) - objective(pExact).
double objectiveGap(std::span<const double> p, const ProblemInstance& instance,
                    std::span<const double> pExact);

}  // namespace mam
