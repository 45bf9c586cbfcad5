#include "mam/lp_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mam {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kReducedCostTol = 1e-11;
constexpr double kPhaseOneTol = 1e-9;

// Dense tableau [B^{-1}A | B^{-1} | B^{-1}b] over the kept rows. The identity
// block started as the artificial columns, so it always holds B^{-1}.
class Tableau {
public:
    Tableau(const StandardFormLP& lp, const std::vector<double>& sign)
        : n_(lp.vars), m_(lp.rows), width_(lp.vars + lp.rows + 1), t_(lp.rows * width_, 0.0),
          basis_(lp.rows)
    {
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j)
                at(i, j) = sign[i] * lp.a(i, j);
            at(i, n_ + i) = 1.0;
            at(i, width_ - 1) = sign[i] * lp.b[i];
            basis_[i] = n_ + i;
        }
    }

    double& at(std::size_t i, std::size_t j) { return t_[i * width_ + j]; }
    double at(std::size_t i, std::size_t j) const { return t_[i * width_ + j]; }
    double rhs(std::size_t i) const { return at(i, width_ - 1); }
    std::size_t rows() const { return m_; }
    std::size_t vars() const { return n_; }
    const std::vector<std::size_t>& basis() const { return basis_; }

    void pivot(std::size_t row, std::size_t col)
    {
        const double inv = 1.0 / at(row, col);
        double* pr = &t_[row * width_];
        for (std::size_t j = 0; j < width_; ++j)
            pr[j] *= inv;
        pr[col] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == row)
                continue;
            double* pi = &t_[i * width_];
            const double f = pi[col];
            if (f == 0.0)
                continue;
            for (std::size_t j = 0; j < width_; ++j)
                pi[j] -= f * pr[j];
            pi[col] = 0.0;
        }
        basis_[row] = col;
        ++pivots_;
    }

    void dropRow(std::size_t row)
    {
        t_.erase(t_.begin() + static_cast<std::ptrdiff_t>(row * width_),
                 t_.begin() + static_cast<std::ptrdiff_t>((row + 1) * width_));
        basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(row));
        --m_;
    }

    // Bland's rule on cost vector c over the first n_ columns. Returns false
    // when unbounded.
    bool optimize(const std::vector<double>& c)
    {
        std::vector<double> reduced(n_);
        while (true) {
            for (std::size_t j = 0; j < n_; ++j) {
                double d = c[j];
                for (std::size_t i = 0; i < m_; ++i)
                    d -= cost(c, basis_[i]) * at(i, j);
                reduced[j] = d;
            }
            std::size_t entering = n_;
            for (std::size_t j = 0; j < n_; ++j)
                if (reduced[j] < -kReducedCostTol && !isBasic(j)) {
                    entering = j;
                    break;
                }
            if (entering == n_)
                return true;
            std::size_t leaving = m_;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m_; ++i) {
                const double a = at(i, entering);
                if (a <= kPivotTol)
                    continue;
                const double ratio = rhs(i) / a;
                if (leaving == m_) {
                    best = ratio;
                    leaving = i;
                    continue;
                }
                // Ties go to the smallest basic index.
                const double slack = 1e-12 * (1.0 + std::abs(best));
                if (ratio < best - slack ||
                    (ratio <= best + slack && basis_[i] < basis_[leaving])) {
                    best = std::min(best, ratio);
                    leaving = i;
                }
            }
            if (leaving == m_)
                return false;
            pivot(leaving, entering);
        }
    }

    std::size_t pivots() const { return pivots_; }

    // c_B^T B^{-1}, one entry per original row.
    std::vector<double> duals(const std::vector<double>& c, std::size_t originalRows) const
    {
        std::vector<double> y(originalRows, 0.0);
        for (std::size_t k = 0; k < originalRows; ++k)
            for (std::size_t i = 0; i < m_; ++i)
                y[k] += cost(c, basis_[i]) * at(i, n_ + k);
        return y;
    }

private:
    bool isBasic(std::size_t j) const
    {
        return std::find(basis_.begin(), basis_.end(), j) != basis_.end();
    }
    // Artificial columns cost zero unless c spans them (phase 1).
    static double cost(const std::vector<double>& c, std::size_t j)
    {
        return j < c.size() ? c[j] : 0.0;
    }

    std::size_t n_;
    std::size_t m_;
    std::size_t width_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
    std::size_t pivots_ = 0;
};

}  // namespace

LpResult solveLp(const StandardFormLP& lp)
{
    if (lp.A.size() != lp.rows * lp.vars || lp.b.size() != lp.rows || lp.c.size() != lp.vars)
        throw std::invalid_argument("LP data does not match its declared shape");
    for (double v : lp.A)
        if (!std::isfinite(v))
            throw std::invalid_argument("LP constraint matrix must be finite");
    std::vector<double> sign(lp.rows, 1.0);
    for (std::size_t i = 0; i < lp.rows; ++i)
        if (lp.b[i] < 0.0)
            sign[i] = -1.0;

    Tableau tab(lp, sign);
    LpResult result;

    // Phase 1: minimize the sum of artificials.
    {
        const std::size_t n = lp.vars;
        std::vector<double> phaseOne(n + lp.rows, 0.0);
        std::fill(phaseOne.begin() + static_cast<std::ptrdiff_t>(n), phaseOne.end(), 1.0);
        tab.optimize(phaseOne);
        double infeasibility = 0.0;
        for (std::size_t i = 0; i < tab.rows(); ++i)
            if (tab.basis()[i] >= n)
                infeasibility += tab.rhs(i);
        if (infeasibility > kPhaseOneTol) {
            result.status = LpStatus::Infeasible;
            result.pivots = tab.pivots();
            return result;
        }
        // Drive zero-level artificials out of the basis; rows where that is
        // impossible are linearly dependent and get dropped.
        for (std::size_t i = 0; i < tab.rows();) {
            if (tab.basis()[i] < n) {
                ++i;
                continue;
            }
            std::size_t col = n;
            for (std::size_t j = 0; j < n; ++j)
                if (std::abs(tab.at(i, j)) > 1e-9) {
                    col = j;
                    break;
                }
            if (col == n) {
                tab.dropRow(i);
                continue;
            }
            tab.pivot(i, col);
            ++i;
        }
    }

    if (!tab.optimize(lp.c)) {
        result.status = LpStatus::Unbounded;
        result.pivots = tab.pivots();
        return result;
    }

    result.status = LpStatus::Optimal;
    result.pivots = tab.pivots();
    result.x.assign(lp.vars, 0.0);
    for (std::size_t i = 0; i < tab.rows(); ++i)
        if (tab.basis()[i] < lp.vars)
            result.x[tab.basis()[i]] = std::max(tab.rhs(i), 0.0);
    result.value = 0.0;
    for (std::size_t j = 0; j < lp.vars; ++j)
        result.value += lp.c[j] * result.x[j];

    result.duals = tab.duals(lp.c, lp.rows);
    for (std::size_t i = 0; i < lp.rows; ++i)
        result.duals[i] *= sign[i];

    double dualObjective = 0.0;
    for (std::size_t i = 0; i < lp.rows; ++i)
        dualObjective += lp.b[i] * result.duals[i];
    double residual = std::abs(result.value - dualObjective);
    for (std::size_t j = 0; j < lp.vars; ++j) {
        double d = lp.c[j];
        for (std::size_t i = 0; i < lp.rows; ++i)
            d -= result.duals[i] * lp.a(i, j);
        residual = std::max(residual, std::max(0.0, -d));
        residual = std::max(residual, std::abs(result.x[j] * d));
    }
    result.certificateResidual = residual;
    return result;
}

OtResult solveOT(std::span<const double> p, std::span<const double> q, std::span<const double> cost)
{
    const std::size_t rows = p.size();
    const std::size_t cols = q.size();
    if (rows == 0 || cols == 0)
        throw OracleError("transport marginals must be nonempty");
    if (cost.size() != rows * cols)
        throw OracleError("cost matrix must be R x S");
    if (rows * cols > kMaxOtVariables)
        throw OracleError("transport problem with " + std::to_string(rows * cols) +
                          " variables exceeds the oracle cap of " + std::to_string(kMaxOtVariables));
    const double mp = std::accumulate(p.begin(), p.end(), 0.0);
    const double mq = std::accumulate(q.begin(), q.end(), 0.0);
    if (std::abs(mp - mq) > 1e-9)
        throw OracleError("marginal masses differ: " + std::to_string(mp) + " vs " + std::to_string(mq));
    for (double v : p)
        if (!(v >= 0.0))
            throw OracleError("row marginal has a negative entry");
    for (double v : q)
        if (!(v >= 0.0))
            throw OracleError("column marginal has a negative entry");

    // Row sums (R rows) and the first S-1 column sums; the last column sum is
    // implied by mass balance.
    StandardFormLP lp;
    lp.vars = rows * cols;
    lp.rows = rows + cols - 1;
    lp.A.assign(lp.rows * lp.vars, 0.0);
    lp.b.resize(lp.rows);
    lp.c.assign(cost.begin(), cost.end());
    for (std::size_t s = 0; s < cols; ++s)
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t j = s * rows + r;
            lp.a(r, j) = 1.0;
            if (s + 1 < cols)
                lp.a(rows + s, j) = 1.0;
        }
    for (std::size_t r = 0; r < rows; ++r)
        lp.b[r] = p[r];
    for (std::size_t s = 0; s + 1 < cols; ++s)
        lp.b[rows + s] = q[s];

    LpResult res = solveLp(lp);
    if (res.status != LpStatus::Optimal)
        throw OracleError("transport LP did not reach optimality");
    return {res.value, std::move(res.x), res.certificateResidual};
}

BarycenterLpResult solveBarycenterLP(const ProblemInstance& instance)
{
    const std::size_t rows = instance.rows();
    const std::size_t measures = instance.measures();
    const std::size_t total = instance.totalColumns();
    if (rows * total > kMaxBarycenterVariables)
        throw OracleError("barycenter LP with " + std::to_string(rows * total) +
                          " variables exceeds the oracle cap of " +
                          std::to_string(kMaxBarycenterVariables));

    std::vector<std::size_t> offset(measures, 0);
    for (std::size_t m = 1; m < measures; ++m)
        offset[m] = offset[m - 1] + rows * instance.cols(m - 1);

    StandardFormLP lp;
    lp.vars = rows * total;
    lp.rows = total + (measures - 1) * rows;
    lp.A.assign(lp.rows * lp.vars, 0.0);
    lp.b.assign(lp.rows, 0.0);
    lp.c.resize(lp.vars);

    std::size_t row = 0;
    for (std::size_t m = 0; m < measures; ++m) {
        const auto& q = instance.input(m).weights();
        for (std::size_t s = 0; s < q.size(); ++s, ++row) {
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t j = offset[m] + s * rows + r;
                lp.a(row, j) = 1.0;
                lp.c[j] = instance.cost().at(m, r, s);
            }
            lp.b[row] = q[s];
        }
    }
    // Row sums of plan 0 equal row sums of every other plan.
    for (std::size_t m = 1; m < measures; ++m)
        for (std::size_t r = 0; r < rows; ++r, ++row) {
            for (std::size_t s = 0; s < instance.cols(0); ++s)
                lp.a(row, offset[0] + s * rows + r) = 1.0;
            for (std::size_t s = 0; s < instance.cols(m); ++s)
                lp.a(row, offset[m] + s * rows + r) = -1.0;
        }

    const LpResult res = solveLp(lp);
    BarycenterLpResult out;
    out.status = res.status;
    if (res.status != LpStatus::Optimal)
        return out;
    out.value = res.value;
    out.certificateResidual = res.certificateResidual;
    out.plans.resize(measures);
    for (std::size_t m = 0; m < measures; ++m)
        out.plans[m].assign(res.x.begin() + static_cast<std::ptrdiff_t>(offset[m]),
                            res.x.begin() + static_cast<std::ptrdiff_t>(offset[m] + rows * instance.cols(m)));
    out.barycenter.assign(rows, 0.0);
    for (std::size_t s = 0; s < instance.cols(0); ++s)
        for (std::size_t r = 0; r < rows; ++r)
            out.barycenter[r] += out.plans[0][s * rows + r];
    return out;
}

namespace {

constexpr double kConformTolerance = 1e-7;

std::vector<double> conformToMass(std::span<const double> p, double target)
{
    std::vector<double> out(p.begin(), p.end());
    const double tol = kConformTolerance * std::max(1.0, target);
    for (double& v : out) {
        if (!std::isfinite(v) || v < -tol)
            throw OracleError("barycenter candidate has a negative entry " + std::to_string(v));
        v = std::max(v, 0.0);
    }
    const double mass = std::accumulate(out.begin(), out.end(), 0.0);
    if (std::abs(mass - target) > tol || !(mass > 0.0))
        throw OracleError("barycenter candidate mass " + std::to_string(mass) +
                          " does not match input mass " + std::to_string(target));
    for (double& v : out)
        v *= target / mass;
    return out;
}

}  // namespace

double barycenterObjective(std::span<const double> p, const ProblemInstance& instance)
{
    if (!instance.balanced())
        throw OracleError("the barycenter objective needs balanced inputs");
    if (p.size() != instance.rows())
        throw OracleError("barycenter candidate length does not match the support");
    const double target = instance.input(0).totalMass();
    const std::vector<double> pc = conformToMass(p, target);
    double total = 0.0;
    for (std::size_t m = 0; m < instance.measures(); ++m) {
        const auto& q = instance.input(m).weights();
        // Rescale q as well so both marginals carry bit-identical mass sums.
        std::vector<double> qc(q.begin(), q.end());
        const double mq = std::accumulate(qc.begin(), qc.end(), 0.0);
        for (double& v : qc)
            v *= target / mq;
        total += solveOT(pc, qc, instance.cost().denseBlock(m)).value;
    }
    return total;
}

double objectiveGap(std::span<const double> p, const ProblemInstance& instance,
                    std::span<const double> pExact)
{
    return barycenterObjective(p, instance) - barycenterObjective(pExact, instance);
}

}  // namespace mam
