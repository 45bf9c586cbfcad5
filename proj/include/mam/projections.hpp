#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mam/measures.hpp"

namespace mam {

/// Multi-plan theta = (theta^(1), ..., theta^(M)). Slab m is a column-major
/// R x S^(m) matrix; marginal(m) caches its row sums p^(m).
///
/// Entries may take any sign during the splitting iterations.
class MultiPlan {
public:
    MultiPlan() = default;
    MultiPlan(std::size_t rows, std::vector<std::size_t> cols);
    /// Takes ownership of the slabs and computes the marginals.
    MultiPlan(std::size_t rows, std::vector<std::size_t> cols,
              std::vector<std::vector<double>> slabs);

    std::size_t rows() const { return rows_; }
    std::size_t measures() const { return cols_.size(); }
    std::size_t cols(std::size_t m) const { return cols_[m]; }
    const std::vector<std::size_t>& colCounts() const { return cols_; }

    std::span<double> slab(std::size_t m) { return slabs_[m]; }
    std::span<const double> slab(std::size_t m) const { return slabs_[m]; }
    std::span<double> column(std::size_t m, std::size_t s)
    {
        return {slabs_[m].data() + s * rows_, rows_};
    }
    std::span<const double> column(std::size_t m, std::size_t s) const
    {
        return {slabs_[m].data() + s * rows_, rows_};
    }
    double& at(std::size_t m, std::size_t r, std::size_t s) { return slabs_[m][s * rows_ + r]; }
    double at(std::size_t m, std::size_t r, std::size_t s) const { return slabs_[m][s * rows_ + r]; }

    const std::vector<double>& marginal(std::size_t m) const { return marginals_[m]; }
    /// Replaces the cached marginal of slab m; callers keep it consistent.
    void setMarginal(std::size_t m, std::vector<double> marginal);
    /// Recomputes every cached marginal from the slabs.
    void refreshMarginals();
    /// Largest |cached - recomputed| over all marginals.
    double marginalCacheError() const;

    bool sameShape(const MultiPlan& other) const
    {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::vector<std::size_t> cols_;
    std::vector<std::vector<double>> slabs_;
    std::vector<std::vector<double>> marginals_;
};

/// a_m = (1/S^(m)) / sum_j (1/S^(j)).
class AveragingWeights {
public:
    AveragingWeights() = default;
    explicit AveragingWeights(std::span<const std::size_t> colCounts);

    std::size_t size() const { return a_.size(); }
    double operator[](std::size_t m) const { return a_[m]; }
    const std::vector<double>& values() const { return a_; }

private:
    std::vector<double> a_;
};

/// Euclidean projection of w onto {u >= 0 : sum u = tau}, computed with
/// Condat's sort-free method through tau * Proj_simplex(w / tau).
/// tau = 0 yields zeros. Throws std::invalid_argument for tau < 0 or
/// non-finite input. out may alias w.
void projectSimplex(std::span<const double> w, double tau, std::span<double> out);
std::vector<double> projectSimplex(std::span<const double> w, double tau);

/// Same projection, reusing a caller-owned scratch buffer of size w.size().
/// No validation; this is the hot-loop entry point. Non-finite input that
/// leaves no finite threshold yields NaN so callers can detect it.
void projectSimplexUnchecked(std::span<const double> w, double tau, std::span<double> out,
                             std::span<double> scratch);

/// O(R log R) sort-based reference used for differential testing.
std::vector<double> projectSimplexSorted(std::span<const double> w, double tau);

/// p = sum_m a_m p^(m) over the cached marginals.
std::vector<double> averageMarginals(const MultiPlan& theta, const AveragingWeights& a);

struct BalancedProjection {
    MultiPlan plan;
    std::vector<double> average;
};

/// Orthogonal projection onto the subspace L of multi-plans whose slabs share
/// one row-sum vector: pi^(m)_rs = theta^(m)_rs + (p_r - p^(m)_r) / S^(m).
BalancedProjection projectBalanced(const MultiPlan& theta, const AveragingWeights& a);

/// dist_L(theta) = sqrt(sum_m ||p - p^(m)||^2 / S^(m)), from marginals only.
/// p must be averageMarginals(theta, a).
double distBalanced(const MultiPlan& theta, std::span<const double> p);

/// Frobenius distance between two multi-plans of the same shape.
double planDistance(const MultiPlan& x, const MultiPlan& y);

}  // namespace mam
