#include "mam/projections.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mam {

MultiPlan::MultiPlan(std::size_t rows, std::vector<std::size_t> cols)
    : rows_(rows), cols_(std::move(cols))
{
    slabs_.reserve(cols_.size());
    marginals_.reserve(cols_.size());
    for (std::size_t s : cols_) {
        slabs_.emplace_back(rows_ * s, 0.0);
        marginals_.emplace_back(rows_, 0.0);
    }
}

MultiPlan::MultiPlan(std::size_t rows, std::vector<std::size_t> cols,
                     std::vector<std::vector<double>> slabs)
    : rows_(rows), cols_(std::move(cols)), slabs_(std::move(slabs))
{
    if (slabs_.size() != cols_.size())
        throw std::invalid_argument("slab count does not match column counts");
    for (std::size_t m = 0; m < cols_.size(); ++m)
        if (slabs_[m].size() != rows_ * cols_[m])
            throw std::invalid_argument("slab " + std::to_string(m) + " has the wrong size");
    marginals_.assign(cols_.size(), std::vector<double>(rows_, 0.0));
    refreshMarginals();
}

void MultiPlan::setMarginal(std::size_t m, std::vector<double> marginal)
{
    if (marginal.size() != rows_)
        throw std::invalid_argument("marginal length must equal R");
    marginals_[m] = std::move(marginal);
}

namespace {

std::vector<double> rowSums(std::span<const double> slab, std::size_t rows, std::size_t cols)
{
    std::vector<double> sums(rows, 0.0);
    for (std::size_t s = 0; s < cols; ++s) {
        const double* col = slab.data() + s * rows;
        for (std::size_t r = 0; r < rows; ++r)
            sums[r] += col[r];
    }
    return sums;
}

}  // namespace

void MultiPlan::refreshMarginals()
{
    for (std::size_t m = 0; m < cols_.size(); ++m)
        marginals_[m] = rowSums(slabs_[m], rows_, cols_[m]);
}

double MultiPlan::marginalCacheError() const
{
    double err = 0.0;
    for (std::size_t m = 0; m < cols_.size(); ++m) {
        const auto fresh = rowSums(slabs_[m], rows_, cols_[m]);
        for (std::size_t r = 0; r < rows_; ++r)
            err = std::max(err, std::abs(fresh[r] - marginals_[m][r]));
    }
    return err;
}

AveragingWeights::AveragingWeights(std::span<const std::size_t> colCounts)
{
    if (colCounts.empty())
        throw std::invalid_argument("averaging weights need at least one measure");
    double total = 0.0;
    for (std::size_t s : colCounts) {
        if (s == 0)
            throw std::invalid_argument("every slab needs at least one column");
        total += 1.0 / static_cast<double>(s);
    }
    a_.reserve(colCounts.size());
    for (std::size_t s : colCounts)
        a_.push_back((1.0 / static_cast<double>(s)) / total);
}

void projectSimplexUnchecked(std::span<const double> w, double tau, std::span<double> out,
                             std::span<double> scratch)
{
    const std::size_t n = w.size();
    if (tau == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    // Project y = w / tau onto the unit simplex, then scale back by tau.
    double* y = out.data();
    const double invTau = 1.0 / tau;
    for (std::size_t i = 0; i < n; ++i)
        y[i] = w[i] * invTau;

    // Condat (2016), Fast projection onto the simplex and the l1 ball.
    double* const aux0 = scratch.data();
    double* aux = aux0;
    std::ptrdiff_t len = 1;
    std::ptrdiff_t lenOld = -1;
    double thr = (aux[0] = y[0]) - 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        if (y[i] > thr) {
            aux[len] = y[i];
            thr += (y[i] - thr) / static_cast<double>(len - lenOld);
            if (thr <= y[i] - 1.0) {
                thr = y[i] - 1.0;
                lenOld = len - 1;
            }
            ++len;
        }
    }
    if (lenOld >= 0) {
        len -= ++lenOld;
        aux += lenOld;
        while (--lenOld >= 0)
            if (aux0[lenOld] > thr) {
                *(--aux) = aux0[lenOld];
                thr += (*aux - thr) / static_cast<double>(++len);
            }
    }
    do {
        lenOld = len - 1;
        len = 0;
        for (std::ptrdiff_t i = 0; i <= lenOld; ++i) {
            if (aux[i] > thr)
                aux[len++] = aux[i];
            else
                thr += (thr - aux[i]) / static_cast<double>(lenOld - i + len);
        }
    } while (len <= lenOld);

    if (!std::isfinite(thr)) {
        std::fill(out.begin(), out.end(), std::numeric_limits<double>::quiet_NaN());
        return;
    }
    for (std::size_t i = 0; i < n; ++i)
        y[i] = y[i] > thr ? (y[i] - thr) * tau : 0.0;
}

void projectSimplex(std::span<const double> w, double tau, std::span<double> out)
{
    if (!(tau >= 0.0) || !std::isfinite(tau))
        throw std::invalid_argument("simplex scale must be finite and nonnegative");
    if (out.size() != w.size())
        throw std::invalid_argument("output length must match input length");
    if (w.empty()) {
        if (tau != 0.0)
            throw std::invalid_argument("cannot project onto an empty simplex with positive mass");
        return;
    }
    for (double v : w)
        if (!std::isfinite(v))
            throw std::invalid_argument("projection input must be finite");
    std::vector<double> scratch(w.size());
    projectSimplexUnchecked(w, tau, out, scratch);
}

std::vector<double> projectSimplex(std::span<const double> w, double tau)
{
    std::vector<double> out(w.size());
    projectSimplex(w, tau, out);
    return out;
}

std::vector<double> projectSimplexSorted(std::span<const double> w, double tau)
{
    if (!(tau >= 0.0) || !std::isfinite(tau))
        throw std::invalid_argument("simplex scale must be finite and nonnegative");
    std::vector<double> out(w.size(), 0.0);
    if (tau == 0.0 || w.empty())
        return out;
    std::vector<double> u(w.begin(), w.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double thr = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cumsum += u[k];
        const double candidate = (cumsum - tau) / static_cast<double>(k + 1);
        if (u[k] - candidate > 0.0)
            thr = candidate;
    }
    for (std::size_t i = 0; i < w.size(); ++i)
        out[i] = std::max(w[i] - thr, 0.0);
    return out;
}

std::vector<double> averageMarginals(const MultiPlan& theta, const AveragingWeights& a)
{
    if (a.size() != theta.measures())
        throw std::invalid_argument("averaging weights do not match the multi-plan");
    std::vector<double> p(theta.rows(), 0.0);
    for (std::size_t m = 0; m < theta.measures(); ++m) {
        const auto& pm = theta.marginal(m);
        const double am = a[m];
        for (std::size_t r = 0; r < p.size(); ++r)
            p[r] += am * pm[r];
    }
    return p;
}

BalancedProjection projectBalanced(const MultiPlan& theta, const AveragingWeights& a)
{
    BalancedProjection out{theta, averageMarginals(theta, a)};
    MultiPlan& pi = out.plan;
    const std::size_t rows = theta.rows();
    for (std::size_t m = 0; m < theta.measures(); ++m) {
        const auto& pm = theta.marginal(m);
        const double invS = 1.0 / static_cast<double>(theta.cols(m));
        std::vector<double> shift(rows);
        for (std::size_t r = 0; r < rows; ++r)
            shift[r] = (out.average[r] - pm[r]) * invS;
        for (std::size_t s = 0; s < theta.cols(m); ++s) {
            auto col = pi.column(m, s);
            for (std::size_t r = 0; r < rows; ++r)
                col[r] += shift[r];
        }
        pi.setMarginal(m, out.average);
    }
    return out;
}

double distBalanced(const MultiPlan& theta, std::span<const double> p)
{
    if (p.size() != theta.rows())
        throw std::invalid_argument("average marginal length must equal R");
    double sum = 0.0;
    for (std::size_t m = 0; m < theta.measures(); ++m) {
        const auto& pm = theta.marginal(m);
        double sq = 0.0;
        for (std::size_t r = 0; r < p.size(); ++r) {
            const double d = p[r] - pm[r];
            sq += d * d;
        }
        sum += sq / static_cast<double>(theta.cols(m));
    }
    return std::sqrt(sum);
}

double planDistance(const MultiPlan& x, const MultiPlan& y)
{
    if (!x.sameShape(y))
        throw std::invalid_argument("multi-plans have different shapes");
    double sum = 0.0;
    for (std::size_t m = 0; m < x.measures(); ++m) {
        auto a = x.slab(m);
        auto b = y.slab(m);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            sum += d * d;
        }
    }
    return std::sqrt(sum);
}

}  // namespace mam
