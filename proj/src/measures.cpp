#include "mam/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace mam {

namespace {

void checkDistinct(const SupportGrid& grid)
{
    std::set<std::vector<double>> seen;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto a = grid.atom(i);
        if (!seen.emplace(a.begin(), a.end()).second)
            throw InstanceError("support atoms must be pairwise distinct (duplicate at index " +
                                std::to_string(i) + ")");
    }
}

double groundCost(std::span<const double> x, std::span<const double> y, double exponent)
{
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        sq += d * d;
    }
    if (exponent == 2.0)
        return sq;
    return std::pow(std::sqrt(sq), exponent);
}

}  // namespace

SupportGrid::SupportGrid(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords))
{
    if (dim_ == 0)
        throw InstanceError("support dimension must be positive");
    if (coords_.size() % dim_ != 0)
        throw InstanceError("coordinate count is not a multiple of the dimension");
    for (double c : coords_)
        if (!std::isfinite(c))
            throw InstanceError("support coordinates must be finite");
    checkDistinct(*this);
}

SupportGrid SupportGrid::pixelGrid(std::size_t width, std::size_t height)
{
    if (width == 0 || height == 0)
        throw InstanceError("pixel grid must be nonempty");
    std::vector<double> coords;
    coords.reserve(2 * width * height);
    const double sx = width > 1 ? 1.0 / static_cast<double>(width - 1) : 0.0;
    const double sy = height > 1 ? 1.0 / static_cast<double>(height - 1) : 0.0;
    for (std::size_t row = 0; row < height; ++row)
        for (std::size_t col = 0; col < width; ++col) {
            coords.push_back(static_cast<double>(col) * sx);
            coords.push_back(static_cast<double>(row) * sy);
        }
    SupportGrid grid;
    grid.dim_ = 2;
    grid.coords_ = std::move(coords);
    return grid;
}

SupportGrid SupportGrid::subset(std::span<const std::size_t> indices) const
{
    SupportGrid out;
    out.dim_ = dim_;
    out.coords_.reserve(indices.size() * dim_);
    for (std::size_t i : indices) {
        if (i >= size())
            throw InstanceError("support subset index out of range");
        auto a = atom(i);
        out.coords_.insert(out.coords_.end(), a.begin(), a.end());
    }
    return out;
}

DiscreteMeasure::DiscreteMeasure(SupportGrid support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights))
{
    if (weights_.size() != support_.size())
        throw InstanceError("weight count " + std::to_string(weights_.size()) +
                            " does not match support size " + std::to_string(support_.size()));
    for (double w : weights_)
        if (!(w >= 0.0) || !std::isfinite(w))
            throw InstanceError("measure weights must be finite and nonnegative");
}

double DiscreteMeasure::totalMass() const
{
    return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

double DiscreteMeasure::density() const
{
    if (weights_.empty())
        return 0.0;
    const auto nz = std::count_if(weights_.begin(), weights_.end(), [](double w) { return w > 0.0; });
    return static_cast<double>(nz) / static_cast<double>(weights_.size());
}

CostTensor::CostTensor(std::vector<Block> blocks, std::vector<double> alpha, double exponent)
    : blocks_(std::move(blocks)), alpha_(std::move(alpha)), exponent_(exponent)
{
    if (blocks_.empty())
        throw InstanceError("cost tensor needs at least one block");
    if (alpha_.size() != blocks_.size())
        throw InstanceError("alpha must have one entry per cost block");
    rows_ = blocks_.front().base ? blocks_.front().base->rows : 0;
    for (const Block& b : blocks_) {
        if (!b.base)
            throw InstanceError("cost block without distance matrix");
        if (b.base->rows != rows_)
            throw InstanceError("cost blocks disagree on the row count");
        for (std::size_t c : b.columns)
            if (c >= b.base->cols)
                throw InstanceError("cost column index out of range");
        if (!(b.scale >= 0.0) || !std::isfinite(b.scale))
            throw InstanceError("cost scale must be finite and nonnegative");
    }
}

CostTensor CostTensor::fromDense(std::size_t rows, const std::vector<std::vector<double>>& costs,
                                 std::vector<double> alpha)
{
    std::vector<Block> blocks;
    blocks.reserve(costs.size());
    if (alpha.size() != costs.size())
        throw InstanceError("alpha must have one entry per cost block");
    for (std::size_t m = 0; m < costs.size(); ++m) {
        if (rows == 0 || costs[m].size() % rows != 0)
            throw InstanceError("dense cost block size is not a multiple of R");
        auto base = std::make_shared<DistanceMatrix>();
        base->rows = rows;
        base->cols = costs[m].size() / rows;
        base->values = costs[m];
        for (double v : base->values)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw InstanceError("cost entries must be finite and nonnegative");
        Block b;
        b.columns.resize(base->cols);
        std::iota(b.columns.begin(), b.columns.end(), std::size_t{0});
        b.base = std::move(base);
        b.scale = alpha[m];
        blocks.push_back(std::move(b));
    }
    return CostTensor(std::move(blocks), std::move(alpha), 1.0);
}

std::vector<double> CostTensor::denseBlock(std::size_t m) const
{
    std::vector<double> out(rows_ * cols(m));
    for (std::size_t s = 0; s < cols(m); ++s) {
        auto col = baseColumn(m, s);
        for (std::size_t r = 0; r < rows_; ++r)
            out[s * rows_ + r] = blocks_[m].scale * col[r];
    }
    return out;
}

double CostTensor::frobeniusNorm() const
{
    double sum = 0.0;
    for (std::size_t m = 0; m < measures(); ++m) {
        const double sc = blocks_[m].scale;
        for (std::size_t s = 0; s < cols(m); ++s)
            for (double v : baseColumn(m, s))
                sum += sc * sc * v * v;
    }
    return std::sqrt(sum);
}

double CostTensor::meanPositive() const
{
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t m = 0; m < measures(); ++m) {
        const double sc = blocks_[m].scale;
        for (std::size_t s = 0; s < cols(m); ++s)
            for (double v : baseColumn(m, s)) {
                const double d = sc * v;
                if (d > 0.0) {
                    sum += d;
                    ++count;
                }
            }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

CostTensor CostTensor::restrictColumns(const std::vector<std::vector<std::size_t>>& keep) const
{
    if (keep.size() != measures())
        throw InstanceError("column selection must cover every block");
    std::vector<Block> blocks;
    blocks.reserve(measures());
    for (std::size_t m = 0; m < measures(); ++m) {
        Block b;
        b.base = blocks_[m].base;
        b.scale = blocks_[m].scale;
        b.columns.reserve(keep[m].size());
        for (std::size_t s : keep[m]) {
            if (s >= cols(m))
                throw InstanceError("column selection out of range");
            b.columns.push_back(blocks_[m].columns[s]);
        }
        blocks.push_back(std::move(b));
    }
    return CostTensor(std::move(blocks), alpha_, exponent_);
}

std::vector<double> uniformWeights(std::size_t count)
{
    return std::vector<double>(count, count == 0 ? 0.0 : 1.0 / static_cast<double>(count));
}

CostTensor buildCost(const SupportGrid& barycenterSupport, std::span<const DiscreteMeasure> inputs,
                     std::span<const double> alpha, double exponent)
{
    if (inputs.empty())
        throw InstanceError("at least one input measure is required");
    if (alpha.size() != inputs.size())
        throw InstanceError("alpha must have one entry per input measure");
    if (!(exponent >= 1.0) || !std::isfinite(exponent))
        throw InstanceError("cost exponent must be >= 1");
    double alphaSum = 0.0;
    for (double a : alpha) {
        if (!(a > 0.0))
            throw InstanceError("alpha entries must be strictly positive");
        alphaSum += a;
    }
    if (std::abs(alphaSum - 1.0) > 1e-9)
        throw InstanceError("alpha entries must sum to one");
    if (barycenterSupport.size() == 0)
        throw InstanceError("barycenter support is empty");

    const std::size_t rows = barycenterSupport.size();
    std::vector<CostTensor::Block> blocks;
    blocks.reserve(inputs.size());
    // Inputs sharing a support reuse its distance matrix.
    std::vector<std::pair<const SupportGrid*, std::shared_ptr<const DistanceMatrix>>> cache;
    for (std::size_t m = 0; m < inputs.size(); ++m) {
        const SupportGrid& sup = inputs[m].support();
        if (sup.size() == 0)
            throw InstanceError("input measure " + std::to_string(m) + " has an empty support");
        if (sup.dim() != barycenterSupport.dim())
            throw InstanceError("input measure " + std::to_string(m) + " has dimension " +
                                std::to_string(sup.dim()) + ", barycenter support has " +
                                std::to_string(barycenterSupport.dim()));
        std::shared_ptr<const DistanceMatrix> base;
        for (auto& [grid, mat] : cache)
            if (*grid == sup) {
                base = mat;
                break;
            }
        if (!base) {
            auto mat = std::make_shared<DistanceMatrix>();
            mat->rows = rows;
            mat->cols = sup.size();
            mat->values.resize(rows * sup.size());
            for (std::size_t s = 0; s < sup.size(); ++s)
                for (std::size_t r = 0; r < rows; ++r)
                    mat->values[s * rows + r] =
                        groundCost(barycenterSupport.atom(r), sup.atom(s), exponent);
            base = mat;
            cache.emplace_back(&sup, base);
        }
        CostTensor::Block b;
        b.base = base;
        b.columns.resize(sup.size());
        std::iota(b.columns.begin(), b.columns.end(), std::size_t{0});
        b.scale = alpha[m];
        blocks.push_back(std::move(b));
    }
    return CostTensor(std::move(blocks), std::vector<double>(alpha.begin(), alpha.end()), exponent);
}

ProblemInstance::ProblemInstance(SupportGrid barycenterSupport, std::vector<DiscreteMeasure> inputs,
                                 CostTensor cost)
    : support_(std::move(barycenterSupport)), inputs_(std::move(inputs)), cost_(std::move(cost))
{
    if (inputs_.empty())
        throw InstanceError("at least one input measure is required");
    if (support_.size() == 0)
        throw InstanceError("barycenter support is empty");
    if (cost_.measures() != inputs_.size())
        throw InstanceError("cost tensor has " + std::to_string(cost_.measures()) +
                            " blocks for " + std::to_string(inputs_.size()) + " inputs");
    if (cost_.rows() != support_.size())
        throw InstanceError("cost rows do not match the barycenter support size");
    for (std::size_t m = 0; m < inputs_.size(); ++m)
        if (cost_.cols(m) != inputs_[m].size())
            throw InstanceError("cost block " + std::to_string(m) +
                                " columns do not match its input measure");

    const double ref = inputs_.front().totalMass();
    balanced_ = true;
    for (const auto& nu : inputs_) {
        const double mass = nu.totalMass();
        if (std::abs(mass - ref) > kBalanceTolerance * std::max(std::abs(ref), std::abs(mass)))
            balanced_ = false;
    }
}

ProblemInstance ProblemInstance::fromMeasures(SupportGrid barycenterSupport,
                                              std::vector<DiscreteMeasure> inputs,
                                              std::vector<double> alpha, double exponent)
{
    CostTensor cost = buildCost(barycenterSupport, inputs, alpha, exponent);
    return ProblemInstance(std::move(barycenterSupport), std::move(inputs), std::move(cost));
}

std::size_t ProblemInstance::totalColumns() const
{
    std::size_t total = 0;
    for (const auto& nu : inputs_)
        total += nu.size();
    return total;
}

PrunedInstance pruneZeroColumns(const ProblemInstance& instance)
{
    ColumnMaps maps(instance.measures());
    std::vector<DiscreteMeasure> inputs;
    inputs.reserve(instance.measures());
    bool changed = false;
    for (std::size_t m = 0; m < instance.measures(); ++m) {
        const auto& w = instance.input(m).weights();
        for (std::size_t s = 0; s < w.size(); ++s)
            if (w[s] > 0.0)
                maps[m].push_back(s);
        if (maps[m].empty())
            throw InstanceError("input measure " + std::to_string(m) + " has no positive weight");
        if (maps[m].size() == w.size()) {
            inputs.push_back(instance.input(m));
            continue;
        }
        changed = true;
        std::vector<double> kept;
        kept.reserve(maps[m].size());
        for (std::size_t s : maps[m])
            kept.push_back(w[s]);
        inputs.emplace_back(instance.input(m).support().subset(maps[m]), std::move(kept));
    }
    if (!changed)
        return {instance, std::move(maps)};
    CostTensor cost = instance.cost().restrictColumns(maps);
    return {ProblemInstance(instance.support(), std::move(inputs), std::move(cost)), std::move(maps)};
}

std::vector<double> expandSlab(std::span<const double> slab, std::size_t rows,
                               std::span<const std::size_t> columnMap, std::size_t originalCols)
{
    if (slab.size() != rows * columnMap.size())
        throw InstanceError("slab shape does not match the column map");
    std::vector<double> out(rows * originalCols, 0.0);
    for (std::size_t s = 0; s < columnMap.size(); ++s) {
        if (columnMap[s] >= originalCols)
            throw InstanceError("column map entry out of range");
        std::copy_n(slab.begin() + static_cast<std::ptrdiff_t>(s * rows), rows,
                    out.begin() + static_cast<std::ptrdiff_t>(columnMap[s] * rows));
    }
    return out;
}

}  // namespace mam
