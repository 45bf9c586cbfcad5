#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mam {

/// Raised when a problem instance or one of its parts violates its invariants.
class InstanceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A finite set of pairwise distinct points in R^dim.
///
/// Coordinates are stored atom-major: atom i occupies
/// coords[i*dim, (i+1)*dim).
class SupportGrid {
public:
    SupportGrid() = default;
    SupportGrid(std::size_t dim, std::vector<double> coords);

    /// Regular grid of width x height pixels scaled to the unit square.
    /// Atoms are ordered row-major; atom (row, col) = (col/(width-1), row/(height-1)).
    static SupportGrid pixelGrid(std::size_t width, std::size_t height);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    std::span<const double> atom(std::size_t i) const
    {
        return {coords_.data() + i * dim_, dim_};
    }
    const std::vector<double>& coords() const { return coords_; }

    /// Sub-grid made of the listed atoms, in the listed order.
    SupportGrid subset(std::span<const std::size_t> indices) const;

    bool operator==(const SupportGrid&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
};

/// Nonnegative weights on a support. Total mass is not required to be one.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;
    DiscreteMeasure(SupportGrid support, std::vector<double> weights);

    const SupportGrid& support() const { return support_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return weights_.size(); }
    double totalMass() const;
    /// Fraction of atoms carrying nonzero weight.
    double density() const;

private:
    SupportGrid support_;
    std::vector<double> weights_;
};

/// Column-major R x K matrix of ground-metric costs d(xi_r, zeta_k)^iota.
/// Blocks built from the same input support share one of these.
struct DistanceMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    std::span<const double> column(std::size_t k) const
    {
        return {values.data() + k * rows, rows};
    }
};

/// The M cost blocks d^(m) = alpha_m * D^(m), each R x S^(m).
///
/// Block m is a scaled view onto a (possibly shared) DistanceMatrix through a
/// column index map, so pruning and shared supports never copy cost data.
class CostTensor {
public:
    struct Block {
        std::shared_ptr<const DistanceMatrix> base;
        std::vector<std::size_t> columns;
        double scale = 1.0;
    };

    CostTensor() = default;
    CostTensor(std::vector<Block> blocks, std::vector<double> alpha, double exponent);

    /// Builds a tensor from explicit dense (column-major, R x S^(m)) ground
    /// costs; block m is alpha_m times the given matrix.
    static CostTensor fromDense(std::size_t rows,
                                const std::vector<std::vector<double>>& costs,
                                std::vector<double> alpha);

    std::size_t measures() const { return blocks_.size(); }
    std::size_t rows() const { return rows_; }
    std::size_t cols(std::size_t m) const { return blocks_[m].columns.size(); }
    double exponent() const { return exponent_; }
    const std::vector<double>& alpha() const { return alpha_; }

    double at(std::size_t m, std::size_t r, std::size_t s) const
    {
        const Block& b = blocks_[m];
        return b.scale * b.base->values[b.columns[s] * rows_ + r];
    }
    /// Unscaled column s of block m; multiply by scale(m) to get d^(m)_{.s}.
    std::span<const double> baseColumn(std::size_t m, std::size_t s) const
    {
        const Block& b = blocks_[m];
        return b.base->column(b.columns[s]);
    }
    double scale(std::size_t m) const { return blocks_[m].scale; }
    const Block& block(std::size_t m) const { return blocks_[m]; }

    /// Block m materialized as a dense column-major R x S^(m) matrix.
    std::vector<double> denseBlock(std::size_t m) const;

    /// Euclidean norm of all cost entries, ||vec(d)||.
    double frobeniusNorm() const;
    /// Mean of the strictly positive cost entries (0 when there are none).
    double meanPositive() const;

    /// Restriction of block m to the listed columns, in the listed order.
    CostTensor restrictColumns(const std::vector<std::vector<std::size_t>>& keep) const;

private:
    std::vector<Block> blocks_;
    std::vector<double> alpha_;
    double exponent_ = 1.0;
    std::size_t rows_ = 0;
};

/// Cost blocks alpha_m * ||xi_r - zeta^(m)_s||^iota. Inputs with identical
/// supports share one distance matrix.
CostTensor buildCost(const SupportGrid& barycenterSupport,
                     std::span<const DiscreteMeasure> inputs,
                     std::span<const double> alpha,
                     double exponent = 2.0);

/// Uniform weights 1/M.
std::vector<double> uniformWeights(std::size_t count);

/// A fixed-support barycenter problem: support, inputs and their cost blocks.
class ProblemInstance {
public:
    static constexpr double kBalanceTolerance = 1e-12;

    ProblemInstance() = default;
    ProblemInstance(SupportGrid barycenterSupport,
                    std::vector<DiscreteMeasure> inputs,
                    CostTensor cost);

    /// Euclidean ground metric with the given exponent.
    static ProblemInstance fromMeasures(SupportGrid barycenterSupport,
                                        std::vector<DiscreteMeasure> inputs,
                                        std::vector<double> alpha,
                                        double exponent = 2.0);

    const SupportGrid& support() const { return support_; }
    const std::vector<DiscreteMeasure>& inputs() const { return inputs_; }
    const DiscreteMeasure& input(std::size_t m) const { return inputs_[m]; }
    const CostTensor& cost() const { return cost_; }
    std::size_t rows() const { return support_.size(); }
    std::size_t measures() const { return inputs_.size(); }
    std::size_t cols(std::size_t m) const { return inputs_[m].size(); }
    /// Sum of S^(m) over all inputs.
    std::size_t totalColumns() const;
    bool balanced() const { return balanced_; }

private:
    SupportGrid support_;
    std::vector<DiscreteMeasure> inputs_;
    CostTensor cost_;
    bool balanced_ = true;
};

/// Original column indices kept for each input after pruning.
using ColumnMaps = std::vector<std::vector<std::size_t>>;

struct PrunedInstance {
    ProblemInstance instance;
    ColumnMaps columnMaps;
};

/// Drops every zero-weight atom of every input together with the matching
/// cost column. Throws InstanceError if an input has no positive weight.
PrunedInstance pruneZeroColumns(const ProblemInstance& instance);

/// Scatters a pruned R x S' column-major slab back into R x originalCols,
/// filling removed columns with zeros.
std::vector<double> expandSlab(std::span<const double> slab,
                               std::size_t rows,
                               std::span<const std::size_t> columnMap,
                               std::size_t originalCols);

}  // namespace mam
