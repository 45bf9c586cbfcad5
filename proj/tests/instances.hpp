#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mam/measures.hpp"
#include "mam/rng.hpp"

namespace mam::testing {

inline SupportGrid lineSupport(std::size_t n)
{
    std::vector<double> coords(n);
    for (std::size_t i = 0; i < n; ++i)
        coords[i] = static_cast<double>(i);
    return SupportGrid(1, coords);
}

inline DiscreteMeasure dirac(double x, double mass = 1.0)
{
    return DiscreteMeasure(SupportGrid(1, {x}), {mass});
}

/// Support {0,1,2}, inputs delta_0 and delta_2, alpha = (1/2, 1/2), squared distance.
inline ProblemInstance goldenInstance()
{
    return ProblemInstance::fromMeasures(lineSupport(3), {dirac(0.0), dirac(2.0)},
                                         uniformWeights(2));
}

/// Random balanced instance: R atoms, M inputs with 1..maxCols atoms each,
/// strictly positive weights of total mass 1 and costs uniform in [0, 1].
inline ProblemInstance randomInstance(CounterRng& rng, std::size_t rows, std::size_t measures,
                                      std::size_t maxCols, double mass = 1.0)
{
    std::vector<DiscreteMeasure> inputs;
    std::vector<std::vector<double>> costs;
    for (std::size_t m = 0; m < measures; ++m) {
        const std::size_t cols = 1 + static_cast<std::size_t>(rng.uniform() * maxCols) % maxCols;
        std::vector<double> w(cols);
        double total = 0.0;
        for (double& x : w) {
            x = rng.uniform(0.05, 1.0);
            total += x;
        }
        for (double& x : w)
            x *= mass / total;
        inputs.emplace_back(lineSupport(cols), w);
        std::vector<double> c(rows * cols);
        for (double& x : c)
            x = rng.uniform();
        costs.push_back(std::move(c));
    }
    CostTensor cost = CostTensor::fromDense(rows, costs, uniformWeights(measures));
    return ProblemInstance(lineSupport(rows), std::move(inputs), std::move(cost));
}

}  // namespace mam::testing
