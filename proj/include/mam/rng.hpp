#pragma once

#include <cstdint>

namespace mam {

/// SplitMix64 finalizer. Used as a counter-based generator: the value drawn
/// at (key, counter) depends on nothing else, so runs are reproducible from
/// the seed regardless of how many draws other components made.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t counterHash(std::uint64_t key, std::uint64_t counter)
{
    return mix64(mix64(key) ^ (counter * 0xd1b54a32d192ed03ULL));
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double counterUniform(std::uint64_t key, std::uint64_t counter)
{
    return static_cast<double>(counterHash(key, counter) >> 11) * 0x1.0p-53;
}

/// Sequential stream over counterHash, for generators that draw many values.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    std::uint64_t next() { return counterHash(key_, counter_++); }
    double uniform() { return counterUniform(key_, counter_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace mam
