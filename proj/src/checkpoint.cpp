#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mam/solver.hpp"

namespace mam {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'A', 'M', 'C', 'K', 'P', 'T', '1'};

template <class T>
T toLittle(T v)
{
    if constexpr (std::endian::native == std::endian::little)
        return v;
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

void writeU64(std::ostream& out, std::uint64_t v)
{
    v = toLittle(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void writeDoubles(std::ostream& out, std::span<const double> values)
{
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    } else {
        for (double v : values) {
            const double le = toLittle(v);
            out.write(reinterpret_cast<const char*>(&le), sizeof le);
        }
    }
}

std::uint64_t readU64(std::istream& in)
{
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error("truncated checkpoint header");
    return toLittle(v);
}

void readDoubles(std::istream& in, std::span<double> values)
{
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double))))
        throw std::runtime_error("truncated checkpoint data");
    if constexpr (std::endian::native != std::endian::little)
        for (double& v : values)
            v = toLittle(v);
}

}  // namespace

// Layout: magic[8] | u64 R | u64 M | u64 S[M] | slabs (column-major) | marginals.
void saveCheckpoint(const std::filesystem::path& path, const MultiPlan& theta)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic.data(), kMagic.size());
    writeU64(out, theta.rows());
    writeU64(out, theta.measures());
    for (std::size_t s : theta.colCounts())
        writeU64(out, s);
    for (std::size_t m = 0; m < theta.measures(); ++m)
        writeDoubles(out, theta.slab(m));
    for (std::size_t m = 0; m < theta.measures(); ++m)
        writeDoubles(out, theta.marginal(m));
    if (!out)
        throw std::runtime_error("failed writing checkpoint " + path.string());
}

MultiPlan loadCheckpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic)
        throw std::runtime_error(path.string() + " is not a checkpoint file");
    const std::uint64_t rows = readU64(in);
    const std::uint64_t measures = readU64(in);
    const auto size = std::filesystem::file_size(path);
    if (measures == 0 || rows == 0 || measures > size / 8)
        throw std::runtime_error(path.string() + ": implausible checkpoint shape");
    std::vector<std::size_t> cols(measures);
    std::uint64_t total = 0;
    for (auto& s : cols) {
        s = readU64(in);
        total += s;
    }
    const std::uint64_t expected = 8 + 8 * (2 + measures) + 8 * (rows * total + rows * measures);
    if (expected != size)
        throw std::runtime_error(path.string() + ": checkpoint size does not match its header");
    std::vector<std::vector<double>> slabs(measures);
    for (std::size_t m = 0; m < measures; ++m) {
        slabs[m].resize(rows * cols[m]);
        readDoubles(in, slabs[m]);
    }
    MultiPlan theta(rows, cols, std::move(slabs));
    for (std::size_t m = 0; m < measures; ++m) {
        std::vector<double> marginal(rows);
        readDoubles(in, marginal);
        theta.setMarginal(m, std::move(marginal));
    }
    return theta;
}

}  // namespace mam
