#include "mam/datasets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mam/rng.hpp"

namespace mam {

namespace {

constexpr double kOn = 255.0;

// Paints nEllipses concentric annuli into the square [row0, row0+side) x
// [col0, col0+side) of img. Returns the number of pixels switched on.
std::size_t paintEllipses(GrayImage& img, std::size_t row0, std::size_t col0, std::size_t side,
                          int nEllipses, CounterRng& rng, const EllipseParams& params)
{
    const double cx = 0.5 + rng.uniform(-params.centerJitter, params.centerJitter);
    const double cy = 0.5 + rng.uniform(-params.centerJitter, params.centerJitter);
    const double ax = rng.uniform(params.outerAxisMin, params.outerAxisMax);
    const double ay = rng.uniform(params.outerAxisMin, params.outerAxisMax);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double cs = std::cos(angle);
    const double sn = std::sin(angle);

    std::size_t painted = 0;
    const double inv = 1.0 / static_cast<double>(side);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const double x = (static_cast<double>(c) + 0.5) * inv - cx;
            const double y = (static_cast<double>(r) + 0.5) * inv - cy;
            const double u = (cs * x + sn * y) / ax;
            const double v = (-sn * x + cs * y) / ay;
            const double radius = std::sqrt(u * u + v * v);
            bool on = false;
            for (int i = 0; i < nEllipses && !on; ++i) {
                const double outer = 1.0 - i * params.ringSpacing;
                const double inner = outer - params.ringThickness;
                on = radius <= outer && radius >= inner;
            }
            if (on) {
                double& px = img.pixels[(row0 + r) * img.width + col0 + c];
                if (px == 0.0)
                    ++painted;
                px = kOn;
            }
        }
    }
    return painted;
}

}  // namespace

GrayImage nestedEllipsesImage(std::size_t gridSide, int nEllipses, std::uint64_t seed,
                              const EllipseParams& params)
{
    if (gridSide < 8)
        throw std::invalid_argument("grid side must be at least 8");
    if (nEllipses < 1 || nEllipses > 6)
        throw std::invalid_argument("ellipse count must be in [1, 6], got " +
                                    std::to_string(nEllipses));
    CounterRng rng(mix64(seed) ^ static_cast<std::uint64_t>(nEllipses));
    GrayImage img;
    img.width = img.height = gridSide;
    // Too-thin draws that hit no pixel centre are re-sampled.
    while (true) {
        img.pixels.assign(gridSide * gridSide, 0.0);
        if (paintEllipses(img, 0, 0, gridSide, nEllipses, rng, params) > 0)
            return img;
    }
}

DiscreteMeasure generateNestedEllipses(std::size_t gridSide, int nEllipses, std::uint64_t seed,
                                       const EllipseParams& params)
{
    return imageToMeasure(nestedEllipsesImage(gridSide, nEllipses, seed, params), true);
}

GrayImage quarteredEllipsesImage(std::size_t gridSide, std::uint64_t seed)
{
    if (gridSide < 16 || gridSide % 2 != 0)
        throw std::invalid_argument("quartered images need an even side of at least 16");
    CounterRng rng(mix64(seed) ^ 0x51a7e11ULL);
    const std::size_t half = gridSide / 2;
    // top-left, bottom-left, bottom-right; top-right stays empty
    const std::size_t origins[3][2] = {{0, 0}, {half, 0}, {half, half}};
    GrayImage img;
    img.width = img.height = gridSide;
    while (true) {
        img.pixels.assign(gridSide * gridSide, 0.0);
        bool filled[3];
        bool any = false;
        for (bool& f : filled) {
            f = rng.uniform() < 0.5;
            any = any || f;
        }
        if (!any)
            continue;
        std::size_t painted = 0;
        for (int q = 0; q < 3; ++q)
            if (filled[q])
                painted += paintEllipses(img, origins[q][0], origins[q][1], half, 2, rng, {});
        if (painted > 0)
            return img;
    }
}

double imageDensity(const GrayImage& image)
{
    if (image.pixels.empty())
        return 0.0;
    std::size_t nz = 0;
    for (double v : image.pixels)
        nz += v != 0.0;
    return static_cast<double>(nz) / static_cast<double>(image.pixels.size());
}

}  // namespace mam
