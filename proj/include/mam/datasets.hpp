#pragma once

#include <cstddef>
#include <cstdint>

#include "mam/io.hpp"
#include "mam/measures.hpp"

namespace mam {

/// Geometry ranges of the nested-ellipse generator, as fractions of the image
/// side. Radii are normalized so the outer ellipse boundary sits at 1.
struct EllipseParams {
    double centerJitter = 0.06;     // |center - 0.5| per axis
    double outerAxisMin = 0.44;     // outer semi-axes drawn in [min, max]
    double outerAxisMax = 0.55;
    double ringThickness = 0.225;   // annulus width in normalized radius
    double ringSpacing = 0.225;     // offset between consecutive annuli
};

/// Binary raster (0 or 255) of nEllipses concentric annuli with random
/// center, semi-axes and rotation. Deterministic in seed.
GrayImage nestedEllipsesImage(std::size_t gridSide, int nEllipses, std::uint64_t seed,
                              const EllipseParams& params = {});

/// Normalized measure of nestedEllipsesImage on the pixel grid.
/// Requires gridSide >= 8 and 1 <= nEllipses <= 6.
DiscreteMeasure generateNestedEllipses(std::size_t gridSide, int nEllipses,
                                       std::uint64_t seed,
                                       const EllipseParams& params = {});

/// Image split into four quadrants; the top-right one is always empty and
/// each other quadrant holds a double nested ellipse with probability 1/2
/// (at least one quadrant is filled).
GrayImage quarteredEllipsesImage(std::size_t gridSide, std::uint64_t seed);

/// Fraction of nonzero pixels.
double imageDensity(const GrayImage& image);

}  // namespace mam
