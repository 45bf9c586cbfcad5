#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mam/measures.hpp"

namespace mam {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major grayscale raster.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Reads a P2 (ASCII) or P5 (binary, 8 or 16 bit) PGM file.
GrayImage readPgm(const std::filesystem::path& path);

/// Writes an 8-bit PGM. Pixel values are rounded and clamped to [0, maxval].
void writePgm(const std::filesystem::path& path, const GrayImage& image,
              bool binary = true, int maxval = 255);

/// Comma-separated rows of intensities, one image row per line.
GrayImage readCsvGrid(const std::filesystem::path& path);

/// Dispatches on extension: .pgm is read as PGM, anything else as a CSV grid.
GrayImage readImage(const std::filesystem::path& path);

/// Pixels become atoms of SupportGrid::pixelGrid and intensities become
/// weights, divided by their sum when normalize is set.
DiscreteMeasure imageToMeasure(const GrayImage& image, bool normalize);

/// Throws IoError on unreadable files and on images with no positive pixel.
DiscreteMeasure loadImageAsMeasure(const std::filesystem::path& path, bool normalize);

/// Measure CSV: header x_0,...,x_{dim-1},weight then one atom per line,
/// printed with 17 significant digits.
void writeMeasureCsv(const std::filesystem::path& path, const DiscreteMeasure& measure);
DiscreteMeasure readMeasureCsv(const std::filesystem::path& path);

/// True when the file starts with a measure CSV header.
bool isMeasureCsv(const std::filesystem::path& path);

/// Loads a measure from a measure CSV, a PGM or a CSV grid.
DiscreteMeasure loadMeasure(const std::filesystem::path& path, bool normalizeImages);

/// Recovers the raster of a measure supported on a rectangular grid in R^2.
/// Throws InstanceError when the support is not a full grid.
GrayImage measureToImage(const DiscreteMeasure& measure);

}  // namespace mam
