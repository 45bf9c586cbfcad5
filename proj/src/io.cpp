#include "mam/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace mam {

namespace {

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

double parseDouble(std::string_view token, const std::filesystem::path& path)
{
    while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front())))
        token.remove_prefix(1);
    while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back())))
        token.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw IoError(path.string() + ": cannot parse number '" + std::string(token) + "'");
    return v;
}

std::vector<std::string_view> splitCommas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string stripEol(std::string line)
{
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.pop_back();
    return line;
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pgmToken(std::istream& in)
{
    std::string tok;
    char c = 0;
    while (in.get(c)) {
        if (c == '#') {
            std::string rest;
            std::getline(in, rest);
            if (!tok.empty())
                break;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty())
                break;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

std::size_t parseSize(const std::string& tok, const std::filesystem::path& path, const char* what)
{
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
        throw IoError(path.string() + ": bad PGM " + what + " '" + tok + "'");
    return v;
}

}  // namespace

GrayImage readPgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    const std::string magic = pgmToken(in);
    if (magic != "P2" && magic != "P5")
        throw IoError(path.string() + ": not a P2/P5 PGM file");
    GrayImage img;
    img.width = parseSize(pgmToken(in), path, "width");
    img.height = parseSize(pgmToken(in), path, "height");
    const std::size_t maxval = parseSize(pgmToken(in), path, "maxval");
    if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535)
        throw IoError(path.string() + ": invalid PGM header");
    const std::size_t n = img.width * img.height;
    img.pixels.resize(n);
    if (magic == "P2") {
        for (std::size_t i = 0; i < n; ++i) {
            const std::string tok = pgmToken(in);
            if (tok.empty())
                throw IoError(path.string() + ": truncated PGM data");
            img.pixels[i] = static_cast<double>(parseSize(tok, path, "pixel"));
        }
    } else {
        const std::size_t bytes = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(n * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw IoError(path.string() + ": truncated PGM data");
        for (std::size_t i = 0; i < n; ++i)
            img.pixels[i] = bytes == 1 ? raw[i] : static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    for (double v : img.pixels)
        if (v > static_cast<double>(maxval))
            throw IoError(path.string() + ": pixel exceeds maxval");
    return img;
}

void writePgm(const std::filesystem::path& path, const GrayImage& image, bool binary, int maxval)
{
    if (maxval <= 0 || maxval > 255)
        throw IoError("writePgm supports 8-bit maxval only");
    if (image.pixels.size() != image.width * image.height)
        throw IoError("image buffer does not match its dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << (binary ? "P5" : "P2") << '\n' << image.width << ' ' << image.height << '\n' << maxval << '\n';
    auto quantize = [maxval](double v) {
        return static_cast<int>(std::clamp(std::lround(v), 0L, static_cast<long>(maxval)));
    };
    if (binary) {
        std::vector<unsigned char> raw(image.pixels.size());
        std::transform(image.pixels.begin(), image.pixels.end(), raw.begin(),
                       [&](double v) { return static_cast<unsigned char>(quantize(v)); });
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    } else {
        for (std::size_t r = 0; r < image.height; ++r) {
            for (std::size_t c = 0; c < image.width; ++c)
                out << (c ? " " : "") << quantize(image.at(r, c));
            out << '\n';
        }
    }
    if (!out)
        throw IoError("failed writing " + path.string());
}

GrayImage readCsvGrid(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    GrayImage img;
    std::string line;
    while (std::getline(in, line)) {
        line = stripEol(line);
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        const auto cells = splitCommas(line);
        if (img.width == 0)
            img.width = cells.size();
        else if (cells.size() != img.width)
            throw IoError(path.string() + ": ragged CSV grid at row " + std::to_string(img.height));
        for (auto cell : cells)
            img.pixels.push_back(parseDouble(cell, path));
        ++img.height;
    }
    if (img.pixels.empty())
        throw IoError(path.string() + ": empty CSV grid");
    for (double v : img.pixels)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw IoError(path.string() + ": intensities must be finite and nonnegative");
    return img;
}

GrayImage readImage(const std::filesystem::path& path)
{
    if (lower(path.extension().string()) == ".pgm")
        return readPgm(path);
    return readCsvGrid(path);
}

DiscreteMeasure imageToMeasure(const GrayImage& image, bool normalize)
{
    double total = 0.0;
    for (double v : image.pixels)
        total += v;
    if (!(total > 0.0))
        throw IoError("image has no positive intensity");
    std::vector<double> weights = image.pixels;
    if (normalize)
        for (double& w : weights)
            w /= total;
    return DiscreteMeasure(SupportGrid::pixelGrid(image.width, image.height), std::move(weights));
}

DiscreteMeasure loadImageAsMeasure(const std::filesystem::path& path, bool normalize)
{
    try {
        return imageToMeasure(readImage(path), normalize);
    } catch (const IoError& e) {
        const std::string what = e.what();
        if (what.find(path.string()) != std::string::npos)
            throw;
        throw IoError(path.string() + ": " + what);
    }
}

void writeMeasureCsv(const std::filesystem::path& path, const DiscreteMeasure& measure)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    const std::size_t dim = measure.support().dim();
    for (std::size_t k = 0; k < dim; ++k)
        out << "x_" << k << ',';
    out << "weight\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < measure.size(); ++i) {
        for (double c : measure.support().atom(i))
            out << c << ',';
        out << measure.weights()[i] << '\n';
    }
    if (!out)
        throw IoError("failed writing " + path.string());
}

bool isMeasureCsv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    std::string line;
    if (!in || !std::getline(in, line))
        return false;
    return line.rfind("x_0", 0) == 0;
}

DiscreteMeasure readMeasureCsv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::string header;
    if (!std::getline(in, header))
        throw IoError(path.string() + ": empty measure file");
    const auto names = splitCommas(stripEol(header));
    if (names.size() < 2 || names.back() != "weight")
        throw IoError(path.string() + ": header must be x_0,...,x_{dim-1},weight");
    const std::size_t dim = names.size() - 1;
    for (std::size_t k = 0; k < dim; ++k)
        if (names[k] != "x_" + std::to_string(k))
            throw IoError(path.string() + ": unexpected column '" + std::string(names[k]) + "'");
    std::vector<double> coords;
    std::vector<double> weights;
    std::string line;
    std::size_t lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        line = stripEol(line);
        if (line.empty())
            continue;
        const auto cells = splitCommas(line);
        if (cells.size() != dim + 1)
            throw IoError(path.string() + ": line " + std::to_string(lineNo) + " has " +
                          std::to_string(cells.size()) + " fields");
        for (std::size_t k = 0; k < dim; ++k)
            coords.push_back(parseDouble(cells[k], path));
        weights.push_back(parseDouble(cells[dim], path));
    }
    try {
        return DiscreteMeasure(SupportGrid(dim, std::move(coords)), std::move(weights));
    } catch (const InstanceError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

DiscreteMeasure loadMeasure(const std::filesystem::path& path, bool normalizeImages)
{
    if (lower(path.extension().string()) != ".pgm" && isMeasureCsv(path))
        return readMeasureCsv(path);
    return loadImageAsMeasure(path, normalizeImages);
}

GrayImage measureToImage(const DiscreteMeasure& measure)
{
    const SupportGrid& sup = measure.support();
    if (sup.dim() != 2)
        throw InstanceError("only 2-D supports can be rendered");
    std::map<double, std::size_t> xs;
    std::map<double, std::size_t> ys;
    for (std::size_t i = 0; i < sup.size(); ++i) {
        xs.emplace(sup.atom(i)[0], 0);
        ys.emplace(sup.atom(i)[1], 0);
    }
    if (xs.size() * ys.size() != sup.size())
        throw InstanceError("support is not a rectangular grid");
    std::size_t idx = 0;
    for (auto& [x, i] : xs)
        i = idx++;
    idx = 0;
    for (auto& [y, i] : ys)
        i = idx++;
    GrayImage img;
    img.width = xs.size();
    img.height = ys.size();
    img.pixels.assign(img.width * img.height, 0.0);
    // Distinct atoms on a full product grid fill every cell exactly once.
    for (std::size_t i = 0; i < sup.size(); ++i) {
        const std::size_t col = xs.at(sup.atom(i)[0]);
        const std::size_t row = ys.at(sup.atom(i)[1]);
        img.pixels[row * img.width + col] = measure.weights()[i];
    }
    return img;
}

}  // namespace mam
