#include "lsm/stack.hpp"

#include "lsm/error.hpp"
#include "lsm/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lsm {

RasterStack RasterStack::build(std::vector<std::pair<std::string, RasterGrid>> bands) {
    if (bands.empty()) throw ConfigError("raster stack needs at least one band");
    const RasterGrid& ref = bands.front().second;
    for (const auto& [name, grid] : bands) {
        if (!grid.same_geometry(ref)) {
            throw DataError("band '" + name + "' is not aligned with band '" + bands.front().first +
                            "' (shape or georeferencing differs)");
        }
    }

    RasterStack stack;
    stack.valid_.assign(ref.cell_count(), true);
    for (const auto& [name, grid] : bands) {
        for (std::size_t i = 0; i < grid.cell_count(); ++i) {
            if (grid.is_nodata(i) || !std::isfinite(grid.at(i))) stack.valid_[i] = false;
        }
    }
    for (const auto& [name, grid] : bands) {
        BandStats s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (std::size_t i = 0; i < grid.cell_count(); ++i) {
            if (grid.is_nodata(i) || !std::isfinite(grid.at(i))) continue;
            s.min = std::min(s.min, grid.at(i));
            s.max = std::max(s.max, grid.at(i));
        }
        if (!(s.min < s.max)) throw ConfigError("degenerate band '" + name + "': min equals max over valid cells");
        stack.stats_.push_back(s);
    }
    stack.bands_ = std::move(bands);
    return stack;
}

std::size_t RasterStack::valid_count() const {
    return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), true));
}

Vector RasterStack::raw(std::size_t cell) const {
    Vector v(static_cast<Eigen::Index>(bands_.size()));
    for (std::size_t b = 0; b < bands_.size(); ++b) v(static_cast<Eigen::Index>(b)) = bands_[b].second.at(cell);
    return v;
}

std::optional<std::size_t> RasterStack::locate(double x, double y) const {
    const RasterGrid& g = geometry();
    const double origin_x = g.center_registered ? g.xll - 0.5 * g.cellsize : g.xll;
    const double origin_y = g.center_registered ? g.yll - 0.5 * g.cellsize : g.yll;
    const double fx = (x - origin_x) / g.cellsize;
    const double fy = (y - origin_y) / g.cellsize;
    if (!(fx >= 0.0 && fx <= g.cols && fy >= 0.0 && fy <= g.rows)) return std::nullopt;
    const int col = std::min(static_cast<int>(std::floor(fx)), g.cols - 1);
    const int up = std::min(static_cast<int>(std::floor(fy)), g.rows - 1);
    const int row = g.rows - 1 - up;
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(g.cols) + static_cast<std::size_t>(col);
}

std::pair<double, double> RasterStack::cell_center(std::size_t cell) const {
    const RasterGrid& g = geometry();
    const double origin_x = g.center_registered ? g.xll - 0.5 * g.cellsize : g.xll;
    const double origin_y = g.center_registered ? g.yll - 0.5 * g.cellsize : g.yll;
    const auto row = static_cast<int>(cell / static_cast<std::size_t>(g.cols));
    const auto col = static_cast<int>(cell % static_cast<std::size_t>(g.cols));
    return {origin_x + (col + 0.5) * g.cellsize, origin_y + (g.rows - row - 0.5) * g.cellsize};
}

Vector normalize(const RasterStack& stack, const Vector& raw) {
    if (raw.size() != static_cast<Eigen::Index>(stack.band_count())) {
        throw ShapeError("normalize: expected " + std::to_string(stack.band_count()) + " values");
    }
    Vector out(raw.size());
    for (Eigen::Index b = 0; b < raw.size(); ++b) {
        const BandStats& s = stack.stats()[static_cast<std::size_t>(b)];
        out(b) = std::clamp((raw(b) - s.min) / (s.max - s.min), 0.0, 1.0);
    }
    return out;
}

FeatureVector featurize_point(const RasterStack& stack, const SamplePoint& point) {
    const auto cell = stack.locate(point.x, point.y);
    if (!cell) {
        throw DataError("sample point (" + format_double(point.x) + ", " + format_double(point.y) +
                        ") lies outside the raster extent");
    }
    if (!stack.valid(*cell)) {
        throw DataError("sample point (" + format_double(point.x) + ", " + format_double(point.y) +
                        ") falls on a nodata cell");
    }
    FeatureVector fv;
    fv.values = normalize(stack, stack.raw(*cell));
    fv.label = point.label;
    fv.pixel_index = *cell;
    return fv;
}

std::vector<FeatureVector> featurize_points(const RasterStack& stack, std::span<const SamplePoint> points) {
    std::vector<FeatureVector> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(featurize_point(stack, p));
    return out;
}

FeaturizedGrid featurize_all_cells(const RasterStack& stack) {
    FeaturizedGrid out;
    out.skip_mask.assign(stack.cell_count(), false);
    for (std::size_t i = 0; i < stack.cell_count(); ++i) {
        if (!stack.valid(i)) {
            out.skip_mask[i] = true;
            continue;
        }
        FeatureVector fv;
        fv.values = normalize(stack, stack.raw(i));
        fv.pixel_index = i;
        out.vectors.push_back(std::move(fv));
    }
    if (out.vectors.empty()) log_warning("featurize_all_cells: every cell holds nodata in some band");
    return out;
}

Matrix normalized_cells(const RasterStack& stack) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(stack.cell_count()),
                              static_cast<Eigen::Index>(stack.band_count()));
    for (std::size_t i = 0; i < stack.cell_count(); ++i) {
        if (stack.valid(i)) out.row(static_cast<Eigen::Index>(i)) = normalize(stack, stack.raw(i)).transpose();
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_field(const std::string& field, const std::string& source, std::size_t line) {
    double v = 0.0;
    const std::string t = trim(field);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw DataError(source + ":" + std::to_string(line) + ": cannot parse number '" + t + "'");
    }
    return v;
}

}  // namespace

std::vector<SamplePoint> parse_samples_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw DataError(source + ": empty samples file");
    ++line_no;
    if (trim(line) != "x,y,label") {
        throw DataError(source + ":1: expected header 'x,y,label'");
    }
    std::vector<SamplePoint> points;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (fields.size() != 3) {
            throw DataError(source + ":" + std::to_string(line_no) + ": expected 3 fields, got " +
                            std::to_string(fields.size()));
        }
        SamplePoint p;
        p.x = parse_field(fields[0], source, line_no);
        p.y = parse_field(fields[1], source, line_no);
        const std::string label = trim(fields[2]);
        if (label == "0" || label == "1") {
            p.label = label == "1" ? 1 : 0;
        } else if (!label.empty()) {
            throw DataError(source + ":" + std::to_string(line_no) + ": label must be 0, 1 or empty");
        }
        points.push_back(p);
    }
    return points;
}

std::vector<SamplePoint> load_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open samples file '" + path.string() + "'");
    return parse_samples_csv(in, path.string());
}

void write_samples_csv(std::ostream& out, std::span<const SamplePoint> points) {
    out << "x,y,label\n";
    for (const auto& p : points) {
        out << format_double(p.x) << ',' << format_double(p.y) << ',';
        if (p.label) out << *p.label;
        out << '\n';
    }
}

void write_samples_csv(const std::filesystem::path& path, std::span<const SamplePoint> points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    write_samples_csv(out, points);
}

}  // namespace lsm
