#include "lsm/raster.hpp"

#include "lsm/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace lsm {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

double parse_number(const std::string& token, const std::string& source, std::size_t line) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (!token.empty() && token.front() == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw DataError(source + ":" + std::to_string(line) + ": cannot parse number '" + token + "'");
    }
    return v;
}

bool is_header_key(const std::string& token) {
    return !token.empty() && std::isalpha(static_cast<unsigned char>(token.front()));
}

template <typename T>
void write_grid(std::ostream& out, const Grid<T>& grid) {
    out << "ncols " << grid.cols << '\n';
    out << "nrows " << grid.rows << '\n';
    out << (grid.center_registered ? "xllcenter " : "xllcorner ") << format_double(grid.xll) << '\n';
    out << (grid.center_registered ? "yllcenter " : "yllcorner ") << format_double(grid.yll) << '\n';
    out << "cellsize " << format_double(grid.cellsize) << '\n';
    out << "NODATA_value " << format_double(grid.nodata) << '\n';
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            if (c) out << ' ';
            if constexpr (std::is_floating_point_v<T>) {
                out << format_double(grid.values(r, c));
            } else {
                out << grid.values(r, c);
            }
        }
        out << '\n';
    }
}

template <typename T>
void write_grid_file(const std::filesystem::path& path, const Grid<T>& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    write_grid(out, grid);
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace

RasterGrid parse_ascii_grid(std::istream& in, const std::string& source) {
    std::map<std::string, std::pair<double, std::size_t>> header;
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    bool in_body = false;
    std::size_t expected = 0;
    int rows = 0;
    int cols = 0;

    auto finish_header = [&](std::size_t at_line) {
        for (const char* key : {"ncols", "nrows", "cellsize"}) {
            if (!header.count(key)) {
                throw DataError(source + ":" + std::to_string(at_line) + ": missing header key '" + key + "'");
            }
        }
        const bool corner = header.count("xllcorner") && header.count("yllcorner");
        const bool center = header.count("xllcenter") && header.count("yllcenter");
        if (!corner && !center) {
            throw DataError(source + ":" + std::to_string(at_line) +
                            ": missing xllcorner/yllcorner (or xllcenter/yllcenter)");
        }
        const double nc = header["ncols"].first;
        const double nr = header["nrows"].first;
        if (nc < 1 || nr < 1 || nc != std::floor(nc) || nr != std::floor(nr)) {
            throw DataError(source + ":" + std::to_string(header["ncols"].second) +
                            ": ncols/nrows must be positive integers");
        }
        if (!(header["cellsize"].first > 0.0)) {
            throw DataError(source + ":" + std::to_string(header["cellsize"].second) + ": cellsize must be > 0");
        }
        cols = static_cast<int>(nc);
        rows = static_cast<int>(nr);
        expected = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
        values.reserve(expected);
        in_body = true;
    };

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream tokens(line);
        std::string first;
        if (!(tokens >> first)) continue;
        if (!in_body && is_header_key(first)) {
            std::string value;
            if (!(tokens >> value)) {
                throw DataError(source + ":" + std::to_string(line_no) + ": header key '" + first + "' has no value");
            }
            std::string extra;
            if (tokens >> extra) {
                throw DataError(source + ":" + std::to_string(line_no) + ": malformed header line");
            }
            const std::string key = lower(first);
            static const char* known[] = {"ncols", "nrows", "xllcorner", "yllcorner",
                                          "xllcenter", "yllcenter", "cellsize", "nodata_value"};
            if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
                std::end(known)) {
                throw DataError(source + ":" + std::to_string(line_no) + ": unknown header key '" + first + "'");
            }
            header[key] = {parse_number(value, source, line_no), line_no};
            continue;
        }
        if (!in_body) finish_header(line_no);
        std::string token = first;
        do {
            if (values.size() >= expected) {
                throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                                " values, got more");
            }
            values.push_back(parse_number(token, source, line_no));
        } while (tokens >> token);
    }
    if (!in_body) {
        if (header.empty()) throw DataError(source + ": empty grid file");
        finish_header(line_no);
    }
    if (values.size() != expected) {
        throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                        " values, got " + std::to_string(values.size()));
    }

    RasterGrid grid;
    grid.rows = rows;
    grid.cols = cols;
    grid.cellsize = header["cellsize"].first;
    grid.center_registered = !header.count("xllcorner");
    grid.xll = grid.center_registered ? header["xllcenter"].first : header["xllcorner"].first;
    grid.yll = grid.center_registered ? header["yllcenter"].first : header["yllcorner"].first;
    grid.nodata = header.count("nodata_value") ? header["nodata_value"].first : -9999.0;
    grid.values = Eigen::Map<RasterGrid::Values>(values.data(), rows, cols);
    return grid;
}

RasterGrid load_ascii_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grid '" + path.string() + "'");
    return parse_ascii_grid(in, path.string());
}

void write_ascii_grid(std::ostream& out, const RasterGrid& grid) { write_grid(out, grid); }
void write_ascii_grid(std::ostream& out, const LabelGrid& grid) { write_grid(out, grid); }
void write_ascii_grid(const std::filesystem::path& path, const RasterGrid& grid) { write_grid_file(path, grid); }
void write_ascii_grid(const std::filesystem::path& path, const LabelGrid& grid) { write_grid_file(path, grid); }

LabelGrid to_label_grid(const RasterGrid& grid) {
    LabelGrid out = LabelGrid::like(grid, 0, grid.nodata);
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        const double v = grid.at(i);
        if (v != std::floor(v)) throw DataError("label grid holds a non-integer value " + format_double(v));
        out.at(i) = static_cast<int>(v);
    }
    return out;
}

}  // namespace lsm
