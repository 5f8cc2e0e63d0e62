#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace lsm {

/// Georeferenced single-band grid. Row 0 is the northern edge, as in ESRI ASCII grids.
template <typename T>
struct Grid {
    using Values = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    int rows = 0;
    int cols = 0;
    double cellsize = 1.0;
    double xll = 0.0;
    double yll = 0.0;
    double nodata = -9999.0;
    bool center_registered = false;  // header used xllcenter/yllcenter
    Values values;

    std::size_t cell_count() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
    bool is_nodata(std::size_t index) const { return static_cast<double>(values.data()[index]) == nodata; }
    T at(std::size_t index) const { return values.data()[index]; }
    T& at(std::size_t index) { return values.data()[index]; }

    template <typename U>
    bool same_geometry(const Grid<U>& other) const {
        return rows == other.rows && cols == other.cols && cellsize == other.cellsize && xll == other.xll &&
               yll == other.yll;
    }

    template <typename U>
    static Grid like(const Grid<U>& other, T fill, double nodata_value) {
        Grid g;
        g.rows = other.rows;
        g.cols = other.cols;
        g.cellsize = other.cellsize;
        g.xll = other.xll;
        g.yll = other.yll;
        g.center_registered = other.center_registered;
        g.nodata = nodata_value;
        g.values = Values::Constant(other.rows, other.cols, fill);
        return g;
    }
};

using RasterGrid = Grid<double>;
using LabelGrid = Grid<int>;

/// Parses an ESRI ASCII grid. `source` names the input in error messages.
RasterGrid parse_ascii_grid(std::istream& in, const std::string& source = "<stream>");
RasterGrid load_ascii_grid(const std::filesystem::path& path);

/// Writes numbers in shortest round-trip form, so values reload bit-exactly.
void write_ascii_grid(std::ostream& out, const RasterGrid& grid);
void write_ascii_grid(std::ostream& out, const LabelGrid& grid);
void write_ascii_grid(const std::filesystem::path& path, const RasterGrid& grid);
void write_ascii_grid(const std::filesystem::path& path, const LabelGrid& grid);

LabelGrid to_label_grid(const RasterGrid& grid);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace lsm
