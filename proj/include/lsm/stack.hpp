#pragma once

#include "lsm/linalg.hpp"
#include "lsm/raster.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lsm {

struct BandStats {
    double min = 0.0;
    double max = 0.0;
};

/// Aligned thematic bands with per-band min/max over valid cells.
class RasterStack {
public:
    /// Throws DataError naming the offending band when geometry differs, and
    /// ConfigError for a degenerate band (min == max over valid cells).
    static RasterStack build(std::vector<std::pair<std::string, RasterGrid>> bands);

    int rows() const { return bands_.front().second.rows; }
    int cols() const { return bands_.front().second.cols; }
    std::size_t cell_count() const { return bands_.front().second.cell_count(); }
    std::size_t band_count() const { return bands_.size(); }
    const std::string& band_name(std::size_t b) const { return bands_[b].first; }
    const RasterGrid& band(std::size_t b) const { return bands_[b].second; }
    const RasterGrid& geometry() const { return bands_.front().second; }
    const std::vector<BandStats>& stats() const { return stats_; }

    /// True when no band holds nodata at the cell.
    bool valid(std::size_t cell) const { return valid_[cell]; }
    std::size_t valid_count() const;

    Vector raw(std::size_t cell) const;

    /// Cell containing a world coordinate, or nullopt outside the extent.
    /// Uses floor((x - xll) / cellsize) per axis; the far edges belong to the last cell.
    std::optional<std::size_t> locate(double x, double y) const;

    /// World coordinate of a cell center.
    std::pair<double, double> cell_center(std::size_t cell) const;

private:
    std::vector<std::pair<std::string, RasterGrid>> bands_;
    std::vector<BandStats> stats_;
    std::vector<bool> valid_;
};

/// Min-max normalization per band, clamped to [0, 1].
Vector normalize(const RasterStack& stack, const Vector& raw);

struct SamplePoint {
    double x = 0.0;
    double y = 0.0;
    std::optional<int> label;  // 1 landslide, 0 non-landslide
};

/// Normalized sample vector with its source cell and, once segmented, its block.
struct FeatureVector {
    Vector values;
    std::optional<int> label;
    std::size_t pixel_index = 0;
    std::optional<int> block_id;
};

/// Throws DataError for points outside the extent or on a nodata cell.
FeatureVector featurize_point(const RasterStack& stack, const SamplePoint& point);

std::vector<FeatureVector> featurize_points(const RasterStack& stack, std::span<const SamplePoint> points);

struct FeaturizedGrid {
    std::vector<FeatureVector> vectors;  // row-major over valid cells
    std::vector<bool> skip_mask;         // true where a cell was skipped for nodata
};

FeaturizedGrid featurize_all_cells(const RasterStack& stack);

/// Dense (cells x bands) matrix of normalized values; rows of invalid cells are zero.
Matrix normalized_cells(const RasterStack& stack);

/// `x,y,label` with an empty label for unlabeled points.
std::vector<SamplePoint> parse_samples_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<SamplePoint> load_samples_csv(const std::filesystem::path& path);
void write_samples_csv(std::ostream& out, std::span<const SamplePoint> points);
void write_samples_csv(const std::filesystem::path& path, std::span<const SamplePoint> points);

}  // namespace lsm
