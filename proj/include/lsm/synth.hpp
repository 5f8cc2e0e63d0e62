#pragma once

#include "lsm/raster.hpp"
#include "lsm/stack.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lsm {

/// Ground-truth label rule: label 1 where band `band` compares against `threshold`.
struct SyntheticRule {
    int band = 0;
    std::string comparison = ">";  // ">" or "<"
    double threshold = 0.5;

    bool label(double value) const { return comparison == ">" ? value > threshold : value < threshold; }
};

/// Desk-scale stand-in for a study region. The grid is cut into zone_rows x zone_cols zones and
/// each zone labels its cells with one rule.
struct SyntheticSpec {
    int rows = 64;
    int cols = 64;
    int bands = 4;
    double cellsize = 30.0;
    int smoothing = 4;  // box-blur radius, applied three times
    std::vector<SyntheticRule> rules{{0, ">", 0.6}, {1, "<", 0.4}};
    int zone_rows = 2;
    int zone_cols = 2;
    std::vector<int> zone_rules;  // row-major rule index per zone; empty means a checkerboard
    int positives = 50;
    int negatives = 50;
    int tile_size = 8;  // samples are drawn from square survey tiles; 0 draws from the whole grid
    int per_tile = 5;   // samples per class taken from each tile
    double noise_rate = 0.0;
    std::uint64_t seed = 1;

    /// Throws ConfigError listing every violation.
    void validate() const;
    int rule_of_zone(int zone) const;
};

void to_json(nlohmann::json& j, const SyntheticRule& r);
void from_json(const nlohmann::json& j, SyntheticRule& r);
void to_json(nlohmann::json& j, const SyntheticSpec& s);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
void from_json(const nlohmann::json& j, SyntheticSpec& s);

struct SyntheticRegion {
    std::vector<std::pair<std::string, RasterGrid>> bands;
    LabelGrid truth;                   // 0/1 per cell
    std::vector<SamplePoint> samples;  // labels after noise
    std::vector<std::size_t> flipped;  // sample indices whose label was flipped, ascending
};

SyntheticRegion generate_synthetic(const SyntheticSpec& spec);

/// band<i>.asc, truth.asc, samples.csv and spec.json in `dir`. Returns the band paths.
std::vector<std::filesystem::path> write_synthetic(const std::filesystem::path& dir, const SyntheticRegion& region,
                                                   const SyntheticSpec& spec);

}  // namespace lsm
