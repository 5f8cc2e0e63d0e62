#pragma once

#include "lsm/linalg.hpp"
#include "lsm/raster.hpp"
#include "lsm/stack.hpp"

#include <json.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lsm {

/// How the feature term enters the combined distance.
/// squared_feature: d_f = |ft_j - ft_i|^2, and D squares d_f again.
/// euclidean:       d_f = |ft_j - ft_i|, as in the original SLIC.
enum class DistanceMode { squared_feature, euclidean };

std::string to_string(DistanceMode mode);
DistanceMode distance_mode_from_string(const std::string& name);

struct SlicConfig {
    int target_blocks = 64;              // K
    double compactness = 10.0;           // m, weight of spatial proximity
    std::vector<double> feature_weights; // per band; empty means all 1
    int iterations = 5;
    DistanceMode distance_mode = DistanceMode::squared_feature;

    /// Throws ConfigError on K < 1, m <= 0, negative or all-zero weights, or a band count mismatch.
    void validate(std::size_t band_count) const;
};

/// Weighted, normalized features for every cell, one row per cell.
struct FeatureImage {
    int rows = 0;
    int cols = 0;
    Matrix features;
    std::vector<bool> valid;
    std::size_t valid_count = 0;

    std::size_t cells() const { return valid.size(); }
    std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c); }
};

FeatureImage weighted_image(const RasterStack& stack, const SlicConfig& config);

/// Cluster center in pixel coordinates where cell (r, c) spans [r, r+1) x [c, c+1).
struct ClusterCenter {
    int id = 0;
    Vector features;
    double row = 0.0;
    double col = 0.0;
};

struct Block {
    int id = 0;
    ClusterCenter center;
    std::vector<std::size_t> member_pixels;
    std::vector<std::size_t> member_samples;  // indices into the grouped sample list
};

/// Lattice spacing S = round(sqrt(N / K)), rounding halves up, at least 1.
int lattice_step(std::size_t valid_pixels, int target_blocks);

/// Centers at the midpoints of an S x S lattice; lattice cells without valid pixels get no center.
std::vector<ClusterCenter> init_centers(const FeatureImage& image, const SlicConfig& config);

/// Squared central-difference gradient of the weighted features at a cell.
double feature_gradient(const FeatureImage& image, int r, int c);

/// Moves each center to the lowest-gradient valid cell of its (clamped) 5x5
/// neighborhood; ties go to the first cell in row-major order.
std::vector<ClusterCenter> perturb_centers(const FeatureImage& image, std::vector<ClusterCenter> centers);

double feature_distance(const Vector& a, const Vector& b, DistanceMode mode);

/// D = sqrt(d_f^2 + (d_s / S)^2 m^2).
double combined_distance(double feature_term, double spatial, double step, double compactness);

struct SweepState {
    std::vector<int> labels;        // -1 = unassigned
    std::vector<double> distances;  // +inf = unassigned
};

SweepState fresh_sweep(const FeatureImage& image);

/// Scores every valid cell of the (2S+1) x (2S+1) window around a center and
/// keeps the center when it is strictly closer than the stored distance.
void scan_center(const FeatureImage& image, const ClusterCenter& center, int step, const SlicConfig& config,
                 SweepState& state);

/// Moves centers to the mean features and position of their members. Centers without members stay put.
std::vector<ClusterCenter> update_centers(const FeatureImage& image, const std::vector<ClusterCenter>& centers,
                                          const std::vector<int>& labels);

/// Attaches valid cells that no window reached to the spatially nearest center. Returns the count.
std::size_t repair_orphans(const FeatureImage& image, const std::vector<ClusterCenter>& centers,
                           std::vector<int>& labels);

struct Segmentation {
    int rows = 0;
    int cols = 0;
    int step = 1;
    std::vector<int> labels;  // per cell, -1 for nodata
    std::vector<Block> blocks;  // blocks[k].id == k
    std::vector<ClusterCenter> initial_centers;  // after perturbation, before the first sweep
    std::size_t orphans_repaired = 0;
};

/// Runs `iterations` sweeps with center updates between them, then repairs orphans.
Segmentation assign_pixels(const FeatureImage& image, std::vector<ClusterCenter> centers, const SlicConfig& config);

/// init -> perturb -> assign.
Segmentation segment(const RasterStack& stack, const SlicConfig& config);

/// Rebuilds blocks from an exported label raster; centers become member means.
Segmentation segmentation_from_labels(const LabelGrid& labels, const FeatureImage& image);

LabelGrid label_grid(const Segmentation& seg, const RasterGrid& geometry);

struct GroupingReport {
    std::vector<std::size_t> excluded;  // samples on cells without a block
};

/// Appends each sample to the block owning its cell and records the block id on the sample.
GroupingReport group_samples(Segmentation& seg, std::span<FeatureVector> samples);

/// Per-block pixel count, sample count and class counts.
nlohmann::json segmentation_report(const Segmentation& seg, std::span<const FeatureVector> samples,
                                   const SlicConfig& config);

}  // namespace lsm
