#include "lsm/slic.hpp"

#include "lsm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lsm {

std::string to_string(DistanceMode mode) {
    return mode == DistanceMode::squared_feature ? "squared_feature" : "euclidean";
}

DistanceMode distance_mode_from_string(const std::string& name) {
    if (name == "squared_feature") return DistanceMode::squared_feature;
    if (name == "euclidean") return DistanceMode::euclidean;
    throw ConfigError("unknown distance_mode '" + name + "' (expected squared_feature or euclidean)");
}

void SlicConfig::validate(std::size_t band_count) const {
    if (target_blocks < 1) throw ConfigError("slic: target_blocks must be >= 1");
    if (!(compactness > 0.0)) throw ConfigError("slic: compactness must be > 0");
    if (iterations < 1) throw ConfigError("slic: iterations must be >= 1");
    if (!feature_weights.empty()) {
        if (feature_weights.size() != band_count) {
            throw ConfigError("slic: " + std::to_string(feature_weights.size()) + " feature weights for " +
                              std::to_string(band_count) + " bands");
        }
        bool any_positive = false;
        for (const double w : feature_weights) {
            if (!(w >= 0.0)) throw ConfigError("slic: feature weights must be >= 0");
            any_positive = any_positive || w > 0.0;
        }
        if (!any_positive) throw ConfigError("slic: at least one feature weight must be > 0");
    }
}

FeatureImage weighted_image(const RasterStack& stack, const SlicConfig& config) {
    config.validate(stack.band_count());
    FeatureImage img;
    img.rows = stack.rows();
    img.cols = stack.cols();
    img.features = normalized_cells(stack);
    if (!config.feature_weights.empty()) {
        const Eigen::Map<const RowVector> w(config.feature_weights.data(),
                                            static_cast<Eigen::Index>(config.feature_weights.size()));
        img.features.array().rowwise() *= w.array();
    }
    img.valid.resize(stack.cell_count());
    for (std::size_t i = 0; i < stack.cell_count(); ++i) img.valid[i] = stack.valid(i);
    img.valid_count = stack.valid_count();
    return img;
}

int lattice_step(std::size_t valid_pixels, int target_blocks) {
    if (target_blocks < 1) throw ArgumentError("slic: target_blocks must be >= 1");
    const double s = std::sqrt(static_cast<double>(valid_pixels) / static_cast<double>(target_blocks));
    return std::max(1, static_cast<int>(std::floor(s + 0.5)));
}

namespace {

Vector cell_features(const FeatureImage& img, std::size_t cell) {
    return img.features.row(static_cast<Eigen::Index>(cell)).transpose();
}

ClusterCenter center_at(const FeatureImage& img, int id, int r, int c) {
    ClusterCenter k;
    k.id = id;
    k.row = r + 0.5;
    k.col = c + 0.5;
    k.features = cell_features(img, img.index(r, c));
    return k;
}

}  // namespace

std::vector<ClusterCenter> init_centers(const FeatureImage& image, const SlicConfig& config) {
    if (static_cast<std::size_t>(config.target_blocks) > image.valid_count) {
        throw ArgumentError("slic: target_blocks " + std::to_string(config.target_blocks) + " exceeds the " +
                            std::to_string(image.valid_count) + " valid pixels");
    }
    const int step = lattice_step(image.valid_count, config.target_blocks);
    std::vector<ClusterCenter> centers;
    int next_id = 0;
    for (int r0 = 0; r0 < image.rows; r0 += step) {
        const int r1 = std::min(r0 + step, image.rows);
        for (int c0 = 0; c0 < image.cols; c0 += step) {
            const int c1 = std::min(c0 + step, image.cols);
            const double cy = 0.5 * (r0 + r1);
            const double cx = 0.5 * (c0 + c1);
            const int r = std::min(static_cast<int>(std::floor(cy)), r1 - 1);
            const int c = std::min(static_cast<int>(std::floor(cx)), c1 - 1);
            if (image.valid[image.index(r, c)]) {
                ClusterCenter k;
                k.id = next_id++;
                k.row = cy;
                k.col = cx;
                k.features = cell_features(image, image.index(r, c));
                centers.push_back(std::move(k));
                continue;
            }
            // Midpoint on nodata: take the nearest valid cell of the lattice cell.
            double best = std::numeric_limits<double>::infinity();
            int br = -1;
            int bc = -1;
            for (int rr = r0; rr < r1; ++rr) {
                for (int cc = c0; cc < c1; ++cc) {
                    if (!image.valid[image.index(rr, cc)]) continue;
                    const double d = std::hypot(rr + 0.5 - cy, cc + 0.5 - cx);
                    if (d < best) {
                        best = d;
                        br = rr;
                        bc = cc;
                    }
                }
            }
            if (br >= 0) centers.push_back(center_at(image, next_id++, br, bc));
        }
    }
    return centers;
}

double feature_gradient(const FeatureImage& image, int r, int c) {
    const std::size_t here = image.index(r, c);
    auto at = [&](int rr, int cc) {
        rr = std::clamp(rr, 0, image.rows - 1);
        cc = std::clamp(cc, 0, image.cols - 1);
        const std::size_t i = image.index(rr, cc);
        return image.features.row(static_cast<Eigen::Index>(image.valid[i] ? i : here));
    };
    return (at(r, c + 1) - at(r, c - 1)).squaredNorm() + (at(r + 1, c) - at(r - 1, c)).squaredNorm();
}

std::vector<ClusterCenter> perturb_centers(const FeatureImage& image, std::vector<ClusterCenter> centers) {
    for (auto& k : centers) {
        const int r0 = std::clamp(static_cast<int>(std::floor(k.row)), 0, image.rows - 1);
        const int c0 = std::clamp(static_cast<int>(std::floor(k.col)), 0, image.cols - 1);
        double best = std::numeric_limits<double>::infinity();
        int br = -1;
        int bc = -1;
        for (int r = std::max(0, r0 - 2); r <= std::min(image.rows - 1, r0 + 2); ++r) {
            for (int c = std::max(0, c0 - 2); c <= std::min(image.cols - 1, c0 + 2); ++c) {
                if (!image.valid[image.index(r, c)]) continue;
                const double g = feature_gradient(image, r, c);
                if (g < best) {
                    best = g;
                    br = r;
                    bc = c;
                }
            }
        }
        if (br >= 0) k = center_at(image, k.id, br, bc);
    }
    return centers;
}

double feature_distance(const Vector& a, const Vector& b, DistanceMode mode) {
    const double sq = (a - b).squaredNorm();
    return mode == DistanceMode::squared_feature ? sq : std::sqrt(sq);
}

double combined_distance(double feature_term, double spatial, double step, double compactness) {
    const double s = spatial / step;
    return std::sqrt(feature_term * feature_term + s * s * compactness * compactness);
}

SweepState fresh_sweep(const FeatureImage& image) {
    SweepState s;
    s.labels.assign(image.cells(), -1);
    s.distances.assign(image.cells(), std::numeric_limits<double>::infinity());
    return s;
}

void scan_center(const FeatureImage& image, const ClusterCenter& center, int step, const SlicConfig& config,
                 SweepState& state) {
    const int r0 = static_cast<int>(std::floor(center.row));
    const int c0 = static_cast<int>(std::floor(center.col));
    const RowVector cf = center.features.transpose();
    for (int r = std::max(0, r0 - step); r <= std::min(image.rows - 1, r0 + step); ++r) {
        for (int c = std::max(0, c0 - step); c <= std::min(image.cols - 1, c0 + step); ++c) {
            const std::size_t i = image.index(r, c);
            if (!image.valid[i]) continue;
            const double sq = (image.features.row(static_cast<Eigen::Index>(i)) - cf).squaredNorm();
            const double df = config.distance_mode == DistanceMode::squared_feature ? sq : std::sqrt(sq);
            const double ds = std::hypot(r + 0.5 - center.row, c + 0.5 - center.col);
            const double d = combined_distance(df, ds, step, config.compactness);
            if (d < state.distances[i]) {
                state.distances[i] = d;
                state.labels[i] = center.id;
            }
        }
    }
}

std::vector<ClusterCenter> update_centers(const FeatureImage& image, const std::vector<ClusterCenter>& centers,
                                          const std::vector<int>& labels) {
    const auto n = centers.size();
    const Eigen::Index m = image.features.cols();
    Matrix feat = Matrix::Zero(static_cast<Eigen::Index>(n), m);
    std::vector<double> rows(n, 0.0);
    std::vector<double> cols(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        const auto k = static_cast<std::size_t>(labels[i]);
        feat.row(static_cast<Eigen::Index>(k)) += image.features.row(static_cast<Eigen::Index>(i));
        rows[k] += static_cast<double>(i / static_cast<std::size_t>(image.cols)) + 0.5;
        cols[k] += static_cast<double>(i % static_cast<std::size_t>(image.cols)) + 0.5;
        ++count[k];
    }
    std::vector<ClusterCenter> out = centers;
    for (std::size_t k = 0; k < n; ++k) {
        if (count[k] == 0) continue;
        const double inv = 1.0 / static_cast<double>(count[k]);
        out[k].features = feat.row(static_cast<Eigen::Index>(k)).transpose() * inv;
        out[k].row = rows[k] * inv;
        out[k].col = cols[k] * inv;
    }
    return out;
}

std::size_t repair_orphans(const FeatureImage& image, const std::vector<ClusterCenter>& centers,
                           std::vector<int>& labels) {
    std::size_t repaired = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!image.valid[i] || labels[i] >= 0) continue;
        const double r = static_cast<double>(i / static_cast<std::size_t>(image.cols)) + 0.5;
        const double c = static_cast<double>(i % static_cast<std::size_t>(image.cols)) + 0.5;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& k : centers) {
            const double d = std::hypot(r - k.row, c - k.col);
            if (d < best) {
                best = d;
                labels[i] = k.id;
            }
        }
        ++repaired;
    }
    return repaired;
}

namespace {

std::vector<Block> build_blocks(const std::vector<ClusterCenter>& centers, const std::vector<int>& labels) {
    std::vector<Block> blocks(centers.size());
    for (std::size_t k = 0; k < centers.size(); ++k) {
        blocks[k].id = static_cast<int>(k);
        blocks[k].center = centers[k];
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 0) blocks[static_cast<std::size_t>(labels[i])].member_pixels.push_back(i);
    }
    return blocks;
}

}  // namespace

Segmentation assign_pixels(const FeatureImage& image, std::vector<ClusterCenter> centers, const SlicConfig& config) {
    for (std::size_t k = 0; k < centers.size(); ++k) {
        if (centers[k].id != static_cast<int>(k)) throw ArgumentError("slic: center ids must be 0..n-1 in order");
    }
    Segmentation seg;
    seg.rows = image.rows;
    seg.cols = image.cols;
    seg.step = lattice_step(image.valid_count, config.target_blocks);
    seg.initial_centers = centers;
    SweepState state = fresh_sweep(image);
    for (int it = 0; it < config.iterations; ++it) {
        state = fresh_sweep(image);
        for (const auto& k : centers) scan_center(image, k, seg.step, config, state);
        centers = update_centers(image, centers, state.labels);
    }
    seg.labels = std::move(state.labels);
    seg.orphans_repaired = repair_orphans(image, centers, seg.labels);
    seg.blocks = build_blocks(centers, seg.labels);
    return seg;
}

Segmentation segment(const RasterStack& stack, const SlicConfig& config) {
    const FeatureImage image = weighted_image(stack, config);
    return assign_pixels(image, perturb_centers(image, init_centers(image, config)), config);
}

Segmentation segmentation_from_labels(const LabelGrid& labels, const FeatureImage& image) {
    if (labels.rows != image.rows || labels.cols != image.cols) {
        throw DataError("block raster shape does not match the feature stack");
    }
    Segmentation seg;
    seg.rows = image.rows;
    seg.cols = image.cols;
    seg.labels.assign(image.cells(), -1);
    int max_id = -1;
    for (std::size_t i = 0; i < image.cells(); ++i) {
        const int v = labels.at(i);
        const bool nodata = static_cast<double>(v) == labels.nodata;
        if (image.valid[i] && (nodata || v < 0)) {
            throw DataError("block raster has no block for valid cell " + std::to_string(i));
        }
        if (!image.valid[i] || nodata) continue;
        seg.labels[i] = v;
        max_id = std::max(max_id, v);
    }
    std::vector<ClusterCenter> centers(static_cast<std::size_t>(max_id + 1));
    for (std::size_t k = 0; k < centers.size(); ++k) {
        centers[k].id = static_cast<int>(k);
        centers[k].features = Vector::Zero(image.features.cols());
    }
    centers = update_centers(image, centers, seg.labels);
    seg.blocks = build_blocks(centers, seg.labels);
    return seg;
}

LabelGrid label_grid(const Segmentation& seg, const RasterGrid& geometry) {
    LabelGrid g = LabelGrid::like(geometry, -9999, -9999.0);
    for (std::size_t i = 0; i < seg.labels.size(); ++i) {
        if (seg.labels[i] >= 0) g.at(i) = seg.labels[i];
    }
    return g;
}

GroupingReport group_samples(Segmentation& seg, std::span<FeatureVector> samples) {
    GroupingReport report;
    for (auto& b : seg.blocks) b.member_samples.clear();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::size_t cell = samples[i].pixel_index;
        const int label = cell < seg.labels.size() ? seg.labels[cell] : -1;
        if (label < 0) {
            samples[i].block_id.reset();
            report.excluded.push_back(i);
            continue;
        }
        seg.blocks[static_cast<std::size_t>(label)].member_samples.push_back(i);
        samples[i].block_id = label;
    }
    return report;
}

nlohmann::json segmentation_report(const Segmentation& seg, std::span<const FeatureVector> samples,
                                   const SlicConfig& config) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : seg.blocks) {
        int pos = 0;
        int neg = 0;
        for (const auto i : b.member_samples) {
            const auto& label = samples[i].label;
            if (label == 1) ++pos;
            else if (label == 0) ++neg;
        }
        blocks.push_back({{"id", b.id},
                          {"pixels", b.member_pixels.size()},
                          {"samples", b.member_samples.size()},
                          {"positives", pos},
                          {"negatives", neg},
                          {"center", {{"row", b.center.row}, {"col", b.center.col}}}});
    }
    return {{"rows", seg.rows},
            {"cols", seg.cols},
            {"step", seg.step},
            {"target_blocks", config.target_blocks},
            {"compactness", config.compactness},
            {"iterations", config.iterations},
            {"distance_mode", to_string(config.distance_mode)},
            {"orphans_repaired", seg.orphans_repaired},
            {"blocks", std::move(blocks)}};
}

}  // namespace lsm
