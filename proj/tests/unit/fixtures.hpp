#pragma once

// Synthetic rasters shared by the unit and acceptance suites.

#include "lsm/mlp.hpp"
#include "lsm/rng.hpp"
#include "lsm/slic.hpp"
#include "lsm/stack.hpp"

#include <string>
#include <vector>

namespace lsm::test {

inline RasterGrid grid_from(const Matrix& values) {
    RasterGrid g;
    g.rows = static_cast<int>(values.rows());
    g.cols = static_cast<int>(values.cols());
    g.cellsize = 1.0;
    g.values = values;
    return g;
}

inline RasterStack stack_from(const std::vector<Matrix>& bands) {
    std::vector<std::pair<std::string, RasterGrid>> named;
    for (std::size_t b = 0; b < bands.size(); ++b) named.emplace_back("b" + std::to_string(b), grid_from(bands[b]));
    return RasterStack::build(std::move(named));
}

inline RasterStack random_stack(Rng& rng, int rows, int cols, int bands) {
    std::vector<Matrix> values;
    for (int b = 0; b < bands; ++b) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
        values.push_back(std::move(m));
    }
    return stack_from(values);
}

/// Left half 0, right half 1 in every band.
inline RasterStack plateau_stack(int rows, int cols, int bands) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = c < cols / 2 ? 0.0 : 1.0;
    }
    return stack_from(std::vector<Matrix>(static_cast<std::size_t>(bands), m));
}

/// Feature image with every cell valid and unit weights.
inline FeatureImage image_from(const std::vector<Matrix>& bands) {
    FeatureImage img;
    img.rows = static_cast<int>(bands.front().rows());
    img.cols = static_cast<int>(bands.front().cols());
    img.features.resize(bands.front().size(), static_cast<Eigen::Index>(bands.size()));
    for (std::size_t b = 0; b < bands.size(); ++b) {
        for (Eigen::Index i = 0; i < bands[b].size(); ++i) img.features(i, static_cast<Eigen::Index>(b)) = bands[b].data()[i];
    }
    img.valid.assign(static_cast<std::size_t>(bands.front().size()), true);
    img.valid_count = img.valid.size();
    return img;
}

// Rows drawn around prototype 11110000 (label 1) or 00001111 (label 0) with bit flips.
inline LabeledBatch two_prototypes(Rng& rng, Eigen::Index n, double flip) {
    LabeledBatch b;
    b.x.resize(n, 8);
    b.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool first = rng.bernoulli(0.5);
        b.y(i) = first ? 1.0 : 0.0;
        for (Eigen::Index j = 0; j < 8; ++j) {
            const bool bit = (j < 4) == first;
            b.x(i, j) = (rng.bernoulli(flip) ? !bit : bit) ? 1.0 : 0.0;
        }
    }
    return b;
}

}  // namespace lsm::test
