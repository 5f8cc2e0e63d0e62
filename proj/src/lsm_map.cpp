#include "lsm/lsm_map.hpp"

#include "lsm/error.hpp"

#include <fstream>
#include <ostream>

namespace lsm {

SusceptibilityMap predict_lsm(const Segmentation& seg, std::span<const std::optional<MlpParams>> block_models,
                              const MlpParams& fallback, const RasterStack& stack) {
    if (seg.labels.size() != stack.cell_count()) throw ArgumentError("predict_lsm: segmentation does not match the stack");
    if (block_models.size() != seg.blocks.size()) throw ArgumentError("predict_lsm: one model slot per block expected");
    const Matrix features = normalized_cells(stack);

    std::vector<std::vector<std::size_t>> cells(seg.blocks.size());
    SusceptibilityMap map;
    map.values = RasterGrid::like(stack.geometry(), -9999.0, -9999.0);
    map.skip.assign(stack.cell_count(), false);
    for (std::size_t i = 0; i < stack.cell_count(); ++i) {
        if (!stack.valid(i)) {
            map.skip[i] = true;
            continue;
        }
        const int label = seg.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= seg.blocks.size()) {
            throw InternalError("predict_lsm: valid cell " + std::to_string(i) + " has no block");
        }
        cells[static_cast<std::size_t>(label)].push_back(i);
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (cells[k].empty()) continue;
        Matrix x(static_cast<Eigen::Index>(cells[k].size()), features.cols());
        for (std::size_t r = 0; r < cells[k].size(); ++r) {
            x.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(cells[k][r]));
        }
        const MlpParams& model = block_models[k] ? *block_models[k] : fallback;
        const Vector p = forward_batch(model, x);
        for (std::size_t r = 0; r < cells[k].size(); ++r) map.values.at(cells[k][r]) = p(static_cast<Eigen::Index>(r));
    }

    std::vector<double> valid_values;
    for (std::size_t i = 0; i < stack.cell_count(); ++i) {
        if (!map.skip[i]) valid_values.push_back(map.values.at(i));
    }
    map.levels = LabelGrid::like(stack.geometry(), -9999, -9999.0);
    const LevelResult lv = quantize_levels(valid_values);
    map.degenerate = lv.degenerate;
    std::size_t j = 0;
    for (std::size_t i = 0; i < stack.cell_count(); ++i) {
        if (!map.skip[i]) map.levels.at(i) = lv.levels[j++];
    }
    return map;
}

void write_levels_pgm(std::ostream& out, const LabelGrid& levels) {
    static constexpr int kGray[] = {0, 64, 128, 192, 255};
    out << "P2\n" << levels.cols << ' ' << levels.rows << "\n255\n";
    for (int r = 0; r < levels.rows; ++r) {
        for (int c = 0; c < levels.cols; ++c) {
            const int v = levels.values(r, c);
            out << (c ? " " : "") << (v >= 1 && v <= 4 ? kGray[v] : 0);
        }
        out << '\n';
    }
}

void write_lsm(const std::filesystem::path& dir, const SusceptibilityMap& map) {
    std::filesystem::create_directories(dir);
    std::ofstream prob(dir / "probability.asc");
    std::ofstream lv(dir / "levels.asc");
    std::ofstream pgm(dir / "levels.pgm");
    if (!prob || !lv || !pgm) throw DataError("cannot write susceptibility outputs under " + dir.string());
    write_ascii_grid(prob, map.values);
    write_ascii_grid(lv, map.levels);
    write_levels_pgm(pgm, map.levels);
}

}  // namespace lsm
