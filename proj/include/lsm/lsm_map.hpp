#pragma once

#include "lsm/metrics.hpp"
#include "lsm/mlp.hpp"
#include "lsm/raster.hpp"
#include "lsm/slic.hpp"
#include "lsm/stack.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace lsm {

struct SusceptibilityMap {
    RasterGrid values;        // probabilities, nodata -9999
    LabelGrid levels;         // 1..4, nodata -9999
    std::vector<bool> skip;   // true on nodata cells
    bool degenerate = false;
};

/// Each cell is scored by its block's model, or by `fallback` when the block has none.
/// Throws InternalError for a valid cell without a block, ArgumentError for fewer than 4 valid cells.
SusceptibilityMap predict_lsm(const Segmentation& seg, std::span<const std::optional<MlpParams>> block_models,
                              const MlpParams& fallback, const RasterStack& stack);

/// Plain PGM with levels 1..4 as gray 64/128/192/255 and nodata as 0.
void write_levels_pgm(std::ostream& out, const LabelGrid& levels);

/// probability.asc, levels.asc and levels.pgm in `dir`.
void write_lsm(const std::filesystem::path& dir, const SusceptibilityMap& map);

}  // namespace lsm
