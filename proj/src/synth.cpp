#include "lsm/synth.hpp"

#include "lsm/error.hpp"
#include "lsm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace lsm {

namespace {

constexpr std::uint64_t kBandStream = 100;
constexpr std::uint64_t kSampleStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

// One separable box-blur pass with edge clamping.
Matrix box_blur(const Matrix& in, int radius) {
    const Eigen::Index rows = in.rows();
    const Eigen::Index cols = in.cols();
    Matrix tmp(rows, cols);
    Matrix out(rows, cols);
    const double width = 2.0 * radius + 1.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int d = -radius; d <= radius; ++d) s += in(r, std::clamp<Eigen::Index>(c + d, 0, cols - 1));
            tmp(r, c) = s / width;
        }
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int d = -radius; d <= radius; ++d) s += tmp(std::clamp<Eigen::Index>(r + d, 0, rows - 1), c);
            out(r, c) = s / width;
        }
    }
    return out;
}

// Replaces values by their rank scaled to [0, 1], rounded to 1e-4.
void rank_uniform(Matrix& m) {
    const auto n = static_cast<std::size_t>(m.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m.data()[a] < m.data()[b]; });
    for (std::size_t rank = 0; rank < n; ++rank) {
        const double u = n > 1 ? static_cast<double>(rank) / static_cast<double>(n - 1) : 0.0;
        m.data()[order[rank]] = std::round(u * 1e4) / 1e4;
    }
}

Matrix smooth_band(const SyntheticSpec& spec, int band) {
    Rng rng(derive_seed(spec.seed, kBandStream + static_cast<std::uint64_t>(band)));
    Matrix m(spec.rows, spec.cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    if (spec.smoothing > 0) {
        for (int pass = 0; pass < 3; ++pass) m = box_blur(m, spec.smoothing);
    }
    rank_uniform(m);
    return m;
}

RasterGrid band_grid(const SyntheticSpec& spec, Matrix values) {
    RasterGrid g;
    g.rows = spec.rows;
    g.cols = spec.cols;
    g.cellsize = spec.cellsize;
    g.values = std::move(values);
    return g;
}

std::vector<std::size_t> draw_cells(const SyntheticSpec& spec, const LabelGrid& truth) {
    Rng rng(derive_seed(spec.seed, kSampleStream));
    std::vector<std::size_t> chosen;
    auto need = [&](int label) { return label == 1 ? spec.positives : spec.negatives; };
    if (spec.tile_size == 0) {
        for (const int label : {1, 0}) {
            std::vector<std::size_t> cells;
            for (std::size_t i = 0; i < truth.cell_count(); ++i) {
                if (truth.at(i) == label) cells.push_back(i);
            }
            if (cells.size() < static_cast<std::size_t>(need(label))) {
                throw ConfigError("synthetic region has " + std::to_string(cells.size()) + " cells of class " +
                                  std::to_string(label) + ", fewer than requested");
            }
            rng.shuffle(cells);
            chosen.insert(chosen.end(), cells.begin(), cells.begin() + need(label));
        }
    } else {
        const int tr = spec.rows / spec.tile_size;
        const int tc = spec.cols / spec.tile_size;
        std::vector<int> tiles(static_cast<std::size_t>(tr * tc));
        std::iota(tiles.begin(), tiles.end(), 0);
        rng.shuffle(tiles);
        int got_pos = 0;
        int got_neg = 0;
        for (const int tile : tiles) {
            if (got_pos >= spec.positives && got_neg >= spec.negatives) break;
            std::vector<std::size_t> pos;
            std::vector<std::size_t> neg;
            const int r0 = (tile / tc) * spec.tile_size;
            const int c0 = (tile % tc) * spec.tile_size;
            for (int r = r0; r < r0 + spec.tile_size; ++r) {
                for (int c = c0; c < c0 + spec.tile_size; ++c) {
                    const auto i = static_cast<std::size_t>(r) * static_cast<std::size_t>(spec.cols) +
                                   static_cast<std::size_t>(c);
                    (truth.at(i) == 1 ? pos : neg).push_back(i);
                }
            }
            if (pos.size() < static_cast<std::size_t>(spec.per_tile) ||
                neg.size() < static_cast<std::size_t>(spec.per_tile)) {
                continue;
            }
            rng.shuffle(pos);
            rng.shuffle(neg);
            const int take_pos = std::min(spec.per_tile, spec.positives - got_pos);
            const int take_neg = std::min(spec.per_tile, spec.negatives - got_neg);
            chosen.insert(chosen.end(), pos.begin(), pos.begin() + take_pos);
            chosen.insert(chosen.end(), neg.begin(), neg.begin() + take_neg);
            got_pos += take_pos;
            got_neg += take_neg;
        }
        if (got_pos < spec.positives || got_neg < spec.negatives) {
            throw ConfigError("synthetic region has too few survey tiles holding " + std::to_string(spec.per_tile) +
                              " samples of each class");
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

}  // namespace

int SyntheticSpec::rule_of_zone(int zone) const {
    if (!zone_rules.empty()) return zone_rules[static_cast<std::size_t>(zone)];
    const int zr = zone / zone_cols;
    const int zc = zone % zone_cols;
    return (zr + zc) % static_cast<int>(rules.size());
}

void SyntheticSpec::validate() const {
    std::vector<std::string> v;
    if (rows < 2 || cols < 2) v.push_back("grid must be at least 2x2");
    if (bands < 1) v.push_back("band count must be positive");
    if (!(cellsize > 0.0)) v.push_back("cellsize must be positive");
    if (smoothing < 0) v.push_back("smoothing must be non-negative");
    if (rules.empty()) v.push_back("at least one rule is required");
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto& r = rules[i];
        const std::string name = "rule " + std::to_string(i);
        if (r.band < 0 || r.band >= bands) v.push_back(name + " references missing band " + std::to_string(r.band));
        if (r.comparison != ">" && r.comparison != "<") v.push_back(name + " comparison must be '>' or '<'");
        if (!(r.threshold > 0.0 && r.threshold < 1.0)) v.push_back(name + " threshold must lie in (0, 1)");
    }
    if (zone_rows < 1 || zone_cols < 1 || zone_rows > rows || zone_cols > cols) v.push_back("zone grid does not fit the raster");
    if (!zone_rules.empty()) {
        if (zone_rules.size() != static_cast<std::size_t>(zone_rows) * static_cast<std::size_t>(zone_cols)) {
            v.push_back("zone_rules needs one entry per zone");
        }
        for (const int z : zone_rules) {
            if (z < 0 || static_cast<std::size_t>(z) >= rules.size()) v.push_back("zone_rules references missing rule " + std::to_string(z));
        }
    }
    if (positives < 1 || negatives < 1) v.push_back("sample counts per class must be positive");
    if (tile_size < 0 || tile_size > std::min(rows, cols)) v.push_back("tile_size must lie in [0, min(rows, cols)]");
    if (tile_size > 0 && (per_tile < 1 || 2 * per_tile > tile_size * tile_size)) v.push_back("per_tile does not fit a tile");
    if (!(noise_rate >= 0.0 && noise_rate < 0.5)) v.push_back("noise_rate must lie in [0, 0.5)");
    if (v.empty()) return;
    std::string msg = "invalid synthetic spec:";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ConfigError(msg);
}

SyntheticRegion generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticRegion region;
    for (int b = 0; b < spec.bands; ++b) region.bands.emplace_back("band" + std::to_string(b), band_grid(spec, smooth_band(spec, b)));

    region.truth = LabelGrid::like(region.bands.front().second, 0, -9999.0);
    for (int r = 0; r < spec.rows; ++r) {
        const int zr = r * spec.zone_rows / spec.rows;
        for (int c = 0; c < spec.cols; ++c) {
            const int zc = c * spec.zone_cols / spec.cols;
            const SyntheticRule& rule = spec.rules[static_cast<std::size_t>(spec.rule_of_zone(zr * spec.zone_cols + zc))];
            region.truth.values(r, c) = rule.label(region.bands[static_cast<std::size_t>(rule.band)].second.values(r, c)) ? 1 : 0;
        }
    }

    const std::vector<std::size_t> cells = draw_cells(spec, region.truth);
    const RasterGrid& geo = region.bands.front().second;
    for (const std::size_t i : cells) {
        const auto r = static_cast<int>(i / static_cast<std::size_t>(spec.cols));
        const auto c = static_cast<int>(i % static_cast<std::size_t>(spec.cols));
        SamplePoint p;
        p.x = geo.xll + (c + 0.5) * geo.cellsize;
        p.y = geo.yll + (geo.rows - r - 0.5) * geo.cellsize;
        p.label = region.truth.at(i);
        region.samples.push_back(p);
    }

    const auto n_flip = static_cast<std::size_t>(std::lround(spec.noise_rate * static_cast<double>(cells.size())));
    if (n_flip > 0) {
        Rng rng(derive_seed(spec.seed, kNoiseStream));
        std::vector<std::size_t> order(cells.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        region.flipped.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_flip));
        std::sort(region.flipped.begin(), region.flipped.end());
        for (const std::size_t s : region.flipped) region.samples[s].label = 1 - *region.samples[s].label;
    }
    return region;
}

std::vector<std::filesystem::path> write_synthetic(const std::filesystem::path& dir, const SyntheticRegion& region,
                                                   const SyntheticSpec& spec) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> paths;
    for (const auto& [name, grid] : region.bands) {
        paths.push_back(dir / (name + ".asc"));
        write_ascii_grid(paths.back(), grid);
    }
    write_ascii_grid(dir / "truth.asc", region.truth);
    write_samples_csv(dir / "samples.csv", region.samples);
    std::ofstream out(dir / "spec.json");
    if (!out) throw DataError("cannot write " + (dir / "spec.json").string());
    out << nlohmann::json(spec).dump(2) << '\n';
    return paths;
}

void to_json(nlohmann::json& j, const SyntheticRule& r) {
    j = {{"band", r.band}, {"comparison", r.comparison}, {"threshold", r.threshold}};
}

void from_json(const nlohmann::json& j, SyntheticRule& r) {
    j.at("band").get_to(r.band);
    j.at("comparison").get_to(r.comparison);
    j.at("threshold").get_to(r.threshold);
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = {{"rows", s.rows},           {"cols", s.cols},
         {"bands", s.bands},         {"cellsize", s.cellsize},
         {"smoothing", s.smoothing}, {"rules", s.rules},
         {"zone_rows", s.zone_rows}, {"zone_cols", s.zone_cols},
         {"zone_rules", s.zone_rules}, {"positives", s.positives},
         {"negatives", s.negatives}, {"tile_size", s.tile_size},
         {"per_tile", s.per_tile},   {"noise_rate", s.noise_rate},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    static const std::set<std::string> known{"rows",      "cols",      "bands",      "cellsize",  "smoothing",
                                             "rules",     "zone_rows", "zone_cols",  "zone_rules", "positives",
                                             "negatives", "tile_size", "per_tile",   "noise_rate", "seed"};
    if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown synthetic spec key '" + key + "'");
    }
    try {
        if (j.contains("rows")) j.at("rows").get_to(s.rows);
        if (j.contains("cols")) j.at("cols").get_to(s.cols);
        if (j.contains("bands")) j.at("bands").get_to(s.bands);
        if (j.contains("cellsize")) j.at("cellsize").get_to(s.cellsize);
        if (j.contains("smoothing")) j.at("smoothing").get_to(s.smoothing);
        if (j.contains("rules")) j.at("rules").get_to(s.rules);
        if (j.contains("zone_rows")) j.at("zone_rows").get_to(s.zone_rows);
        if (j.contains("zone_cols")) j.at("zone_cols").get_to(s.zone_cols);
        if (j.contains("zone_rules")) j.at("zone_rules").get_to(s.zone_rules);
        if (j.contains("positives")) j.at("positives").get_to(s.positives);
        if (j.contains("negatives")) j.at("negatives").get_to(s.negatives);
        if (j.contains("tile_size")) j.at("tile_size").get_to(s.tile_size);
        if (j.contains("per_tile")) j.at("per_tile").get_to(s.per_tile);
        if (j.contains("noise_rate")) j.at("noise_rate").get_to(s.noise_rate);
        if (j.contains("seed")) j.at("seed").get_to(s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
}

}  // namespace lsm
