#include "doctest.h"

#include "lsm/checkpoint.hpp"
#include "lsm/config.hpp"
#include "lsm/error.hpp"
#include "lsm/log.hpp"
#include "lsm/parallel.hpp"
#include "lsm/pipeline.hpp"
#include "lsm/synth.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

using namespace lsm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lsmeta_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

SyntheticSpec small_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.rows = 32;
    s.cols = 32;
    s.bands = 4;
    s.smoothing = 1;
    s.positives = 40;
    s.negatives = 40;
    s.seed = seed;
    return s;
}

// Writes a synthetic region and returns its config entry.
RegionConfig make_region(const fs::path& dir, const std::string& name, const SyntheticSpec& spec) {
    RegionConfig r;
    r.name = name;
    r.bands = write_synthetic(dir / name, generate_synthetic(spec), spec);
    r.samples = dir / name / "samples.csv";
    return r;
}

PipelineConfig small_config(const fs::path& dir) {
    PipelineConfig c;
    c.seed = 5;
    c.output_dir = dir / "out";
    c.regions.push_back(make_region(dir, "north", small_spec(21)));
    c.slic.target_blocks = 16;
    c.pretrain.rbm.epochs = 2;
    c.pretrain.dae.epochs = 2;
    c.meta.meta_epochs = 20;
    c.meta.meta_lr = 1e-3;
    c.experiment.repeats = 2;
    c.experiment.control_epochs = 20;
    return c;
}

int run_cli(const std::string& args, const fs::path& log) {
    const char* bin = std::getenv("LSMETA_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "LSMETA_BIN is not set");
    const std::string cmd = std::string(bin) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("synthetic region construction") {
    SyntheticSpec spec;  // 64x64, 4 bands, 2 rules, 100 samples
    const SyntheticRegion region = generate_synthetic(spec);
    CHECK(region.bands.size() == 4);
    CHECK(region.samples.size() == 100);
    CHECK(region.flipped.empty());

    const fs::path dir = scratch("synth");
    const auto paths = write_synthetic(dir, region, spec);
    CHECK(paths.size() == 4);
    for (const char* f : {"band0.asc", "band1.asc", "band2.asc", "band3.asc", "samples.csv", "truth.asc"}) {
        CHECK(fs::is_regular_file(dir / f));
    }

    // truth follows the zone rules and every sample carries its cell's truth
    const RasterStack stack = RasterStack::build(region.bands);
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            const int zone = (r * spec.zone_rows / spec.rows) * spec.zone_cols + c * spec.zone_cols / spec.cols;
            const SyntheticRule& rule = spec.rules[static_cast<std::size_t>(spec.rule_of_zone(zone))];
            const double v = region.bands[static_cast<std::size_t>(rule.band)].second.values(r, c);
            CHECK(region.truth.values(r, c) == (rule.label(v) ? 1 : 0));
        }
    }
    int positives = 0;
    std::set<std::size_t> cells;
    for (const auto& p : region.samples) {
        const auto cell = stack.locate(p.x, p.y);
        REQUIRE(cell.has_value());
        cells.insert(*cell);
        CHECK(*p.label == region.truth.at(*cell));
        positives += *p.label;
    }
    CHECK(positives == 50);
    CHECK(cells.size() == 100);

    // bands are rank-uniform on a 1e-4 grid
    for (const auto& [name, grid] : region.bands) {
        CHECK(grid.values.minCoeff() == 0.0);
        CHECK(grid.values.maxCoeff() == 1.0);
        for (Eigen::Index i = 0; i < grid.values.size(); ++i) {
            const double v = grid.values.data()[i] * 1e4;
            CHECK(std::abs(v - std::round(v)) < 1e-6);
        }
    }
}

TEST_CASE("synthetic label noise flips an exact count") {
    SyntheticSpec clean;
    SyntheticSpec noisy = clean;
    noisy.noise_rate = 0.1;
    const SyntheticRegion a = generate_synthetic(clean);
    const SyntheticRegion b = generate_synthetic(noisy);
    REQUIRE(a.samples.size() == b.samples.size());
    std::size_t differ = 0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].x == b.samples[i].x);
        CHECK(a.samples[i].y == b.samples[i].y);
        differ += *a.samples[i].label != *b.samples[i].label;
    }
    CHECK(differ == 10);
    CHECK(b.flipped.size() == 10);

    noisy.noise_rate = 0.25;
    noisy.positives = 7;
    noisy.negatives = 6;
    noisy.tile_size = 0;
    CHECK(generate_synthetic(noisy).flipped.size() == 3);  // round(3.25)
}

TEST_CASE("synthetic output is byte-identical per seed") {
    const SyntheticSpec spec = small_spec(4);
    const fs::path a = scratch("synth_a");
    const fs::path b = scratch("synth_b");
    write_synthetic(a, generate_synthetic(spec), spec);
    write_synthetic(b, generate_synthetic(spec), spec);
    for (const auto& entry : fs::directory_iterator(a)) {
        CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
    SyntheticSpec other = spec;
    other.seed = 5;
    const fs::path c = scratch("synth_c");
    write_synthetic(c, generate_synthetic(other), other);
    CHECK(slurp(a / "band0.asc") != slurp(c / "band0.asc"));
}

TEST_CASE("synthetic spec validation and json") {
    SyntheticSpec bad;
    bad.rules = {{7, ">", 0.5}, {0, "=", 1.5}};
    bad.noise_rate = 0.5;
    try {
        bad.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("missing band 7") != std::string::npos);
        CHECK(msg.find("comparison") != std::string::npos);
        CHECK(msg.find("threshold") != std::string::npos);
        CHECK(msg.find("noise_rate") != std::string::npos);
    }
    SyntheticSpec crowded = small_spec(1);
    crowded.positives = 900;
    CHECK_THROWS_AS(generate_synthetic(crowded), ConfigError);

    SyntheticSpec s = small_spec(9);
    s.zone_rules = {1, 1, 0, 0};
    const SyntheticSpec back = nlohmann::json(s).get<SyntheticSpec>();
    CHECK(nlohmann::json(back) == nlohmann::json(s));
    CHECK_THROWS_AS(nlohmann::json({{"rowz", 3}}).get<SyntheticSpec>(), ConfigError);
}

TEST_CASE("checkpoint round trip") {
    Rng rng(3);
    const std::vector<Eigen::Index> hidden{5, 4};
    Checkpoint c;
    c.kind = "f0";
    c.params = make_mlp(3, hidden, Activation::sigmoid, rng);
    c.params.layers[0].weight(0, 0) = 0.1 + 0.2;  // not a short decimal
    c.config_hash = "00ff";
    c.seed = 18446744073709551557ULL;
    c.log = {{"loss", {0.5, 0.25}}};
    const fs::path dir = scratch("ckpt");
    save_checkpoint(dir / "m.json", c);
    const Checkpoint back = load_checkpoint(dir / "m.json");
    CHECK(back.kind == "f0");
    CHECK(back.seed == c.seed);
    CHECK(back.config_hash == "00ff");
    CHECK(back.log == c.log);
    REQUIRE(back.params.layers.size() == 3);
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(back.params.layers[l].weight == c.params.layers[l].weight);
        CHECK(back.params.layers[l].bias == c.params.layers[l].bias);
        CHECK(back.params.layers[l].activation == c.params.layers[l].activation);
    }

    nlohmann::json j = checkpoint_json(c);
    j["layers"][1]["weight"].erase(0);
    CHECK_THROWS_AS(checkpoint_from_json(j), DataError);
    j = checkpoint_json(c);
    j["format"] = "other/1";
    CHECK_THROWS_AS(checkpoint_from_json(j), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.json"), DataError);
}

TEST_CASE("pipeline config") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");

    const nlohmann::json j = {{"seed", 3},
                              {"regions", {{{"name", "r"}, {"bands", {"a.asc"}}, {"samples", "s.csv"}}}},
                              {"meta", {{"meta_epochs", 9}, {"weighting", "uniform"}}},
                              {"tasks", {{"k_shot", "half"}}}};
    const PipelineConfig c = config_from_json(j, "/data");
    CHECK(c.seed == 3);
    CHECK(c.meta.meta_epochs == 9);
    CHECK(c.meta.weighting == TaskWeighting::uniform);
    CHECK(c.meta.alpha == 0.1);
    CHECK(c.meta.inner_steps == 5);
    CHECK(c.meta.meta_lr == 1e-4);
    CHECK(c.slic.target_blocks == 64);
    CHECK(c.k_shot.kind == KShot::Kind::half);
    CHECK(c.regions[0].bands[0] == fs::path("/data/a.asc"));

    // canonical JSON reloads to the same settings and hash
    const PipelineConfig again = config_from_json(config_json(c));
    CHECK(config_hash(again) == config_hash(c));
    PipelineConfig changed = c;
    changed.meta.alpha = 0.2;
    CHECK(config_hash(changed) != config_hash(c));
    PipelineConfig moved = c;
    moved.output_dir = "/elsewhere";
    CHECK(config_hash(moved) == config_hash(c));

    CHECK_THROWS_AS(config_from_json({{"regions", nlohmann::json::array()}}), ConfigError);  // no seed
    CHECK_THROWS_AS(config_from_json({{"seed", 1}, {"meta", {{"alpah", 1}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"seed", 1}, {"meta", {{"alpha", "big"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"seed", 1}, {"meta", {{"alpha", -1.0}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"seed", 1}, {"experiment", {{"mode", "E"}}}}), ConfigError);
    CHECK_THROWS_AS(c.validate(), ConfigError);  // files do not exist
}

TEST_CASE("parallel_for is order independent") {
    std::vector<double> one(37), many(37);
    auto body = [](std::vector<double>& out) {
        return [&out](std::size_t i) { out[i] = std::sin(static_cast<double>(i)); };
    };
    parallel_for(one.size(), 1, body(one));
    parallel_for(many.size(), 4, body(many));
    CHECK(one == many);
    CHECK_THROWS_AS(parallel_for(5, 3, [](std::size_t i) {
                        if (i == 3) throw DataError("boom");
                    }),
                    DataError);
}

TEST_CASE("pipeline stages, determinism and resume") {
    set_quiet(true);
    const fs::path dir = scratch("pipeline");
    PipelineConfig c = small_config(dir);
    const auto first = run_pipeline(c);
    CHECK(first.size() == 6);
    for (const auto& r : first) CHECK_FALSE(r.skipped);

    const std::vector<std::string> artifacts{
        "segment/north/labels.asc", "segment/north/blocks.json", "segment/tasks.json", "pretrain/f0.json",
        "pretrain/pretrain_log.csv", "metatrain/intermediate.json", "metatrain/meta_log.csv", "adapt/models.json",
        "predict/north/probability.asc", "predict/north/levels.asc", "predict/north/levels.pgm",
        "evaluate/metrics.csv", "evaluate/predictions.csv"};
    for (const auto& a : artifacts) CHECK_MESSAGE(fs::is_regular_file(c.output_dir / a), a);

    // artifacts embed the config hash and seed
    const Checkpoint f0 = load_checkpoint(c.output_dir / "pretrain/f0.json");
    CHECK(f0.config_hash == config_hash(c));
    CHECK(f0.seed == c.seed);

    // a second run elsewhere gives identical bytes
    PipelineConfig twin = c;
    twin.output_dir = dir / "out2";
    run_pipeline(twin);
    for (const auto& a : artifacts) CHECK_MESSAGE(slurp(c.output_dir / a) == slurp(twin.output_dir / a), a);

    // every valid cell is mapped to a level
    const LabelGrid levels = to_label_grid(load_ascii_grid(c.output_dir / "predict/north/levels.asc"));
    for (std::size_t i = 0; i < levels.cell_count(); ++i) CHECK((levels.at(i) >= 1 && levels.at(i) <= 4));

    const auto resumed = run_pipeline(c, {true, 1});
    for (const auto& r : resumed) CHECK(r.skipped);

    // a changed setting reruns from the first stage whose record no longer matches
    PipelineConfig changed = c;
    changed.meta.meta_epochs = 10;
    const auto partial = run_pipeline(changed, {true, 1});
    for (const auto& r : partial) CHECK(r.skipped == false);

    // a removed artifact forces that stage and everything after it
    const auto again = run_pipeline(changed, {true, 1});
    fs::remove(changed.output_dir / "adapt/models.json");
    const auto repaired = run_pipeline(changed, {true, 1});
    CHECK(repaired[2].skipped);
    CHECK_FALSE(repaired[3].skipped);
    CHECK_FALSE(repaired[5].skipped);
    CHECK(again[0].skipped);

    // single stages rerun from predecessor artifacts alone
    run_pipeline(c);
    const std::string before = slurp(c.output_dir / "evaluate/metrics.csv");
    fs::remove(c.output_dir / "evaluate/metrics.csv");
    run_stage(Stage::evaluate, c);
    CHECK(slurp(c.output_dir / "evaluate/metrics.csv") == before);
}

TEST_CASE("stage errors keep their category") {
    set_quiet(true);
    const fs::path dir = scratch("stage_errors");
    PipelineConfig c = small_config(dir);
    CHECK_THROWS_AS(run_stage(Stage::metatrain, c), DataError);  // no f0 yet
    try {
        run_stage(Stage::adapt, c);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
        CHECK(std::string(e.what()).find("stage adapt") != std::string::npos);
    }
    PipelineConfig missing = c;
    missing.regions[0].bands[0] = dir / "nope.asc";
    CHECK_THROWS_AS(run_pipeline(missing), ConfigError);
    CHECK_FALSE(fs::exists(missing.output_dir / "segment"));
}

TEST_CASE("experiment runs") {
    set_quiet(true);
    const fs::path dir = scratch("experiment");
    PipelineConfig c = small_config(dir);
    c.experiment.repeats = 1;
    const ExperimentResult one = run_configured_experiment(c);
    CHECK(one.runs.size() == 1);
    CHECK(one.oa.stddev == 0.0);
    CHECK(one.oa.min == one.oa.mean);
    CHECK(one.oa.max == one.oa.mean);

    c.experiment.repeats = 2;
    const ExperimentResult a = run_configured_experiment(c, 1);
    const std::string runs_a = slurp(c.output_dir / "experiment/runs.csv");
    const ExperimentResult b = run_configured_experiment(c, 2);
    CHECK(slurp(c.output_dir / "experiment/runs.csv") == runs_a);
    CHECK(a.oa.values == b.oa.values);
    CHECK(a.runs[0].seed != a.runs[1].seed);

    c.experiment.mode = ExperimentMode::B;
    CHECK_THROWS_AS(run_configured_experiment(c), ConfigError);
    c.regions.push_back(make_region(dir, "south", small_spec(22)));
    for (const ExperimentMode m : {ExperimentMode::B, ExperimentMode::C, ExperimentMode::D}) {
        c.experiment.mode = m;
        const ExperimentResult r = run_configured_experiment(c);
        CHECK(r.runs.size() == 2);
        for (const auto& run : r.runs) {
            CHECK(run.train_tasks > 0);
            CHECK(run.counts.total() == run.scores.size());
        }
    }
}

TEST_CASE("command line") {
    const fs::path dir = scratch("cli");
    const fs::path log = dir / "log.txt";
    CHECK(run_cli("--help", log) == 0);
    CHECK(run_cli("frobnicate", log) == 2);
    CHECK(run_cli("synth -o " + (dir / "r1").string() + " --rows 32 --cols 32 --positives 30 --negatives 30 --seed 8", log) == 0);
    CHECK(fs::is_regular_file(dir / "r1/truth.asc"));
    CHECK(run_cli("synth -o " + (dir / "bad").string() + " --noise 0.7", log) == 2);
    CHECK(slurp(log).find("noise_rate") != std::string::npos);

    std::vector<std::string> bands;
    for (int b = 0; b < 4; ++b) bands.push_back((dir / "r1" / ("band" + std::to_string(b) + ".asc")).string());
    nlohmann::json cfg = {{"seed", 2},
                          {"output_dir", (dir / "out").string()},
                          {"regions", {{{"name", "r1"}, {"bands", bands}, {"samples", (dir / "r1/samples.csv").string()}}}},
                          {"slic", {{"target_blocks", 16}}},
                          {"pretrain", {{"rbm", {{"epochs", 2}}}, {"dae", {{"epochs", 2}}}}},
                          {"meta", {{"meta_epochs", 10}}},
                          {"experiment", {{"control_epochs", 10}}}};
    std::ofstream(dir / "cfg.json") << cfg.dump();
    const std::string c = " -q -c " + (dir / "cfg.json").string();

    CHECK(run_cli("experiment --mode A --repeats 2" + c, log) == 0);
    const std::string first = slurp(dir / "out/experiment/runs.csv");
    CHECK(run_cli("experiment --mode A --repeats 2" + c, log) == 0);
    CHECK(slurp(dir / "out/experiment/runs.csv") == first);
    CHECK(run_cli("experiment --mode B" + c, log) == 2);

    CHECK(run_cli("segment" + c, log) == 0);
    CHECK(run_cli("metatrain" + c, log) == 3);  // needs the pretrain stage
    CHECK(run_cli("pipeline --resume" + c, log) == 0);
    CHECK(slurp(log).find("segment skipped") != std::string::npos);
    CHECK(slurp(log).find("evaluate done") != std::string::npos);

    cfg["regions"][0]["bands"][0] = (dir / "missing.asc").string();
    std::ofstream(dir / "bad.json") << cfg.dump();
    CHECK(run_cli("pipeline -c " + (dir / "bad.json").string(), log) == 2);
    CHECK(run_cli("pipeline -c " + (dir / "absent.json").string(), log) == 2);

    cfg["regions"][0]["bands"][0] = bands[0];
    cfg["meta"]["meta_lr"] = 1e308;
    cfg["output_dir"] = (dir / "diverge").string();
    std::ofstream(dir / "diverge.json") << cfg.dump();
    CHECK(run_cli("pipeline -c " + (dir / "diverge.json").string(), log) == 4);
}
