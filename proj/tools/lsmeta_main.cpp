#include "lsm/error.hpp"
#include "lsm/log.hpp"
#include "lsm/pipeline.hpp"
#include "lsm/synth.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace lsm;

struct Overrides {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> meta_epochs;
    std::optional<std::string> k_shot;
};

void add_config_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "pipeline config (JSON)")->required();
    cmd->add_option("-o,--out", o.out, "output directory (overrides the config)");
    cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
    cmd->add_option("--meta-epochs", o.meta_epochs, "meta-training epochs (overrides the config)");
    cmd->add_option("--k-shot", o.k_shot, "support size: an integer or 'half' (overrides the config)");
}

PipelineConfig resolve_config(const Overrides& o) {
    PipelineConfig c = load_config(o.config);
    if (o.out) c.output_dir = *o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.meta_epochs) c.meta.meta_epochs = *o.meta_epochs;
    if (o.k_shot) c.k_shot = KShot::parse(*o.k_shot);
    c.validate_settings();
    return c;
}

SyntheticSpec read_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read synthetic spec " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("synthetic spec " + path + ": " + e.what());
    }
    return j.get<SyntheticSpec>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot landslide susceptibility mapping with a meta-learned block model"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 1;
    bool quiet = false;
    app.add_option("--threads", threads, "worker threads for independent runs")->check(CLI::PositiveNumber);
    app.add_flag("-q,--quiet", quiet, "suppress progress and warnings");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic region");
    std::string spec_path;
    std::string synth_out;
    std::optional<std::uint64_t> synth_seed;
    std::optional<int> synth_rows, synth_cols, synth_bands, synth_pos, synth_neg;
    std::optional<double> synth_noise;
    synth->add_option("--spec", spec_path, "synthetic spec (JSON); flags override its values");
    synth->add_option("-o,--out", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--rows", synth_rows);
    synth->add_option("--cols", synth_cols);
    synth->add_option("--bands", synth_bands);
    synth->add_option("--positives", synth_pos);
    synth->add_option("--negatives", synth_neg);
    synth->add_option("--noise", synth_noise, "label-noise rate in [0, 0.5)");

    // single stages
    std::map<CLI::App*, Stage> stage_cmds;
    std::map<CLI::App*, Overrides> stage_overrides;
    const std::map<Stage, std::string> help{
        {Stage::segment, "segment regions into blocks and build the task manifest"},
        {Stage::pretrain, "unsupervised pretraining of the initial model"},
        {Stage::metatrain, "meta-train the intermediate model"},
        {Stage::adapt, "few-shot adapt the intermediate model to every task"},
        {Stage::predict, "assemble susceptibility maps"},
        {Stage::evaluate, "score test-task queries"}};
    for (const Stage s : all_stages()) {
        auto* cmd = app.add_subcommand(to_string(s), help.at(s));
        stage_cmds[cmd] = s;
        add_config_options(cmd, stage_overrides[cmd]);
    }

    auto* pipeline = app.add_subcommand("pipeline", "run every stage in order");
    Overrides pipeline_o;
    bool resume = false;
    add_config_options(pipeline, pipeline_o);
    pipeline->add_flag("--resume", resume, "skip stages whose outputs are up to date");

    auto* experiment = app.add_subcommand("experiment", "repeated runs of experiment mode A, B, C or D");
    Overrides experiment_o;
    std::optional<std::string> mode;
    std::optional<int> repeats;
    std::optional<std::string> weighting;
    add_config_options(experiment, experiment_o);
    experiment->add_option("--mode", mode, "A, B, C or D");
    experiment->add_option("--repeats", repeats)->check(CLI::PositiveNumber);
    experiment->add_option("--weighting", weighting, "softmax or uniform");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    set_quiet(quiet);

    try {
        if (synth->parsed()) {
            SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{} : read_spec(spec_path);
            if (synth_seed) spec.seed = *synth_seed;
            if (synth_rows) spec.rows = *synth_rows;
            if (synth_cols) spec.cols = *synth_cols;
            if (synth_bands) spec.bands = *synth_bands;
            if (synth_pos) spec.positives = *synth_pos;
            if (synth_neg) spec.negatives = *synth_neg;
            if (synth_noise) spec.noise_rate = *synth_noise;
            const SyntheticRegion region = generate_synthetic(spec);
            write_synthetic(synth_out, region, spec);
            log_info("wrote " + std::to_string(region.bands.size()) + " bands and " +
                     std::to_string(region.samples.size()) + " samples to " + synth_out);
            return 0;
        }
        for (auto& [cmd, stage] : stage_cmds) {
            if (!cmd->parsed()) continue;
            run_stage(stage, resolve_config(stage_overrides[cmd]), {false, threads});
            return 0;
        }
        if (pipeline->parsed()) {
            const auto reports = run_pipeline(resolve_config(pipeline_o), {resume, threads});
            for (const auto& r : reports) std::cout << to_string(r.stage) << (r.skipped ? " skipped" : " done") << '\n';
            return 0;
        }
        if (experiment->parsed()) {
            PipelineConfig c = resolve_config(experiment_o);
            if (mode) c.experiment.mode = experiment_mode_from_string(*mode);
            if (repeats) c.experiment.repeats = *repeats;
            if (weighting) c.meta.weighting = task_weighting_from_string(*weighting);
            const ExperimentResult r = run_configured_experiment(c, threads);
            std::cout << "mode " << to_string(r.config.mode) << " k=" << r.config.k_shot.to_string() << " runs "
                      << r.oa.values.size() << " OA mean " << fixed(r.oa.mean) << " std " << fixed(r.oa.stddev);
            if (r.control_oa) std::cout << " control OA mean " << fixed(r.control_oa->mean);
            std::cout << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
