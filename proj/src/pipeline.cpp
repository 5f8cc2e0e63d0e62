#include "lsm/pipeline.hpp"

#include "lsm/checkpoint.hpp"
#include "lsm/error.hpp"
#include "lsm/log.hpp"
#include "lsm/lsm_map.hpp"
#include "lsm/rng.hpp"

#include <fstream>
#include <map>

namespace lsm {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kPretrainStream = 11;
constexpr std::uint64_t kMetaStream = 12;
constexpr std::uint64_t kTaskSplitStream = 13;
constexpr std::uint64_t kSupportStream = 14;
constexpr const char* kAdaptedFormat = "lsmeta-adapted/1";

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing artifact " + path.string() + " (run the earlier stages first)");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

fs::path stage_dir(const PipelineConfig& c, Stage s) { return c.output_dir / to_string(s); }

void write_stage_record(const PipelineConfig& c, Stage s, const std::vector<fs::path>& outputs) {
    json files = json::array();
    for (const auto& p : outputs) files.push_back(fs::relative(p, stage_dir(c, s)).generic_string());
    write_json(stage_dir(c, s) / "stage.json",
               {{"stage", to_string(s)}, {"config_hash", config_hash(c)}, {"seed", c.seed}, {"outputs", files}});
}

bool up_to_date(const PipelineConfig& c, Stage s) {
    const fs::path record = stage_dir(c, s) / "stage.json";
    if (!fs::is_regular_file(record)) return false;
    try {
        const json j = read_json(record);
        if (j.at("config_hash").get<std::string>() != config_hash(c)) return false;
        for (const auto& f : j.at("outputs")) {
            if (!fs::is_regular_file(stage_dir(c, s) / f.get<std::string>())) return false;
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

RasterStack load_stack(const RegionConfig& r) {
    std::vector<std::pair<std::string, RasterGrid>> bands;
    for (const auto& path : r.bands) bands.emplace_back(path.stem().string(), load_ascii_grid(path));
    return RasterStack::build(std::move(bands));
}

// Regions rebuilt from the segment stage's label rasters, with samples pooled in config order.
struct Workspace {
    std::vector<RegionData> regions;
    std::vector<FeatureVector> pool;
    std::vector<std::size_t> offsets;
};

Workspace load_workspace(const PipelineConfig& c) {
    Workspace w;
    for (const auto& rc : c.regions) {
        RasterStack stack = load_stack(rc);
        const fs::path labels_path = stage_dir(c, Stage::segment) / rc.name / "labels.asc";
        if (!fs::is_regular_file(labels_path)) throw DataError("missing artifact " + labels_path.string() + " (run segment first)");
        const LabelGrid labels = to_label_grid(load_ascii_grid(labels_path));
        if (!labels.same_geometry(stack.geometry())) throw DataError(labels_path.string() + " does not match the bands of region " + rc.name);
        RegionData r{rc.name, std::move(stack), {}, {}, {}};
        r.segmentation = segmentation_from_labels(labels, weighted_image(r.stack, c.slic));
        const std::vector<SamplePoint> points = load_samples_csv(rc.samples);
        r.samples = featurize_points(r.stack, points);
        r.excluded_samples = group_samples(r.segmentation, r.samples).excluded;
        w.offsets.push_back(w.pool.size());
        w.pool.insert(w.pool.end(), r.samples.begin(), r.samples.end());
        w.regions.push_back(std::move(r));
    }
    return w;
}

MetaDatasets load_tasks(const PipelineConfig& c) {
    return datasets_from_manifest(read_json(stage_dir(c, Stage::segment) / "tasks.json"));
}

Checkpoint load_stage_checkpoint(const PipelineConfig& c, Stage s, const char* file) {
    const fs::path path = stage_dir(c, s) / file;
    if (!fs::is_regular_file(path)) throw DataError("missing artifact " + path.string() + " (run " + to_string(s) + " first)");
    return load_checkpoint(path);
}

Matrix pretrain_data(const std::vector<RasterStack>& stacks) {
    Eigen::Index rows = 0;
    for (const auto& s : stacks) rows += static_cast<Eigen::Index>(s.valid_count());
    Matrix data(rows, static_cast<Eigen::Index>(stacks.front().band_count()));
    Eigen::Index at = 0;
    for (const auto& s : stacks) {
        const Matrix cells = normalized_cells(s);
        for (std::size_t i = 0; i < s.cell_count(); ++i) {
            if (s.valid(i)) data.row(at++) = cells.row(static_cast<Eigen::Index>(i));
        }
    }
    return data;
}

MlpParams pretrain_f0(const PipelineConfig& c, const std::vector<RasterStack>& stacks, PretrainStack* stack_out) {
    for (const auto& s : stacks) {
        if (s.band_count() != stacks.front().band_count()) throw DataError("regions must share the band count");
    }
    PretrainResult r = greedy_pretrain(pretrain_data(stacks), c.pretrain, derive_seed(c.seed, kPretrainStream));
    if (stack_out) *stack_out = std::move(r.stack);
    return r.f0;
}

void stage_segment(const PipelineConfig& c) {
    const fs::path dir = stage_dir(c, Stage::segment);
    std::vector<fs::path> outputs;
    std::vector<MetaTask> tasks;
    std::vector<ExcludedBlock> excluded;
    std::vector<FeatureVector> pool;
    json regions = json::array();
    for (const auto& rc : c.regions) {
        RasterStack stack = load_stack(rc);
        const std::vector<SamplePoint> points = load_samples_csv(rc.samples);
        RegionData r = prepare_region(rc.name, std::move(stack), points, c.slic);
        fs::create_directories(dir / rc.name);
        outputs.push_back(dir / rc.name / "labels.asc");
        write_ascii_grid(outputs.back(), label_grid(r.segmentation, r.stack.geometry()));
        outputs.push_back(dir / rc.name / "blocks.json");
        json report = segmentation_report(r.segmentation, r.samples, c.slic);
        report["excluded_samples"] = r.excluded_samples;
        write_json(outputs.back(), report);

        TaskBuild built = build_tasks(r.segmentation.blocks, r.samples, c.min_per_class, rc.name, pool.size());
        regions.push_back({{"name", rc.name}, {"offset", pool.size()}, {"samples", r.samples.size()}});
        pool.insert(pool.end(), r.samples.begin(), r.samples.end());
        excluded.insert(excluded.end(), built.excluded.begin(), built.excluded.end());
        for (auto& t : built.tasks) {
            const std::size_t k = c.k_shot.resolve(t.n());
            if (k >= 1 && k < t.n()) {
                tasks.push_back(std::move(t));
            } else {
                excluded.push_back({t.task_id, t.region, t.positives, t.negatives});
            }
        }
    }
    if (tasks.size() < 2) throw DataError("need at least 2 tasks that can be split at k=" + c.k_shot.to_string() + ", found " + std::to_string(tasks.size()));
    MetaDatasets data = split_tasks(std::move(tasks), c.train_fraction, derive_seed(c.seed, kTaskSplitStream));
    split_all(data.train, pool, c.k_shot, derive_seed(c.seed, kSupportStream));
    split_all(data.test, pool, c.k_shot, derive_seed(c.seed, kSupportStream));
    json manifest = task_manifest(data, excluded);
    manifest["config_hash"] = config_hash(c);
    manifest["k_shot"] = c.k_shot.to_string();
    manifest["regions"] = regions;
    outputs.push_back(dir / "tasks.json");
    write_json(outputs.back(), manifest);
    write_stage_record(c, Stage::segment, outputs);
}

void stage_pretrain(const PipelineConfig& c) {
    std::vector<RasterStack> stacks;
    for (const auto& rc : c.regions) stacks.push_back(load_stack(rc));
    PretrainStack stack;
    Checkpoint ckpt;
    ckpt.kind = "f0";
    ckpt.params = pretrain_f0(c, stacks, &stack);
    ckpt.config_hash = config_hash(c);
    ckpt.seed = c.seed;
    ckpt.log = {{"rbm1_reconstruction", stack.rbm1_errors}, {"rbm2_reconstruction", stack.rbm2_errors}, {"dae_loss", stack.dae_losses}};

    const fs::path dir = stage_dir(c, Stage::pretrain);
    fs::create_directories(dir);
    save_checkpoint(dir / "f0.json", ckpt);
    std::ofstream log = open_out(dir / "pretrain_log.csv");
    log << "epoch,rbm1_reconstruction,rbm2_reconstruction,dae_loss\n";
    const std::size_t epochs = std::max({stack.rbm1_errors.size(), stack.rbm2_errors.size(), stack.dae_losses.size()});
    auto cell = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? fixed(v[i]) : std::string(); };
    for (std::size_t e = 0; e < epochs; ++e) {
        log << e + 1 << ',' << cell(stack.rbm1_errors, e) << ',' << cell(stack.rbm2_errors, e) << ',' << cell(stack.dae_losses, e) << '\n';
    }
    log.close();
    write_stage_record(c, Stage::pretrain, {dir / "f0.json", dir / "pretrain_log.csv"});
}

void stage_metatrain(const PipelineConfig& c) {
    const Checkpoint f0 = load_stage_checkpoint(c, Stage::pretrain, "f0.json");
    const MetaDatasets data = load_tasks(c);
    const Workspace w = load_workspace(c);
    MetaConfig meta = c.meta;
    meta.seed = derive_seed(c.seed, kMetaStream);
    const IntermediateModel model = meta_train(f0.params, data.train, w.pool, data.n_total, meta);

    const fs::path dir = stage_dir(c, Stage::metatrain);
    fs::create_directories(dir);
    Checkpoint ckpt;
    ckpt.kind = "intermediate";
    ckpt.params = model.params;
    ckpt.config_hash = config_hash(c);
    ckpt.seed = c.seed;
    ckpt.log = {{"meta_epochs", model.log.size()}, {"final_meta_loss", model.log.empty() ? 0.0 : model.log.back().loss}};
    save_checkpoint(dir / "intermediate.json", ckpt);
    write_meta_log_csv(dir / "meta_log.csv", model.log);
    write_stage_record(c, Stage::metatrain, {dir / "intermediate.json", dir / "meta_log.csv"});
}

void stage_adapt(const PipelineConfig& c) {
    const Checkpoint model = load_stage_checkpoint(c, Stage::metatrain, "intermediate.json");
    const MetaDatasets data = load_tasks(c);
    const Workspace w = load_workspace(c);
    json models = json::array();
    for (const auto* split : {&data.train, &data.test}) {
        for (const auto& t : *split) {
            const MlpParams adapted = few_shot_adapt(model.params, gather(w.pool, t.support), c.meta.alpha, c.meta.inner_steps);
            models.push_back({{"region", t.region},
                              {"block_id", t.task_id},
                              {"split", split == &data.train ? "train" : "test"},
                              {"layers", mlp_json(adapted)}});
        }
    }
    const fs::path dir = stage_dir(c, Stage::adapt);
    fs::create_directories(dir);
    write_json(dir / "models.json", {{"format", kAdaptedFormat}, {"config_hash", config_hash(c)}, {"seed", c.seed}, {"models", models}});
    write_stage_record(c, Stage::adapt, {dir / "models.json"});
}

// (region, block id) -> adapted model.
std::map<std::pair<std::string, int>, MlpParams> load_adapted(const PipelineConfig& c) {
    const json j = read_json(stage_dir(c, Stage::adapt) / "models.json");
    if (j.value("format", "") != kAdaptedFormat) throw DataError("adapt/models.json: expected format " + std::string(kAdaptedFormat));
    std::map<std::pair<std::string, int>, MlpParams> out;
    try {
        for (const auto& m : j.at("models")) {
            out.emplace(std::make_pair(m.at("region").get<std::string>(), m.at("block_id").get<int>()), mlp_from_json(m.at("layers")));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("adapt/models.json: ") + e.what());
    }
    return out;
}

void stage_predict(const PipelineConfig& c) {
    const Checkpoint fallback = load_stage_checkpoint(c, Stage::metatrain, "intermediate.json");
    const auto adapted = load_adapted(c);
    const Workspace w = load_workspace(c);
    const fs::path dir = stage_dir(c, Stage::predict);
    std::vector<fs::path> outputs;
    for (const auto& r : w.regions) {
        std::vector<std::optional<MlpParams>> models(r.segmentation.blocks.size());
        std::size_t fallback_blocks = 0;
        for (std::size_t k = 0; k < models.size(); ++k) {
            const auto it = adapted.find({r.name, static_cast<int>(k)});
            if (it != adapted.end()) models[k] = it->second;
            else ++fallback_blocks;
        }
        if (fallback_blocks > 0) {
            log_info(r.name + ": " + std::to_string(fallback_blocks) + " blocks without a task use the intermediate model");
        }
        const SusceptibilityMap map = predict_lsm(r.segmentation, models, fallback.params, r.stack);
        write_lsm(dir / r.name, map);
        for (const char* f : {"probability.asc", "levels.asc", "levels.pgm"}) outputs.push_back(dir / r.name / f);
    }
    write_stage_record(c, Stage::predict, outputs);
}

void stage_evaluate(const PipelineConfig& c) {
    const MetaDatasets data = load_tasks(c);
    const auto adapted = load_adapted(c);
    const Workspace w = load_workspace(c);
    const fs::path dir = stage_dir(c, Stage::evaluate);
    fs::create_directories(dir);

    std::ofstream preds = open_out(dir / "predictions.csv");
    preds << "region,block_id,sample,label,score\n";
    std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> by_region;
    std::map<std::string, std::size_t> task_count;
    std::vector<double> all_scores;
    std::vector<int> all_labels;
    for (const auto& t : data.test) {
        const auto it = adapted.find({t.region, t.task_id});
        if (it == adapted.end()) throw DataError("adapt/models.json has no model for test block " + std::to_string(t.task_id) + " of " + t.region);
        const LabeledBatch query = gather(w.pool, t.query);
        const Vector p = forward_batch(it->second, query.x);
        ++task_count[t.region];
        for (Eigen::Index i = 0; i < query.size(); ++i) {
            const int label = static_cast<int>(query.y(i));
            preds << t.region << ',' << t.task_id << ',' << t.query[static_cast<std::size_t>(i)] << ',' << label << ',' << fixed(p(i)) << '\n';
            by_region[t.region].first.push_back(p(i));
            by_region[t.region].second.push_back(label);
            all_scores.push_back(p(i));
            all_labels.push_back(label);
        }
    }
    preds.close();

    std::ofstream out = open_out(dir / "metrics.csv");
    out << "region,tasks,queries,tp,tn,fp,fn,accuracy,precision,recall,f1,auc\n";
    auto row = [&](const std::string& name, std::size_t tasks, const std::vector<double>& s, const std::vector<int>& l) {
        const ConfusionCounts cc = confusion(s, l);
        const Metrics m = metrics(cc);
        std::optional<double> auc;
        if (std::count(l.begin(), l.end(), 1) > 0 && std::count(l.begin(), l.end(), 0) > 0) auc = roc_auc(s, l).auc;
        out << name << ',' << tasks << ',' << s.size() << ',' << cc.tp << ',' << cc.tn << ',' << cc.fp << ',' << cc.fn << ','
            << fixed(m.accuracy) << ',' << fixed(m.precision) << ',' << fixed(m.recall) << ',' << fixed(m.f1) << ',' << fixed(auc) << '\n';
    };
    for (const auto& [region, sl] : by_region) row(region, task_count[region], sl.first, sl.second);
    row("all", data.test.size(), all_scores, all_labels);
    out.close();
    std::vector<fs::path> outputs{dir / "predictions.csv", dir / "metrics.csv"};
    if (std::count(all_labels.begin(), all_labels.end(), 1) > 0 && std::count(all_labels.begin(), all_labels.end(), 0) > 0) {
        write_roc_csv(dir / "roc.csv", roc_auc(all_scores, all_labels));
        outputs.push_back(dir / "roc.csv");
    } else {
        log_warning("evaluate: test queries hold a single class; roc.csv skipped");
    }
    write_stage_record(c, Stage::evaluate, outputs);
}

void dispatch(Stage s, const PipelineConfig& c) {
    fs::create_directories(stage_dir(c, s));
    switch (s) {
    case Stage::segment: return stage_segment(c);
    case Stage::pretrain: return stage_pretrain(c);
    case Stage::metatrain: return stage_metatrain(c);
    case Stage::adapt: return stage_adapt(c);
    case Stage::predict: return stage_predict(c);
    case Stage::evaluate: return stage_evaluate(c);
    }
}

void write_config_copy(const PipelineConfig& c) {
    fs::create_directories(c.output_dir);
    json j = config_json(c);
    j["config_hash"] = config_hash(c);
    write_json(c.output_dir / "config.json", j);
}

}  // namespace

std::string to_string(Stage s) {
    switch (s) {
    case Stage::segment: return "segment";
    case Stage::pretrain: return "pretrain";
    case Stage::metatrain: return "metatrain";
    case Stage::adapt: return "adapt";
    case Stage::predict: return "predict";
    case Stage::evaluate: return "evaluate";
    }
    return "?";
}

Stage stage_from_string(const std::string& name) {
    for (const Stage s : all_stages()) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown stage '" + name + "'");
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::segment, Stage::pretrain, Stage::metatrain,
                                           Stage::adapt,   Stage::predict,  Stage::evaluate};
    return stages;
}

void run_stage(Stage stage, const PipelineConfig& config, const PipelineOptions&) {
    config.validate();
    write_config_copy(config);
    try {
        dispatch(stage, config);
    } catch (const Error& e) {
        rethrow_with_context(e, "stage " + to_string(stage) + ": ");
    }
}

std::vector<StageReport> run_pipeline(const PipelineConfig& config, const PipelineOptions& options) {
    config.validate();
    write_config_copy(config);
    std::vector<StageReport> reports;
    bool upstream_ran = false;
    for (const Stage s : all_stages()) {
        if (options.resume && !upstream_ran && up_to_date(config, s)) {
            log_info("stage " + to_string(s) + ": up to date, skipped");
            reports.push_back({s, true});
            continue;
        }
        log_info("stage " + to_string(s));
        try {
            dispatch(s, config);
        } catch (const Error& e) {
            rethrow_with_context(e, "stage " + to_string(s) + ": ");
        }
        upstream_ran = true;
        reports.push_back({s, false});
    }
    return reports;
}

std::vector<RegionData> load_regions(const PipelineConfig& config) {
    std::vector<RegionData> regions;
    for (const auto& rc : config.regions) {
        const std::vector<SamplePoint> points = load_samples_csv(rc.samples);
        regions.push_back(prepare_region(rc.name, load_stack(rc), points, config.slic));
    }
    return regions;
}

ExperimentResult run_configured_experiment(const PipelineConfig& config, int threads) {
    config.validate();
    ExperimentConfig ec = config.experiment_config();
    ec.threads = threads;
    if (config.regions.size() < regions_required(ec.mode)) {
        throw ConfigError("experiment mode " + to_string(ec.mode) + " needs " + std::to_string(regions_required(ec.mode)) +
                          " regions, the config lists " + std::to_string(config.regions.size()));
    }
    const std::vector<RegionData> regions = load_regions(config);
    std::vector<RasterStack> stacks;
    for (const auto& r : regions) stacks.push_back(r.stack);
    const MlpParams f0 = pretrain_f0(config, stacks, nullptr);
    ExperimentResult result = run_experiment(ec, f0, regions);
    write_config_copy(config);
    write_experiment(config.output_dir / "experiment", result);
    return result;
}

}  // namespace lsm
