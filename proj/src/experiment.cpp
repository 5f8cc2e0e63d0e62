#include "lsm/experiment.hpp"

#include "lsm/error.hpp"
#include "lsm/log.hpp"
#include "lsm/optim.hpp"
#include "lsm/parallel.hpp"
#include "lsm/rng.hpp"

#include <fstream>

namespace lsm {

std::string to_string(ExperimentMode m) {
    switch (m) {
    case ExperimentMode::A: return "A";
    case ExperimentMode::B: return "B";
    case ExperimentMode::C: return "C";
    case ExperimentMode::D: return "D";
    }
    return "?";
}

ExperimentMode experiment_mode_from_string(const std::string& name) {
    if (name == "A" || name == "a") return ExperimentMode::A;
    if (name == "B" || name == "b") return ExperimentMode::B;
    if (name == "C" || name == "c") return ExperimentMode::C;
    if (name == "D" || name == "d") return ExperimentMode::D;
    throw ConfigError("unknown experiment mode '" + name + "' (expected A, B, C or D)");
}

std::size_t regions_required(ExperimentMode m) { return m == ExperimentMode::A ? 1 : 2; }

RegionData prepare_region(std::string name, RasterStack stack, std::span<const SamplePoint> points,
                          const SlicConfig& slic) {
    RegionData r{std::move(name), std::move(stack), {}, {}, {}};
    r.segmentation = segment(r.stack, slic);
    r.samples = featurize_points(r.stack, points);
    r.excluded_samples = group_samples(r.segmentation, r.samples).excluded;
    return r;
}

void ExperimentConfig::validate() const {
    meta.validate();
    if (repeats < 1) throw ConfigError("repeats must be at least 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
    if (min_per_class < 1) throw ConfigError("min_per_class must be at least 1");
    if (control_epochs < 0) throw ConfigError("control_epochs must be non-negative");
    if (!(control_lr > 0.0)) throw ConfigError("control_lr must be positive");
    if (threads < 1) throw ConfigError("threads must be at least 1");
}

namespace {

bool splittable(const MetaTask& t, const KShot& k) {
    const std::size_t s = k.resolve(t.n());
    return s >= 1 && s < t.n();
}

std::vector<MetaTask> concat(std::vector<MetaTask> a, const std::vector<MetaTask>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

MlpParams train_control(const MlpParams& f0, const LabeledBatch& data, const ExperimentConfig& cfg,
                        std::uint64_t seed) {
    std::vector<Eigen::Index> hidden;
    for (std::size_t l = 0; l + 1 < f0.layers.size(); ++l) hidden.push_back(f0.layers[l].out_dim());
    const Activation act = f0.layers.size() > 1 ? f0.layers.front().activation : Activation::sigmoid;
    Rng rng(seed);
    MlpParams model = make_mlp(f0.input_dim(), hidden, act, rng);
    ParamList params = model.tensors();
    AdamState adam = AdamState::zeros_like(params);
    for (int e = 0; e < cfg.control_epochs; ++e) {
        const ParamList g = grad(model, data).tensors();
        adam_step(adam, params, g, cfg.control_lr);
        model = model.with_tensors(params);
    }
    return model;
}

LabeledBatch stack_batches(const std::vector<LabeledBatch>& parts) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        rows += p.size();
        if (!p.empty()) cols = p.x.cols();
    }
    LabeledBatch out;
    out.x.resize(rows, cols);
    out.y.resize(rows);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        if (p.empty()) continue;
        out.x.middleRows(at, p.size()) = p.x;
        out.y.segment(at, p.size()) = p.y;
        at += p.size();
    }
    return out;
}

RunResult run_once(const ExperimentConfig& cfg, const MlpParams& f0, const std::vector<std::vector<MetaTask>>& region_tasks,
                   std::span<const FeatureVector> pool, std::size_t n_total, int repeat) {
    RunResult run;
    run.repeat = repeat;
    run.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(repeat) + 1);
    const std::uint64_t split1 = derive_seed(run.seed, 1);
    const std::uint64_t split2 = derive_seed(run.seed, 2);

    std::vector<MetaTask> train;
    std::vector<MetaTask> test;
    switch (cfg.mode) {
    case ExperimentMode::A: {
        MetaDatasets d = split_tasks(region_tasks[0], cfg.train_fraction, split1);
        train = std::move(d.train);
        test = std::move(d.test);
        break;
    }
    case ExperimentMode::B:
        train = region_tasks[0];
        test = region_tasks[1];
        break;
    case ExperimentMode::C: {
        MetaDatasets d1 = split_tasks(region_tasks[0], cfg.train_fraction, split1);
        MetaDatasets d2 = split_tasks(region_tasks[1], cfg.train_fraction, split2);
        train = concat(std::move(d1.train), d2.train);
        test = std::move(d1.test);
        break;
    }
    case ExperimentMode::D: {
        MetaDatasets d2 = split_tasks(region_tasks[1], cfg.train_fraction, split2);
        train = concat(region_tasks[0], d2.train);
        test = std::move(d2.test);
        break;
    }
    }
    std::erase_if(train, [&](const MetaTask& t) { return !splittable(t, cfg.k_shot); });
    std::erase_if(test, [&](const MetaTask& t) { return t.n() < cfg.min_eval_samples || !splittable(t, cfg.k_shot); });
    if (train.empty()) throw DataError("run " + std::to_string(repeat) + ": no training task can be split at k=" + cfg.k_shot.to_string());
    if (test.empty()) throw DataError("run " + std::to_string(repeat) + ": no test task holds " + std::to_string(cfg.min_eval_samples) + " samples");
    split_all(train, pool, cfg.k_shot, derive_seed(run.seed, 3));
    split_all(test, pool, cfg.k_shot, derive_seed(run.seed, 4));
    run.train_tasks = train.size();
    run.test_tasks = test.size();

    MetaConfig meta = cfg.meta;
    meta.seed = derive_seed(run.seed, 5);
    const IntermediateModel model = meta_train(f0, train, pool, n_total, meta);

    std::optional<MlpParams> control;
    if (cfg.control) {
        std::vector<LabeledBatch> parts;
        for (const auto& t : train) parts.push_back(gather(pool, t.samples));
        for (const auto& t : test) parts.push_back(gather(pool, t.support));
        control = train_control(f0, stack_batches(parts), cfg, derive_seed(run.seed, 6));
    }

    std::vector<double> control_scores;
    for (const auto& t : test) {
        const LabeledBatch support = gather(pool, t.support);
        const LabeledBatch query = gather(pool, t.query);
        const MlpParams adapted = few_shot_adapt(model.params, support, cfg.meta.alpha, cfg.meta.inner_steps);
        const Vector p = forward_batch(adapted, query.x);
        for (Eigen::Index i = 0; i < query.size(); ++i) {
            run.scores.push_back(p(i));
            run.labels.push_back(static_cast<int>(query.y(i)));
        }
        if (control) {
            const Vector pc = forward_batch(
                cfg.control_adapt ? few_shot_adapt(*control, support, cfg.meta.alpha, cfg.meta.inner_steps) : *control,
                query.x);
            for (Eigen::Index i = 0; i < query.size(); ++i) control_scores.push_back(pc(i));
        }
    }
    run.counts = confusion(run.scores, run.labels);
    run.metrics = metrics(run.counts);
    if (control) run.control_counts = confusion(control_scores, run.labels);
    const bool both = std::find(run.labels.begin(), run.labels.end(), 1) != run.labels.end() &&
                      std::find(run.labels.begin(), run.labels.end(), 0) != run.labels.end();
    if (both) run.auc = roc_auc(run.scores, run.labels).auc;
    return run;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const MlpParams& f0,
                                std::span<const RegionData> regions) {
    config.validate();
    if (regions.size() < regions_required(config.mode)) {
        throw ConfigError("experiment mode " + to_string(config.mode) + " needs " +
                          std::to_string(regions_required(config.mode)) + " regions, got " +
                          std::to_string(regions.size()));
    }
    std::vector<FeatureVector> pool;
    std::vector<std::vector<MetaTask>> region_tasks;
    for (std::size_t r = 0; r < regions_required(config.mode); ++r) {
        const RegionData& region = regions[r];
        region_tasks.push_back(
            build_tasks(region.segmentation.blocks, region.samples, config.min_per_class, region.name, pool.size()).tasks);
        pool.insert(pool.end(), region.samples.begin(), region.samples.end());
    }

    std::size_t n_total = 0;
    for (const auto& tasks : region_tasks) n_total += total_samples(tasks);

    ExperimentResult result;
    result.config = config;
    result.runs.resize(static_cast<std::size_t>(config.repeats));
    parallel_for(result.runs.size(), config.threads, [&](std::size_t i) {
        result.runs[i] = run_once(config, f0, region_tasks, pool, n_total, static_cast<int>(i));
    });

    std::vector<double> oa;
    std::vector<double> control_oa;
    std::vector<double> all_scores;
    std::vector<int> all_labels;
    for (const auto& run : result.runs) {
        oa.push_back(run.metrics.accuracy.value_or(0.0));
        if (run.control_counts) control_oa.push_back(metrics(*run.control_counts).accuracy.value_or(0.0));
        all_scores.insert(all_scores.end(), run.scores.begin(), run.scores.end());
        all_labels.insert(all_labels.end(), run.labels.begin(), run.labels.end());
    }
    result.oa = run_statistics(oa);
    if (!control_oa.empty()) result.control_oa = run_statistics(control_oa);
    try {
        result.roc = roc_auc(all_scores, all_labels);
    } catch (const ArgumentError&) {
        log_warning("experiment ROC skipped: query labels hold a single class");
    }
    return result;
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result) {
    std::filesystem::create_directories(dir);
    std::ofstream runs(dir / "runs.csv");
    std::ofstream summary(dir / "summary.csv");
    if (!runs || !summary) throw DataError("cannot write experiment outputs under " + dir.string());
    runs << "repeat,seed,train_tasks,test_tasks,query_samples,tp,tn,fp,fn,accuracy,precision,recall,f1,auc,"
            "control_accuracy\n";
    for (const auto& r : result.runs) {
        runs << r.repeat << ',' << r.seed << ',' << r.train_tasks << ',' << r.test_tasks << ',' << r.scores.size()
             << ',' << r.counts.tp << ',' << r.counts.tn << ',' << r.counts.fp << ',' << r.counts.fn << ','
             << fixed(r.metrics.accuracy) << ',' << fixed(r.metrics.precision) << ',' << fixed(r.metrics.recall)
             << ',' << fixed(r.metrics.f1) << ',' << fixed(r.auc) << ','
             << (r.control_counts ? fixed(metrics(*r.control_counts).accuracy) : std::string()) << '\n';
    }
    summary << "metric,mode,k_shot,runs,mean,std,min,max\n";
    auto row = [&](const std::string& name, const RunStatistics& s) {
        summary << name << ',' << to_string(result.config.mode) << ',' << result.config.k_shot.to_string() << ','
                << s.values.size() << ',' << fixed(s.mean) << ',' << fixed(s.stddev) << ',' << fixed(s.min) << ','
                << fixed(s.max) << '\n';
    };
    row("oa", result.oa);
    if (result.control_oa) row("control_oa", *result.control_oa);
    if (!result.roc.points.empty()) write_roc_csv(dir / "roc.csv", result.roc);
}

}  // namespace lsm
