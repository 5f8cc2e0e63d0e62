#include "lsm/tasks.hpp"

#include "lsm/error.hpp"
#include "lsm/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace lsm {

TaskBuild build_tasks(const std::vector<Block>& blocks, std::span<const FeatureVector> samples,
                      std::size_t min_per_class, const std::string& region, std::size_t offset) {
    TaskBuild out;
    for (const auto& b : blocks) {
        MetaTask t;
        t.task_id = b.id;
        t.region = region;
        for (const auto i : b.member_samples) {
            const auto& label = samples[i].label;
            if (!label) continue;
            t.samples.push_back(i + offset);
            (*label == 1 ? t.positives : t.negatives) += 1;
        }
        std::sort(t.samples.begin(), t.samples.end());
        if (t.positives >= min_per_class && t.negatives >= min_per_class && !t.samples.empty()) {
            out.tasks.push_back(std::move(t));
        } else {
            out.excluded.push_back({b.id, region, t.positives, t.negatives});
        }
    }
    if (out.tasks.empty()) {
        throw DataError("no block" + (region.empty() ? std::string() : " in region '" + region + "'") + " has " +
                        std::to_string(min_per_class) + " sample(s) of each class; no meta-tasks can be built");
    }
    return out;
}

std::size_t total_samples(std::span<const MetaTask> tasks) {
    std::size_t n = 0;
    for (const auto& t : tasks) n += t.n();
    return n;
}

MetaDatasets split_tasks(std::vector<MetaTask> tasks, double fraction, std::uint64_t seed) {
    if (tasks.size() < 2) {
        throw ArgumentError("task split needs at least 2 tasks, got " + std::to_string(tasks.size()));
    }
    if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("task split fraction must be in (0, 1)");
    MetaDatasets d;
    d.seed = seed;
    d.n_total = total_samples(tasks);
    Rng rng(seed);
    rng.shuffle(tasks);
    const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(tasks.size())));
    d.train.assign(std::make_move_iterator(tasks.begin()),
                   std::make_move_iterator(tasks.begin() + static_cast<std::ptrdiff_t>(n_train)));
    d.test.assign(std::make_move_iterator(tasks.begin() + static_cast<std::ptrdiff_t>(n_train)),
                  std::make_move_iterator(tasks.end()));
    return d;
}

std::string KShot::to_string() const { return kind == Kind::half ? "half" : std::to_string(k); }

KShot KShot::parse(const std::string& text) {
    if (text == "half" || text == "M/2") return half();
    std::size_t k = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
    if (ec != std::errc{} || ptr != text.data() + text.size() || k == 0) {
        throw ConfigError("k_shot must be a positive integer or 'half', got '" + text + "'");
    }
    return fixed(k);
}

MetaTask split_support_query(MetaTask task, std::span<const FeatureVector> pool, KShot k_shot, std::uint64_t seed) {
    const std::size_t n = task.n();
    const std::size_t k = k_shot.resolve(n);
    if (k < 1) throw ArgumentError("task " + std::to_string(task.task_id) + ": k_shot resolves to 0");
    if (k >= n) {
        throw ArgumentError("task " + std::to_string(task.task_id) + ": k_shot " + std::to_string(k) +
                            " leaves no query samples out of " + std::to_string(n));
    }
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (const auto i : task.samples) (pool[i].label == 1 ? pos : neg).push_back(i);
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);

    std::vector<std::size_t>* major = pos.size() >= neg.size() ? &pos : &neg;
    std::vector<std::size_t>* minor = major == &pos ? &neg : &pos;
    std::size_t mi = 0;
    std::size_t ni = 0;
    task.support.clear();
    while (task.support.size() < k) {
        const bool take_major = task.support.size() % 2 == 0 ? mi < major->size() : ni >= minor->size();
        if (take_major) task.support.push_back((*major)[mi++]);
        else task.support.push_back((*minor)[ni++]);
    }
    task.query.clear();
    task.query.insert(task.query.end(), major->begin() + static_cast<std::ptrdiff_t>(mi), major->end());
    task.query.insert(task.query.end(), minor->begin() + static_cast<std::ptrdiff_t>(ni), minor->end());
    std::sort(task.query.begin(), task.query.end());
    task.split_seed = seed;
    return task;
}

void split_all(std::vector<MetaTask>& tasks, std::span<const FeatureVector> pool, KShot k_shot, std::uint64_t seed) {
    for (auto& t : tasks) {
        t = split_support_query(std::move(t), pool, k_shot, derive_seed(seed, static_cast<std::uint64_t>(t.task_id)));
    }
}

std::vector<double> task_weights(std::span<const MetaTask> batch, std::size_t n_total) {
    if (batch.empty()) throw ArgumentError("task_weights: empty batch");
    if (n_total == 0) throw ArgumentError("task_weights: n_total must be positive");
    std::vector<double> z;
    for (const auto& t : batch) z.push_back(static_cast<double>(t.n()) / static_cast<double>(n_total));
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - top);
        sum += v;
    }
    for (auto& v : z) v /= sum;
    return z;
}

LabeledBatch gather(std::span<const FeatureVector> pool, std::span<const std::size_t> indices) {
    LabeledBatch b;
    if (indices.empty()) return b;
    const Eigen::Index m = pool[indices.front()].values.size();
    b.x.resize(static_cast<Eigen::Index>(indices.size()), m);
    b.y.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto& v = pool[indices[r]];
        if (!v.label) throw ArgumentError("gather: sample " + std::to_string(indices[r]) + " has no label");
        b.x.row(static_cast<Eigen::Index>(r)) = v.values.transpose();
        b.y(static_cast<Eigen::Index>(r)) = static_cast<double>(*v.label);
    }
    return b;
}

namespace {

nlohmann::json task_json(const MetaTask& t, const char* split) {
    return {{"block_id", t.task_id}, {"region", t.region},     {"split", split},
            {"n_k", t.n()},          {"positives", t.positives}, {"negatives", t.negatives},
            {"samples", t.samples},  {"support", t.support},   {"query", t.query},
            {"split_seed", t.split_seed}};
}

MetaTask task_from_json(const nlohmann::json& j) {
    MetaTask t;
    t.task_id = j.at("block_id").get<int>();
    t.region = j.at("region").get<std::string>();
    t.samples = j.at("samples").get<std::vector<std::size_t>>();
    t.support = j.at("support").get<std::vector<std::size_t>>();
    t.query = j.at("query").get<std::vector<std::size_t>>();
    t.positives = j.at("positives").get<std::size_t>();
    t.negatives = j.at("negatives").get<std::size_t>();
    t.split_seed = j.at("split_seed").get<std::uint64_t>();
    return t;
}

}  // namespace

nlohmann::json task_manifest(const MetaDatasets& data, const std::vector<ExcludedBlock>& excluded) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : data.train) tasks.push_back(task_json(t, "train"));
    for (const auto& t : data.test) tasks.push_back(task_json(t, "test"));
    nlohmann::json ex = nlohmann::json::array();
    for (const auto& e : excluded) {
        ex.push_back({{"block_id", e.block_id}, {"region", e.region}, {"positives", e.positives}, {"negatives", e.negatives}});
    }
    return {{"seed", data.seed}, {"n_total", data.n_total}, {"tasks", std::move(tasks)}, {"excluded", std::move(ex)}};
}

MetaDatasets datasets_from_manifest(const nlohmann::json& manifest) {
    try {
        MetaDatasets d;
        d.seed = manifest.at("seed").get<std::uint64_t>();
        d.n_total = manifest.at("n_total").get<std::size_t>();
        for (const auto& j : manifest.at("tasks")) {
            const auto split = j.at("split").get<std::string>();
            if (split != "train" && split != "test") throw DataError("task manifest: unknown split '" + split + "'");
            (split == "train" ? d.train : d.test).push_back(task_from_json(j));
        }
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("task manifest: ") + e.what());
    }
}

}  // namespace lsm
