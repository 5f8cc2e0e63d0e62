#include "lsm/config.hpp"

#include "lsm/error.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace lsm {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section, const std::set<std::string>& known) {
    if (!j.is_object()) throw ConfigError("config: '" + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "' in '" + section + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void PipelineConfig::validate_settings() const {
    if (slic.target_blocks < 1) throw ConfigError("slic.target_blocks must be at least 1");
    if (!(slic.compactness > 0.0)) throw ConfigError("slic.compactness must be positive");
    if (slic.iterations < 0) throw ConfigError("slic.iterations must be non-negative");
    if (pretrain.rbm.epochs < 0 || pretrain.dae.epochs < 0) throw ConfigError("pretrain epochs must be non-negative");
    if (pretrain.rbm.batch_size < 1 || pretrain.dae.batch_size < 1) throw ConfigError("pretrain batch sizes must be positive");
    if (!(pretrain.rbm.lr > 0.0) || !(pretrain.dae.lr > 0.0)) throw ConfigError("pretrain learning rates must be positive");
    if (!(pretrain.corruption_rate >= 0.0 && pretrain.corruption_rate < 1.0)) throw ConfigError("pretrain.corruption_rate must lie in [0, 1)");
    experiment_config().validate();
    std::set<std::string> names;
    for (const auto& r : regions) {
        if (r.name.empty()) throw ConfigError("every region needs a name");
        if (!names.insert(r.name).second) throw ConfigError("duplicate region name '" + r.name + "'");
        if (r.bands.empty()) throw ConfigError("region '" + r.name + "' lists no bands");
    }
}

void PipelineConfig::validate() const {
    validate_settings();
    if (regions.empty()) throw ConfigError("config lists no regions");
    for (const auto& r : regions) {
        for (const auto& b : r.bands) {
            if (!std::filesystem::is_regular_file(b)) throw ConfigError("region '" + r.name + "': band file not found: " + b.string());
        }
        if (!std::filesystem::is_regular_file(r.samples)) throw ConfigError("region '" + r.name + "': samples file not found: " + r.samples.string());
    }
}

ExperimentConfig PipelineConfig::experiment_config() const {
    ExperimentConfig e = experiment;
    e.meta = meta;
    e.k_shot = k_shot;
    e.seed = seed;
    e.train_fraction = train_fraction;
    e.min_per_class = min_per_class;
    return e;
}

json config_json(const PipelineConfig& c) {
    json regions = json::array();
    for (const auto& r : c.regions) {
        json bands = json::array();
        for (const auto& b : r.bands) bands.push_back(b.generic_string());
        regions.push_back({{"name", r.name}, {"bands", bands}, {"samples", r.samples.generic_string()}});
    }
    return {
        {"seed", c.seed},
        {"output_dir", c.output_dir.generic_string()},
        {"regions", regions},
        {"slic",
         {{"target_blocks", c.slic.target_blocks},
          {"compactness", c.slic.compactness},
          {"feature_weights", c.slic.feature_weights},
          {"iterations", c.slic.iterations},
          {"distance_mode", to_string(c.slic.distance_mode)}}},
        {"pretrain",
         {{"hidden", c.pretrain.hidden},
          {"corruption_rate", c.pretrain.corruption_rate},
          {"rbm", {{"epochs", c.pretrain.rbm.epochs}, {"lr", c.pretrain.rbm.lr}, {"batch_size", c.pretrain.rbm.batch_size}}},
          {"dae", {{"epochs", c.pretrain.dae.epochs}, {"lr", c.pretrain.dae.lr}, {"batch_size", c.pretrain.dae.batch_size}}}}},
        {"meta",
         {{"alpha", c.meta.alpha},
          {"inner_steps", c.meta.inner_steps},
          {"meta_lr", c.meta.meta_lr},
          {"meta_epochs", c.meta.meta_epochs},
          {"task_batch_size", c.meta.task_batch_size},
          {"grad_mode", to_string(c.meta.grad_mode)},
          {"weighting", to_string(c.meta.weighting)}}},
        {"tasks", {{"train_fraction", c.train_fraction}, {"min_per_class", c.min_per_class}, {"k_shot", c.k_shot.to_string()}}},
        {"experiment",
         {{"mode", to_string(c.experiment.mode)},
          {"repeats", c.experiment.repeats},
          {"min_eval_samples", c.experiment.min_eval_samples},
          {"control", c.experiment.control},
          {"control_adapt", c.experiment.control_adapt},
          {"control_epochs", c.experiment.control_epochs},
          {"control_lr", c.experiment.control_lr}}},
    };
}

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    check_keys(j, "<root>", {"seed", "output_dir", "regions", "slic", "pretrain", "meta", "tasks", "experiment"});
    if (!j.contains("seed")) throw ConfigError("config: 'seed' is required");
    try {
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
        if (j.contains("regions")) {
            if (!j.at("regions").is_array()) throw ConfigError("config: 'regions' must be an array");
            for (const auto& r : j.at("regions")) {
                check_keys(r, "regions[]", {"name", "bands", "samples"});
                RegionConfig region;
                region.name = r.at("name").get<std::string>();
                for (const auto& b : r.at("bands")) region.bands.push_back(resolve(base_dir, b.get<std::string>()));
                region.samples = resolve(base_dir, r.at("samples").get<std::string>());
                c.regions.push_back(std::move(region));
            }
        }
        if (j.contains("slic")) {
            const json& s = j.at("slic");
            check_keys(s, "slic", {"target_blocks", "compactness", "feature_weights", "iterations", "distance_mode"});
            read(s, "target_blocks", c.slic.target_blocks);
            read(s, "compactness", c.slic.compactness);
            read(s, "feature_weights", c.slic.feature_weights);
            read(s, "iterations", c.slic.iterations);
            if (s.contains("distance_mode")) c.slic.distance_mode = distance_mode_from_string(s.at("distance_mode").get<std::string>());
        }
        if (j.contains("pretrain")) {
            const json& p = j.at("pretrain");
            check_keys(p, "pretrain", {"hidden", "corruption_rate", "rbm", "dae"});
            read(p, "hidden", c.pretrain.hidden);
            read(p, "corruption_rate", c.pretrain.corruption_rate);
            for (const char* part : {"rbm", "dae"}) {
                if (!p.contains(part)) continue;
                const json& t = p.at(part);
                check_keys(t, std::string("pretrain.") + part, {"epochs", "lr", "batch_size"});
                if (std::string(part) == "rbm") {
                    read(t, "epochs", c.pretrain.rbm.epochs);
                    read(t, "lr", c.pretrain.rbm.lr);
                    read(t, "batch_size", c.pretrain.rbm.batch_size);
                } else {
                    read(t, "epochs", c.pretrain.dae.epochs);
                    read(t, "lr", c.pretrain.dae.lr);
                    read(t, "batch_size", c.pretrain.dae.batch_size);
                }
            }
        }
        if (j.contains("meta")) {
            const json& m = j.at("meta");
            check_keys(m, "meta", {"alpha", "inner_steps", "meta_lr", "meta_epochs", "task_batch_size", "grad_mode", "weighting"});
            read(m, "alpha", c.meta.alpha);
            read(m, "inner_steps", c.meta.inner_steps);
            read(m, "meta_lr", c.meta.meta_lr);
            read(m, "meta_epochs", c.meta.meta_epochs);
            read(m, "task_batch_size", c.meta.task_batch_size);
            if (m.contains("grad_mode")) c.meta.grad_mode = grad_mode_from_string(m.at("grad_mode").get<std::string>());
            if (m.contains("weighting")) c.meta.weighting = task_weighting_from_string(m.at("weighting").get<std::string>());
        }
        if (j.contains("tasks")) {
            const json& t = j.at("tasks");
            check_keys(t, "tasks", {"train_fraction", "min_per_class", "k_shot"});
            read(t, "train_fraction", c.train_fraction);
            read(t, "min_per_class", c.min_per_class);
            if (t.contains("k_shot")) {
                const json& k = t.at("k_shot");
                c.k_shot = KShot::parse(k.is_number() ? std::to_string(k.get<long long>()) : k.get<std::string>());
            }
        }
        if (j.contains("experiment")) {
            const json& e = j.at("experiment");
            check_keys(e, "experiment", {"mode", "repeats", "min_eval_samples", "control", "control_adapt", "control_epochs", "control_lr"});
            if (e.contains("mode")) c.experiment.mode = experiment_mode_from_string(e.at("mode").get<std::string>());
            read(e, "repeats", c.experiment.repeats);
            read(e, "min_eval_samples", c.experiment.min_eval_samples);
            read(e, "control", c.experiment.control);
            read(e, "control_adapt", c.experiment.control_adapt);
            read(e, "control_epochs", c.experiment.control_epochs);
            read(e, "control_lr", c.experiment.control_lr);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const DataError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate_settings();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const PipelineConfig& c) {
    json j = config_json(c);
    j.erase("output_dir");
    return fnv1a_hex(j.dump());
}

}  // namespace lsm
