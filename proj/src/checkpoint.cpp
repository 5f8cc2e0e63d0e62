#include "lsm/checkpoint.hpp"

#include "lsm/error.hpp"

#include <fstream>

namespace lsm {

namespace {

nlohmann::json flat(const Matrix& m) {
    auto j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) j.push_back(m(r, c));
    }
    return j;
}

Matrix unflat(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(rows * cols)) {
        throw DataError("checkpoint: " + what + " should hold " + std::to_string(rows * cols) + " values");
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[k++].get<double>();
    }
    return m;
}

}  // namespace

nlohmann::json mlp_json(const MlpParams& params) {
    auto layers = nlohmann::json::array();
    for (const auto& l : params.layers) {
        layers.push_back({{"in", l.in_dim()},
                          {"out", l.out_dim()},
                          {"activation", to_string(l.activation)},
                          {"weight", flat(l.weight)},
                          {"bias", flat(l.bias)}});
    }
    return layers;
}

MlpParams mlp_from_json(const nlohmann::json& layers) {
    if (!layers.is_array() || layers.empty()) throw DataError("checkpoint: layers must be a non-empty array");
    MlpParams p;
    try {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const std::string name = "layer " + std::to_string(i);
            const auto in = l.at("in").get<Eigen::Index>();
            const auto out = l.at("out").get<Eigen::Index>();
            if (in < 1 || out < 1) throw DataError("checkpoint: " + name + " has an empty dimension");
            DenseLayer layer;
            layer.activation = activation_from_string(l.at("activation").get<std::string>());
            layer.weight = unflat(l.at("weight"), out, in, name + " weight");
            layer.bias = unflat(l.at("bias"), 1, out, name + " bias");
            p.layers.push_back(std::move(layer));
        }
        p.validate();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    } catch (const ShapeError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    return p;
}

nlohmann::json checkpoint_json(const Checkpoint& c) {
    return {{"format", kCheckpointFormat}, {"kind", c.kind},         {"config_hash", c.config_hash},
            {"seed", c.seed},              {"layers", mlp_json(c.params)}, {"log", c.log}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
        throw DataError(std::string("checkpoint: expected format ") + kCheckpointFormat);
    }
    Checkpoint c;
    try {
        c.kind = j.at("kind").get<std::string>();
        c.config_hash = j.at("config_hash").get<std::string>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.log = j.value("log", nlohmann::json::array());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    c.params = mlp_from_json(j.at("layers"));
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << checkpoint_json(c).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read checkpoint " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace lsm
