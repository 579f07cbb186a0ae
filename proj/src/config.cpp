#include "acmt/config.hpp"

#include <filesystem>
#include <fstream>

#include "acmt/errors.hpp"

namespace acmt {
namespace {

using nlohmann::json;

void require_object(const json& j, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (key == a) { known = true; break; }
        if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void pick(const json& j, const char* key, T& out, const char* where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "' in " + where);
    }
}

}  // namespace

void DataConfig::validate() const {
    if (height < 32 || width < 32) throw std::invalid_argument("data: size must be >= 32");
    if (count < 0) throw std::invalid_argument("data: count must be non-negative");
    if (max_displacement < 0.0) throw std::invalid_argument("data: max_displacement negative");
}

TrainConfig RunConfig::make_train_config() const {
    TrainConfig t;
    t.bridge = bridge;
    t.network = network;
    t.weights = weights;
    t.lr = lr;
    t.beta1 = beta1;
    t.beta2 = beta2;
    t.adam_eps = adam_eps;
    t.batch_size = batch_size;
    t.epochs = epochs;
    t.projection_dim = projection_dim;
    t.checkpoint_every = checkpoint_every;
    t.augment = augment;
    t.seed = seed;
    return t;
}

void RunConfig::validate() const {
    data.validate();
    registration.validate();
    make_train_config().validate();  // covers bridge, network and optimizer
    translate.resolve_nfe(bridge.pool_size());
    const int div = 1 << (network.levels - 1);
    if (data.height % div != 0 || data.width % div != 0)
        throw std::invalid_argument("config: data size must be divisible by 2^(levels-1)");
}

RunConfig parse_run_config(const json& j) {
    require_object(j, "config");
    reject_unknown(j, {"seed", "bridge", "network", "data", "registration", "translate", "train"},
                   "config");
    RunConfig cfg;
    pick(j, "seed", cfg.seed, "config");

    if (j.contains("bridge")) {
        const json& b = j.at("bridge");
        require_object(b, "bridge");
        reject_unknown(b, {"sigma", "timestep_pool"}, "bridge");
        pick(b, "sigma", cfg.bridge.sigma, "bridge");
        pick(b, "timestep_pool", cfg.bridge.timestep_pool, "bridge");
    }
    if (j.contains("network")) {
        const json& n = j.at("network");
        require_object(n, "network");
        reject_unknown(n, {"levels", "base_channels", "time_embed_dim", "seed"}, "network");
        pick(n, "levels", cfg.network.levels, "network");
        pick(n, "base_channels", cfg.network.base_channels, "network");
        pick(n, "time_embed_dim", cfg.network.time_embed_dim, "network");
        pick(n, "seed", cfg.network.seed, "network");
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        require_object(d, "data");
        reject_unknown(d, {"height", "width", "count", "max_displacement"}, "data");
        pick(d, "height", cfg.data.height, "data");
        pick(d, "width", cfg.data.width, "data");
        pick(d, "count", cfg.data.count, "data");
        pick(d, "max_displacement", cfg.data.max_displacement, "data");
    }
    if (j.contains("registration")) {
        const json& r = j.at("registration");
        require_object(r, "registration");
        reject_unknown(r, {"levels", "iterations", "lambda_reg", "step_init", "tol"},
                       "registration");
        pick(r, "levels", cfg.registration.levels, "registration");
        pick(r, "iterations", cfg.registration.iterations, "registration");
        pick(r, "lambda_reg", cfg.registration.lambda_reg, "registration");
        pick(r, "step_init", cfg.registration.step_init, "registration");
        pick(r, "tol", cfg.registration.tol, "registration");
    }
    if (j.contains("translate")) {
        const json& t = j.at("translate");
        require_object(t, "translate");
        reject_unknown(t, {"nfe", "stochastic", "seed"}, "translate");
        pick(t, "nfe", cfg.translate.nfe, "translate");
        pick(t, "stochastic", cfg.translate.stochastic, "translate");
        pick(t, "seed", cfg.translate.seed, "translate");
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        require_object(t, "train");
        reject_unknown(t,
                       {"lr", "beta1", "beta2", "adam_eps", "batch_size", "epochs",
                        "projection_dim", "checkpoint_every", "augment", "weights"},
                       "train");
        pick(t, "lr", cfg.lr, "train");
        pick(t, "beta1", cfg.beta1, "train");
        pick(t, "beta2", cfg.beta2, "train");
        pick(t, "adam_eps", cfg.adam_eps, "train");
        pick(t, "batch_size", cfg.batch_size, "train");
        pick(t, "epochs", cfg.epochs, "train");
        pick(t, "projection_dim", cfg.projection_dim, "train");
        pick(t, "checkpoint_every", cfg.checkpoint_every, "train");
        pick(t, "augment", cfg.augment, "train");
        if (t.contains("weights")) {
            const json& w = t.at("weights");
            require_object(w, "train.weights");
            reject_unknown(w, {"texture", "boundary", "sb"}, "train.weights");
            pick(w, "texture", cfg.weights.texture, "train.weights");
            pick(w, "boundary", cfg.weights.boundary, "train.weights");
            pick(w, "sb", cfg.weights.sb, "train.weights");
        }
    }

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

nlohmann::json to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["bridge"] = {{"sigma", cfg.bridge.sigma}, {"timestep_pool", cfg.bridge.timestep_pool}};
    j["network"] = {{"levels", cfg.network.levels},
                    {"base_channels", cfg.network.base_channels},
                    {"time_embed_dim", cfg.network.time_embed_dim},
                    {"seed", cfg.network.seed}};
    j["data"] = {{"height", cfg.data.height},
                 {"width", cfg.data.width},
                 {"count", cfg.data.count},
                 {"max_displacement", cfg.data.max_displacement}};
    j["registration"] = {{"levels", cfg.registration.levels},
                         {"iterations", cfg.registration.iterations},
                         {"lambda_reg", cfg.registration.lambda_reg},
                         {"step_init", cfg.registration.step_init},
                         {"tol", cfg.registration.tol}};
    j["translate"] = {{"nfe", cfg.translate.nfe},
                      {"stochastic", cfg.translate.stochastic},
                      {"seed", cfg.translate.seed}};
    j["train"] = {{"lr", cfg.lr},
                  {"beta1", cfg.beta1},
                  {"beta2", cfg.beta2},
                  {"adam_eps", cfg.adam_eps},
                  {"batch_size", cfg.batch_size},
                  {"epochs", cfg.epochs},
                  {"projection_dim", cfg.projection_dim},
                  {"checkpoint_every", cfg.checkpoint_every},
                  {"augment", cfg.augment},
                  {"weights",
                   {{"texture", cfg.weights.texture},
                    {"boundary", cfg.weights.boundary},
                    {"sb", cfg.weights.sb}}}};
    return j;
}

void echo_config(const RunConfig& cfg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/config.json");
    if (!out) throw IoError("cannot write " + dir + "/config.json");
    out << to_json(cfg).dump(2) << "\n";
}

std::uint64_t config_hash(const RunConfig& cfg) {
    std::string s = to_json(cfg).dump();
    return fnv1a(s.data(), s.size());
}

}  // namespace acmt
