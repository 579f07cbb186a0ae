#ifndef ACMT_CONFIG_HPP
#define ACMT_CONFIG_HPP

#include <cstdint>
#include <string>

#include "json.hpp"

#include "acmt/bridge.hpp"
#include "acmt/network.hpp"
#include "acmt/registration.hpp"
#include "acmt/sampler.hpp"
#include "acmt/trainer.hpp"

namespace acmt {

struct DataConfig {
    int height = 64;
    int width = 64;
    int count = 16;
    double max_displacement = 5.0;

    void validate() const;
};

// One config document drives every subcommand. Every field has a default;
// a config file may override any subset; unknown keys are rejected so typos
// fail loudly instead of silently running with defaults.
struct RunConfig {
    std::uint64_t seed = 0;
    BridgeConfig bridge;
    NetworkConfig network;
    DataConfig data;
    RegistrationConfig registration;
    TranslateOptions translate;

    // Optimization settings; bridge/network/seed above are stitched in.
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 8;
    int epochs = 1;
    int projection_dim = 64;
    int checkpoint_every = 0;
    bool augment = false;
    LossWeights weights;

    TrainConfig make_train_config() const;
    void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);  // empty path -> defaults
nlohmann::json to_json(const RunConfig& cfg);

// Writes the fully-resolved config (defaults + file + flag overrides) next
// to a command's outputs so runs are reconstructible.
void echo_config(const RunConfig& cfg, const std::string& dir);

std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace acmt

#endif
