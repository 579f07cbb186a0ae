#ifndef ACMT_TRAINER_HPP
#define ACMT_TRAINER_HPP

#include <functional>
#include <string>
#include <vector>

#include "acmt/bridge.hpp"
#include "acmt/network.hpp"
#include "acmt/objectives.hpp"
#include "acmt/phantom.hpp"
#include "acmt/rng.hpp"

namespace acmt {

struct TrainConfig {
    BridgeConfig bridge;
    NetworkConfig network;
    LossWeights weights;
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 8;
    int epochs = 1;
    int projection_dim = 64;
    int checkpoint_every = 0;  // steps; 0 = checkpoint only at the end
    bool augment = false;
    std::uint64_t seed = 0;

    void validate() const;
};

using Predictor = std::function<Tensor(const Tensor& x, double t)>;

// Walks the frozen bridge from x0 through every pool time up to (and
// ending at) pool index `pool_idx`, using the predictor for the terminal
// estimate at each step. pool_idx 0 returns x0 untouched.
BridgeState synthesize_state(const Tensor& x0, int pool_idx, const BridgeConfig& bridge,
                             const Predictor& predict, Rng& rng);

struct StepStats {
    LossReport losses;
    int t_index = 0;
    double t = 0.0;
    double grad_norm = 0.0;
    long long step = 0;
};

class Trainer {
public:
    explicit Trainer(const TrainConfig& cfg);

    // One optimization step over a batch of paired samples; both modalities
    // of every pair share the drawn pool time. forced_t_index pins the pool
    // draw (tests), -1 draws uniformly.
    StepStats train_step(const std::vector<const PairedSample*>& batch, int forced_t_index = -1);

    // Epoch loop with shuffling, jsonl logging and checkpointing into out_dir.
    void fit(const std::vector<PairedSample>& data, const std::string& out_dir);

    void save(const std::string& dir) const;
    static Trainer restore(const std::string& dir, const TrainConfig& cfg);

    TranslatorNet& network() { return net_; }
    const TranslatorNet& network() const { return net_; }
    const LossHeads& heads() const { return heads_; }
    const TrainConfig& config() const { return cfg_; }
    long long step_count() const { return step_; }
    Rng& rng() { return rng_; }

private:
    void adam_update();
    void ensure_projection(int image_numel);

    TrainConfig cfg_;
    TranslatorNet net_;
    LossHeads heads_;
    PairProjection proj_;  // built lazily once the image size is known
    Rng rng_;
    std::vector<Tensor> adam_m_, adam_v_;
    long long step_ = 0;
};

}  // namespace acmt

#endif
