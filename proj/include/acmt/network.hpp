#ifndef ACMT_NETWORK_HPP
#define ACMT_NETWORK_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "acmt/autodiff.hpp"
#include "acmt/tensor.hpp"

namespace acmt {

struct NetworkConfig {
    int levels = 4;
    int base_channels = 16;
    int time_embed_dim = 64;
    std::uint64_t seed = 1;

    void validate() const;
    int channels_at(int level) const;  // level 1..levels
};

// Intermediate activations exposed for the disentanglement losses: the
// coarse early features (texture) and the bottleneck features (structure).
struct FeatureTaps {
    ad::Var shallow;  // {base, H/2, W/2}
    ad::Var deep;     // {base*2^(L-1), H/2^(L-1), W/2^(L-1)}
};

// Time-conditioned encoder-decoder translator. One shared instance serves
// both input modalities; conditioning enters through FiLM modulation of a
// sinusoidal time embedding. Fully convolutional, tanh-bounded output.
class TranslatorNet {
public:
    explicit TranslatorNet(const NetworkConfig& cfg = {});

    // x is {1,H,W} with H,W divisible by 2^(levels-1); t in [0,1].
    ad::Var forward(const ad::Var& x, double t, FeatureTaps* taps = nullptr) const;

    // Convenience: value-only forward under a no-grad guard.
    Tensor predict(const Tensor& x, double t) const;

    // Canonical feature pass at t = 0; tap gradients flow if enabled.
    FeatureTaps extract_features(const ad::Var& x) const;

    std::vector<ad::Var>& parameters() { return params_; }
    const std::vector<ad::Var>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    std::size_t parameter_count() const;
    const NetworkConfig& config() const { return cfg_; }

    // Order-sensitive hash of every parameter byte; cheap drift detector.
    std::uint64_t fingerprint() const;

    void zero_grad();

private:
    struct Block {
        int w1 = -1, b1 = -1, w2 = -1, b2 = -1, film = -1, film_b = -1;  // indices into params_
    };

    ad::Var param(int idx) const { return params_[static_cast<std::size_t>(idx)]; }
    ad::Var run_block(const Block& blk, const ad::Var& x, const ad::Var& emb) const;
    ad::Var time_embedding(double t) const;

    NetworkConfig cfg_;
    std::vector<ad::Var> params_;
    std::vector<std::string> names_;
    std::vector<Block> enc_, dec_;
    int temb_w1_ = -1, temb_b1_ = -1, temb_w2_ = -1, temb_b2_ = -1;
    int out_w_ = -1, out_b_ = -1;
};

// Checkpoints bundle the network weights with whatever extra tensors the
// caller wants preserved (optimizer slots), plus resumable RNG state.
struct Checkpoint {
    NetworkConfig config;
    std::vector<std::pair<std::string, Tensor>> tensors;
    long long step = 0;
    std::string rng_state;
};

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& dir);

// Builds a network from a checkpoint's config and restores its weights
// (optimizer slots in the checkpoint are ignored).
TranslatorNet make_network(const Checkpoint& ckpt);

}  // namespace acmt

#endif
