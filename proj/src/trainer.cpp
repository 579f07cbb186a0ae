#include "acmt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "acmt/errors.hpp"

namespace fs = std::filesystem;

namespace acmt {
namespace {
constexpr std::uint64_t kTrainStream = 0x7472616e303141ull;

HeadsConfig heads_for(const TrainConfig& cfg) {
    HeadsConfig h;
    h.shallow_channels = cfg.network.base_channels;
    h.deep_channels = cfg.network.channels_at(cfg.network.levels);
    h.seed = cfg.seed;
    return h;
}

Tensor as_chw(const Tensor& img) { return img.reshaped({1, img.dim(0), img.dim(1)}); }

}  // namespace

void TrainConfig::validate() const {
    bridge.validate();
    network.validate();
    // lr = 0 is allowed as a degenerate optimizer (steps report losses but
    // leave the parameters untouched); only negative rates are nonsense.
    if (lr < 0.0) throw std::invalid_argument("train: lr must be non-negative");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("train: betas must lie in [0,1)");
    if (adam_eps <= 0.0) throw std::invalid_argument("train: adam_eps must be positive");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be positive");
    if (bridge.sigma > 0.0 && batch_size < 4)
        throw std::invalid_argument("train: stochastic bridge needs batch_size >= 4");
    if (epochs < 1) throw std::invalid_argument("train: epochs must be positive");
    if (projection_dim < 1) throw std::invalid_argument("train: projection_dim must be positive");
    if (checkpoint_every < 0) throw std::invalid_argument("train: checkpoint_every negative");
    if (weights.texture < 0.0 || weights.boundary < 0.0 || weights.sb < 0.0)
        throw std::invalid_argument("train: loss weights must be non-negative");
}

BridgeState synthesize_state(const Tensor& x0, int pool_idx, const BridgeConfig& bridge,
                             const Predictor& predict, Rng& rng) {
    bridge.validate();
    if (pool_idx < 0 || pool_idx >= bridge.pool_size())
        throw std::invalid_argument("synthesize_state: pool index out of range");

    BridgeState state{x0, bridge.timestep_pool[0]};
    for (int j = 0; j < pool_idx; ++j) {
        const double t_j = bridge.timestep_pool[static_cast<std::size_t>(j)];
        const double t_j1 = bridge.timestep_pool[static_cast<std::size_t>(j + 1)];
        Tensor x1 = predict(state.x, t_j);
        state.x = diffusion_step(state.x, x1, t_j, t_j1, bridge.sigma, rng);
        state.t = t_j1;
    }
    return state;
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      net_((cfg.validate(), cfg.network)),
      heads_(heads_for(cfg)),
      rng_(mix_seed(cfg.seed, kTrainStream)) {
    for (const auto& p : net_.parameters()) {
        adam_m_.push_back(Tensor::zeros(p.value().shape()));
        adam_v_.push_back(Tensor::zeros(p.value().shape()));
    }
}

void Trainer::ensure_projection(int image_numel) {
    if (proj_.p.empty()) {
        proj_ = PairProjection::make(image_numel, cfg_.projection_dim, cfg_.seed);
    } else if (proj_.in_dim() != 2 * image_numel) {
        throw std::invalid_argument("train: image size changed mid-run");
    }
}

StepStats Trainer::train_step(const std::vector<const PairedSample*>& batch, int forced_t_index) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    for (const PairedSample* s : batch) {
        if (!s || s->height() != batch[0]->height() || s->width() != batch[0]->width())
            throw std::invalid_argument("train_step: null or mixed-size samples");
        if (!s->mr.all_finite() || !s->us.all_finite())
            throw NumericError("train_step: non-finite input image");
    }
    const int n = static_cast<int>(batch.size());
    ensure_projection(batch[0]->mr.numel());

    int ti_idx;
    double t_i;
    if (forced_t_index >= 0) {
        if (forced_t_index >= cfg_.bridge.pool_size())
            throw std::invalid_argument("train_step: forced pool index out of range");
        ti_idx = forced_t_index;
        t_i = cfg_.bridge.timestep_pool[static_cast<std::size_t>(ti_idx)];
    } else {
        std::tie(ti_idx, t_i) = pool_sample(cfg_.bridge.timestep_pool, rng_);
    }

    // Frozen phase: walk the bridge to t_i for every image with the network
    // held fixed; no tape is recorded here.
    Predictor frozen = [this](const Tensor& x, double t) { return net_.predict(x, t); };
    std::vector<Tensor> xt_mr, xt_us;
    xt_mr.reserve(static_cast<std::size_t>(n));
    xt_us.reserve(static_cast<std::size_t>(n));
    for (const PairedSample* s : batch) {
        xt_mr.push_back(synthesize_state(as_chw(s->mr), ti_idx, cfg_.bridge, frozen, rng_).x);
        xt_us.push_back(synthesize_state(as_chw(s->us), ti_idx, cfg_.bridge, frozen, rng_).x);
    }

    // Learned phase: terminal predictions with gradients, feature taps of the
    // predictions, and frozen reference taps of the originals.
    std::vector<ad::Var> state_mr, state_us, pred_mr, pred_us;
    std::vector<ad::Var> tex_terms, bnd_mr_terms, bnd_us_terms;
    for (int k = 0; k < n; ++k) {
        state_mr.emplace_back(xt_mr[static_cast<std::size_t>(k)], false);
        state_us.emplace_back(xt_us[static_cast<std::size_t>(k)], false);
        pred_mr.push_back(net_.forward(state_mr.back(), t_i));
        pred_us.push_back(net_.forward(state_us.back(), t_i));

        FeatureTaps fp_mr = net_.extract_features(pred_mr.back());
        FeatureTaps fp_us = net_.extract_features(pred_us.back());
        FeatureTaps f0_mr, f0_us;
        {
            ad::NoGradGuard guard;
            f0_mr = net_.extract_features(ad::Var(as_chw(batch[static_cast<std::size_t>(k)]->mr), false));
            f0_us = net_.extract_features(ad::Var(as_chw(batch[static_cast<std::size_t>(k)]->us), false));
        }
        tex_terms.push_back(texture_loss(heads_, fp_mr.shallow, fp_us.shallow));
        bnd_mr_terms.push_back(boundary_loss(heads_, fp_mr.deep, f0_mr.deep));
        bnd_us_terms.push_back(boundary_loss(heads_, fp_us.deep, f0_us.deep));
    }

    ad::Var tex = ad::mean_all(ad::flatten_rows(tex_terms));
    ad::Var bnd_mr = ad::mean_all(ad::flatten_rows(bnd_mr_terms));
    ad::Var bnd_us = ad::mean_all(ad::flatten_rows(bnd_us_terms));
    ad::Var sb_mr = sb_loss(state_mr, pred_mr, t_i, cfg_.bridge.sigma, proj_);
    ad::Var sb_us = sb_loss(state_us, pred_us, t_i, cfg_.bridge.sigma, proj_);
    ad::Var total = total_loss(cfg_.weights, tex, bnd_mr, bnd_us, sb_mr, sb_us);
    if (!total.value().all_finite()) throw NumericError("train_step: non-finite loss");

    net_.zero_grad();
    ad::backward(total);
    adam_update();

    StepStats stats;
    stats.losses.texture = tex.value()[0];
    stats.losses.boundary_mr = bnd_mr.value()[0];
    stats.losses.boundary_us = bnd_us.value()[0];
    stats.losses.sb_mr = sb_mr.value()[0];
    stats.losses.sb_us = sb_us.value()[0];
    stats.losses.total = total.value()[0];
    stats.t_index = ti_idx;
    stats.t = t_i;
    stats.step = step_;
    double gn2 = 0.0;
    for (const auto& p : net_.parameters())
        if (p.has_grad())
            for (int i = 0; i < p.grad().numel(); ++i) gn2 += p.grad()[i] * p.grad()[i];
    stats.grad_norm = std::sqrt(gn2);
    return stats;
}

void Trainer::adam_update() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    auto& params = net_.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& value = params[i].value();
        Tensor& m = adam_m_[i];
        Tensor& v = adam_v_[i];
        const bool has = params[i].has_grad();
        for (int k = 0; k < value.numel(); ++k) {
            const double g = has ? params[i].grad()[k] : 0.0;
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            value[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
        }
        if (!value.all_finite()) throw NumericError("adam: parameters became non-finite");
    }
}

void Trainer::fit(const std::vector<PairedSample>& data, const std::string& out_dir) {
    if (data.empty()) throw std::invalid_argument("fit: empty dataset");
    fs::create_directories(out_dir);
    std::ofstream log(out_dir + "/train_log.jsonl", std::ios::app);
    if (!log) throw IoError("cannot open " + out_dir + "/train_log.jsonl");

    const auto t_start = std::chrono::steady_clock::now();
    const int n = static_cast<int>(data.size());
    const int b = cfg_.batch_size;
    const int steps_per_epoch = (n + b - 1) / b;
    const long long total_steps =
        static_cast<long long>(steps_per_epoch) * cfg_.epochs;
    const bool square = data[0].height() == data[0].width();
    // Quarter rotations only make sense on square frames.
    const int augment_choices = square ? 6 : 4;
    static const AugmentOp kOps[5] = {AugmentOp::FlipH, AugmentOp::FlipV, AugmentOp::Rot180,
                                      AugmentOp::Rot90, AugmentOp::Rot270};

    while (step_ < total_steps) {
        const int epoch = static_cast<int>(step_ / steps_per_epoch);
        // The visiting order and augmentations depend only on (seed, epoch),
        // so a run resumed mid-epoch rebuilds the same plan while the main
        // stream continues from its saved state.
        Rng shuffle_rng(mix_seed(cfg_.seed, 0x73687566ull + static_cast<std::uint64_t>(epoch)));
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(shuffle_rng.uniform_int(i + 1))]);
        std::vector<int> aug(static_cast<std::size_t>(n), 0);
        if (cfg_.augment) {
            Rng aug_rng(mix_seed(cfg_.seed, 0x61756766ull + static_cast<std::uint64_t>(epoch)));
            for (int i = 0; i < n; ++i)
                aug[static_cast<std::size_t>(i)] = aug_rng.uniform_int(augment_choices);
        }

        const int first = static_cast<int>(step_ % steps_per_epoch);
        for (int s = first; s < steps_per_epoch && step_ < total_steps; ++s) {
            std::vector<PairedSample> storage;
            storage.reserve(static_cast<std::size_t>(b));
            std::vector<const PairedSample*> batch;
            batch.reserve(static_cast<std::size_t>(b));
            // The trailing partial batch wraps around to the epoch's start.
            for (int k = 0; k < b; ++k) {
                const int idx = order[static_cast<std::size_t>((s * b + k) % n)];
                const int op = aug[static_cast<std::size_t>(idx)];
                if (op == 0) {
                    batch.push_back(&data[static_cast<std::size_t>(idx)]);
                } else {
                    storage.push_back(
                        augment_pair(data[static_cast<std::size_t>(idx)], kOps[op - 1]));
                    batch.push_back(&storage.back());
                }
            }
            StepStats st = train_step(batch);

            nlohmann::json j{{"step", st.step},
                             {"epoch", epoch},
                             {"t_index", st.t_index},
                             {"t_i", st.t},
                             {"texture", st.losses.texture},
                             {"boundary_mr", st.losses.boundary_mr},
                             {"boundary_us", st.losses.boundary_us},
                             {"boundary", 0.5 * (st.losses.boundary_mr + st.losses.boundary_us)},
                             {"sb_mr", st.losses.sb_mr},
                             {"sb_us", st.losses.sb_us},
                             {"sb", 0.5 * (st.losses.sb_mr + st.losses.sb_us)},
                             {"total", st.losses.total},
                             {"grad_norm", st.grad_norm}};
            log << j.dump() << "\n";
            log.flush();
            if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0)
                save(out_dir + "/checkpoint");
        }
        if (step_ % steps_per_epoch == 0) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            char fp[19];
            std::snprintf(fp, sizeof fp, "%016llx",
                          static_cast<unsigned long long>(net_.fingerprint()));
            nlohmann::json j{{"epoch_complete", epoch}, {"fingerprint", fp}, {"elapsed_sec", elapsed}};
            log << j.dump() << "\n";
            log.flush();
        }
    }
    save(out_dir + "/checkpoint");
}

void Trainer::save(const std::string& dir) const {
    Checkpoint ckpt;
    ckpt.config = cfg_.network;
    ckpt.step = step_;
    ckpt.rng_state = rng_.state();
    const auto& params = net_.parameters();
    const auto& names = net_.parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i)
        ckpt.tensors.emplace_back(names[i], params[i].value());
    for (std::size_t i = 0; i < params.size(); ++i)
        ckpt.tensors.emplace_back("adam_m." + names[i], adam_m_[i]);
    for (std::size_t i = 0; i < params.size(); ++i)
        ckpt.tensors.emplace_back("adam_v." + names[i], adam_v_[i]);
    save_checkpoint(dir, ckpt);
}

Trainer Trainer::restore(const std::string& dir, const TrainConfig& cfg) {
    Checkpoint ckpt = load_checkpoint(dir);
    if (ckpt.config.levels != cfg.network.levels ||
        ckpt.config.base_channels != cfg.network.base_channels ||
        ckpt.config.time_embed_dim != cfg.network.time_embed_dim ||
        ckpt.config.seed != cfg.network.seed)
        throw CorruptCheckpointError("checkpoint network config does not match run config");

    Trainer tr(cfg);
    auto& params = tr.net_.parameters();
    const auto& names = tr.net_.parameter_names();
    auto take = [&](const std::string& name) -> const Tensor& {
        for (const auto& [n, t] : ckpt.tensors)
            if (n == name) return t;
        throw CorruptCheckpointError("checkpoint missing tensor " + name);
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& t = take(names[i]);
        if (!t.same_shape(params[i].value()))
            throw CorruptCheckpointError("checkpoint tensor shape mismatch: " + names[i]);
        params[i].value() = t;
        tr.adam_m_[i] = take("adam_m." + names[i]);
        tr.adam_v_[i] = take("adam_v." + names[i]);
        if (!tr.adam_m_[i].same_shape(params[i].value()) ||
            !tr.adam_v_[i].same_shape(params[i].value()))
            throw CorruptCheckpointError("checkpoint optimizer shape mismatch: " + names[i]);
    }
    tr.step_ = ckpt.step;
    tr.rng_.restore(ckpt.rng_state);
    return tr;
}

}  // namespace acmt
