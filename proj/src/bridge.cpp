#include "acmt/bridge.hpp"

#include <cmath>
#include <stdexcept>

namespace acmt {

void BridgeConfig::validate() const {
    if (sigma < 0.0) throw std::invalid_argument("BridgeConfig: sigma must be >= 0");
    if (timestep_pool.empty()) throw std::invalid_argument("BridgeConfig: empty timestep pool");
    if (timestep_pool.front() != 0.0) throw std::invalid_argument("BridgeConfig: pool must start at 0");
    for (std::size_t i = 0; i < timestep_pool.size(); ++i) {
        if (timestep_pool[i] < 0.0 || timestep_pool[i] >= 1.0)
            throw std::invalid_argument("BridgeConfig: pool times must lie in [0,1)");
        if (i > 0 && timestep_pool[i] <= timestep_pool[i - 1])
            throw std::invalid_argument("BridgeConfig: pool must be strictly increasing");
    }
}

Tensor cfm_interpolate(const Tensor& x_tm, const Tensor& x_tn, double t_m, double t_n, double t,
                       double sigma, Rng& rng) {
    if (!x_tm.same_shape(x_tn)) throw std::invalid_argument("cfm_interpolate: shape mismatch");
    if (!(t_m < t_n)) throw std::invalid_argument("cfm_interpolate: require t_m < t_n");
    if (t < t_m || t > t_n) throw std::invalid_argument("cfm_interpolate: t outside [t_m, t_n]");
    if (sigma < 0.0) throw std::invalid_argument("cfm_interpolate: sigma must be >= 0");

    const double w = (t - t_m) / (t_n - t_m);
    const double variance = w * (1.0 - w) * sigma * (t_n - t_m);
    Tensor out(x_tm.shape());
    for (int i = 0; i < out.numel(); ++i) out[i] = w * x_tn[i] + (1.0 - w) * x_tm[i];
    if (variance > 0.0) {
        const double sd = std::sqrt(variance);
        for (int i = 0; i < out.numel(); ++i) out[i] += sd * rng.normal();
    }
    return out;
}

Tensor diffusion_step(const Tensor& x_tj, const Tensor& x1_pred, double t_j, double t_j1,
                      double sigma, Rng& rng) {
    if (!x_tj.same_shape(x1_pred)) throw std::invalid_argument("diffusion_step: shape mismatch");
    if (!(t_j < t_j1)) throw std::invalid_argument("diffusion_step: require t_j < t_j1");
    if (t_j < 0.0 || t_j >= 1.0) throw std::invalid_argument("diffusion_step: t_j must lie in [0,1)");
    if (t_j1 > 1.0) throw std::invalid_argument("diffusion_step: t_j1 must lie in (t_j, 1]");
    if (sigma < 0.0) throw std::invalid_argument("diffusion_step: sigma must be >= 0");

    const double w = (t_j1 - t_j) / (1.0 - t_j);
    const double alpha = w * (1.0 - w) * (1.0 - t_j) * sigma;
    Tensor out(x_tj.shape());
    for (int i = 0; i < out.numel(); ++i) out[i] = w * x1_pred[i] + (1.0 - w) * x_tj[i];
    if (alpha > 0.0) {
        const double sd = std::sqrt(alpha);
        for (int i = 0; i < out.numel(); ++i) out[i] += sd * rng.normal();
    }
    return out;
}

std::pair<int, double> pool_sample(const std::vector<double>& pool, Rng& rng) {
    if (pool.empty()) throw std::invalid_argument("pool_sample: empty pool");
    const int i = rng.uniform_int(static_cast<int>(pool.size()));
    return {i, pool[static_cast<std::size_t>(i)]};
}

}  // namespace acmt
