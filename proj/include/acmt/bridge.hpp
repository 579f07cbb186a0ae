#ifndef ACMT_BRIDGE_HPP
#define ACMT_BRIDGE_HPP

#include <utility>
#include <vector>

#include "acmt/rng.hpp"
#include "acmt/tensor.hpp"

namespace acmt {

// Gaussian-bridge primitives. Time is dimensionless on [0,1]; the terminal
// time 1 is the training target and never a pool element.
struct BridgeConfig {
    double sigma = 0.01;
    std::vector<double> timestep_pool = {0.0, 0.2, 0.4, 0.6, 0.8};

    void validate() const;
    int pool_size() const { return static_cast<int>(timestep_pool.size()); }
};

struct BridgeState {
    Tensor x;
    double t = 0.0;
};

// Draw from the bridge interpolant between states at t_m and t_n:
// N(w x_tn + (1-w) x_tm, w (1-w) sigma (t_n - t_m) I), w = (t-t_m)/(t_n-t_m).
Tensor cfm_interpolate(const Tensor& x_tm, const Tensor& x_tn, double t_m, double t_n, double t,
                       double sigma, Rng& rng);

// One discrete step toward the terminal prediction:
// x' = w x1_pred + (1-w) x_tj + N(0, alpha I),
// w = (t_j1 - t_j)/(1 - t_j), alpha = w (1-w) (1 - t_j) sigma.
Tensor diffusion_step(const Tensor& x_tj, const Tensor& x1_pred, double t_j, double t_j1,
                      double sigma, Rng& rng);

// Uniform draw of a pool index; returns (index, t_i).
std::pair<int, double> pool_sample(const std::vector<double>& pool, Rng& rng);

}  // namespace acmt

#endif
