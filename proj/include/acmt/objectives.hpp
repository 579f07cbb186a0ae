#ifndef ACMT_OBJECTIVES_HPP
#define ACMT_OBJECTIVES_HPP

#include <cstdint>
#include <vector>

#include "acmt/autodiff.hpp"
#include "acmt/tensor.hpp"

namespace acmt {

// Fixed measurement heads for the disentanglement losses. They are drawn
// once from a seed and never trained; gradients pass through them into the
// network features but the head weights themselves stay frozen.
struct HeadsConfig {
    int shallow_channels = 16;
    int deep_channels = 128;
    int conv7_out = 16;
    int conv3_out = 16;
    std::uint64_t seed = 7;

    void validate() const;
};

class LossHeads {
public:
    explicit LossHeads(const HeadsConfig& cfg = {});

    ad::Var conv7(const ad::Var& shallow) const;  // 7x7, bias-free
    ad::Var conv3(const ad::Var& deep) const;     // 3x3, bias-free
    const HeadsConfig& config() const { return cfg_; }
    std::uint64_t fingerprint() const;

private:
    HeadsConfig cfg_;
    Tensor w7_, w3_;
};

// Raw horizontal/vertical derivative responses, one pair per channel.
// Input {C,H,W} -> {2C,H,W}; no magnitude, no thresholding.
ad::Var sobel_apply(const ad::Var& features);
Tensor sobel_weights(int channels);

// Fixed random projection for entropy estimation of (state, prediction)
// pairs: rows of {N, 2*image_numel} are mapped to {N, dim}.
struct PairProjection {
    Tensor p;  // {2*image_numel, dim}

    static PairProjection make(int image_numel, int dim, std::uint64_t seed);
    int in_dim() const { return p.dim(0); }
    int out_dim() const { return p.dim(1); }
};

// Bandwidth for the leave-one-out KDE entropy: median pairwise distance
// shrunk by N^(-1/(d+4)). Needs at least four rows; degenerate sample sets
// are rejected.
double kde_bandwidth(const Tensor& samples);

// Value-only entropy of row vectors {N,d} (nats). A positive bandwidth is
// used as given; bandwidth <= 0 selects the median heuristic above.
double entropy_estimate(const Tensor& samples, double bandwidth = 0.0,
                        double* bandwidth_out = nullptr);

// Mean squared difference of the 7x7-head responses of two shallow taps.
ad::Var texture_loss(const LossHeads& heads, const ad::Var& shallow_a, const ad::Var& shallow_b);

// Mean absolute difference between edge responses of the prediction's deep
// features and those of a reference (detach the reference side upstream).
ad::Var boundary_loss(const LossHeads& heads, const ad::Var& deep_pred, const ad::Var& deep_ref);

// Per-modality bridge objective over a batch: mean squared transport cost
// minus an entropic term 2*sigma*(1-t)*H of projected (state, prediction)
// pairs. The entropy term is skipped when its coefficient is zero.
ad::Var sb_loss(const std::vector<ad::Var>& x_t, const std::vector<ad::Var>& pred, double t,
                double sigma, const PairProjection& proj);

struct LossWeights {
    double texture = 1.0;
    double boundary = 0.5;
    double sb = 1.0;
};

struct LossReport {
    double texture = 0.0;
    double boundary_mr = 0.0, boundary_us = 0.0;
    double sb_mr = 0.0, sb_us = 0.0;
    double total = 0.0;
};

// lambda_t * tex + lambda_b * (b_mr + b_us)/2 + lambda_sb * (sb_mr + sb_us)/2
ad::Var total_loss(const LossWeights& w, const ad::Var& tex, const ad::Var& b_mr,
                   const ad::Var& b_us, const ad::Var& sb_mr, const ad::Var& sb_us);

}  // namespace acmt

#endif
