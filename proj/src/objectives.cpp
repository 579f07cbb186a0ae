#include "acmt/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "acmt/errors.hpp"
#include "acmt/rng.hpp"

namespace acmt {
namespace {
constexpr std::uint64_t kHeadStream = 0x68656164303141ull;
constexpr std::uint64_t kProjStream = 0x70726f6a303141ull;
}  // namespace

void HeadsConfig::validate() const {
    if (shallow_channels < 1 || deep_channels < 1 || conv7_out < 1 || conv3_out < 1)
        throw std::invalid_argument("loss heads: channel counts must be positive");
}

LossHeads::LossHeads(const HeadsConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(mix_seed(cfg_.seed, kHeadStream));
    w7_ = Tensor::randn({cfg_.conv7_out, cfg_.shallow_channels, 7, 7}, rng,
                        std::sqrt(1.0 / (cfg_.shallow_channels * 49.0)));
    w3_ = Tensor::randn({cfg_.conv3_out, cfg_.deep_channels, 3, 3}, rng,
                        std::sqrt(1.0 / (cfg_.deep_channels * 9.0)));
}

ad::Var LossHeads::conv7(const ad::Var& shallow) const {
    if (shallow.value().ndim() != 3 || shallow.value().dim(0) != cfg_.shallow_channels)
        throw std::invalid_argument("conv7: unexpected shallow tap shape");
    return ad::conv2d(shallow, ad::Var(w7_, false));
}

ad::Var LossHeads::conv3(const ad::Var& deep) const {
    if (deep.value().ndim() != 3 || deep.value().dim(0) != cfg_.deep_channels)
        throw std::invalid_argument("conv3: unexpected deep tap shape");
    return ad::conv2d(deep, ad::Var(w3_, false));
}

std::uint64_t LossHeads::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = acmt::fingerprint(w7_, h);
    return acmt::fingerprint(w3_, h);
}

Tensor sobel_weights(int channels) {
    if (channels < 1) throw std::invalid_argument("sobel_weights: channels must be positive");
    static const double kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    Tensor w({2 * channels, channels, 3, 3});
    for (int c = 0; c < channels; ++c)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double v = kx[i][j];
                w[((2 * c) * channels + c) * 9 + i * 3 + j] = v;       // horizontal derivative
                w[((2 * c + 1) * channels + c) * 9 + j * 3 + i] = v;   // transposed kernel
            }
    return w;
}

ad::Var sobel_apply(const ad::Var& features) {
    if (features.value().ndim() != 3)
        throw std::invalid_argument("sobel_apply: expected {C,H,W}");
    return ad::conv2d(features, ad::Var(sobel_weights(features.value().dim(0)), false));
}

PairProjection PairProjection::make(int image_numel, int dim, std::uint64_t seed) {
    if (image_numel < 1 || dim < 1)
        throw std::invalid_argument("projection: dimensions must be positive");
    Rng rng(mix_seed(seed, kProjStream));
    PairProjection proj;
    proj.p = Tensor::randn({2 * image_numel, dim}, rng, 1.0 / std::sqrt(2.0 * image_numel));
    return proj;
}

double kde_bandwidth(const Tensor& samples) {
    if (samples.ndim() != 2 || samples.dim(0) < 4)
        throw DegenerateBatchError("entropy needs at least four samples");
    const int n = samples.dim(0), d = samples.dim(1);
    double med = ad::median_pairwise_distance(samples);
    if (!(med > 1e-9)) throw DegenerateBatchError("entropy samples are (near-)coincident");
    return med * std::pow(static_cast<double>(n), -1.0 / (d + 4.0));
}

double entropy_estimate(const Tensor& samples, double bandwidth, double* bandwidth_out) {
    if (samples.ndim() != 2 || samples.dim(0) < 4)
        throw DegenerateBatchError("entropy needs at least four samples");
    double h = bandwidth > 0.0 ? bandwidth : kde_bandwidth(samples);
    if (bandwidth_out) *bandwidth_out = h;
    ad::NoGradGuard guard;
    return ad::loo_kde_entropy(ad::Var(samples, false), h).value()[0];
}

ad::Var texture_loss(const LossHeads& heads, const ad::Var& shallow_a, const ad::Var& shallow_b) {
    ad::Var d = ad::sub(heads.conv7(shallow_a), heads.conv7(shallow_b));
    return ad::mean_all(ad::square(d));
}

ad::Var boundary_loss(const LossHeads& heads, const ad::Var& deep_pred, const ad::Var& deep_ref) {
    ad::Var ep = sobel_apply(heads.conv3(deep_pred));
    ad::Var er = sobel_apply(heads.conv3(deep_ref));
    return ad::mean_all(ad::abs_val(ad::sub(ep, er)));
}

ad::Var sb_loss(const std::vector<ad::Var>& x_t, const std::vector<ad::Var>& pred, double t,
                double sigma, const PairProjection& proj) {
    if (x_t.empty() || x_t.size() != pred.size())
        throw std::invalid_argument("sb_loss: mismatched batch");
    if (!(t >= 0.0 && t < 1.0)) throw std::invalid_argument("sb_loss: t outside [0,1)");
    if (sigma < 0.0) throw std::invalid_argument("sb_loss: negative sigma");

    ad::Var xs = ad::flatten_rows(x_t);
    ad::Var ps = ad::flatten_rows(pred);
    ad::Var cost = ad::mean_all(ad::square(ad::sub(xs, ps)));

    const double coeff = 2.0 * sigma * (1.0 - t);
    if (coeff == 0.0) return cost;

    const int n = static_cast<int>(x_t.size());
    if (n < 4) throw DegenerateBatchError("sb_loss: entropy term needs a batch of at least four");
    ad::Var joint = ad::concat_cols(xs, ps);
    if (joint.value().dim(1) != proj.in_dim())
        throw std::invalid_argument("sb_loss: projection size does not match images");
    ad::Var s = ad::project(joint, proj.p);
    kde_bandwidth(s.value());  // reject degenerate clouds up front
    const double shrink =
        std::pow(static_cast<double>(n), -1.0 / (proj.out_dim() + 4.0));
    ad::Var entropy = ad::loo_kde_entropy_mh(s, shrink);
    return ad::sub(cost, ad::scale(entropy, coeff));
}

ad::Var total_loss(const LossWeights& w, const ad::Var& tex, const ad::Var& b_mr,
                   const ad::Var& b_us, const ad::Var& sb_mr, const ad::Var& sb_us) {
    ad::Var boundary = ad::scale(ad::add(b_mr, b_us), 0.5 * w.boundary);
    ad::Var bridge = ad::scale(ad::add(sb_mr, sb_us), 0.5 * w.sb);
    return ad::add(ad::add(ad::scale(tex, w.texture), boundary), bridge);
}

}  // namespace acmt
