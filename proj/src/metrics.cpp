#include "acmt/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "acmt/errors.hpp"
#include "acmt/mask_ops.hpp"
#include "acmt/objectives.hpp"
#include "acmt/ops.hpp"
#include "acmt/rng.hpp"

namespace acmt {
namespace {
constexpr std::uint64_t kProxyStream = 0x6d747278303141ull;
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_mask_pair(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || !a.same_shape(b))
        throw std::invalid_argument("masks must share an {H,W} shape");
    if (!is_binary(a) || !is_binary(b))
        throw std::invalid_argument("masks must be binary");
}

void overlap_counts(const Tensor& a, const Tensor& b, double& inter, double& ca, double& cb) {
    inter = ca = cb = 0.0;
    for (int i = 0; i < a.numel(); ++i) {
        if (a[i] > 0.5) ca += 1.0;
        if (b[i] > 0.5) cb += 1.0;
        if (a[i] > 0.5 && b[i] > 0.5) inter += 1.0;
    }
}

}  // namespace

double dsc(const Tensor& a, const Tensor& b) {
    check_mask_pair(a, b);
    double inter, ca, cb;
    overlap_counts(a, b, inter, ca, cb);
    if (ca + cb == 0.0) throw UndefinedMetricError("dsc: both masks are empty");
    return 2.0 * inter / (ca + cb);
}

double iou(const Tensor& a, const Tensor& b) {
    check_mask_pair(a, b);
    double inter, ca, cb;
    overlap_counts(a, b, inter, ca, cb);
    double uni = ca + cb - inter;
    if (uni == 0.0) throw UndefinedMetricError("iou: both masks are empty");
    return inter / uni;
}

double asd_px(const Tensor& a, const Tensor& b) {
    check_mask_pair(a, b);
    std::vector<std::pair<int, int>> ba = boundary_pixels(a);
    std::vector<std::pair<int, int>> bb = boundary_pixels(b);
    if (ba.empty() || bb.empty())
        throw UndefinedMetricError("asd_px: masks must be non-empty");

    auto one_sided = [](const std::vector<std::pair<int, int>>& from,
                        const std::vector<std::pair<int, int>>& to) {
        double acc = 0.0;
        for (const auto& [ay, ax] : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [by, bx] : to) {
                double dy = ay - by, dx = ax - bx;
                best = std::min(best, dy * dy + dx * dx);
            }
            acc += std::sqrt(best);
        }
        return acc;
    };
    return (one_sided(ba, bb) + one_sided(bb, ba)) /
           static_cast<double>(ba.size() + bb.size());
}

SegMetrics compare_masks(const Tensor& a, const Tensor& b) {
    return SegMetrics{dsc(a, b), iou(a, b), asd_px(a, b)};
}

SegMetrics evaluate_registration(const DisplacementField& field, const Tensor& mask_moving,
                                 const Tensor& mask_fixed) {
    check_mask_pair(mask_moving, mask_fixed);
    if (field.height() != mask_moving.dim(0) || field.width() != mask_moving.dim(1))
        throw std::invalid_argument("evaluate_registration: field/mask shapes do not match");
    return compare_masks(warp(mask_moving, field, Interp::Nearest), mask_fixed);
}

FeatureExtractorProxy::FeatureExtractorProxy(std::uint64_t seed) {
    Rng rng(mix_seed(seed, kProxyStream));
    w1_ = Tensor::randn({8, 1, 3, 3}, rng, std::sqrt(2.0 / 9.0));
    w2_ = Tensor::randn({16, 8, 3, 3}, rng, std::sqrt(2.0 / 72.0));
    w3_ = Tensor::randn({32, 16, 3, 3}, rng, std::sqrt(2.0 / 144.0));
}

Tensor FeatureExtractorProxy::describe(const Tensor& image) const {
    if (image.ndim() != 2) throw std::invalid_argument("describe: expected {H,W}");
    if (image.dim(0) < 8 || image.dim(1) < 8)
        throw std::invalid_argument("describe: image too small");
    auto act = [](Tensor t) {
        for (int i = 0; i < t.numel(); ++i) t[i] = std::tanh(t[i]);
        return t;
    };
    Tensor h = image.reshaped({1, image.dim(0), image.dim(1)});
    h = act(ops::conv2d(h, w1_, nullptr, 2));
    h = act(ops::conv2d(h, w2_, nullptr, 2));
    h = act(ops::conv2d(h, w3_, nullptr, 2));
    Tensor d({32});
    const int hw = h.dim(1) * h.dim(2);
    for (int c = 0; c < 32; ++c) {
        double acc = 0.0;
        for (int k = 0; k < hw; ++k) acc += h[c * hw + k];
        d[c] = acc / hw;
    }
    return d;
}

Tensor FeatureExtractorProxy::describe_all(const std::vector<Tensor>& images) const {
    if (images.empty()) throw std::invalid_argument("describe_all: no images");
    Tensor out({static_cast<int>(images.size()), 32});
    for (std::size_t i = 0; i < images.size(); ++i) {
        Tensor d = describe(images[i]);
        std::copy(d.data(), d.data() + 32, out.data() + i * 32);
    }
    return out;
}

double frechet_distance(const Tensor& da, const Tensor& db) {
    if (da.ndim() != 2 || db.ndim() != 2 || da.dim(1) != db.dim(1))
        throw std::invalid_argument("frechet_distance: descriptor shapes do not match");
    if (da.dim(0) < 2 || db.dim(0) < 2)
        throw std::invalid_argument("frechet_distance: need at least two descriptors per side");
    const int d = da.dim(1);

    auto moments = [&](const Tensor& t, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
        const int n = t.dim(0);
        Eigen::Map<const MatRM> m(t.data(), n, d);
        mu = m.colwise().mean();
        Eigen::MatrixXd centered = m.rowwise() - mu.transpose();
        cov = centered.transpose() * centered / (n - 1.0);
        cov += 1e-6 * Eigen::MatrixXd::Identity(d, d);
    };
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd ca, cb;
    moments(da, mu_a, ca);
    moments(db, mu_b, cb);

    // tr sqrt(Ca Cb) via the symmetric form sqrt(Ca)^T Cb sqrt(Ca).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(ca);
    Eigen::VectorXd ev = es_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd root_a = es_a.eigenvectors() * ev.asDiagonal() * es_a.eigenvectors().transpose();
    Eigen::MatrixXd inner = root_a * cb * root_a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_i(inner);
    double tr_sqrt = es_i.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    double diff2 = (mu_a - mu_b).squaredNorm();
    return diff2 + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
}

double mmd2_poly(const Tensor& da, const Tensor& db) {
    if (da.ndim() != 2 || db.ndim() != 2 || da.dim(1) != db.dim(1))
        throw std::invalid_argument("mmd2_poly: descriptor shapes do not match");
    const int m = da.dim(0), n = db.dim(0), d = da.dim(1);
    if (m < 2 || n < 2)
        throw std::invalid_argument("mmd2_poly: need at least two descriptors per side");
    auto kern = [d](const double* x, const double* y) {
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += x[i] * y[i];
        double base = dot / d + 1.0;
        return base * base * base;
    };
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) kaa += kern(da.data() + i * d, da.data() + j * d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) kbb += kern(db.data() + i * d, db.data() + j * d);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) kab += kern(da.data() + i * d, db.data() + j * d);
    return kaa / (static_cast<double>(m) * (m - 1)) + kbb / (static_cast<double>(n) * (n - 1)) -
           2.0 * kab / (static_cast<double>(m) * n);
}

double fid_proxy(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                 const FeatureExtractorProxy& fx) {
    return frechet_distance(fx.describe_all(a), fx.describe_all(b));
}

double kid_proxy(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                 const FeatureExtractorProxy& fx) {
    return mmd2_poly(fx.describe_all(a), fx.describe_all(b));
}

Tensor chessboard_composite(const Tensor& a, const Tensor& b, int block) {
    if (a.ndim() != 2 || !a.same_shape(b))
        throw std::invalid_argument("chessboard_composite: shapes do not match");
    if (block < 1) throw std::invalid_argument("chessboard_composite: block must be positive");
    Tensor out(a.shape());
    for (int i = 0; i < a.dim(0); ++i)
        for (int j = 0; j < a.dim(1); ++j) {
            bool even = ((i / block) + (j / block)) % 2 == 0;
            out.at(i, j) = even ? a.at(i, j) : b.at(i, j);
        }
    return out;
}

Tensor sobel_magnitude(const Tensor& image) {
    if (image.ndim() != 2) throw std::invalid_argument("sobel_magnitude: expected {H,W}");
    Tensor resp = ops::conv2d(image.reshaped({1, image.dim(0), image.dim(1)}), sobel_weights(1));
    Tensor out({image.dim(0), image.dim(1)});
    const int hw = out.numel();
    for (int k = 0; k < hw; ++k) out[k] = std::hypot(resp[k], resp[hw + k]);
    return out;
}

double pearson(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b) || a.numel() < 2)
        throw std::invalid_argument("pearson: need two equal tensors");
    const int n = a.numel();
    double ma = a.mean(), mb = b.mean();
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (int i = 0; i < n; ++i) {
        double xa = a[i] - ma, xb = b[i] - mb;
        sab += xa * xb;
        saa += xa * xa;
        sbb += xb * xb;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw std::invalid_argument("pearson: zero-variance input");
    return sab / std::sqrt(saa * sbb);
}

}  // namespace acmt
