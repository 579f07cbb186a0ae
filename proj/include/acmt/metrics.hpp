#ifndef ACMT_METRICS_HPP
#define ACMT_METRICS_HPP

#include <cstdint>
#include <vector>

#include "acmt/field.hpp"
#include "acmt/tensor.hpp"

namespace acmt {

// Overlap scores between binary masks of equal shape. Throws
// UndefinedMetricError when both masks are empty.
double dsc(const Tensor& a, const Tensor& b);
double iou(const Tensor& a, const Tensor& b);

// Symmetric mean distance between mask boundaries (4-connectivity interior
// erosion defines a boundary pixel), in pixels. Throws UndefinedMetricError
// if either mask is empty.
double asd_px(const Tensor& a, const Tensor& b);

struct SegMetrics {
    double dsc = 0.0, iou = 0.0, asd_px = 0.0;
};
SegMetrics compare_masks(const Tensor& a, const Tensor& b);

// Warps mask_moving by the field (nearest neighbour, so the result stays
// binary) and scores it against mask_fixed.
SegMetrics evaluate_registration(const DisplacementField& field,
                                 const Tensor& mask_moving,
                                 const Tensor& mask_fixed);

// Fixed random conv descriptor used by the distributional proxies; seeded,
// never trained, so scores are comparable across runs.
class FeatureExtractorProxy {
public:
    explicit FeatureExtractorProxy(std::uint64_t seed = 0);

    Tensor describe(const Tensor& image) const;                      // {H,W} -> {32}
    Tensor describe_all(const std::vector<Tensor>& images) const;    // -> {N,32}
    int dim() const { return 32; }

private:
    Tensor w1_, w2_, w3_;
};

// Frechet distance between Gaussian fits of two descriptor sets {N,d};
// sample covariance (N-1 denominator) with a small diagonal shrinkage.
double frechet_distance(const Tensor& da, const Tensor& db);

// Unbiased squared MMD with the cubic polynomial kernel (x.y/d + 1)^3.
double mmd2_poly(const Tensor& da, const Tensor& db);

double fid_proxy(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                 const FeatureExtractorProxy& fx);
double kid_proxy(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                 const FeatureExtractorProxy& fx);

// Alternating-block mosaic: even (block-row + block-col) parity shows a,
// odd shows b. Used to eyeball translated pairs side by side.
Tensor chessboard_composite(const Tensor& a, const Tensor& b, int block);

// Edge magnitude of an {H,W} image from the raw derivative responses.
Tensor sobel_magnitude(const Tensor& image);

// Pearson correlation of two equally-shaped tensors.
double pearson(const Tensor& a, const Tensor& b);

}  // namespace acmt

#endif
