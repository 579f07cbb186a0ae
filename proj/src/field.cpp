#include "acmt/field.hpp"

#include <cmath>
#include <stdexcept>

namespace acmt {

namespace {
inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
inline double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

double sample_bilinear(const Tensor& img, double y, double x) {
    const int h = img.dim(0), w = img.dim(1);
    y = clampd(y, 0.0, h - 1.0);
    x = clampd(x, 0.0, w - 1.0);
    const int y0 = clampi(static_cast<int>(std::floor(y)), 0, h - 1);
    const int x0 = clampi(static_cast<int>(std::floor(x)), 0, w - 1);
    const int y1 = clampi(y0 + 1, 0, h - 1);
    const int x1 = clampi(x0 + 1, 0, w - 1);
    const double wy = y - y0, wx = x - x0;
    return (1 - wy) * ((1 - wx) * img.at(y0, x0) + wx * img.at(y0, x1)) +
           wy * ((1 - wx) * img.at(y1, x0) + wx * img.at(y1, x1));
}
}  // namespace

DisplacementField::DisplacementField(Tensor t) : u(std::move(t)) {
    if (u.ndim() != 3 || u.dim(0) != 2)
        throw std::invalid_argument("DisplacementField: expected {2,H,W}");
}

Tensor warp(const Tensor& image, const DisplacementField& field, Interp interp) {
    if (image.ndim() != 2) throw std::invalid_argument("warp: expected {H,W} image");
    if (image.dim(0) != field.height() || image.dim(1) != field.width())
        throw std::invalid_argument("warp: image/field shape mismatch");
    const int h = image.dim(0), w = image.dim(1);
    Tensor out({h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double sy = i + field.dy(i, j);
            const double sx = j + field.dx(i, j);
            if (interp == Interp::Nearest) {
                const int yy = clampi(static_cast<int>(std::lround(sy)), 0, h - 1);
                const int xx = clampi(static_cast<int>(std::lround(sx)), 0, w - 1);
                out.at(i, j) = image.at(yy, xx);
            } else {
                out.at(i, j) = sample_bilinear(image, sy, sx);
            }
        }
    return out;
}

void sample_field(const DisplacementField& field, double y, double x, double& dy, double& dx) {
    const int h = field.height(), w = field.width();
    const double cy = clampd(y, 0.0, h - 1.0);
    const double cx = clampd(x, 0.0, w - 1.0);
    const int y0 = clampi(static_cast<int>(std::floor(cy)), 0, h - 1);
    const int x0 = clampi(static_cast<int>(std::floor(cx)), 0, w - 1);
    const int y1 = clampi(y0 + 1, 0, h - 1);
    const int x1 = clampi(x0 + 1, 0, w - 1);
    const double wy = cy - y0, wx = cx - x0;
    auto lerp = [&](int c) {
        return (1 - wy) * ((1 - wx) * field.u.at(c, y0, x0) + wx * field.u.at(c, y0, x1)) +
               wy * ((1 - wx) * field.u.at(c, y1, x0) + wx * field.u.at(c, y1, x1));
    };
    dy = lerp(0);
    dx = lerp(1);
}

DisplacementField invert_field(const DisplacementField& field, int iterations) {
    const int h = field.height(), w = field.width();
    DisplacementField inv(h, w);
    for (int it = 0; it < iterations; ++it) {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                // v_{k+1}(q) = -u(q + v_k(q))
                double dy, dx;
                sample_field(field, i + inv.dy(i, j), j + inv.dx(i, j), dy, dx);
                inv.dy(i, j) = -dy;
                inv.dx(i, j) = -dx;
            }
    }
    return inv;
}

}  // namespace acmt
