#include "acmt/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>

namespace acmt::ops {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void check_conv_args(const Tensor& x, const Tensor& w, const Tensor* bias, int stride) {
    if (x.ndim() != 3 || w.ndim() != 4) throw std::invalid_argument("conv2d: x must be {C,H,W}, w {Co,Ci,kh,kw}");
    if (w.dim(1) != x.dim(0)) throw std::invalid_argument("conv2d: channel mismatch");
    if (w.dim(2) % 2 == 0 || w.dim(3) % 2 == 0) throw std::invalid_argument("conv2d: kernels must be odd");
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
    if (bias && bias->numel() != w.dim(0)) throw std::invalid_argument("conv2d: bias size mismatch");
    if (x.dim(1) < 1 || x.dim(2) < 1) throw std::invalid_argument("conv2d: empty spatial extent");
}

// Column j of the result holds the receptive field of output pixel j.
// Out-of-range taps clamp to the border (replicate padding).
void im2col_replicate(const Tensor& x, int kh, int kw, int stride, int oh, int ow,
                      std::vector<double>& out) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int ph = kh / 2, pw = kw / 2;
    out.resize(static_cast<std::size_t>(c * kh * kw) * static_cast<std::size_t>(oh * ow));
    double* o = out.data();
    for (int ch = 0; ch < c; ++ch) {
        const double* xp = x.data() + static_cast<std::size_t>(ch) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                for (int oy = 0; oy < oh; ++oy) {
                    const int sy = clampi(oy * stride + ky - ph, 0, h - 1);
                    const double* row = xp + static_cast<std::size_t>(sy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int sx = clampi(ox * stride + kx - pw, 0, w - 1);
                        *o++ = row[sx];
                    }
                }
            }
        }
    }
}

thread_local std::vector<double> g_col_a;
thread_local std::vector<double> g_col_b;

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride) {
    check_conv_args(x, w, bias, stride);
    const int co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int h = x.dim(1), ww = x.dim(2);
    const int oh = (h - 1) / stride + 1, ow = (ww - 1) / stride + 1;
    const int k = ci * kh * kw, npix = oh * ow;

    im2col_replicate(x, kh, kw, stride, oh, ow, g_col_a);
    Tensor y({co, oh, ow});
    CMapRM wm(w.data(), co, k);
    CMapRM cm(g_col_a.data(), k, npix);
    MapRM ym(y.data(), co, npix);
    ym.noalias() = wm * cm;
    if (bias) {
        for (int c = 0; c < co; ++c) {
            double b = (*bias)[c];
            double* row = y.data() + static_cast<std::size_t>(c) * npix;
            for (int i = 0; i < npix; ++i) row[i] += b;
        }
    }
    return y;
}

Tensor conv2d_input_grad(const Tensor& dy, const Tensor& w, const std::vector<int>& x_shape) {
    const int co = w.dim(0), ci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int h = x_shape[1], ww = x_shape[2];
    const int npix = h * ww, k = ci * kh * kw;
    const int ph = kh / 2, pw = kw / 2;

    // dcol = w^T * dy, then scatter-add through the same clamped indexing
    // im2col used; border clamping folds pad gradients onto edge pixels.
    g_col_b.resize(static_cast<std::size_t>(k) * npix);
    CMapRM wm(w.data(), co, k);
    CMapRM dym(dy.data(), co, npix);
    MapRM dcol(g_col_b.data(), k, npix);
    dcol.noalias() = wm.transpose() * dym;

    Tensor dx(x_shape);
    const double* o = g_col_b.data();
    for (int ch = 0; ch < ci; ++ch) {
        double* xp = dx.data() + static_cast<std::size_t>(ch) * h * ww;
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                for (int oy = 0; oy < h; ++oy) {
                    const int sy = clampi(oy + ky - ph, 0, h - 1);
                    double* row = xp + static_cast<std::size_t>(sy) * ww;
                    for (int ox = 0; ox < ww; ++ox) {
                        row[clampi(ox + kx - pw, 0, ww - 1)] += *o++;
                    }
                }
            }
        }
    }
    return dx;
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& dy, int kh, int kw) {
    const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int co = dy.dim(0);
    const int npix = h * w, k = ci * kh * kw;
    im2col_replicate(x, kh, kw, 1, h, w, g_col_a);
    Tensor dw({co, ci, kh, kw});
    CMapRM dym(dy.data(), co, npix);
    CMapRM cm(g_col_a.data(), k, npix);
    MapRM dwm(dw.data(), co, k);
    dwm.noalias() = dym * cm.transpose();
    return dw;
}

Tensor avgpool2(const Tensor& x) {
    if (x.ndim() != 3) throw std::invalid_argument("avgpool2: expected {C,H,W}");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % 2 || w % 2) throw std::invalid_argument("avgpool2: spatial dims must be even");
    Tensor y({c, h / 2, w / 2});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h / 2; ++i)
            for (int j = 0; j < w / 2; ++j)
                y.at(ch, i, j) = 0.25 * (x.at(ch, 2 * i, 2 * j) + x.at(ch, 2 * i, 2 * j + 1) +
                                         x.at(ch, 2 * i + 1, 2 * j) + x.at(ch, 2 * i + 1, 2 * j + 1));
    return y;
}

Tensor avgpool2_grad(const Tensor& dy, const std::vector<int>& x_shape) {
    Tensor dx(x_shape);
    const int c = x_shape[0], h = x_shape[1], w = x_shape[2];
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h / 2; ++i)
            for (int j = 0; j < w / 2; ++j) {
                const double g = 0.25 * dy.at(ch, i, j);
                dx.at(ch, 2 * i, 2 * j) += g;
                dx.at(ch, 2 * i, 2 * j + 1) += g;
                dx.at(ch, 2 * i + 1, 2 * j) += g;
                dx.at(ch, 2 * i + 1, 2 * j + 1) += g;
            }
    return dx;
}

Tensor upsample2(const Tensor& x) {
    if (x.ndim() != 3) throw std::invalid_argument("upsample2: expected {C,H,W}");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor y({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j) y.at(ch, i, j) = x.at(ch, i / 2, j / 2);
    return y;
}

Tensor upsample2_grad(const Tensor& dy, const std::vector<int>& x_shape) {
    Tensor dx(x_shape);
    const int c = x_shape[0], h = x_shape[1], w = x_shape[2];
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j) dx.at(ch, i / 2, j / 2) += dy.at(ch, i, j);
    return dx;
}

Tensor downsample2_floor(const Tensor& x) {
    if (x.ndim() != 2 && x.ndim() != 3) throw std::invalid_argument("downsample2_floor: expected 2D or 3D");
    const bool flat = x.ndim() == 2;
    const Tensor& v = x;
    const int c = flat ? 1 : v.dim(0);
    const int h = flat ? v.dim(0) : v.dim(1);
    const int w = flat ? v.dim(1) : v.dim(2);
    const int oh = h / 2, ow = w / 2;
    if (oh < 1 || ow < 1) throw std::invalid_argument("downsample2_floor: too small");
    Tensor y(flat ? std::vector<int>{oh, ow} : std::vector<int>{c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                auto src = [&](int yy, int xx) {
                    return flat ? v.at(yy, xx) : v.at(ch, yy, xx);
                };
                const double m = 0.25 * (src(2 * i, 2 * j) + src(2 * i, 2 * j + 1) +
                                         src(2 * i + 1, 2 * j) + src(2 * i + 1, 2 * j + 1));
                if (flat)
                    y.at(i, j) = m;
                else
                    y.at(ch, i, j) = m;
            }
    return y;
}

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    if (x.ndim() != 2 && x.ndim() != 3) throw std::invalid_argument("bilinear_resize: expected 2D or 3D");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: bad target size");
    const bool flat = x.ndim() == 2;
    const int c = flat ? 1 : x.dim(0);
    const int h = flat ? x.dim(0) : x.dim(1);
    const int w = flat ? x.dim(1) : x.dim(2);
    Tensor y(flat ? std::vector<int>{out_h, out_w} : std::vector<int>{c, out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < out_h; ++i)
            for (int j = 0; j < out_w; ++j) {
                // pixel-centre mapping
                double fy = (i + 0.5) * sy - 0.5;
                double fx = (j + 0.5) * sx - 0.5;
                int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
                const double wy = fy - y0, wx = fx - x0;
                auto src = [&](int yy, int xx) {
                    yy = clampi(yy, 0, h - 1);
                    xx = clampi(xx, 0, w - 1);
                    return flat ? x.at(yy, xx) : x.at(ch, yy, xx);
                };
                const double v = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x0 + 1)) +
                                 wy * ((1 - wx) * src(y0 + 1, x0) + wx * src(y0 + 1, x0 + 1));
                if (flat)
                    y.at(i, j) = v;
                else
                    y.at(ch, i, j) = v;
            }
    return y;
}

}  // namespace acmt::ops
