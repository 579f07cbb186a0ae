#ifndef ACMT_OPS_HPP
#define ACMT_OPS_HPP

#include "acmt/tensor.hpp"

namespace acmt::ops {

// 2D cross-correlation, replicate padding, odd kernels. x {Cin,H,W},
// w {Cout,Cin,kh,kw}, optional bias {Cout}. stride 1 keeps the spatial
// size, stride 2 halves it (rounding up).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr, int stride = 1);

// Gradients for the stride-1 case, matching conv2d's replicate padding.
Tensor conv2d_input_grad(const Tensor& dy, const Tensor& w, const std::vector<int>& x_shape);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& dy, int kh, int kw);

// 2x2 mean pooling; spatial dims must be even.
Tensor avgpool2(const Tensor& x);
Tensor avgpool2_grad(const Tensor& dy, const std::vector<int>& x_shape);

// Nearest-neighbour 2x upsampling.
Tensor upsample2(const Tensor& x);
Tensor upsample2_grad(const Tensor& dy, const std::vector<int>& x_shape);

// Factor-2 box downsample tolerating odd sizes (trailing row/col dropped).
Tensor downsample2_floor(const Tensor& x);

// Bilinear resize of a {H,W} or {C,H,W} tensor to the given spatial size.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);

}  // namespace acmt::ops

#endif
