#ifndef ACMT_MASK_OPS_HPP
#define ACMT_MASK_OPS_HPP

#include <utility>
#include <vector>

#include "acmt/tensor.hpp"

namespace acmt {

// Binary masks are {H,W} tensors with values in {0,1}. The boundary of a
// mask is the mask minus its 4-neighbourhood erosion; every mask-consuming
// module shares this definition.

bool is_binary(const Tensor& mask);

Tensor erode4(const Tensor& mask);

// mask XOR erode4(mask): the 1-pixel inner boundary band.
Tensor boundary_band(const Tensor& mask);

// Number of 4-connected foreground components.
int count_components4(const Tensor& mask);

// Foreground centroid (row, col); mask must be nonempty.
std::pair<double, double> centroid(const Tensor& mask);

// Coordinates (row, col) of boundary-band pixels.
std::vector<std::pair<int, int>> boundary_pixels(const Tensor& mask);

}  // namespace acmt

#endif
