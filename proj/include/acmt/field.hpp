#ifndef ACMT_FIELD_HPP
#define ACMT_FIELD_HPP

#include "acmt/tensor.hpp"

namespace acmt {

// Per-pixel displacement field, channel order [dy, dx] in pixels. Warping
// is backward: out(p) = in(p + u(p)), with border clamping.
struct DisplacementField {
    Tensor u;  // {2, H, W}

    DisplacementField() = default;
    explicit DisplacementField(int h, int w) : u(Tensor({2, h, w})) {}
    explicit DisplacementField(Tensor t);

    int height() const { return u.dim(1); }
    int width() const { return u.dim(2); }
    double dy(int i, int j) const { return u.at(0, i, j); }
    double dx(int i, int j) const { return u.at(1, i, j); }
    double& dy(int i, int j) { return u.at(0, i, j); }
    double& dx(int i, int j) { return u.at(1, i, j); }
};

enum class Interp { Bilinear, Nearest };

Tensor warp(const Tensor& image, const DisplacementField& field, Interp interp);

// Approximate inverse displacement v with u(p) + v(p + u(p)) ~= 0, via
// fixed-point iteration; adequate for the small smooth fields used here.
DisplacementField invert_field(const DisplacementField& field, int iterations = 20);

// Sample a field bilinearly at a fractional position (border-clamped).
void sample_field(const DisplacementField& field, double y, double x, double& dy, double& dx);

}  // namespace acmt

#endif
