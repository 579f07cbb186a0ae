#include "acmt/registration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "acmt/errors.hpp"
#include "acmt/ops.hpp"

namespace acmt {
namespace {

Tensor half_resolution(const Tensor& img) {
    const int h = img.dim(0) / 2, w = img.dim(1) / 2;
    Tensor out({h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            out.at(i, j) = 0.25 * (img.at(2 * i, 2 * j) + img.at(2 * i, 2 * j + 1) +
                                   img.at(2 * i + 1, 2 * j) + img.at(2 * i + 1, 2 * j + 1));
    return out;
}

// Central-difference spatial gradients with clamped borders.
void image_gradients(const Tensor& img, Tensor& gy, Tensor& gx) {
    const int h = img.dim(0), w = img.dim(1);
    gy = Tensor({h, w});
    gx = Tensor({h, w});
    auto cl = [](int v, int lo, int hi) { return std::min(std::max(v, lo), hi); };
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            gy.at(i, j) = 0.5 * (img.at(cl(i + 1, 0, h - 1), j) - img.at(cl(i - 1, 0, h - 1), j));
            gx.at(i, j) = 0.5 * (img.at(i, cl(j + 1, 0, w - 1)) - img.at(i, cl(j - 1, 0, w - 1)));
        }
}

double smoothness(const DisplacementField& f) {
    const int h = f.height(), w = f.width();
    double acc = 0.0;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                if (i + 1 < h) {
                    double d = f.u.at(c, i + 1, j) - f.u.at(c, i, j);
                    acc += d * d;
                }
                if (j + 1 < w) {
                    double d = f.u.at(c, i, j + 1) - f.u.at(c, i, j);
                    acc += d * d;
                }
            }
    return acc / (2.0 * h * w);
}

// Adjoint of the forward-difference smoothness term: -Laplacian with
// Neumann-style boundaries, scaled to match d(sum of squared diffs)/du.
void smoothness_gradient(const DisplacementField& f, Tensor& grad) {
    const int h = f.height(), w = f.width();
    grad.fill(0.0);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                if (i + 1 < h) {
                    double d = f.u.at(c, i + 1, j) - f.u.at(c, i, j);
                    grad.at(c, i + 1, j) += 2.0 * d;
                    grad.at(c, i, j) -= 2.0 * d;
                }
                if (j + 1 < w) {
                    double d = f.u.at(c, i, j + 1) - f.u.at(c, i, j);
                    grad.at(c, i, j + 1) += 2.0 * d;
                    grad.at(c, i, j) -= 2.0 * d;
                }
            }
}

double data_energy(const Tensor& fixed, const Tensor& warped) {
    double acc = 0.0;
    for (int i = 0; i < fixed.numel(); ++i) {
        double r = warped[i] - fixed[i];
        acc += r * r;
    }
    return acc / fixed.numel();
}

DisplacementField upsample_field(const DisplacementField& f, int h, int w) {
    DisplacementField out(h, w);
    Tensor up = ops::bilinear_resize(f.u, h, w);
    out.u = std::move(up);
    out.u.scale(2.0);  // displacements are in pixels of the finer grid
    return out;
}

}  // namespace

void RegistrationConfig::validate() const {
    if (levels < 1 || levels > 8) throw std::invalid_argument("registration: levels out of range");
    if (iterations < 1) throw std::invalid_argument("registration: iterations must be positive");
    if (lambda_reg < 0.0) throw std::invalid_argument("registration: lambda_reg negative");
    if (step_init <= 0.0) throw std::invalid_argument("registration: step_init must be positive");
    if (tol < 0.0) throw std::invalid_argument("registration: tol negative");
}

double registration_energy(const Tensor& fixed, const Tensor& moving,
                           const DisplacementField& field, double lambda_reg) {
    Tensor warped = warp(moving, field, Interp::Bilinear);
    return data_energy(fixed, warped) + lambda_reg * smoothness(field);
}

RegistrationResult register_images(const Tensor& fixed, const Tensor& moving,
                                   const RegistrationConfig& cfg) {
    cfg.validate();
    if (fixed.ndim() != 2 || !fixed.same_shape(moving))
        throw std::invalid_argument("register_images: need two equal {H,W} images");
    if (!fixed.all_finite() || !moving.all_finite())
        throw NumericError("register_images: non-finite input image");
    const int h0 = fixed.dim(0), w0 = fixed.dim(1);
    int usable_levels = cfg.levels;
    while (usable_levels > 1 &&
           (h0 % (1 << (usable_levels - 1)) != 0 || w0 % (1 << (usable_levels - 1)) != 0 ||
            h0 / (1 << (usable_levels - 1)) < 8 || w0 / (1 << (usable_levels - 1)) < 8))
        --usable_levels;

    std::vector<Tensor> fix_pyr{fixed}, mov_pyr{moving};
    for (int l = 1; l < usable_levels; ++l) {
        fix_pyr.push_back(half_resolution(fix_pyr.back()));
        mov_pyr.push_back(half_resolution(mov_pyr.back()));
    }

    RegistrationResult res;
    res.initial_energy = registration_energy(fixed, moving, DisplacementField(h0, w0), cfg.lambda_reg);

    DisplacementField u(fix_pyr.back().dim(0), fix_pyr.back().dim(1));
    for (int l = usable_levels - 1; l >= 0; --l) {
        const Tensor& fx = fix_pyr[static_cast<std::size_t>(l)];
        const Tensor& mv = mov_pyr[static_cast<std::size_t>(l)];
        const int h = fx.dim(0), w = fx.dim(1);
        Tensor mgy, mgx;
        image_gradients(mv, mgy, mgx);
        DisplacementField mov_grad(h, w);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                mov_grad.u.at(0, i, j) = mgy.at(i, j);
                mov_grad.u.at(1, i, j) = mgx.at(i, j);
            }

        double energy = registration_energy(fx, mv, u, cfg.lambda_reg);
        double step = cfg.step_init;
        res.level_trace.emplace_back();
        res.level_trace.back().push_back(energy);
        Tensor grad({2, h, w});
        Tensor sgrad({2, h, w});
        for (int it = 0; it < cfg.iterations; ++it) {
            Tensor warped = warp(mv, u, Interp::Bilinear);
            // Force: 2 r grad(moving at warped position), plus smoothness pull.
            smoothness_gradient(u, sgrad);
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    double gy, gx;
                    sample_field(mov_grad, i + u.dy(i, j), j + u.dx(i, j), gy, gx);
                    double r = warped.at(i, j) - fx.at(i, j);
                    grad.at(0, i, j) = 2.0 * r * gy + cfg.lambda_reg * sgrad.at(0, i, j);
                    grad.at(1, i, j) = 2.0 * r * gx + cfg.lambda_reg * sgrad.at(1, i, j);
                }

            bool accepted = false;
            for (int back = 0; back < 12; ++back) {
                DisplacementField trial(h, w);
                trial.u = u.u;
                trial.u.add(grad, -step);
                double trial_energy = registration_energy(fx, mv, trial, cfg.lambda_reg);
                if (trial_energy < energy) {
                    double drop = energy - trial_energy;
                    u = std::move(trial);
                    energy = trial_energy;
                    res.level_trace.back().push_back(energy);
                    step = std::min(step * 1.2, 1e4);
                    accepted = true;
                    ++res.iterations_run;
                    if (drop < cfg.tol * std::max(energy, 1e-12)) it = cfg.iterations;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
        res.level_energy.push_back(energy);
        if (l > 0)
            u = upsample_field(u, fix_pyr[static_cast<std::size_t>(l - 1)].dim(0),
                               fix_pyr[static_cast<std::size_t>(l - 1)].dim(1));
    }

    res.final_energy = registration_energy(fixed, moving, u, cfg.lambda_reg);
    res.field = std::move(u);
    return res;
}

}  // namespace acmt
