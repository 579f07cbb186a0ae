#ifndef ACMT_REGISTRATION_HPP
#define ACMT_REGISTRATION_HPP

#include <vector>

#include "acmt/field.hpp"
#include "acmt/tensor.hpp"

namespace acmt {

struct RegistrationConfig {
    int levels = 3;           // resolution pyramid depth (>= 1)
    int iterations = 120;     // gradient steps per level
    double lambda_reg = 0.1;  // first-order smoothness weight
    double step_init = 2.0;   // initial step length, adapted by line search
    double tol = 1e-9;        // stop when the relative decrease drops below

    void validate() const;
};

struct RegistrationResult {
    DisplacementField field;       // maps fixed-frame points into the moving frame
    double initial_energy = 0.0;
    double final_energy = 0.0;
    std::vector<double> level_energy;  // energy after each pyramid level
    // Energy after every accepted step, one trace per level, coarsest first.
    std::vector<std::vector<double>> level_trace;
    int iterations_run = 0;
};

// Deformable registration by gradient descent on mean squared intensity
// difference plus forward-difference smoothness. The moving image is
// backward-warped: a good field satisfies moving(p + u(p)) ~= fixed(p).
// Monotone by construction (backtracking line search).
RegistrationResult register_images(const Tensor& fixed, const Tensor& moving,
                                   const RegistrationConfig& cfg = {});

// Registration energy of a given field; exposed for tests.
double registration_energy(const Tensor& fixed, const Tensor& moving,
                           const DisplacementField& field, double lambda_reg);

}  // namespace acmt

#endif
