#pragma once

// Reference solution of the two-compartment ODE by classical RK4, with
// each administration applied as an instantaneous bolus to the central
// compartment.

#include "titepk/pk.hpp"

#include <span>
#include <vector>

namespace titepk::testing {

// C_eff at each of `times` (any order), integrating with step <= `step`.
std::vector<double> rk4_ceff(const Regimen& regimen, const PkParams& params,
                             std::span<const double> times, double step);

// Composite trapezoid of concentration_eff over [0, t] with at most `step`
// hours per panel; panels break at dose times.
double trapezoid_auc(const Regimen& regimen, const PkParams& params, double t, double step);

}  // namespace titepk::testing
