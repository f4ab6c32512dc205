#pragma once

#include <optional>

#include "mgsim/dynamics.hpp"
#include "mgsim/reduction.hpp"
#include "mgsim/types.hpp"

namespace mgsim {

struct EquilibriumOptions {
    double tolerance = 1e-9;  // relative to max(1, |x|_inf)
    int max_iterations = 100;
    double reference_angle = 0.0;  // pinned delta of the reference converter
    // false: omega_dev multiplies only the delta rows (a frequency offset in the
    // droop law rather than a rotating frame); used to balance setpoints.
    bool co_rotating = true;
};

/// Steady state of the reduced model in the frame rotating at omega_n + omega_dev:
/// rhs(x) = omega_dev * G(x), where G is the rotation generator.
struct EquilibriumResult {
    Vector x_eq;
    double omega_sync = 0.0;  // omega_ref + omega_dev
    double omega_dev = 0.0;
    double residual_norm = 0.0;  // |rhs(x) - omega_dev G(x)|_inf
    int iterations = 0;
};

/// Phasor solve at omega_n with converters as U* sources behind their coupling
/// impedance; every current is KCL-consistent, integrators carry zero PI error,
/// P = P* + xi and Q = Q*.
Vector flat_start(const ReducedModel& model, const Exogenous& exo);

EquilibriumResult find_equilibrium(const ReducedModel& model, const Exogenous& exo, const ControlInput& u,
                                   const std::optional<Vector>& guess = std::nullopt,
                                   const EquilibriumOptions& options = {});

/// Shifts every P*_i by -c/K_p,i, with c chosen so that the equilibrium of the
/// returned setpoints has omega_dev = 0 (a consistent power flow at omega_n).
Exogenous consistent_setpoints(const ReducedModel& model, const Exogenous& exo, const ControlInput& u,
                               const std::optional<Vector>& guess = std::nullopt);

/// rhs(x) - omega_dev * G(x).
Vector equilibrium_residual(const ReducedModel& model, const Vector& x, double omega_dev, const Exogenous& exo,
                            const ControlInput& u);

/// Undo the common rotation so that the reference converter's delta becomes `angle`.
Vector align_rotation(const ReducedModel& model, const Vector& x, double angle = 0.0);

/// Indices of one current-derivative row per bus and axis whose KCL
/// combination is nonsingular; these rows are redundant given KCL.
std::vector<Eigen::Index> redundant_current_rows(const ReducedModel& model);

}  // namespace mgsim
