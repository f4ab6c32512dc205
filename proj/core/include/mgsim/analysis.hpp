#pragma once

#include <complex>
#include <filesystem>
#include <string_view>
#include <vector>

#include "mgsim/dynamics.hpp"
#include "mgsim/integrator.hpp"
#include "mgsim/reduction.hpp"
#include "mgsim/types.hpp"

namespace mgsim {

// kcl_invariant: the exact zeros contributed by the KCL residuals, which the
// reduced ODE conserves; they carry no dynamics and are reported separately.
enum class ModeKind { dynamic, zero_mode, kcl_invariant };

std::string_view to_string(ModeKind k);

struct SmallSignalResult {
    Matrix jacobian;  // d(rhs - omega_dev G)/dx at x_eq
    std::vector<std::complex<double>> eigenvalues;  // real part descending, size n
    std::vector<ModeKind> kinds;
    std::size_t zero_mode_index = 0;
    double spectral_abscissa_excl = 0.0;  // max Re over dynamic modes except the zero mode
    double spectral_radius = 0.0;         // over dynamic modes
    double zero_threshold = 0.0;          // 1e-6 * spectral_radius
    double zero_mode_angle = 0.0;         // rad, zero-mode eigenvector vs rotation generator
    std::size_t n_dynamic = 0;
    double omega_dev = 0.0;
};

/// Central differences, h_i = 1e-7 * max(|x_i|, block magnitude of i, 1).
Matrix jacobian_fd(const ReducedModel& model, const Vector& x, const Exogenous& exo, const ControlInput& u,
                   double omega_dev = 0.0);

/// Orthonormal basis of {x : KCL(x) = 0}; identity on every non-current state.
Matrix kcl_manifold_basis(const ReducedModel& model);

/// Throws NumericalError if x_eq is not an equilibrium (residual > 1e-8 scale)
/// or the zero mode cannot be identified unambiguously.
SmallSignalResult linearize(const ReducedModel& model, const Vector& x_eq, const Exogenous& exo, const ControlInput& u,
                            double omega_dev = 0.0);

struct DiagnosticSample {
    double t = 0.0;
    double kcl_residual_d = 0.0, kcl_residual_q = 0.0;  // max |residual| over buses, A
    double total_gen_p = 0.0;                           // sum v_o . i_o
    double total_load_p = 0.0;                          // sum r_L |i_L|^2
    double total_loss_p = 0.0;                          // branch + coupling resistor losses
    double branch_loss_p = 0.0, coupling_loss_p = 0.0;
};

DiagnosticSample state_diagnostics(const ReducedModel& model, const Vector& x, double t = 0.0);
std::vector<DiagnosticSample> trajectory_diagnostics(const Trajectory& traj, const ReducedModel& model);

/// Frequency of each converter from the droop law.
Vector converter_frequencies(const ReducedModel& model, const Vector& x, const Exogenous& exo, const ControlInput& u);

/// re,im,kind
void write_eigen_csv(const std::filesystem::path& path, const SmallSignalResult& r);
void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<DiagnosticSample>& d);

}  // namespace mgsim
