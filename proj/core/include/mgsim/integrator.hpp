#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "mgsim/dynamics.hpp"
#include "mgsim/reduction.hpp"
#include "mgsim/types.hpp"

namespace mgsim {

enum class Method { implicit_trapezoidal, explicit_rk4_reference };

struct IntegratorConfig {
    Method method = Method::implicit_trapezoidal;
    double rtol = 1e-6;
    double atol = 1e-9;
    double dt_initial = 1e-5;  // fixed step for the RK4 reference
    double dt_min = 1e-12;
    double dt_max = 0.05;
    double horizon = 1.0;
    // Output times in [0, horizon]. Empty: every accepted step (RK4: start and end only).
    std::vector<double> sample_times;
    bool record_algebraics = false;
    // Integrate in the frame rotating at omega_n + frame_omega:
    // xdot = rhs(x) - frame_omega * G(x). An equilibrium with omega_dev = frame_omega is then a fixed point.
    double frame_omega = 0.0;

    void validate() const;
};

/// Piecewise-constant secondary control: inputs[k] holds on [times[k], times[k+1]).
struct ControlSchedule {
    std::vector<double> times;
    std::vector<ControlInput> inputs;

    static ControlSchedule constant(const ControlInput& u);
    const ControlInput& at(double t) const;
    /// Loads `t_s,up_<id>...,uq_<id>...` (times in seconds from the transient start).
    static ControlSchedule load_csv(const std::filesystem::path& path, const GridTopology& topology);
};

/// Any autonomous ODE driven by a piecewise-constant control.
struct OdeSystem {
    std::function<Vector(const Vector& x, const ControlInput& u)> rhs;
    // Per-state magnitude used to size finite-difference steps; optional.
    std::function<Vector(const Vector& x)> scale;
};

struct OdeSolution {
    std::vector<double> times;
    std::vector<Vector> states;
    std::size_t accepted_steps = 0, rejected_steps = 0, rhs_evaluations = 0, jacobian_updates = 0;
    std::vector<double> step_times;  // end of every accepted step (implicit method)
};

/// Called with (t, x) after every accepted step.
using StepObserver = std::function<void(double, const Vector&)>;

OdeSolution integrate_ode(const OdeSystem& system, const Vector& x0, const ControlSchedule& u,
                          const IntegratorConfig& cfg, const StepObserver& observer = {});

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<BusVoltages> bus_voltages;
    std::vector<std::vector<ConverterAlgebraics>> algebraics;  // empty unless requested
    double frame_omega = 0.0;

    // step statistics
    std::size_t accepted_steps = 0, rejected_steps = 0, rhs_evaluations = 0, jacobian_updates = 0;
    std::vector<double> step_times;    // every accepted step end (implicit method)
    std::vector<double> step_kcl_max;  // max |KCL residual| at each accepted step
};

Trajectory integrate(const ReducedModel& model, const Vector& x0, const Exogenous& exo, const ControlSchedule& u,
                     const IntegratorConfig& cfg);

Trajectory integrate(const ReducedModel& model, const Vector& x0, const Exogenous& exo, const ControlInput& u,
                     const IntegratorConfig& cfg);

struct StepResponse {
    Trajectory trajectory;
    Vector x_before;       // equilibrium at exo_before
    double omega_dev_before = 0.0;
};

/// Equilibrium of (model_before, exo_before) as initial condition; (model_after,
/// exo_after) act from t = 0. Integrated in the frame co-rotating with the initial
/// equilibrium unless cfg.frame_omega is set explicitly via `use_initial_frame = false`.
StepResponse simulate_step_response(const ReducedModel& model_before, const ReducedModel& model_after,
                                    const Exogenous& exo_before, const Exogenous& exo_after, const ControlInput& u,
                                    IntegratorConfig cfg, bool use_initial_frame = true);

/// Header t,<state labels>,<vBd_bus>...,<vBq_bus>..., values with 17 significant digits.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, const ReducedModel& model);

/// n+1 evenly spaced times on [0, horizon].
std::vector<double> uniform_samples(double horizon, std::size_t n);

}  // namespace mgsim
