#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Cholesky>

#include "mgsim/dynamics.hpp"
#include "mgsim/grid_model.hpp"
#include "mgsim/state_layout.hpp"
#include "mgsim/types.hpp"

namespace mgsim {

/// Differentiated KCL written as M1 * x2 + M2 * z = 0, z = [v_Bd; v_Bq].
struct ConstraintMatrices {
    Matrix M1;  // 2 n_bus x dim(x2)
    Matrix M2;  // 2 n_bus x 2 n_bus, block diagonal with identical d/q blocks
};

ConstraintMatrices assemble_constraint(const GridTopology& topology, const IncidenceMatrices& incidence,
                                       const std::vector<LoadParams>& loads);

/// f(x) and g(x) of xdot = f(x) + K xi + g(x) u. Columns of g: u_p for every
/// converter, then u_q for every converter.
struct AffineTerms {
    Vector f;
    Matrix g;
};

/// The state-space model for one set of load parameters. Immutable after
/// assembly; all evaluators are const and thread-safe.
class ReducedModel {
public:
    ReducedModel(std::shared_ptr<const GridTopology> topology, std::vector<LoadParams> loads);
    ReducedModel(const GridTopology& topology, std::vector<LoadParams> loads);

    const GridTopology& topology() const { return *topology_; }
    std::shared_ptr<const GridTopology> topology_ptr() const { return topology_; }
    const StateLayout& layout() const { return layout_; }
    const IncidenceMatrices& incidence() const { return incidence_; }
    const std::vector<LoadParams>& load_params() const { return loads_; }
    double omega_n() const { return omega_n_; }
    std::size_t size() const { return layout_.size(); }

    const Matrix& M1() const { return constraint_.M1; }
    const Matrix& M2() const { return constraint_.M2; }
    const Matrix& M2_inv_M1() const { return m2_inv_m1_; }
    const Matrix& K() const { return K_; }

    /// z = -M2^{-1} M1 x2, using the x2 slice of the full state.
    BusVoltages solve_bus_voltages(const Vector& x) const;
    BusVoltages solve_bus_voltages_x2(const Vector& x2) const;

    /// Reduced ODE right-hand side.
    Vector ode_rhs(const Vector& x, const Exogenous& exo, const ControlInput& u) const;
    void ode_rhs(const Vector& x, const Exogenous& exo, const ControlInput& u, Vector& dx) const;

    AffineTerms affine_decompose(const Vector& x, const Exogenous& exo) const;

    /// Rows: KCL residual per bus, d axis then q axis. Linear in the state.
    const Matrix& kcl_matrix() const { return kcl_; }
    Vector kcl_residual(const Vector& x) const { return kcl_ * x; }

    /// Bus index (column of the incidence matrices) of each converter / load / branch end.
    const std::vector<Eigen::Index>& converter_bus() const { return conv_bus_; }
    const std::vector<Eigen::Index>& load_bus() const { return load_bus_; }

    /// Writes M1.csv, M2.csv and K.csv (row-major, header row of column labels).
    void write_debug_csv(const std::filesystem::path& dir) const;

private:
    void check_inputs(const Vector& x, const Exogenous& exo, const ControlInput& u) const;

    std::shared_ptr<const GridTopology> topology_;
    std::vector<LoadParams> loads_;
    StateLayout layout_;
    IncidenceMatrices incidence_;
    ConstraintMatrices constraint_;
    Eigen::LLT<Matrix> neg_m2_block_;  // Cholesky of -M2 (one axis block)
    Matrix m2_inv_m1_;
    Matrix K_;
    Matrix kcl_;
    double omega_n_ = 0.0;
    std::vector<Eigen::Index> conv_bus_, load_bus_, br_from_, br_to_;
};

}  // namespace mgsim
