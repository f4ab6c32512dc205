#include "mgsim/reduction.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "mgsim/csv.hpp"
#include "mgsim/errors.hpp"

namespace mgsim {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

// Buses whose connected component carries no converter or load: these leave
// the voltage coefficient matrix singular.
std::string isolated_bus_report(const GridTopology& t) {
    std::map<int, int> parent;
    for (int b : t.bus_ids) parent[b] = b;
    auto find = [&](int b) {
        while (parent[b] != b) b = parent[b] = parent[parent[b]];
        return b;
    };
    for (const auto& br : t.branches) parent[find(br.from_bus)] = find(br.to_bus);
    std::set<int> anchored;
    for (const auto& c : t.converters) anchored.insert(find(c.bus));
    for (const auto& l : t.loads) anchored.insert(find(l.bus));
    std::ostringstream os;
    for (int b : t.bus_ids)
        if (!anchored.count(find(b))) os << ' ' << b;
    return os.str();
}

}  // namespace

ConstraintMatrices assemble_constraint(const GridTopology& t, const IncidenceMatrices& inc,
                                       const std::vector<LoadParams>& loads) {
    const StateLayout layout(t);
    const Idx nb = ix(t.n_bus());
    const Idx x1 = ix(layout.x1_size());
    const double wn = network_omega(t);

    ConstraintMatrices cm;
    cm.M1 = Matrix::Zero(2 * nb, ix(layout.x2_size()));
    auto col = [&](std::size_t global) { return ix(global) - x1; };

    using S = ConverterSymbol;
    for (std::size_t i = 0; i < t.n_converters(); ++i) {
        const auto& p = t.converters[i].params;
        const Idx b = ix(t.bus_index(t.converters[i].bus));
        // d/dt of +i_od at its bus, without the bus-voltage term
        cm.M1(b, col(layout.converter(S::i_od, i))) += -p.r_c / p.L_c;
        cm.M1(b, col(layout.converter(S::i_oq, i))) += wn;
        cm.M1(b, col(layout.converter(S::v_od, i))) += 1.0 / p.L_c;
        cm.M1(nb + b, col(layout.converter(S::i_oq, i))) += -p.r_c / p.L_c;
        cm.M1(nb + b, col(layout.converter(S::i_od, i))) += -wn;
        cm.M1(nb + b, col(layout.converter(S::v_oq, i))) += 1.0 / p.L_c;
    }
    for (std::size_t l = 0; l < t.n_loads(); ++l) {
        const auto& p = loads[l];
        const Idx b = ix(t.bus_index(t.loads[l].bus));
        cm.M1(b, col(layout.load_d(l))) -= -p.r_L / p.L_L;
        cm.M1(b, col(layout.load_q(l))) -= wn;
        cm.M1(nb + b, col(layout.load_q(l))) -= -p.r_L / p.L_L;
        cm.M1(nb + b, col(layout.load_d(l))) -= -wn;
    }
    for (std::size_t k = 0; k < t.n_branches(); ++k) {
        const auto& p = t.branches[k].params;
        for (Idx b = 0; b < nb; ++b) {
            const double e = inc.E_B(ix(k), b);
            if (e == 0.0) continue;
            cm.M1(b, col(layout.branch_d(k))) -= e * (-p.r_B / p.L_B);
            cm.M1(b, col(layout.branch_q(k))) -= e * wn;
            cm.M1(nb + b, col(layout.branch_q(k))) -= e * (-p.r_B / p.L_B);
            cm.M1(nb + b, col(layout.branch_d(k))) -= e * (-wn);
        }
    }

    Vector w_c(ix(t.n_converters())), w_l(ix(t.n_loads())), w_b(ix(t.n_branches()));
    for (std::size_t i = 0; i < t.n_converters(); ++i) w_c[ix(i)] = 1.0 / t.converters[i].params.L_c;
    for (std::size_t l = 0; l < t.n_loads(); ++l) w_l[ix(l)] = 1.0 / loads[l].L_L;
    for (std::size_t k = 0; k < t.n_branches(); ++k) w_b[ix(k)] = 1.0 / t.branches[k].params.L_B;
    const Matrix block = -(inc.E_C.transpose() * w_c.asDiagonal() * inc.E_C +
                           inc.E_L.transpose() * w_l.asDiagonal() * inc.E_L +
                           inc.E_B.transpose() * w_b.asDiagonal() * inc.E_B);
    // Symmetrise explicitly so that M2 == M2^T holds bit for bit.
    const Matrix sym = 0.5 * (block + block.transpose());
    cm.M2 = Matrix::Zero(2 * nb, 2 * nb);
    cm.M2.topLeftCorner(nb, nb) = sym;
    cm.M2.bottomRightCorner(nb, nb) = sym;
    return cm;
}

ReducedModel::ReducedModel(const GridTopology& topology, std::vector<LoadParams> loads)
    : ReducedModel(std::make_shared<const GridTopology>(topology), std::move(loads)) {}

ReducedModel::ReducedModel(std::shared_ptr<const GridTopology> topology, std::vector<LoadParams> loads)
    : topology_(std::move(topology)), loads_(std::move(loads)) {
    const auto& t = *topology_;
    if (loads_.size() != t.n_loads())
        throw InputError("expected " + std::to_string(t.n_loads()) + " load parameter sets, got " +
                         std::to_string(loads_.size()));
    for (std::size_t l = 0; l < loads_.size(); ++l)
        if (!(loads_[l].r_L > 0.0) || !(loads_[l].L_L > 0.0) || !std::isfinite(loads_[l].r_L) ||
            !std::isfinite(loads_[l].L_L))
            throw ValidationError("load '" + t.loads[l].id + "': r_L and L_L must be positive and finite");

    layout_ = StateLayout(t);
    incidence_ = build_incidence(t);
    omega_n_ = network_omega(t);
    constraint_ = assemble_constraint(t, incidence_, loads_);

    const Idx nb = ix(t.n_bus());
    neg_m2_block_.compute(-constraint_.M2.topLeftCorner(nb, nb));
    if (neg_m2_block_.info() != Eigen::Success) {
        const auto report = isolated_bus_report(t);
        throw NumericalError("bus voltage matrix M2 is singular; buses without converter, load or connection:" +
                             (report.empty() ? std::string(" (none found; ill-conditioned)") : report));
    }
    m2_inv_m1_.resize(2 * nb, constraint_.M1.cols());
    // M2^{-1} = -(-M2)^{-1}, applied per axis block
    m2_inv_m1_.topRows(nb) = -neg_m2_block_.solve(constraint_.M1.topRows(nb));
    m2_inv_m1_.bottomRows(nb) = -neg_m2_block_.solve(constraint_.M1.bottomRows(nb));

    const Idx n = ix(layout_.size());
    const Idx nC = ix(t.n_converters());
    K_ = Matrix::Zero(n, nC);
    for (std::size_t i = 0; i < t.n_converters(); ++i)
        K_(ix(layout_.converter(ConverterSymbol::delta, i)), ix(i)) = t.converters[i].params.K_p;

    conv_bus_.resize(t.n_converters());
    load_bus_.resize(t.n_loads());
    br_from_.resize(t.n_branches());
    br_to_.resize(t.n_branches());
    for (std::size_t i = 0; i < t.n_converters(); ++i) conv_bus_[i] = ix(t.bus_index(t.converters[i].bus));
    for (std::size_t l = 0; l < t.n_loads(); ++l) load_bus_[l] = ix(t.bus_index(t.loads[l].bus));
    for (std::size_t k = 0; k < t.n_branches(); ++k) {
        br_from_[k] = ix(t.bus_index(t.branches[k].from_bus));
        br_to_[k] = ix(t.bus_index(t.branches[k].to_bus));
    }

    kcl_ = Matrix::Zero(2 * nb, n);
    for (std::size_t i = 0; i < t.n_converters(); ++i) {
        kcl_(conv_bus_[i], ix(layout_.converter(ConverterSymbol::i_od, i))) += 1.0;
        kcl_(nb + conv_bus_[i], ix(layout_.converter(ConverterSymbol::i_oq, i))) += 1.0;
    }
    for (std::size_t l = 0; l < t.n_loads(); ++l) {
        kcl_(load_bus_[l], ix(layout_.load_d(l))) -= 1.0;
        kcl_(nb + load_bus_[l], ix(layout_.load_q(l))) -= 1.0;
    }
    for (std::size_t k = 0; k < t.n_branches(); ++k) {
        kcl_(br_from_[k], ix(layout_.branch_d(k))) -= 1.0;
        kcl_(br_to_[k], ix(layout_.branch_d(k))) += 1.0;
        kcl_(nb + br_from_[k], ix(layout_.branch_q(k))) -= 1.0;
        kcl_(nb + br_to_[k], ix(layout_.branch_q(k))) += 1.0;
    }
}

BusVoltages ReducedModel::solve_bus_voltages_x2(const Vector& x2) const {
    const Idx nb = ix(topology_->n_bus());
    const Vector z = -(m2_inv_m1_ * x2);
    return {z.head(nb), z.tail(nb)};
}

BusVoltages ReducedModel::solve_bus_voltages(const Vector& x) const {
    return solve_bus_voltages_x2(x.tail(ix(layout_.x2_size())));
}

void ReducedModel::check_inputs(const Vector& x, const Exogenous& exo, const ControlInput& u) const {
    const Idx nC = ix(topology_->n_converters());
    if (x.size() != ix(layout_.size()))
        throw InputError("state has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(layout_.size()));
    if (exo.xi.size() != nC || exo.P_star.size() != nC || exo.Q_star.size() != nC || exo.U_star.size() != nC ||
        u.u_p.size() != nC || u.u_q.size() != nC)
        throw InputError("exogenous/control vectors must have one entry per converter");
    if (!x.allFinite()) {
        const auto labels = layout_.labels(*topology_);
        for (Idx j = 0; j < x.size(); ++j)
            if (!std::isfinite(x[j])) throw NumericalError("non-finite state " + labels[static_cast<std::size_t>(j)]);
    }
    if (!(exo.xi.allFinite() && exo.P_star.allFinite() && exo.Q_star.allFinite() && exo.U_star.allFinite() &&
          u.u_p.allFinite() && u.u_q.allFinite() && std::isfinite(exo.omega_ref))) {
        for (std::size_t i = 0; i < topology_->n_converters(); ++i) {
            const auto sp = setpoint_of(exo, u, i);
            for (double v : {sp.P_star, sp.Q_star, sp.U_star, sp.xi, sp.u_p, sp.u_q, sp.omega_ref})
                if (!std::isfinite(v))
                    throw NumericalError("non-finite exogenous input at converter " + topology_->converters[i].id);
        }
    }
}

Vector ReducedModel::ode_rhs(const Vector& x, const Exogenous& exo, const ControlInput& u) const {
    Vector dx(x.size());
    ode_rhs(x, exo, u, dx);
    return dx;
}

void ReducedModel::ode_rhs(const Vector& x, const Exogenous& exo, const ControlInput& u, Vector& dx) const {
    check_inputs(x, exo, u);
    const auto& t = *topology_;
    const BusVoltages z = solve_bus_voltages(x);
    dx.resize(x.size());
    for (std::size_t i = 0; i < t.n_converters(); ++i) {
        const auto s = converter_state(layout_, x, i);
        const auto d = converter_derivative(s, z.v_Bd[conv_bus_[i]], z.v_Bq[conv_bus_[i]], t.converters[i].params,
                                            setpoint_of(exo, u, i));
        store_converter_state(layout_, i, d, dx);
    }
    for (std::size_t l = 0; l < t.n_loads(); ++l) {
        const Idx id = ix(layout_.load_d(l)), iq = ix(layout_.load_q(l));
        const auto d = load_derivative({x[id], x[iq]}, z.v_Bd[load_bus_[l]], z.v_Bq[load_bus_[l]], loads_[l], omega_n_);
        dx[id] = d.i_Ld;
        dx[iq] = d.i_Lq;
    }
    for (std::size_t k = 0; k < t.n_branches(); ++k) {
        const Idx id = ix(layout_.branch_d(k)), iq = ix(layout_.branch_q(k));
        const auto d = branch_derivative({x[id], x[iq]}, z.v_Bd[br_from_[k]] - z.v_Bd[br_to_[k]],
                                         z.v_Bq[br_from_[k]] - z.v_Bq[br_to_[k]], t.branches[k].params, omega_n_);
        dx[id] = d.i_Bd;
        dx[iq] = d.i_Bq;
    }
}

AffineTerms ReducedModel::affine_decompose(const Vector& x, const Exogenous& exo) const {
    const auto& t = *topology_;
    const std::size_t nC = t.n_converters();
    Exogenous base = exo;
    base.xi.setZero();
    AffineTerms out;
    out.f = ode_rhs(x, base, ControlInput::zeros(nC));
    out.g = Matrix::Zero(x.size(), ix(2 * nC));
    using S = ConverterSymbol;
    for (std::size_t i = 0; i < nC; ++i) {
        const auto& p = t.converters[i].params;
        const double delta = x[ix(layout_.converter(S::delta, i))];
        const double c = std::cos(delta), s = std::sin(delta);
        out.g(ix(layout_.converter(S::delta, i)), ix(i)) = 1.0;
        const Idx j = ix(nC + i);
        // u_q enters through the voltage reference magnitude
        out.g(ix(layout_.converter(S::phi_d, i)), j) = c;
        out.g(ix(layout_.converter(S::phi_q, i)), j) = s;
        out.g(ix(layout_.converter(S::gamma_d, i)), j) = p.K_pv * c;
        out.g(ix(layout_.converter(S::gamma_q, i)), j) = p.K_pv * s;
        out.g(ix(layout_.converter(S::i_ld, i)), j) = p.K_pc * p.K_pv * c / p.L_f;
        out.g(ix(layout_.converter(S::i_lq, i)), j) = p.K_pc * p.K_pv * s / p.L_f;
    }
    return out;
}

void ReducedModel::write_debug_csv(const std::filesystem::path& dir) const {
    const auto& t = *topology_;
    std::vector<std::string> kcl_rows;
    for (const char* axis : {"d", "q"})
        for (int b : t.bus_ids) kcl_rows.push_back(std::string("kcl_") + axis + "_bus" + std::to_string(b));
    const auto labels = layout_.labels(t);
    const std::vector<std::string> x2_labels(labels.begin() + static_cast<std::ptrdiff_t>(layout_.x1_size()),
                                             labels.end());
    std::vector<std::string> z_labels;
    for (const char* axis : {"vBd_", "vBq_"})
        for (int b : t.bus_ids) z_labels.push_back(axis + std::to_string(b));
    std::vector<std::string> conv_labels;
    for (const auto& c : t.converters) conv_labels.push_back("xi_" + c.id);

    csv::write_matrix(dir / "M1.csv", constraint_.M1, kcl_rows, x2_labels);
    csv::write_matrix(dir / "M2.csv", constraint_.M2, kcl_rows, z_labels);
    csv::write_matrix(dir / "K.csv", K_, labels, conv_labels);
}

}  // namespace mgsim
