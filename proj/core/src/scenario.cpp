#include "mgsim/scenario.hpp"

#include <cmath>
#include <fstream>

#include "mgsim/csv.hpp"
#include "mgsim/errors.hpp"

namespace mgsim {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

std::string where(const csv::Table& t, std::size_t row) {
    return t.path.string() + ":" + std::to_string(t.line_numbers[row]);
}

std::size_t require_column(const csv::Table& t, const std::string& name) {
    const auto c = t.column(name);
    if (c == csv::Table::npos) throw ParseError(t.path.string() + ": missing column " + name);
    return c;
}

// Timestamps in column t_s: integers, strictly increasing, 900 s apart.
std::vector<long long> read_timestamps(const csv::Table& t) {
    if (t.header.empty() || t.header[0] != "t_s")
        throw ParseError(t.path.string() + ": first column must be t_s");
    std::vector<long long> ts;
    ts.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const long long v = csv::parse_int(t.rows[r][0], where(t, r) + " t_s");
        if (!ts.empty()) {
            if (v <= ts.back())
                throw ValidationError(where(t, r) + ": non-monotonic timestamp " + std::to_string(v) + " after " +
                                      std::to_string(ts.back()));
            if (v - ts.back() != kScenarioSpacing)
                throw ValidationError(where(t, r) + ": timestamp spacing " + std::to_string(v - ts.back()) +
                                      " s, expected 900");
        }
        ts.push_back(v);
    }
    return ts;
}

// Rejects columns that the topology does not know about.
void check_columns(const csv::Table& t, const std::vector<std::string>& expected) {
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        bool found = false;
        for (const auto& e : expected) found = found || t.header[c] == e;
        if (!found) throw ParseError(t.path.string() + ": unexpected column " + t.header[c]);
    }
}

Matrix read_block(const csv::Table& t, const std::vector<std::string>& names) {
    Matrix m(ix(t.rows.size()), ix(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto c = require_column(t, names[j]);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double v = csv::parse_double(t.rows[r][c], where(t, r) + " " + names[j]);
            if (!std::isfinite(v)) throw ValidationError(where(t, r) + ": non-finite value in " + names[j]);
            m(ix(r), ix(j)) = v;
        }
    }
    return m;
}

std::vector<std::string> prefixed(const std::string& prefix, const std::vector<std::string>& ids) {
    std::vector<std::string> out;
    for (const auto& id : ids) out.push_back(prefix + id);
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void write_file(const std::filesystem::path& path, const std::vector<long long>& ts,
                const std::vector<std::string>& names, const std::vector<const Matrix*>& blocks) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "t_s";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < ts.size(); ++r) {
        out << ts[r];
        for (const Matrix* b : blocks)
            for (Idx c = 0; c < b->cols(); ++c) out << ',' << csv::format_shortest((*b)(ix(r), c));
        out << '\n';
    }
}

std::vector<std::string> ids_of_loads(const GridTopology& t) {
    std::vector<std::string> ids;
    for (const auto& l : t.loads) ids.push_back(l.id);
    return ids;
}

std::vector<std::string> ids_of_converters(const GridTopology& t) {
    std::vector<std::string> ids;
    for (const auto& c : t.converters) ids.push_back(c.id);
    return ids;
}

}  // namespace

ScenarioSeries load_scenario(const std::filesystem::path& dir, const GridTopology& topology) {
    ScenarioSeries s;
    s.load_ids = ids_of_loads(topology);
    s.converter_ids = ids_of_converters(topology);

    const auto loads = csv::read(dir / "loads.csv");
    const auto sp = csv::read(dir / "setpoints_p.csv");
    const auto squ = csv::read(dir / "setpoints_qu.csv");
    const auto xi = csv::read(dir / "xi.csv");

    const auto r_names = prefixed("rL_", s.load_ids), l_names = prefixed("LL_", s.load_ids);
    const auto p_names = prefixed("Pstar_", s.converter_ids);
    const auto q_names = prefixed("Qstar_", s.converter_ids), u_names = prefixed("Ustar_", s.converter_ids);
    const auto x_names = prefixed("xi_", s.converter_ids);

    s.timestamps = read_timestamps(loads);
    for (const auto* t : {&sp, &squ, &xi}) {
        const auto other = read_timestamps(*t);
        if (other.size() != s.timestamps.size())
            throw ValidationError(t->path.string() + ": " + std::to_string(other.size()) + " rows, loads.csv has " +
                                  std::to_string(s.timestamps.size()));
        for (std::size_t r = 0; r < other.size(); ++r)
            if (other[r] != s.timestamps[r])
                throw ValidationError(where(*t, r) + ": timestamp " + std::to_string(other[r]) +
                                      " does not match loads.csv");
    }
    check_columns(loads, concat(r_names, l_names));
    check_columns(sp, p_names);
    check_columns(squ, concat(q_names, u_names));
    check_columns(xi, x_names);

    s.load_r = read_block(loads, r_names);
    s.load_l = read_block(loads, l_names);
    s.p_star = read_block(sp, p_names);
    s.q_star = read_block(squ, q_names);
    s.u_star = read_block(squ, u_names);
    s.xi = read_block(xi, x_names);

    // impedance and storage checks carry file/line context
    for (std::size_t r = 0; r < s.size(); ++r) {
        for (std::size_t l = 0; l < s.load_ids.size(); ++l) {
            if (!(s.load_r(ix(r), ix(l)) > 0.0))
                throw ValidationError(where(loads, r) + ": " + r_names[l] + " must be positive");
            if (!(s.load_l(ix(r), ix(l)) > 0.0))
                throw ValidationError(where(loads, r) + ": " + l_names[l] + " must be positive");
        }
        for (std::size_t c = 0; c < s.converter_ids.size(); ++c)
            if (topology.converters[c].params.kind == ConverterKind::storage && s.xi(ix(r), ix(c)) != 0.0)
                throw ValidationError(where(xi, r) + ": " + x_names[c] + " must be zero (storage converter)");
    }
    validate_scenario(s, topology);
    return s;
}

void validate_scenario(const ScenarioSeries& s, const GridTopology& topology) {
    const auto T = ix(s.size());
    if (s.load_ids != ids_of_loads(topology) || s.converter_ids != ids_of_converters(topology))
        throw ValidationError("scenario ids do not match the topology");
    const Idx nL = ix(s.load_ids.size()), nC = ix(s.converter_ids.size());
    for (const Matrix* m : {&s.load_r, &s.load_l})
        if (m->rows() != T || m->cols() != nL) throw ValidationError("scenario load block has wrong shape");
    for (const Matrix* m : {&s.p_star, &s.q_star, &s.u_star, &s.xi})
        if (m->rows() != T || m->cols() != nC) throw ValidationError("scenario converter block has wrong shape");
    for (std::size_t r = 1; r < s.size(); ++r)
        if (s.timestamps[r] - s.timestamps[r - 1] != kScenarioSpacing)
            throw ValidationError("scenario timestamps not 900 s apart at row " + std::to_string(r));
    for (Idx r = 0; r < T; ++r) {
        for (Idx l = 0; l < nL; ++l)
            if (!(s.load_r(r, l) > 0.0) || !(s.load_l(r, l) > 0.0) || !std::isfinite(s.load_r(r, l)) ||
                !std::isfinite(s.load_l(r, l)))
                throw ValidationError("t_s=" + std::to_string(s.timestamps[std::size_t(r)]) + ": load " +
                                      s.load_ids[std::size_t(l)] + " impedance must be positive and finite");
        for (Idx c = 0; c < nC; ++c) {
            const std::string& id = s.converter_ids[std::size_t(c)];
            if (!std::isfinite(s.p_star(r, c)) || !std::isfinite(s.q_star(r, c)) || !std::isfinite(s.u_star(r, c)) ||
                !std::isfinite(s.xi(r, c)))
                throw ValidationError("t_s=" + std::to_string(s.timestamps[std::size_t(r)]) + ": non-finite setpoint for " +
                                      id);
            if (topology.converters[std::size_t(c)].params.kind == ConverterKind::storage && s.xi(r, c) != 0.0)
                throw ValidationError("t_s=" + std::to_string(s.timestamps[std::size_t(r)]) + ": xi_" + id +
                                      " must be zero (storage converter)");
        }
    }
}

void write_scenario(const std::filesystem::path& dir, const ScenarioSeries& s) {
    std::filesystem::create_directories(dir);
    write_file(dir / "loads.csv", s.timestamps, concat(prefixed("rL_", s.load_ids), prefixed("LL_", s.load_ids)),
               {&s.load_r, &s.load_l});
    write_file(dir / "setpoints_p.csv", s.timestamps, prefixed("Pstar_", s.converter_ids), {&s.p_star});
    write_file(dir / "setpoints_qu.csv", s.timestamps,
               concat(prefixed("Qstar_", s.converter_ids), prefixed("Ustar_", s.converter_ids)),
               {&s.q_star, &s.u_star});
    write_file(dir / "xi.csv", s.timestamps, prefixed("xi_", s.converter_ids), {&s.xi});
}

ScenarioPoint point_at(const ScenarioSeries& s, const GridTopology& topology, double t, double omega_ref) {
    if (s.size() == 0) throw RangeError("scenario is empty");
    const double first = static_cast<double>(s.timestamps.front());
    const double end = static_cast<double>(s.timestamps.back() + kScenarioSpacing);
    if (!(t >= first && t < end))
        throw RangeError("t = " + csv::format_shortest(t) + " s outside scenario range [" +
                         std::to_string(s.timestamps.front()) + ", " + std::to_string(s.timestamps.back() + 900) + ")");
    std::size_t row = static_cast<std::size_t>(std::floor((t - first) / double(kScenarioSpacing)));
    row = std::min(row, s.size() - 1);
    const Idx r = ix(row);

    ScenarioPoint p;
    p.t = t;
    p.row = row;
    for (std::size_t l = 0; l < s.load_ids.size(); ++l) p.loads.push_back({s.load_r(r, ix(l)), s.load_l(r, ix(l))});
    p.exo.P_star = s.p_star.row(r).transpose();
    p.exo.Q_star = s.q_star.row(r).transpose();
    p.exo.U_star = s.u_star.row(r).transpose();
    p.exo.xi = s.xi.row(r).transpose();
    p.exo.omega_ref = omega_ref;

    for (std::size_t c = 0; c < s.converter_ids.size(); ++c) {
        const auto& cp = topology.converters[c].params;
        const double P = p.exo.P_star[ix(c)], Q = p.exo.Q_star[ix(c)];
        const std::string ts = "t_s=" + std::to_string(s.timestamps[row]) + ": ";
        if (P > cp.P_max || P < cp.P_min)
            p.warnings.push_back(ts + "Pstar_" + s.converter_ids[c] + " = " + csv::format_shortest(P) +
                                 " outside [" + csv::format_shortest(cp.P_min) + ", " + csv::format_shortest(cp.P_max) +
                                 "]");
        if (Q > cp.Q_max || Q < cp.Q_min)
            p.warnings.push_back(ts + "Qstar_" + s.converter_ids[c] + " = " + csv::format_shortest(Q) +
                                 " outside [" + csv::format_shortest(cp.Q_min) + ", " + csv::format_shortest(cp.Q_max) +
                                 "]");
    }
    return p;
}

std::vector<double> allocate_storage_setpoints(double total_load_p, const std::vector<double>& renewable_forecast_p,
                                               const std::vector<ConverterParams>& storage) {
    double unbalanced = total_load_p;
    for (double p : renewable_forecast_p) unbalanced -= p;
    double total_max = 0.0;
    for (const auto& s : storage) total_max += s.P_max;
    if (storage.empty() || !(total_max > 0.0))
        throw InputError("storage allocation needs at least one storage unit with P_max > 0");

    std::vector<double> out(storage.size());
    double partial = 0.0;
    for (std::size_t k = 0; k + 1 < storage.size(); ++k) {
        out[k] = unbalanced * storage[k].P_max / total_max;
        partial += out[k];
    }
    // last unit takes the residue; nudge by ulps until the left-to-right sum is exact
    double last = unbalanced - partial;
    for (int guard = 0; guard < 64 && partial + last != unbalanced; ++guard)
        last = std::nextafter(last, partial + last < unbalanced ? INFINITY : -INFINITY);
    out.back() = last;
    return out;
}

LoadParams impedance_from_power(double p, double q, double v, double omega_n) {
    if (!(p > 0.0)) throw InputError("load active power must be positive (got " + csv::format_shortest(p) + " W)");
    if (!(q > 0.0))
        throw InputError("load reactive power must be positive: the series RL load needs L_L > 0, so the data must "
                         "respect a minimum lagging power factor (got q = " +
                         csv::format_shortest(q) + " var)");
    if (!(v > 0.0)) throw InputError("nominal voltage must be positive");
    const double s2 = p * p + q * q;
    return {p * v * v / s2, q * v * v / s2 / omega_n};
}

std::pair<double, double> power_from_impedance(const LoadParams& load, double v, double omega_n) {
    const double x = omega_n * load.L_L;
    const double i2 = v * v / (load.r_L * load.r_L + x * x);
    return {load.r_L * i2, x * i2};
}

ScenarioPoint nominal_point(const GridTopology& topology, double v_nominal, double omega_ref) {
    const double wn = network_omega(topology);
    ScenarioPoint p;
    double total_load = 0.0;
    for (const auto& l : topology.loads) {
        const auto [P, Q] = ieee33_nominal_load(l.bus);
        p.loads.push_back(impedance_from_power(P, Q, v_nominal, wn));
        total_load += P;
    }
    const auto nC = topology.n_converters();
    p.exo = Exogenous::zeros(nC, omega_ref);
    p.exo.U_star.setConstant(v_nominal);
    std::vector<double> forecast;
    std::vector<ConverterParams> storage;
    std::vector<std::size_t> storage_idx;
    for (std::size_t c = 0; c < nC; ++c) {
        const auto& cp = topology.converters[c].params;
        if (cp.kind == ConverterKind::storage) {
            storage.push_back(cp);
            storage_idx.push_back(c);
        } else {
            p.exo.P_star[ix(c)] = 0.25 * cp.P_max;
            forecast.push_back(p.exo.P_star[ix(c)]);
        }
    }
    if (!storage.empty()) {
        const auto alloc = allocate_storage_setpoints(total_load, forecast, storage);
        for (std::size_t k = 0; k < storage_idx.size(); ++k) p.exo.P_star[ix(storage_idx[k])] = alloc[k];
    }
    return p;
}

ScenarioSeries convert_from_power(const std::filesystem::path& raw_dir, const GridTopology& topology,
                                  const ConvertOptions& options) {
    if (!(options.v_nominal > 0.0)) throw InputError("scenario-convert needs a positive --v-nominal");
    ScenarioSeries s;
    s.load_ids = ids_of_loads(topology);
    s.converter_ids = ids_of_converters(topology);

    const auto lp = csv::read(raw_dir / "load_power.csv");
    const auto ren = csv::read(raw_dir / "renewables.csv");
    const auto vv = csv::read(raw_dir / "volt_var.csv");
    s.timestamps = read_timestamps(lp);
    for (const auto* t : {&ren, &vv}) {
        const auto other = read_timestamps(*t);
        if (other != s.timestamps) throw ValidationError(t->path.string() + ": timestamps differ from load_power.csv");
    }

    std::vector<std::string> renewable_ids;
    std::vector<std::size_t> renewable_idx, storage_idx;
    std::vector<ConverterParams> storage;
    for (std::size_t c = 0; c < topology.n_converters(); ++c) {
        if (topology.converters[c].params.kind == ConverterKind::storage) {
            storage_idx.push_back(c);
            storage.push_back(topology.converters[c].params);
        } else {
            renewable_idx.push_back(c);
            renewable_ids.push_back(topology.converters[c].id);
        }
    }

    const Matrix P = read_block(lp, prefixed("P_", s.load_ids));
    const Matrix Q = read_block(lp, prefixed("Q_", s.load_ids));
    const Matrix fc = read_block(ren, prefixed("forecast_", renewable_ids));
    const Matrix ac = read_block(ren, prefixed("actual_", renewable_ids));
    s.q_star = read_block(vv, prefixed("Qstar_", s.converter_ids));
    s.u_star = read_block(vv, prefixed("Ustar_", s.converter_ids));

    const Idx T = ix(s.size()), nL = ix(s.load_ids.size()), nC = ix(s.converter_ids.size());
    const double wn = network_omega(topology);
    const double sign = options.xi_sign == XiSign::actual_minus_forecast ? 1.0 : -1.0;
    s.load_r.resize(T, nL);
    s.load_l.resize(T, nL);
    s.p_star = Matrix::Zero(T, nC);
    s.xi = Matrix::Zero(T, nC);
    for (Idx r = 0; r < T; ++r) {
        double total_load = 0.0;
        for (Idx l = 0; l < nL; ++l) {
            LoadParams lpar;
            try {
                lpar = impedance_from_power(P(r, l), Q(r, l), options.v_nominal, wn);
            } catch (const InputError& e) {
                throw ValidationError(where(lp, std::size_t(r)) + ": load " + s.load_ids[std::size_t(l)] + ": " +
                                      e.what());
            }
            s.load_r(r, l) = lpar.r_L;
            s.load_l(r, l) = lpar.L_L;
            total_load += P(r, l);
        }
        std::vector<double> forecast;
        for (std::size_t k = 0; k < renewable_idx.size(); ++k) {
            const Idx c = ix(renewable_idx[k]);
            s.p_star(r, c) = fc(r, ix(k));
            s.xi(r, c) = sign * (ac(r, ix(k)) - fc(r, ix(k)));
            forecast.push_back(fc(r, ix(k)));
        }
        const auto alloc = allocate_storage_setpoints(total_load, forecast, storage);
        for (std::size_t k = 0; k < storage_idx.size(); ++k) s.p_star(r, ix(storage_idx[k])) = alloc[k];
    }
    validate_scenario(s, topology);
    return s;
}

}  // namespace mgsim
