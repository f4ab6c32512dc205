#include "mgsim/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mgsim/errors.hpp"

namespace mgsim {

using json = nlohmann::json;

std::string_view to_string(ConverterKind kind) {
    switch (kind) {
    case ConverterKind::wind: return "wind";
    case ConverterKind::solar: return "solar";
    case ConverterKind::storage: return "storage";
    }
    return "unknown";
}

ConverterKind converter_kind_from_string(std::string_view name) {
    if (name == "wind") return ConverterKind::wind;
    if (name == "solar") return ConverterKind::solar;
    if (name == "storage") return ConverterKind::storage;
    throw ParseError("unknown converter kind '" + std::string(name) + "'");
}

namespace {

// Natural ordering so that "G2" sorts before "G10".
bool natural_less(std::string_view a, std::string_view b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
        const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
        if (da && db) {
            std::size_t ie = i, je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            const auto na = std::stoull(std::string(a.substr(i, ie - i)));
            const auto nb = std::stoull(std::string(b.substr(j, je - j)));
            if (na != nb) return na < nb;
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return (a.size() - i) < (b.size() - j);
}

ConverterParams generator_row(double K_p, double K_q, double P_max_mw, double P_min_mw, double Q_max_mvar,
                              double Q_min_mvar, ConverterKind kind) {
    ConverterParams p;
    p.r_f = 0.1;
    p.L_f = 1.35e-3;
    p.C_f = 5e-5;
    p.r_c = 0.1;
    p.L_c = 1e-3;
    p.omega_c = 15.705;
    p.K_p = K_p;
    p.K_q = K_q;
    p.K_pv = 0.05;
    p.K_iv = 390.0;
    p.K_pc = 10.5;
    p.K_ic = 16e3;
    p.F = 0.75;
    p.omega_n = 100.0 * std::numbers::pi;
    p.omega_star = 100.0 * std::numbers::pi;
    p.P_max = P_max_mw * 1e6;
    p.P_min = P_min_mw * 1e6;
    p.Q_max = Q_max_mvar * 1e6;
    p.Q_min = Q_min_mvar * 1e6;
    p.kind = kind;
    return p;
}

DefaultParameters make_defaults() {
    using K = ConverterKind;
    DefaultParameters d;
    d.converters = {
        generator_row(0.333e-6, 0.333e-5, 3.0, -3.0, 3.0, -3.0, K::storage),  // G1
        generator_row(1.0e-6, 1.0e-5, 1.2, 0.0, 2.0, -2.0, K::wind),          // G2
        generator_row(1.25e-6, 1.25e-5, 1.2, 0.0, 2.0, -2.0, K::wind),        // G3
        generator_row(1.25e-6, 1.25e-5, 1.2, 0.0, 2.0, -2.0, K::wind),        // G4
        generator_row(1.0e-6, 1.0e-5, 1.5, -1.5, 2.0, -2.0, K::storage),      // G5
        generator_row(0.833e-6, 0.833e-5, 1.0, -1.0, 1.0, -1.0, K::storage),  // G6
        generator_row(0.833e-6, 0.833e-5, 0.8, 0.0, 1.0, -1.0, K::solar),     // G7
        generator_row(0.833e-6, 0.833e-5, 0.8, 0.0, 1.0, -1.0, K::solar),     // G8
        generator_row(0.667e-6, 0.667e-5, 1.0, -1.0, 1.0, -1.0, K::storage),  // G9
    };

    d.branches = {
        {2, 3, {0.493, 0.000799}},    {3, 4, {0.366, 0.000593}},    {4, 5, {0.3811, 0.000618}},
        {5, 6, {0.819, 0.00225}},     {6, 7, {0.1872, 0.00197}},    {7, 8, {0.7114, 0.000748}},
        {8, 9, {1.03, 0.002355}},     {9, 10, {1.044, 0.002355}},   {10, 11, {0.1966, 0.000207}},
        {11, 12, {0.3744, 0.000394}}, {12, 13, {1.468, 0.003676}},  {13, 14, {0.5416, 0.002269}},
        {14, 15, {0.591, 0.001674}},  {15, 16, {0.7463, 0.001735}}, {16, 17, {1.289, 0.005478}},
        {17, 18, {0.732, 0.001827}},  {2, 19, {0.164, 0.000498}},   {19, 20, {1.5042, 0.004314}},
        {20, 21, {0.4095, 0.001523}}, {21, 22, {0.7089, 0.002984}}, {3, 23, {0.4512, 0.000981}},
        {23, 24, {0.898, 0.002257}},  {24, 25, {0.896, 0.002232}},  {6, 26, {0.203, 0.000329}},
        {26, 27, {0.2842, 0.000461}}, {27, 28, {1.059, 0.002972}},  {28, 29, {0.8042, 0.00223}},
        {29, 30, {0.5075, 0.000823}}, {30, 31, {0.9744, 0.003065}}, {31, 32, {0.3105, 0.001152}},
        {32, 33, {0.341, 0.001688}},
    };
    return d;
}

// Placement of G1..G9 (bus numbers). Loads occupy every other bus.
constexpr int kConverterBus[9] = {2, 6, 13, 18, 22, 25, 29, 33, 10};

const std::map<int, std::pair<double, double>>& ieee33_loads() {
    // kW, kvar
    static const std::map<int, std::pair<double, double>> table = {
        {2, {100, 60}},  {3, {90, 40}},   {4, {120, 80}},  {5, {60, 30}},   {6, {60, 20}},
        {7, {200, 100}}, {8, {200, 100}}, {9, {60, 20}},   {10, {60, 20}},  {11, {45, 30}},
        {12, {60, 35}},  {13, {60, 35}},  {14, {120, 80}}, {15, {60, 10}},  {16, {60, 20}},
        {17, {60, 20}},  {18, {90, 40}},  {19, {90, 40}},  {20, {90, 40}},  {21, {90, 40}},
        {22, {90, 40}},  {23, {90, 50}},  {24, {420, 200}}, {25, {420, 200}}, {26, {60, 25}},
        {27, {60, 25}},  {28, {60, 20}},  {29, {120, 70}}, {30, {200, 600}}, {31, {150, 70}},
        {32, {210, 100}}, {33, {60, 40}},
    };
    return table;
}

double require_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ParseError(where + ": key '" + key + "' is not a number");
    return v.get<double>();
}

int require_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw ParseError(where + ": key '" + key + "' is not an integer");
    return v.get<int>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ParseError(where + ": key '" + key + "' is not a string");
    return v.get<std::string>();
}

struct ParamField {
    const char* key;
    double ConverterParams::*member;
};

constexpr ParamField kParamFields[] = {
    {"r_f", &ConverterParams::r_f},         {"L_f", &ConverterParams::L_f},
    {"C_f", &ConverterParams::C_f},         {"r_c", &ConverterParams::r_c},
    {"L_c", &ConverterParams::L_c},         {"omega_c", &ConverterParams::omega_c},
    {"K_p", &ConverterParams::K_p},         {"K_q", &ConverterParams::K_q},
    {"K_pv", &ConverterParams::K_pv},       {"K_iv", &ConverterParams::K_iv},
    {"K_pc", &ConverterParams::K_pc},       {"K_ic", &ConverterParams::K_ic},
    {"F", &ConverterParams::F},             {"omega_n", &ConverterParams::omega_n},
    {"omega_star", &ConverterParams::omega_star}, {"P_max", &ConverterParams::P_max},
    {"P_min", &ConverterParams::P_min},     {"Q_max", &ConverterParams::Q_max},
    {"Q_min", &ConverterParams::Q_min},
};

}  // namespace

std::size_t GridTopology::bus_index(int bus) const {
    const auto it = std::find(bus_ids.begin(), bus_ids.end(), bus);
    if (it == bus_ids.end()) throw ValidationError("unknown bus " + std::to_string(bus));
    return static_cast<std::size_t>(it - bus_ids.begin());
}

std::size_t GridTopology::converter_index(std::string_view id) const {
    for (std::size_t i = 0; i < converters.size(); ++i)
        if (converters[i].id == id) return i;
    throw ValidationError("unknown converter '" + std::string(id) + "'");
}

std::size_t GridTopology::load_index(std::string_view id) const {
    for (std::size_t i = 0; i < loads.size(); ++i)
        if (loads[i].id == id) return i;
    throw ValidationError("unknown load '" + std::string(id) + "'");
}

std::size_t GridTopology::reference_converter() const {
    if (converters.empty()) throw ValidationError("topology has no converters");
    std::size_t best = 0;
    for (std::size_t i = 1; i < converters.size(); ++i)
        if (natural_less(converters[i].id, converters[best].id)) best = i;
    return best;
}

void validate_topology(const GridTopology& t) {
    if (t.bus_ids.empty()) throw ValidationError("topology has no buses");
    std::set<int> buses;
    for (int b : t.bus_ids)
        if (!buses.insert(b).second) throw ValidationError("duplicate bus " + std::to_string(b));

    if (t.converters.empty()) throw ValidationError("topology has no converters");

    for (std::size_t k = 0; k < t.branches.size(); ++k) {
        const auto& br = t.branches[k];
        const std::string name = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        for (int b : {br.from_bus, br.to_bus})
            if (!buses.count(b)) throw ValidationError(name + " references unknown bus " + std::to_string(b));
        if (br.from_bus == br.to_bus) throw ValidationError(name + " is a self-loop");
        if (!(br.params.r_B > 0.0) || !std::isfinite(br.params.r_B))
            throw ValidationError(name + ": r_B must be positive");
        if (!(br.params.L_B > 0.0) || !std::isfinite(br.params.L_B))
            throw ValidationError(name + ": L_B must be positive");
    }

    std::set<std::string> conv_ids;
    for (const auto& c : t.converters) {
        if (!conv_ids.insert(c.id).second) throw ValidationError("duplicate converter id '" + c.id + "'");
        if (!buses.count(c.bus))
            throw ValidationError("converter '" + c.id + "' references unknown bus " + std::to_string(c.bus));
        const auto& p = c.params;
        for (const auto& f : kParamFields) {
            if (!std::isfinite(p.*(f.member)))
                throw ValidationError("converter '" + c.id + "': " + f.key + " is not finite");
        }
        const std::pair<const char*, double> positive[] = {
            {"r_f", p.r_f}, {"L_f", p.L_f}, {"C_f", p.C_f}, {"r_c", p.r_c},
            {"L_c", p.L_c}, {"omega_c", p.omega_c}, {"K_p", p.K_p}, {"K_q", p.K_q},
            {"K_pv", p.K_pv}, {"K_iv", p.K_iv}, {"K_pc", p.K_pc}, {"K_ic", p.K_ic}};
        for (const auto& [key, value] : positive)
            if (!(value > 0.0))
                throw ValidationError("converter '" + c.id + "': " + key + " must be positive");
        if (p.P_min > p.P_max) throw ValidationError("converter '" + c.id + "': P_min > P_max");
        if (p.Q_min > p.Q_max) throw ValidationError("converter '" + c.id + "': Q_min > Q_max");
        const bool storage = p.kind == ConverterKind::storage;
        if (storage != (p.P_min < 0.0))
            throw ValidationError("converter '" + c.id + "': kind " + std::string(to_string(p.kind)) +
                                  " inconsistent with P_min (storage iff P_min < 0)");
    }

    for (const auto& c : t.converters)
        if (c.params.omega_n != t.converters.front().params.omega_n)
            throw ValidationError("converter '" + c.id + "': omega_n differs from '" + t.converters.front().id +
                                  "' (all converters share one dq frame)");

    std::set<std::string> load_ids;
    for (const auto& l : t.loads) {
        if (!load_ids.insert(l.id).second) throw ValidationError("duplicate load id '" + l.id + "'");
        if (!buses.count(l.bus))
            throw ValidationError("load '" + l.id + "' references unknown bus " + std::to_string(l.bus));
    }

    // Connectivity of the branch graph.
    std::map<int, std::vector<int>> adj;
    for (const auto& br : t.branches) {
        adj[br.from_bus].push_back(br.to_bus);
        adj[br.to_bus].push_back(br.from_bus);
    }
    std::set<int> seen{t.bus_ids.front()};
    std::queue<int> frontier;
    frontier.push(t.bus_ids.front());
    while (!frontier.empty()) {
        const int b = frontier.front();
        frontier.pop();
        for (int nb : adj[b])
            if (seen.insert(nb).second) frontier.push(nb);
    }
    if (seen.size() != buses.size()) {
        std::ostringstream os;
        os << "branch graph is disconnected; unreachable bus(es):";
        for (int b : t.bus_ids)
            if (!seen.count(b)) os << ' ' << b;
        throw ValidationError(os.str());
    }
}

GridTopology parse_topology(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("topology: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("topology: top level must be an object");
    for (const char* key : {"buses", "branches", "converters", "loads"})
        if (!doc.contains(key) || !doc.at(key).is_array())
            throw ParseError(std::string("topology: missing array '") + key + "'");

    GridTopology t;
    for (const auto& b : doc["buses"]) {
        if (!b.is_number_integer()) throw ParseError("topology: bus ids must be integers");
        t.bus_ids.push_back(b.get<int>());
    }
    std::size_t k = 0;
    for (const auto& br : doc["branches"]) {
        const std::string where = "branches[" + std::to_string(k++) + "]";
        Branch b;
        b.from_bus = require_int(br, "from", where);
        b.to_bus = require_int(br, "to", where);
        b.params.r_B = require_number(br, "r_ohm", where);
        b.params.L_B = require_number(br, "l_henry", where);
        t.branches.push_back(b);
    }
    k = 0;
    for (const auto& cj : doc["converters"]) {
        const std::string where = "converters[" + std::to_string(k++) + "]";
        Converter c;
        c.id = require_string(cj, "id", where);
        c.bus = require_int(cj, "bus", where);
        if (!cj.contains("params")) throw ParseError(where + ": missing key 'params'");
        const auto& pj = cj.at("params");
        if (pj.is_string()) {
            const auto ref = pj.get<std::string>();
            if (ref.rfind("default:", 0) != 0)
                throw ParseError(where + ": params string must be 'default:<Gk>'");
            c.params = default_converter_params(std::string_view(ref).substr(8));
        } else if (pj.is_object()) {
            for (const auto& f : kParamFields) c.params.*(f.member) = require_number(pj, f.key, where + ".params");
        } else {
            throw ParseError(where + ": params must be an object or 'default:<Gk>'");
        }
        if (cj.contains("kind")) {
            if (!cj.at("kind").is_string()) throw ParseError(where + ": kind must be a string");
            c.params.kind = converter_kind_from_string(cj.at("kind").get<std::string>());
        }
        t.converters.push_back(std::move(c));
    }
    k = 0;
    for (const auto& lj : doc["loads"]) {
        const std::string where = "loads[" + std::to_string(k++) + "]";
        Load l;
        l.id = require_string(lj, "id", where);
        l.bus = require_int(lj, "bus", where);
        t.loads.push_back(std::move(l));
    }
    validate_topology(t);
    return t;
}

GridTopology load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open topology file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_topology(buf.str());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string serialize_topology(const GridTopology& t) {
    json doc;
    doc["buses"] = t.bus_ids;
    doc["branches"] = json::array();
    for (const auto& b : t.branches)
        doc["branches"].push_back(
            {{"from", b.from_bus}, {"to", b.to_bus}, {"r_ohm", b.params.r_B}, {"l_henry", b.params.L_B}});
    doc["converters"] = json::array();
    for (const auto& c : t.converters) {
        json p = json::object();
        for (const auto& f : kParamFields) p[f.key] = c.params.*(f.member);
        doc["converters"].push_back(
            {{"id", c.id}, {"bus", c.bus}, {"kind", std::string(to_string(c.params.kind))}, {"params", p}});
    }
    doc["loads"] = json::array();
    for (const auto& l : t.loads) doc["loads"].push_back({{"id", l.id}, {"bus", l.bus}});
    return doc.dump(2) + "\n";
}

IncidenceMatrices build_incidence(const GridTopology& t) {
    const auto nb = static_cast<Eigen::Index>(t.n_bus());
    IncidenceMatrices inc;
    inc.E_C = Matrix::Zero(static_cast<Eigen::Index>(t.n_converters()), nb);
    inc.E_L = Matrix::Zero(static_cast<Eigen::Index>(t.n_loads()), nb);
    inc.E_B = Matrix::Zero(static_cast<Eigen::Index>(t.n_branches()), nb);
    for (std::size_t i = 0; i < t.converters.size(); ++i)
        inc.E_C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t.bus_index(t.converters[i].bus))) = 1.0;
    for (std::size_t i = 0; i < t.loads.size(); ++i)
        inc.E_L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t.bus_index(t.loads[i].bus))) = 1.0;
    for (std::size_t k = 0; k < t.branches.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        inc.E_B(row, static_cast<Eigen::Index>(t.bus_index(t.branches[k].from_bus))) = 1.0;
        inc.E_B(row, static_cast<Eigen::Index>(t.bus_index(t.branches[k].to_bus))) = -1.0;
    }
    return inc;
}

const DefaultParameters& default_parameters() {
    static const DefaultParameters defaults = make_defaults();
    return defaults;
}

ConverterParams default_converter_params(std::string_view name) {
    if (name.size() == 2 && name[0] == 'G' && name[1] >= '1' && name[1] <= '9')
        return default_parameters().converters[static_cast<std::size_t>(name[1] - '1')];
    throw ParseError("unknown default generator '" + std::string(name) + "'");
}

GridTopology default_topology() {
    const auto& d = default_parameters();
    GridTopology t;
    for (int b = 2; b <= 33; ++b) t.bus_ids.push_back(b);
    t.branches = d.branches;
    std::set<int> conv_buses;
    for (std::size_t i = 0; i < 9; ++i) {
        t.converters.push_back({"G" + std::to_string(i + 1), kConverterBus[i], d.converters[i]});
        conv_buses.insert(kConverterBus[i]);
    }
    for (int b = 2; b <= 33; ++b)
        if (!conv_buses.count(b)) t.loads.push_back({"L" + std::to_string(b), b});
    return t;
}

std::pair<double, double> ieee33_nominal_load(int bus) {
    const auto& table = ieee33_loads();
    const auto it = table.find(bus);
    if (it == table.end()) throw RangeError("no IEEE 33-bus load at bus " + std::to_string(bus));
    return {it->second.first * 1e3, it->second.second * 1e3};
}

}  // namespace mgsim
