#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <numbers>
#include <sstream>

#include "mgsim/errors.hpp"
#include "mgsim/scenario.hpp"
#include "support.hpp"

using namespace mgsim;

namespace {

const double kWn = 100.0 * std::numbers::pi;

std::vector<ConverterParams> default_storage() {
    std::vector<ConverterParams> out;
    for (const char* g : {"G1", "G5", "G6", "G9"}) out.push_back(default_converter_params(g));
    return out;
}

std::filesystem::path copy_sample(const std::string& name) {
    const auto dir = test::temp_dir(name);
    for (const char* f : {"loads.csv", "setpoints_p.csv", "setpoints_qu.csv", "xi.csv"})
        std::filesystem::copy_file(test::sample_dir() / f, dir / f);
    return dir;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p);
    for (const auto& l : lines) out << l << '\n';
}

template <class E>
std::string error_of(const std::filesystem::path& dir) {
    try {
        load_scenario(dir, default_topology());
    } catch (const E& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Scenario, StorageAllocationProportionalToRating) {
    const auto alloc = allocate_storage_setpoints(2.5e6, {0.3e6, 0.2e6}, default_storage());
    ASSERT_EQ(alloc.size(), 4u);
    // 2 MW unbalanced over {3, 1.5, 1, 1} MW
    const double expected[] = {2e6 * 3 / 6.5, 2e6 * 1.5 / 6.5, 2e6 / 6.5, 2e6 / 6.5};
    const double rounded[] = {0.9231e6, 0.4615e6, 0.3077e6, 0.3077e6};
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(alloc[k], expected[k], 1e-9);
        EXPECT_NEAR(alloc[k], rounded[k], 50.0);
    }
    EXPECT_EQ(alloc[0] + alloc[1] + alloc[2] + alloc[3], 2e6);
}

TEST(Scenario, AllocationSumIsExactForAwkwardTotals) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> U(-3e6, 3e6);
    for (int trial = 0; trial < 1000; ++trial) {
        const double total = U(rng);
        const auto a = allocate_storage_setpoints(total, {}, default_storage());
        EXPECT_EQ(a[0] + a[1] + a[2] + a[3], total);
    }
    EXPECT_THROW(allocate_storage_setpoints(1.0, {}, {}), InputError);
}

TEST(Scenario, ImpedanceFromPower) {
    const auto z = impedance_from_power(100e3, 50e3, 12.66e3, kWn);
    EXPECT_NEAR(z.r_L, 1282.3, 1282.3 * 1e-4);
    EXPECT_NEAR(z.L_L, 2.0408, 2.0408 * 1e-4);
    const auto [p, q] = power_from_impedance(z, 12.66e3, kWn);
    EXPECT_NEAR(p, 100e3, 100e3 * 1e-10);
    EXPECT_NEAR(q, 50e3, 50e3 * 1e-10);
}

TEST(Scenario, ImpedanceHomogeneity) {
    // doubling power at fixed voltage halves the impedance
    const auto a = impedance_from_power(80e3, 30e3, 12.66e3, kWn);
    const auto b = impedance_from_power(160e3, 60e3, 12.66e3, kWn);
    EXPECT_NEAR(b.r_L, 0.5 * a.r_L, 1e-12 * a.r_L);
    EXPECT_NEAR(b.L_L, 0.5 * a.L_L, 1e-12 * a.L_L);
    // and scales with v^2
    const auto c = impedance_from_power(80e3, 30e3, 2 * 12.66e3, kWn);
    EXPECT_NEAR(c.r_L, 4 * a.r_L, 1e-12 * c.r_L);
}

TEST(Scenario, UnityPowerFactorRejected) {
    try {
        impedance_from_power(100e3, 0.0, 12.66e3, kWn);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("minimum lagging power factor"), std::string::npos);
    }
    EXPECT_THROW(impedance_from_power(-1.0, 1.0, 12.66e3, kWn), InputError);
}

TEST(Scenario, BundledWeekLoads) {
    const auto topo = default_topology();
    const auto s = load_scenario(test::sample_dir(), topo);
    EXPECT_EQ(s.size(), 672u);
    EXPECT_EQ(s.timestamps.front(), 0);
    EXPECT_EQ(s.timestamps.back(), 671 * 900);
    EXPECT_EQ(s.load_r.cols(), 23);
    EXPECT_EQ(s.p_star.cols(), 9);
    EXPECT_NO_THROW(validate_scenario(s, topo));
    for (std::size_t c = 0; c < 9; ++c) {
        if (topo.converters[c].params.kind == ConverterKind::storage) {
            EXPECT_EQ(s.xi.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Scenario, ZeroOrderHold) {
    const auto topo = default_topology();
    const auto s = load_scenario(test::sample_dir(), topo);
    const auto a = point_at(s, topo, 1800.0, kWn);
    const auto b = point_at(s, topo, 2699.999, kWn);
    EXPECT_EQ(a.row, 2u);
    EXPECT_EQ(b.row, 2u);
    EXPECT_EQ(a.loads, b.loads);
    EXPECT_EQ(a.exo.P_star, b.exo.P_star);
    EXPECT_EQ(point_at(s, topo, 2700.0, kWn).row, 3u);
    EXPECT_EQ(a.exo.P_star[3], s.p_star(2, 3));
    EXPECT_EQ(a.loads[5].L_L, s.load_l(2, 5));
    EXPECT_EQ(a.exo.omega_ref, kWn);
    EXPECT_EQ(point_at(s, topo, 671 * 900 + 899.0, kWn).row, 671u);
    EXPECT_THROW(point_at(s, topo, 672 * 900, kWn), RangeError);
    EXPECT_THROW(point_at(s, topo, -1.0, kWn), RangeError);
}

TEST(Scenario, WriteReadIsByteExact) {
    const auto topo = default_topology();
    const auto s = load_scenario(test::sample_dir(), topo);
    const auto dir = test::temp_dir("scenario_rt");
    write_scenario(dir, s);
    const auto again = load_scenario(dir, topo);
    EXPECT_EQ(again.load_r, s.load_r);
    EXPECT_EQ(again.u_star, s.u_star);
    EXPECT_EQ(again.xi, s.xi);
    const auto dir2 = test::temp_dir("scenario_rt2");
    write_scenario(dir2, again);
    for (const char* f : {"loads.csv", "setpoints_p.csv", "setpoints_qu.csv", "xi.csv"})
        EXPECT_EQ(test::read_file(dir / f), test::read_file(dir2 / f)) << f;
}

TEST(Scenario, StorageXiMustBeZero) {
    const auto dir = copy_sample("scenario_xi");
    auto lines = read_lines(dir / "xi.csv");
    std::stringstream ss(lines[5]);
    std::vector<std::string> f;
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    f[5] = "12.5";  // xi_G5
    std::string row;
    for (std::size_t k = 0; k < f.size(); ++k) row += (k ? "," : "") + f[k];
    lines[5] = row;
    write_lines(dir / "xi.csv", lines);
    const auto msg = error_of<ValidationError>(dir);
    EXPECT_NE(msg.find("xi_G5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("xi.csv:6"), std::string::npos) << msg;
}

TEST(Scenario, ShuffledRowsReportLine) {
    const auto dir = copy_sample("scenario_shuffle");
    auto lines = read_lines(dir / "setpoints_p.csv");
    std::swap(lines[10], lines[11]);
    write_lines(dir / "setpoints_p.csv", lines);
    const auto msg = error_of<ValidationError>(dir);
    EXPECT_NE(msg.find("setpoints_p.csv:11"), std::string::npos) << msg;
}

TEST(Scenario, RepeatedTimestampIsNonMonotonic) {
    const auto dir = copy_sample("scenario_repeat");
    auto lines = read_lines(dir / "setpoints_p.csv");
    lines[12] = lines[11].substr(0, lines[11].find(',')) + lines[12].substr(lines[12].find(','));
    write_lines(dir / "setpoints_p.csv", lines);
    const auto msg = error_of<ValidationError>(dir);
    EXPECT_NE(msg.find("setpoints_p.csv:13"), std::string::npos) << msg;
    EXPECT_NE(msg.find("non-monotonic"), std::string::npos) << msg;
}

TEST(Scenario, GapReportsSpacing) {
    const auto dir = copy_sample("scenario_gap");
    for (const char* f : {"loads.csv", "setpoints_p.csv", "setpoints_qu.csv", "xi.csv"}) {
        auto lines = read_lines(dir / f);
        lines.erase(lines.begin() + 20);
        write_lines(dir / f, lines);
    }
    const auto msg = error_of<ValidationError>(dir);
    EXPECT_NE(msg.find("spacing"), std::string::npos) << msg;
}

TEST(Scenario, MissingAndExtraColumns) {
    auto dir = copy_sample("scenario_col");
    auto lines = read_lines(dir / "setpoints_p.csv");
    for (auto& l : lines) l += (&l == &lines[0]) ? ",Pstar_G10" : ",0";
    write_lines(dir / "setpoints_p.csv", lines);
    EXPECT_NE(error_of<ParseError>(dir).find("unexpected column Pstar_G10"), std::string::npos);

    dir = copy_sample("scenario_col2");
    lines = read_lines(dir / "xi.csv");
    for (auto& l : lines) l = l.substr(0, l.rfind(','));
    write_lines(dir / "xi.csv", lines);
    EXPECT_NE(error_of<ParseError>(dir).find("missing column xi_G9"), std::string::npos);
}

TEST(Scenario, NonPositiveLoadRejected) {
    const auto dir = copy_sample("scenario_neg");
    auto lines = read_lines(dir / "loads.csv");
    lines[3] = lines[3].substr(0, lines[3].find(',')) + ",-5" + lines[3].substr(lines[3].find(',', lines[3].find(',') + 1));
    write_lines(dir / "loads.csv", lines);
    const auto msg = error_of<ValidationError>(dir);
    EXPECT_NE(msg.find("rL_L3 must be positive"), std::string::npos) << msg;
    EXPECT_NE(msg.find("loads.csv:4"), std::string::npos) << msg;
}

TEST(Scenario, ConvertReproducesBundledFiles) {
    const auto topo = default_topology();
    ConvertOptions opt;
    opt.v_nominal = test::kVNominal;
    const auto s = convert_from_power(test::sample_dir() / "raw", topo, opt);
    const auto dir = test::temp_dir("scenario_convert");
    write_scenario(dir, s);
    for (const char* f : {"loads.csv", "setpoints_p.csv", "setpoints_qu.csv", "xi.csv"})
        EXPECT_EQ(test::read_file(dir / f), test::read_file(test::sample_dir() / f)) << f;
    // storage absorbs the forecast imbalance exactly
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(s.size()); r += 97) {
        const auto pt = point_at(s, topo, static_cast<double>(s.timestamps[static_cast<std::size_t>(r)]), kWn);
        double load = 0.0;
        for (const auto& l : pt.loads) load += power_from_impedance(l, test::kVNominal, kWn).first;
        EXPECT_NEAR(s.p_star.row(r).sum(), load, 1e-6 * load);
    }
}

TEST(Scenario, ConvertXiSign) {
    const auto topo = default_topology();
    ConvertOptions opt;
    opt.v_nominal = test::kVNominal;
    const auto a = convert_from_power(test::sample_dir() / "raw", topo, opt);
    opt.xi_sign = XiSign::forecast_minus_actual;
    const auto b = convert_from_power(test::sample_dir() / "raw", topo, opt);
    EXPECT_EQ(a.xi, -b.xi);
    EXPECT_GT(a.xi.cwiseAbs().maxCoeff(), 0.0);
    opt.v_nominal = 0.0;
    EXPECT_THROW(convert_from_power(test::sample_dir() / "raw", topo, opt), InputError);
}

TEST(Scenario, NominalPoint) {
    const auto topo = default_topology();
    const auto p = nominal_point(topo, test::kVNominal, kWn);
    ASSERT_EQ(p.loads.size(), 23u);
    const auto [P30, Q30] = power_from_impedance(p.loads[topo.load_index("L30")], test::kVNominal, kWn);
    EXPECT_NEAR(P30, 200e3, 1e-6);
    EXPECT_NEAR(Q30, 600e3, 1e-6);
    EXPECT_EQ(p.exo.P_star[1], 0.25 * topo.converters[1].params.P_max);
    EXPECT_EQ(p.exo.U_star[4], test::kVNominal);
    EXPECT_EQ(p.exo.Q_star.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(p.exo.xi.cwiseAbs().maxCoeff(), 0.0);
}
