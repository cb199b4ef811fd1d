#include "doctest.h"

#include "dimerdyn/errors.hpp"
#include "dimerdyn/runner.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace dimerdyn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json base_config() {
    return json::parse(R"({
        "scenario": "compare",
        "params": {"omega": 1.0, "detuning": 0.0, "coupling": 0.25, "alpha_bar": 3.0},
        "time": {"t_start": 0.0, "t_end": 20.0, "n_samples": 201}
    })");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dimerdyn_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_SUITE("cli-runner") {

TEST_CASE("config parsing: accepted forms") {
    RunConfig c = parse_config(base_config());
    CHECK(c.scenario == "compare");
    CHECK(c.params.coupling() == 0.25);
    CHECK(c.params.detuning() == 0.0);
    REQUIRE(c.grid.has_value());
    CHECK(c.grid->n_samples == 201);
    CHECK(c.gamma_convention == GammaConvention::excitation);
    CHECK(c.closure == ClosureCoupling::closed_form);

    json j = base_config();
    j["gamma_convention"] = "excitation";
    CHECK(parse_config(j).gamma_convention == GammaConvention::excitation);
    j["gamma_convention"] = "operator";
    j["closure"] = "commutator";
    c = parse_config(j);
    CHECK(c.gamma_convention == GammaConvention::operator_def);
    CHECK(c.closure == ClosureCoupling::commutator);

    j = base_config();
    j["params"]["alpha_bar"] = json::array({1.0, 2.0});
    CHECK(parse_config(j).params.alpha_bar() == std::complex<double>(1.0, 2.0));

    j = base_config();
    j.erase("params");
    j["physical"] = json::parse(R"({"bare_energies": [0, 1], "energy_gradients": [0, 1],
                                    "mass": 1, "vib_frequency": 1, "coupling_gradient": 0.1})");
    CHECK(parse_config(j).params.gap() == doctest::Approx(1.5));
}

TEST_CASE("config parsing: rejections") {
    auto rejects = [](const json& j) { CHECK_THROWS_AS(parse_config(j), ConfigError); };
    json j = base_config();
    j["colour"] = "blue";
    rejects(j);
    j = base_config();
    j["params"]["mass"] = 1.0;
    rejects(j);
    j = base_config();
    j["time"]["dt"] = 0.1;
    rejects(j);
    j = base_config();
    j["params"]["gap"] = 1.0;
    rejects(j);
    j = base_config();
    j["scenario"] = "plot";
    rejects(j);
    j = base_config();
    j["time"]["t_end"] = -1.0;
    rejects(j);
    j = base_config();
    j["time"]["n_samples"] = 1;
    rejects(j);
    j = base_config();
    j["params"]["coupling"] = -0.1;
    rejects(j);
    j = base_config();
    j["gamma_convention"] = "other";
    rejects(j);
    j = base_config();
    j["scenario"] = "sweep";
    rejects(j);
    j["sweep"] = {{"parameter", "omega"}, {"values", {1.0}}};
    rejects(j);

    const fs::path dir = scratch("badjson");
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << "{ not json";
    CHECK_THROWS_AS(load_config(dir / "c.json"), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("default compare grid covers three revivals at the required density") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, 3.0);
    const QhdConstants c{9.0, 90.0, 0.0, 0.25};
    const TimeGrid g = default_compare_grid(p, c);
    const double t_rev = 2.0 * std::numbers::pi * 3.0 / 0.25;
    CHECK(g.t_end == doctest::Approx(3.0 * t_rev));
    const double dt = (g.t_end - g.t_start) / double(g.n_samples - 1);
    CHECK(2.0 * std::numbers::pi / dt >= 20.0);
    const double inv_period = 2.0 * std::numbers::pi / (0.25 * std::sqrt(18.0));
    CHECK(inv_period / dt >= 40.0);
}

TEST_CASE("collapse detector: null results") {
    std::vector<double> t, v;
    for (int k = 0; k <= 1000; ++k) {
        t.push_back(0.1 * k);
        v.push_back(-0.5);
    }
    auto r = detect_collapse_revival(t, v, 5.0);
    CHECK_FALSE(r.t_collapse.has_value());
    CHECK_FALSE(r.t_revival.has_value());
    r = detect_collapse_revival(t, v, std::numeric_limits<double>::infinity());
    CHECK_FALSE(r.t_collapse.has_value());
    CHECK_THROWS_AS(detect_collapse_revival(t, v, 2.0), InvalidParameter);
}

TEST_CASE("collapse detector: Gaussian-envelope reference curve") {
    const double g = 0.25, gamma0 = 9.0;
    const double period = std::numbers::pi / (std::sqrt(gamma0) * g);
    std::vector<double> t, v;
    for (int k = 0; k <= 8000; ++k) {
        t.push_back(0.005 * k);
        v.push_back(collapse_fit(t.back(), g, gamma0));
    }
    const auto r = detect_collapse_revival(t, v, period);
    REQUIRE(r.t_collapse.has_value());
    CHECK_FALSE(r.t_revival.has_value());
    // Envelope criterion g^2 t^2 = ln 10, shifted by at most half the centred window.
    const double t_env = std::sqrt(std::log(10.0)) / g;
    CHECK(*r.t_collapse >= t_env - 0.5 * r.window - period);
    CHECK(*r.t_collapse <= t_env + 0.5 * r.window + period);
}

TEST_CASE("reported validity windows") {
    const auto a = validity_window_error(JcmParams::make(1.0, 1.0, 0.025, 7.0), GammaConvention::excitation,
                                         ClosureCoupling::closed_form);
    CHECK(a.t_star == doctest::Approx(6.366).epsilon(1e-4));
    const auto b = validity_window_error(JcmParams::make(1.0, 1.0, 0.25, 3.0), GammaConvention::excitation,
                                         ClosureCoupling::closed_form);
    CHECK(b.t_star == doctest::Approx(0.6366).epsilon(1e-4));
}

TEST_CASE("number formatting round-trips") {
    for (double x : {0.0, -0.5, 1.0 / 3.0, 6.02214076e23, 1e-300, -2.5e-17}) CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("compare run writes the fixed CSV layout and a report") {
    RunConfig c = parse_config(base_config());
    c.output_dir = scratch("compare");
    std::ostringstream log;
    const auto files = run(c, log);
    REQUIRE(files.size() == 2);
    std::ifstream csv(c.output_dir / "frames.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "t,Sz_exact,Sz_qhd,Sz_analytic,sigma_q,sigma_p,sum_vib,sigma_Sx,sigma_Sy,sum_el,E_vib_total,E_vib_cl,"
          "E_vib_q,E_el_total,E_el_cl,E_el_q,Rx,Ry,Rz,R2,fidelity,corr_beta");
    std::size_t rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 201);

    const json rep = json::parse(slurp(c.output_dir / "report.json"));
    CHECK(rep["validity_window"]["t_star"].get<double>() == doctest::Approx(0.63662).epsilon(1e-4));
    CHECK(rep["conservation"]["norm_drift"].get<double>() < 1e-10);
    CHECK(rep["truncation"]["warning"] == false);
}

TEST_CASE("identical configs give byte-identical output") {
    RunConfig c = parse_config(base_config());
    std::ostringstream log;
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    c.output_dir = a;
    run(c, log);
    c.output_dir = b;
    run(c, log);
    for (const char* f : {"frames.csv", "report.json"}) {
        CHECK(!slurp(a / f).empty());
        CHECK(slurp(a / f) == slurp(b / f));
    }
}

TEST_CASE("wavepacket scenario emits normalized slices") {
    json j = base_config();
    j["scenario"] = "wavepacket";
    j["wavepacket"] = {{"times", {0.0, 10.0}}, {"points", 401}};
    RunConfig c = parse_config(j);
    c.output_dir = scratch("wave");
    std::ostringstream log;
    run(c, log);
    const json rep = json::parse(slurp(c.output_dir / "report.json"));
    REQUIRE(rep["wavepacket"]["slices"].size() == 2);
    for (const auto& s : rep["wavepacket"]["slices"]) CHECK(std::abs(s["integral"].get<double>() - 1.0) < 1e-6);
    std::ifstream csv(c.output_dir / "wavepacket.csv");
    std::size_t rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 1 + 2 * 401);
}

TEST_CASE("sweep runs concurrently into subdirectories and merges in order") {
    json j = base_config();
    j["scenario"] = "sweep";
    j["sweep"] = {{"parameter", "alpha_bar"}, {"values", {1.5, 2.0, 2.5, 3.0}}, {"threads", 4}};
    RunConfig c = parse_config(j);
    std::ostringstream log;
    const fs::path par = scratch("sweep_par");
    c.output_dir = par;
    run(c, log);
    c.sweep.threads = 1;
    const fs::path seq = scratch("sweep_seq");
    c.output_dir = seq;
    run(c, log);
    for (int k = 0; k < 4; ++k) {
        char name[16];
        std::snprintf(name, sizeof name, "run_%03d", k);
        CHECK(fs::exists(seq / name / "frames.csv"));
        CHECK(slurp(par / name / "report.json") == slurp(seq / name / "report.json"));
    }
    CHECK(slurp(par / "sweep.csv") == slurp(seq / "sweep.csv"));
    std::ifstream csv(seq / "sweep.csv");
    std::string line;
    std::getline(csv, line);
    std::getline(csv, line);
    CHECK(line.rfind("0,1.5,", 0) == 0);
}

TEST_CASE("rates scenario locates the branch point at alpha = 1") {
    json j = base_config();
    j["scenario"] = "rates";
    RunConfig c = parse_config(j);
    c.output_dir = scratch("rates");
    std::ostringstream log;
    run(c, log);
    const json rep = json::parse(slurp(c.output_dir / "rates_report.json"));
    CHECK(rep["branch_point"]["alpha_bar"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rates payload") {
    const json r = rates_json(0.25, 9.0, 0.0, 1.0, GammaConvention::excitation, ClosureCoupling::closed_form);
    CHECK(r["gamma0"].get<double>() == 9.0);
    CHECK(r["omega1_squared"].get<double>() - r["omega2_squared"].get<double>() ==
          doctest::Approx(4.0 * 0.0625 * 3.0));
    CHECK(r["validity_window"].get<double>() == doctest::Approx(0.63662).epsilon(1e-4));
    CHECK(r["revival_time"].get<double>() == doctest::Approx(2.0 * std::numbers::pi * 3.0 / 0.25));
    const json b = rates_json(0.3, 1.0, 0.0, 1.0, GammaConvention::excitation, ClosureCoupling::closed_form);
    CHECK(b["t_plus_inv"].get<double>() == b["t_minus_inv"].get<double>());
    CHECK_THROWS_AS(rates_json(-1.0, 1.0, 0.0, 1.0, GammaConvention::excitation, ClosureCoupling::closed_form),
                    InvalidParameter);
}

}  // TEST_SUITE
