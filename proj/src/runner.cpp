#include "dimerdyn/runner.hpp"

#include "dimerdyn/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <sstream>
#include <string_view>
#include <thread>

namespace dimerdyn {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------- config helpers

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
    }
}

double get_number(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(where + ": missing \"" + key + "\"");
    if (!it->is_number()) throw ConfigError(where + ": \"" + key + "\" must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw ConfigError(where + ": \"" + key + "\" must be finite");
    return v;
}

double get_number_or(const json& obj, const char* key, double fallback, const std::string& where) {
    return obj.contains(key) ? get_number(obj, key, where) : fallback;
}

std::size_t get_count(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(where + ": missing \"" + key + "\"");
    if (!it->is_number_integer() || it->get<long long>() < 0)
        throw ConfigError(where + ": \"" + key + "\" must be a non-negative integer");
    return static_cast<std::size_t>(it->get<long long>());
}

bool get_bool_or(const json& obj, const char* key, bool fallback, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) throw ConfigError(where + ": \"" + key + "\" must be true or false");
    return it->get<bool>();
}

std::vector<double> get_number_list(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) return {};
    if (!it->is_array()) throw ConfigError(where + ": \"" + key + "\" must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : *it) {
        if (!v.is_number()) throw ConfigError(where + ": \"" + key + "\" must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

complex parse_alpha(const json& v, const std::string& where) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw ConfigError(where + ": \"alpha_bar\" must be a number or [re, im]");
}

JcmParams parse_params(const json& p) {
    const std::string where = "params";
    check_keys(p, {"omega", "gap", "detuning", "coupling", "alpha_bar", "n_max"}, where);
    const double omega = get_number_or(p, "omega", 1.0, where);
    const double g = get_number(p, "coupling", where);
    if (!p.contains("alpha_bar")) throw ConfigError(where + ": missing \"alpha_bar\"");
    const complex alpha = parse_alpha(p["alpha_bar"], where);
    std::optional<std::size_t> n_max;
    if (p.contains("n_max")) n_max = get_count(p, "n_max", where);
    if (p.contains("gap") == p.contains("detuning"))
        throw ConfigError(where + ": give exactly one of \"gap\" and \"detuning\"");
    try {
        if (p.contains("gap")) return JcmParams::make(omega, get_number(p, "gap", where), g, alpha, n_max);
        return JcmParams::from_detuning(omega, get_number(p, "detuning", where), g, alpha, n_max);
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("params: ") + e.what());
    }
}

JcmParams parse_physical(const json& p) {
    const std::string where = "physical";
    check_keys(p, {"bare_energies", "energy_gradients", "mass", "vib_frequency", "coupling_gradient", "n_max"}, where);
    PhysicalDimerParams phys;
    const auto e = get_number_list(p, "bare_energies", where);
    const auto d = get_number_list(p, "energy_gradients", where);
    if (e.size() != 2 || d.size() != 2)
        throw ConfigError(where + ": \"bare_energies\" and \"energy_gradients\" need two entries each");
    phys.bare_energies = {e[0], e[1]};
    phys.energy_gradients = {d[0], d[1]};
    phys.mass = get_number(p, "mass", where);
    phys.vib_frequency = get_number(p, "vib_frequency", where);
    phys.coupling_gradient = get_number(p, "coupling_gradient", where);
    std::optional<std::size_t> n_max;
    if (p.contains("n_max")) n_max = get_count(p, "n_max", where);
    try {
        return reduce_physical_model(phys, n_max);
    } catch (const InvalidParameter& ex) {
        throw ConfigError(std::string("physical: ") + ex.what());
    }
}

GammaConvention parse_convention(const json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "operator") return GammaConvention::operator_def;
        if (s == "excitation") return GammaConvention::excitation;
    }
    throw ConfigError("gamma_convention: expected \"operator\" or \"excitation\"");
}

ClosureCoupling parse_closure(const json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "closed_form") return ClosureCoupling::closed_form;
        if (s == "commutator") return ClosureCoupling::commutator;
    }
    throw ConfigError("closure: expected \"closed_form\" or \"commutator\"");
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json params_json(const JcmParams& p) {
    return {{"omega", p.omega()},
            {"gap", p.gap()},
            {"detuning", p.detuning()},
            {"coupling", p.coupling()},
            {"alpha_bar", {p.alpha_bar().real(), p.alpha_bar().imag()}},
            {"n_max", p.n_max()}};
}

json rates_block(const RatePair& r, const RateSeries& s, const TimeScales& ts) {
    return {{"omega1", r.omega1},
            {"omega2", r.omega2},
            {"omega1_squared", r.omega1_sq},
            {"omega2_squared", r.omega2_sq},
            {"t_plus_inv", r.t_plus_inv},
            {"t_minus_inv", r.t_minus_inv},
            {"sub_quantum", r.sub_quantum},
            {"series",
             {{"t_plus_inv", s.t_plus_inv},
              {"t_minus_inv", s.t_minus_inv},
              {"rel_err_plus", s.rel_err_plus},
              {"rel_err_minus", s.rel_err_minus},
              {"in_regime", s.in_regime}}},
            {"time_scales", {{"t1_inv", ts.t1_inv}, {"t2_inv", ts.t2_inv}, {"t3_inv", ts.t3_inv}, {"t4_inv", ts.t4_inv}}}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
        syy += (y[k] - my) * (y[k] - my);
    }
    return (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
}

JcmParams override_param(const JcmParams& base, const std::string& name, double v) {
    if (name == "alpha_bar") return base.with_alpha({v, 0.0});
    if (name == "coupling") return JcmParams::make(base.omega(), base.gap(), v, base.alpha_bar(), base.n_max());
    return JcmParams::from_detuning(base.omega(), v, base.coupling(), base.alpha_bar(), base.n_max());
}

}  // namespace

// ---------------------------------------------------------------- config

std::vector<double> TimeGrid::points() const {
    std::vector<double> t(n_samples);
    const double span = t_end - t_start;
    for (std::size_t k = 0; k < n_samples; ++k)
        t[k] = t_start + span * static_cast<double>(k) / static_cast<double>(n_samples - 1);
    return t;
}

RunConfig parse_config(const json& j) {
    check_keys(j, {"scenario", "params", "physical", "time", "output_dir", "emit", "gamma_convention", "closure",
                   "wavepacket", "sweep", "rates"},
               "config");
    RunConfig cfg;
    if (!j.contains("scenario") || !j["scenario"].is_string()) throw ConfigError("config: missing \"scenario\"");
    cfg.scenario = j["scenario"].get<std::string>();
    static const std::vector<std::string> kScenarios{"compare", "observables", "wavepacket", "sweep", "rates"};
    if (std::find(kScenarios.begin(), kScenarios.end(), cfg.scenario) == kScenarios.end())
        throw ConfigError("config: unknown scenario \"" + cfg.scenario + "\"");

    if (j.contains("params") == j.contains("physical"))
        throw ConfigError("config: give exactly one of \"params\" and \"physical\"");
    cfg.params = j.contains("params") ? parse_params(j["params"]) : parse_physical(j["physical"]);

    if (j.contains("time")) {
        const auto& t = j["time"];
        check_keys(t, {"t_start", "t_end", "n_samples"}, "time");
        TimeGrid g;
        g.t_start = get_number_or(t, "t_start", 0.0, "time");
        g.t_end = get_number(t, "t_end", "time");
        g.n_samples = get_count(t, "n_samples", "time");
        if (!(g.t_end > g.t_start)) throw ConfigError("time: t_end must exceed t_start");
        if (g.n_samples < 2) throw ConfigError("time: n_samples must be >= 2");
        cfg.grid = g;
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) throw ConfigError("config: \"output_dir\" must be a string");
        cfg.output_dir = j["output_dir"].get<std::string>();
    }
    if (j.contains("emit")) {
        const auto& e = j["emit"];
        check_keys(e, {"frames", "wavepacket", "report"}, "emit");
        cfg.emit.frames = get_bool_or(e, "frames", true, "emit");
        cfg.emit.wavepacket = get_bool_or(e, "wavepacket", false, "emit");
        cfg.emit.report = get_bool_or(e, "report", true, "emit");
    }
    if (j.contains("gamma_convention")) cfg.gamma_convention = parse_convention(j["gamma_convention"]);
    if (j.contains("closure")) cfg.closure = parse_closure(j["closure"]);

    if (j.contains("wavepacket")) {
        const auto& w = j["wavepacket"];
        check_keys(w, {"times", "points"}, "wavepacket");
        cfg.wavepacket.times = get_number_list(w, "times", "wavepacket");
        if (w.contains("points")) cfg.wavepacket.points = get_count(w, "points", "wavepacket");
        if (cfg.wavepacket.points < 3) throw ConfigError("wavepacket: points must be >= 3");
        for (double t : cfg.wavepacket.times)
            if (!std::isfinite(t)) throw ConfigError("wavepacket: times must be finite");
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        check_keys(s, {"parameter", "values", "threads"}, "sweep");
        if (s.contains("parameter")) {
            if (!s["parameter"].is_string()) throw ConfigError("sweep: \"parameter\" must be a string");
            cfg.sweep.parameter = s["parameter"].get<std::string>();
        }
        if (cfg.sweep.parameter != "alpha_bar" && cfg.sweep.parameter != "coupling" &&
            cfg.sweep.parameter != "detuning")
            throw ConfigError("sweep: parameter must be alpha_bar, coupling or detuning");
        cfg.sweep.values = get_number_list(s, "values", "sweep");
        if (s.contains("threads")) cfg.sweep.threads = get_count(s, "threads", "sweep");
    }
    if (cfg.scenario == "sweep" && cfg.sweep.values.empty()) throw ConfigError("sweep: \"values\" must be non-empty");
    if (j.contains("rates")) {
        const auto& r = j["rates"];
        check_keys(r, {"alpha_min", "alpha_max", "n_points"}, "rates");
        cfg.rates.alpha_min = get_number_or(r, "alpha_min", cfg.rates.alpha_min, "rates");
        cfg.rates.alpha_max = get_number_or(r, "alpha_max", cfg.rates.alpha_max, "rates");
        if (r.contains("n_points")) cfg.rates.n_points = get_count(r, "n_points", "rates");
        if (!(cfg.rates.alpha_max > cfg.rates.alpha_min) || cfg.rates.alpha_min < 0.0 || cfg.rates.n_points < 2)
            throw ConfigError("rates: need 0 <= alpha_min < alpha_max and n_points >= 2");
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

TimeGrid default_compare_grid(const JcmParams& params, const QhdConstants& c) {
    const double t_rev = revival_time(params.coupling(), c.gamma0);
    const TimeScales ts = time_scales(params, c.gamma0, c.closure);
    TimeGrid g;
    g.t_start = 0.0;
    if (!std::isfinite(t_rev)) {
        // Uncoupled: nothing revives; cover twenty vibrational periods.
        g.t_end = 20.0 * kTwoPi / params.omega();
        g.n_samples = 401;
        return g;
    }
    g.t_end = 3.0 * t_rev;
    const double per_vib = 20.0 * g.t_end * ts.t1_inv / kTwoPi;
    const double per_inv = 40.0 * g.t_end * ts.t2_inv / kTwoPi;
    g.n_samples = static_cast<std::size_t>(std::ceil(std::max(per_vib, per_inv))) + 1;
    return g;
}

// ---------------------------------------------------------------- simulation

Simulation simulate(const JcmParams& params, std::span<const double> times, const SimulationOptions& opts) {
    const StateVector s0 = initial_state(params);
    const RwaHamiltonian h(params);
    const ExactPropagator prop(h, s0);

    Simulation sim{params, qhd_init_from_state(s0, params, opts.gamma_convention, opts.closure), {}, {}, {}};
    sim.times.assign(times.begin(), times.end());
    const auto qframes = qhd_propagate(sim.qhd.state, sim.qhd.constants, times);
    const double sz0 = sim.qhd.state.sz().real();

    const double e0 = h.expectation(s0);
    const GammaMoments gm0 = gamma_constants(s0);
    RunStatistics& st = sim.stats;
    st.min_vib_bound = st.min_el_bound = st.min_el_quantum = std::numeric_limits<double>::infinity();
    st.min_purity = std::numeric_limits<double>::infinity();
    st.max_purity = -std::numeric_limits<double>::infinity();

    std::vector<double> e_vib, e_el;
    sim.rows.reserve(times.size());
    e_vib.reserve(times.size());
    e_el.reserve(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        const StateVector s = prop.state_at(t);
        const double tail = s.tail_mass();
        st.max_tail_mass = std::max(st.max_tail_mass, tail);
        if (tail > kLeakageAbort) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "truncation leakage %.3e above %.0e at t = %.17g", tail, kLeakageAbort, t);
            throw TruncationError(buf, params.n_max() + 10);
        }

        const MomentSet m = measure(s, t);
        FrameRow row;
        row.frame = make_frame(m, params);
        if (opts.check_invariants) check_frame_invariants(row.frame, m, params);
        row.sz_exact = m.sz;
        row.sz_qhd = qframes[k].sz().real();
        row.sz_analytic = inversion_analytic(t - sim.qhd.state.t, sim.qhd.constants, sz0);

        const GammaMoments gm = gamma_constants(s);
        st.norm_drift = std::max(st.norm_drift, std::abs(s.norm_squared() - 1.0));
        st.gamma_drift = std::max(st.gamma_drift, std::abs(gm.mean - gm0.mean));
        st.gamma2_drift = std::max(st.gamma2_drift, std::abs(gm.second - gm0.second));
        st.energy_drift = std::max(st.energy_drift, std::abs(row.frame.total_energy - e0));
        st.min_vib_bound = std::min(st.min_vib_bound, m.n - std::norm(m.a));
        st.min_el_bound = std::min(st.min_el_bound, m.s_plus_s_minus - std::norm(m.s_plus));
        st.min_el_quantum = std::min(st.min_el_quantum, row.frame.el_energy.quantum);
        const auto& b = row.frame.bloch;
        st.max_purity_residual = std::max(st.max_purity_residual, std::abs(b.purity - 0.5 - 2.0 * b.r2));
        st.min_purity = std::min(st.min_purity, b.purity);
        st.max_purity = std::max(st.max_purity, b.purity);
        st.max_re_corr_literal = std::max(st.max_re_corr_literal, std::abs(row.frame.corr.literal.real()));
        st.max_re_corr_symmetrized = std::max(st.max_re_corr_symmetrized, std::abs(row.frame.corr.symmetrized.real()));
        e_vib.push_back(row.frame.vib_energy.total);
        e_el.push_back(row.frame.el_energy.total);
        sim.rows.push_back(row);
    }
    st.phase_opposition = pearson(e_vib, e_el);
    st.truncation_warning = st.max_tail_mass > kLeakageWarning;
    return sim;
}

// ---------------------------------------------------------------- analysis

CollapseRevival detect_collapse_revival(std::span<const double> times, std::span<const double> values,
                                        double inversion_period, double collapse_fraction, double revival_fraction) {
    if (times.size() != values.size()) throw InvalidParameter("detect_collapse_revival: length mismatch");
    CollapseRevival r;
    r.collapse_fraction = collapse_fraction;
    r.revival_fraction = revival_fraction;
    if (!std::isfinite(inversion_period) || !(inversion_period > 0.0) || times.size() < 3) return r;

    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (dt * 40.0 > inversion_period * (1.0 + 1e-9))
        throw InvalidParameter("detect_collapse_revival: need at least 40 samples per inversion period");

    r.window = 2.0 * inversion_period;
    const auto half = static_cast<std::size_t>(std::llround(0.5 * r.window / dt));
    const std::size_t n = times.size();
    if (2 * half + 1 > n) return r;

    auto amplitude = [&](std::size_t lo, std::size_t hi) {
        const auto [mn, mx] = std::minmax_element(values.begin() + static_cast<std::ptrdiff_t>(lo),
                                                  values.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
        return *mx - *mn;
    };
    r.initial_amplitude = amplitude(0, 2 * half);
    if (!(r.initial_amplitude > 0.0)) return r;

    // Centred rolling amplitude, defined where the whole window fits.
    std::vector<double> amp(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = half; i + half < n; ++i) amp[i] = amplitude(i - half, i + half);

    std::size_t i = half;
    for (; i + half < n; ++i) {
        if (amp[i] < collapse_fraction * r.initial_amplitude) {
            r.t_collapse = times[i];
            break;
        }
    }
    if (!r.t_collapse) return r;
    for (; i + half < n; ++i) {
        if (amp[i] > revival_fraction * r.initial_amplitude) {
            r.t_revival_onset = times[i];
            break;
        }
    }
    if (!r.t_revival_onset) return r;
    std::size_t best = i;
    for (; i + half < n && amp[i] > revival_fraction * r.initial_amplitude; ++i)
        if (amp[i] > amp[best]) best = i;
    r.t_revival = times[best];
    return r;
}

WindowError validity_window_error(const JcmParams& params, GammaConvention conv, ClosureCoupling closure,
                                  std::size_t samples) {
    WindowError w;
    w.samples = samples;
    if (!(params.coupling() > 0.0)) {
        w.t_star = std::numeric_limits<double>::infinity();
        return w;
    }
    w.t_star = 1.0 / (kTwoPi * params.coupling());
    std::vector<double> t(samples);
    for (std::size_t k = 0; k < samples; ++k) t[k] = w.t_star * static_cast<double>(k) / static_cast<double>(samples);

    const StateVector s0 = initial_state(params);
    const ExactPropagator prop(RwaHamiltonian(params), s0);
    const QhdInit init = qhd_init_from_state(s0, params, conv, closure);
    const auto q = qhd_propagate(init.state, init.constants, t);
    for (std::size_t k = 0; k < samples; ++k) {
        const double exact = measure(prop.state_at(t[k]), t[k]).sz;
        w.max_abs_dsz = std::max(w.max_abs_dsz, std::abs(q[k].sz().real() - exact));
    }
    return w;
}

double mid_collapse_time(const JcmParams& params, GammaConvention conv, std::size_t samples) {
    const StateVector s0 = initial_state(params);
    const QhdInit init = qhd_init_from_state(s0, params, conv);
    const double t_rev = revival_time(params.coupling(), init.constants.gamma0);
    if (!std::isfinite(t_rev)) throw InvalidParameter("mid_collapse_time: no revival without coupling");
    const double half_period = std::numbers::pi / params.omega();
    const double lo = std::max(0.0, 0.5 * t_rev - half_period);
    const double hi = 0.5 * t_rev + half_period;

    const ExactPropagator prop(RwaHamiltonian(params), s0);
    double best_t = 0.5 * t_rev;
    double best = -1.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double t = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(samples - 1);
        const double sq = vibrational_dispersions(measure(prop.state_at(t), t)).first;
        if (sq > best) {
            best = sq;
            best_t = t;
        }
    }
    return best_t;
}

ComparisonReport build_comparison_report(const Simulation& sim, const SimulationOptions& opts) {
    ComparisonReport rep;
    rep.window = validity_window_error(sim.params, opts.gamma_convention, opts.closure);
    std::vector<double> sz;
    sz.reserve(sim.rows.size());
    for (const auto& r : sim.rows) {
        rep.max_abs_dsz_overall = std::max(rep.max_abs_dsz_overall, std::abs(r.sz_qhd - r.sz_exact));
        rep.max_abs_qhd_minus_analytic = std::max(rep.max_abs_qhd_minus_analytic, std::abs(r.sz_qhd - r.sz_analytic));
        sz.push_back(r.sz_exact);
    }
    const QhdConstants& c = sim.qhd.constants;
    rep.predicted_revival = revival_time(sim.params.coupling(), c.gamma0);
    rep.rate_pair = rates(c);
    rep.series = rate_expansions(c);
    rep.scales = time_scales(sim.params, c.gamma0, c.closure);
    const double period = rep.scales.t2_inv > 0.0 ? kTwoPi / rep.scales.t2_inv : std::numeric_limits<double>::infinity();
    rep.detection = detect_collapse_revival(sim.times, sz, period);
    return rep;
}

// ---------------------------------------------------------------- output

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_frames_csv(const std::filesystem::path& path, const Simulation& sim) {
    std::string text =
        "t,Sz_exact,Sz_qhd,Sz_analytic,sigma_q,sigma_p,sum_vib,sigma_Sx,sigma_Sy,sum_el,"
        "E_vib_total,E_vib_cl,E_vib_q,E_el_total,E_el_cl,E_el_q,Rx,Ry,Rz,R2,fidelity,corr_beta\n";
    text.reserve(sim.rows.size() * 22 * 24);
    for (const auto& r : sim.rows) {
        const auto& f = r.frame;
        const double cols[] = {f.t,
                               r.sz_exact,
                               r.sz_qhd,
                               r.sz_analytic,
                               f.vib.first,
                               f.vib.second,
                               f.vib.sum,
                               f.el.first,
                               f.el.second,
                               f.el.sum,
                               f.vib_energy.total,
                               f.vib_energy.classical,
                               f.vib_energy.quantum,
                               f.el_energy.total,
                               f.el_energy.classical,
                               f.el_energy.quantum,
                               f.bloch.r[0],
                               f.bloch.r[1],
                               f.bloch.r[2],
                               f.bloch.r2,
                               f.bloch.purity,
                               f.corr.value()};
        bool first = true;
        for (double v : cols) {
            if (!first) text += ',';
            text += format_double(v);
            first = false;
        }
        text += '\n';
    }
    write_text(path, text);
}

json report_json(const RunConfig& cfg, const Simulation& sim, const ComparisonReport& rep) {
    const auto& st = sim.stats;
    const auto& c = sim.qhd.constants;
    const GammaMoments op = gamma_constants(initial_state(sim.params));
    json warnings = json::array();
    if (st.truncation_warning) warnings.push_back("truncation leakage above 1e-6");
    if (rep.rate_pair.sub_quantum) warnings.push_back("sub-quantum regime: omega2 is imaginary");
    if (!rep.series.in_regime) warnings.push_back("rate series outside gamma0 >= 25, |delta| <= 0.1 g sqrt(gamma0)");

    json j;
    j["scenario"] = cfg.scenario;
    j["params"] = params_json(sim.params);
    j["gamma_convention"] = std::string(to_string(cfg.gamma_convention));
    j["closure"] = std::string(to_string(cfg.closure));
    j["constants"] = {{"gamma0", c.gamma0},
                      {"gamma2", c.gamma2},
                      {"gamma0_operator", op.mean},
                      {"gamma2_operator", op.second},
                      {"kappa", c.kappa()}};
    j["grid"] = {{"t_start", sim.times.front()}, {"t_end", sim.times.back()}, {"n_samples", sim.times.size()}};
    j["validity_window"] = {{"t_star", rep.window.t_star},
                            {"max_abs_dSz", rep.window.max_abs_dsz},
                            {"samples", rep.window.samples}};
    j["max_abs_dSz_overall"] = rep.max_abs_dsz_overall;
    j["max_abs_qhd_minus_analytic"] = rep.max_abs_qhd_minus_analytic;
    j["collapse_revival"] = {{"t_collapse", opt_json(rep.detection.t_collapse)},
                             {"t_revival", opt_json(rep.detection.t_revival)},
                             {"t_revival_onset", opt_json(rep.detection.t_revival_onset)},
                             {"initial_amplitude", rep.detection.initial_amplitude},
                             {"window", rep.detection.window},
                             {"collapse_fraction", rep.detection.collapse_fraction},
                             {"revival_fraction", rep.detection.revival_fraction}};
    j["predicted_revival_time"] = std::isfinite(rep.predicted_revival) ? json(rep.predicted_revival) : json(nullptr);
    j["rates"] = rates_block(rep.rate_pair, rep.series, rep.scales);
    j["conservation"] = {{"norm_drift", st.norm_drift},
                         {"gamma_drift", st.gamma_drift},
                         {"gamma2_drift", st.gamma2_drift},
                         {"energy_drift", st.energy_drift}};
    j["observables"] = {{"min_vib_uncertainty_margin", st.min_vib_bound},
                        {"min_el_uncertainty_margin", st.min_el_bound},
                        {"min_el_quantum_energy", st.min_el_quantum},
                        {"max_purity_residual", st.max_purity_residual},
                        {"min_purity", st.min_purity},
                        {"max_purity", st.max_purity},
                        {"max_abs_re_corr_literal", st.max_re_corr_literal},
                        {"max_abs_re_corr_symmetrized", st.max_re_corr_symmetrized},
                        {"energy_phase_correlation", st.phase_opposition}};
    j["truncation"] = {{"max_tail_mass", st.max_tail_mass}, {"warning", st.truncation_warning}};
    j["warnings"] = warnings;
    return j;
}

nlohmann::json rates_json(double g, double nbar, double delta, double omega, GammaConvention conv,
                          ClosureCoupling closure) {
    if (!(g >= 0.0) || !(nbar >= 0.0) || !std::isfinite(delta) || !(omega > 0.0))
        throw InvalidParameter("rates: need g >= 0, nbar >= 0, omega > 0 and finite delta");
    QhdConstants c;
    c.gamma0 = nbar + (conv == GammaConvention::operator_def ? 0.5 : 0.0);
    c.gamma2 = c.gamma0 * c.gamma0 + nbar;  // coherent state: variance nbar
    c.delta = delta;
    c.g = g;
    c.closure = closure;
    const JcmParams p = JcmParams::from_detuning(omega, delta, g, 0.0, 1);
    json j;
    j["inputs"] = {{"g", g}, {"nbar", nbar}, {"delta", delta}, {"omega", omega},
                   {"gamma_convention", std::string(to_string(conv))}, {"closure", std::string(to_string(closure))}};
    j["gamma0"] = c.gamma0;
    j.update(rates_block(rates(c), rate_expansions(c), time_scales(p, c.gamma0, closure)));
    const double t_rev = revival_time(g, c.gamma0);
    j["revival_time"] = std::isfinite(t_rev) ? json(t_rev) : json(nullptr);
    j["validity_window"] = g > 0.0 ? json(1.0 / (kTwoPi * g)) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------- scenarios

namespace {

struct CompareResult {
    Simulation sim;
    ComparisonReport report;
};

CompareResult run_compare(const RunConfig& cfg, const JcmParams& params) {
    SimulationOptions opts{cfg.gamma_convention, cfg.closure, true};
    const QhdInit init = qhd_init_from_state(initial_state(params), params, cfg.gamma_convention, cfg.closure);
    const TimeGrid grid = cfg.grid.value_or(default_compare_grid(params, init.constants));
    const auto times = grid.points();
    CompareResult r{simulate(params, times, opts), {}};
    r.report = build_comparison_report(r.sim, opts);
    return r;
}

std::vector<std::filesystem::path> write_compare(const RunConfig& cfg, const CompareResult& r,
                                                 const std::filesystem::path& dir, std::ostream& log,
                                                 json extra = json::object()) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> files;
    if (r.sim.stats.truncation_warning)
        log << "warning: truncation leakage " << format_double(r.sim.stats.max_tail_mass) << " above 1e-6\n";
    if (r.report.rate_pair.sub_quantum)
        log << "warning: sub-quantum regime (omega2^2 < 0)\n";
    if (cfg.emit.frames) {
        files.push_back(dir / "frames.csv");
        write_frames_csv(files.back(), r.sim);
    }
    if (cfg.emit.report) {
        json j = report_json(cfg, r.sim, r.report);
        j.update(extra);
        files.push_back(dir / "report.json");
        write_text(files.back(), dump(j));
    }
    return files;
}

std::vector<std::filesystem::path> run_wavepacket(const RunConfig& cfg, std::ostream& log) {
    const CompareResult r = run_compare(cfg, cfg.params);
    const JcmParams& p = cfg.params;
    std::vector<double> slice_times = cfg.wavepacket.times;
    if (slice_times.empty()) {
        slice_times = {0.0};
        if (p.coupling() > 0.0) {
            slice_times.push_back(mid_collapse_time(p, cfg.gamma_convention));
            slice_times.push_back(r.report.predicted_revival);
        }
    }
    const auto q = default_wavepacket_grid(p.alpha_bar(), cfg.wavepacket.points);
    const StateVector s0 = initial_state(p);
    const ExactPropagator prop(RwaHamiltonian(p), s0);

    std::string text = "t,q,rho0,rho1,total\n";
    json slices = json::array();
    for (double t : slice_times) {
        const StateVector s = prop.state_at(t);
        const WavepacketSlice w = wavepacket_density(s, q, t);
        const double integral = w.integral();
        if (std::abs(integral - 1.0) > 1e-6) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "wavepacket density integrates to %.10f at t = %.17g", integral, t);
            throw InvariantViolation(buf, t);
        }
        const auto peaks = density_peaks(w);
        const double sep = peaks.size() >= 2 ? std::abs(peaks[0] - peaks[1]) : 0.0;
        slices.push_back({{"t", t},
                          {"integral", integral},
                          {"peaks", peaks},
                          {"peak_separation", sep},
                          {"sigma_q", vibrational_dispersions(measure(s, t)).first}});
        for (std::size_t k = 0; k < q.size(); ++k) {
            text += format_double(t) + ',' + format_double(w.q[k]) + ',' + format_double(w.rho0[k]) + ',' +
                    format_double(w.rho1[k]) + ',' + format_double(w.total[k]) + '\n';
        }
    }
    auto files = write_compare(cfg, r, cfg.output_dir, log, {{"wavepacket", {{"points", q.size()}, {"slices", slices}}}});
    files.push_back(cfg.output_dir / "wavepacket.csv");
    write_text(files.back(), text);
    return files;
}

std::vector<std::filesystem::path> run_sweep(const RunConfig& cfg, std::ostream& log) {
    const auto& values = cfg.sweep.values;
    const std::size_t n = values.size();
    std::vector<std::optional<CompareResult>> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::string> logs(n);
    std::vector<std::vector<std::filesystem::path>> written(n);

    auto subdir = [&](std::size_t k) {
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", k);
        return cfg.output_dir / name;
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            try {
                RunConfig sub = cfg;
                sub.params = override_param(cfg.params, cfg.sweep.parameter, values[k]);
                sub.scenario = "compare";
                results[k] = run_compare(sub, sub.params);
                std::ostringstream os;
                written[k] = write_compare(sub, *results[k], subdir(k), os);
                logs[k] = os.str();
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    std::size_t threads = cfg.sweep.threads ? cfg.sweep.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (std::size_t k = 0; k < n; ++k) {
        log << logs[k];
        if (errors[k]) std::rethrow_exception(errors[k]);
    }

    // Single-threaded merge in input order.
    std::vector<std::filesystem::path> files;
    std::string text =
        "index," + cfg.sweep.parameter +
        ",t_star,max_abs_dSz_window,max_abs_dSz_overall,t_collapse,t_revival,predicted_revival,omega1,omega2,t_plus_inv,t_minus_inv\n";
    json runs = json::array();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& rep = results[k]->report;
        auto opt = [](const std::optional<double>& v) {
            return v ? format_double(*v) : std::string("nan");
        };
        text += std::to_string(k) + ',' + format_double(values[k]) + ',' + format_double(rep.window.t_star) + ',' +
                format_double(rep.window.max_abs_dsz) + ',' + format_double(rep.max_abs_dsz_overall) + ',' +
                opt(rep.detection.t_collapse) + ',' + opt(rep.detection.t_revival) + ',' +
                format_double(rep.predicted_revival) + ',' + format_double(rep.rate_pair.omega1) + ',' +
                format_double(rep.rate_pair.omega2) + ',' + format_double(rep.rate_pair.t_plus_inv) + ',' +
                format_double(rep.rate_pair.t_minus_inv) + '\n';
        runs.push_back({{"index", k},
                        {"value", values[k]},
                        {"directory", subdir(k).filename().string()},
                        {"max_abs_dSz_window", rep.window.max_abs_dsz},
                        {"t_revival", opt_json(rep.detection.t_revival)}});
        files.insert(files.end(), written[k].begin(), written[k].end());
    }
    std::filesystem::create_directories(cfg.output_dir);
    files.push_back(cfg.output_dir / "sweep.csv");
    write_text(files.back(), text);
    if (cfg.emit.report) {
        const json j = {{"scenario", "sweep"}, {"parameter", cfg.sweep.parameter}, {"runs", runs}};
        files.push_back(cfg.output_dir / "sweep_report.json");
        write_text(files.back(), dump(j));
    }
    return files;
}

std::vector<std::filesystem::path> run_rates(const RunConfig& cfg, std::ostream&) {
    const JcmParams& p = cfg.params;
    const double shift = cfg.gamma_convention == GammaConvention::operator_def ? 0.5 : 0.0;
    auto constants = [&](double a) {
        QhdConstants c;
        c.gamma0 = a * a + shift;
        c.gamma2 = c.gamma0 * c.gamma0 + a * a;
        c.delta = p.detuning();
        c.g = p.coupling();
        c.closure = cfg.closure;
        return c;
    };
    const auto& ro = cfg.rates;
    std::string text = "alpha_bar,gamma0,omega1,omega2_squared,t_plus_inv,t_minus_inv,sub_quantum,series_plus,series_minus\n";
    for (std::size_t k = 0; k < ro.n_points; ++k) {
        const double a = ro.alpha_min + (ro.alpha_max - ro.alpha_min) * static_cast<double>(k) /
                                            static_cast<double>(ro.n_points - 1);
        if (!(a * a + shift > 0.0)) continue;
        const QhdConstants c = constants(a);
        const RatePair r = rates(c);
        const RateSeries s = rate_expansions(c);
        text += format_double(a) + ',' + format_double(c.gamma0) + ',' + format_double(r.omega1) + ',' +
                format_double(r.omega2_sq) + ',' + format_double(r.t_plus_inv) + ',' + format_double(r.t_minus_inv) +
                ',' + (r.sub_quantum ? "1" : "0") + ',' + format_double(s.t_plus_inv) + ',' +
                format_double(s.t_minus_inv) + '\n';
    }

    // Branch point: omega2^2 changes sign; bisection on alpha inside the range.
    json branch = nullptr;
    auto w2 = [&](double a) { return rates(constants(a)).omega2_sq; };
    double lo = ro.alpha_min > 0.0 || shift > 0.0 ? ro.alpha_min : 1e-12;
    double hi = ro.alpha_max;
    if (w2(lo) <= 0.0 && w2(hi) >= 0.0) {
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            (w2(mid) < 0.0 ? lo : hi) = mid;
        }
        const RatePair r = rates(constants(hi));
        branch = {{"alpha_bar", hi}, {"t_plus_inv", r.t_plus_inv}, {"t_minus_inv", r.t_minus_inv}};
    }

    std::filesystem::create_directories(cfg.output_dir);
    std::vector<std::filesystem::path> files{cfg.output_dir / "rates.csv"};
    write_text(files.back(), text);
    if (cfg.emit.report) {
        const json j = {{"scenario", "rates"},
                        {"params", params_json(p)},
                        {"gamma_convention", std::string(to_string(cfg.gamma_convention))},
                        {"closure", std::string(to_string(cfg.closure))},
                        {"alpha_range", {ro.alpha_min, ro.alpha_max}},
                        {"n_points", ro.n_points},
                        {"branch_point", branch}};
        files.push_back(cfg.output_dir / "rates_report.json");
        write_text(files.back(), dump(j));
    }
    return files;
}

}  // namespace

std::vector<std::filesystem::path> run(const RunConfig& cfg, std::ostream& log) {
    if (cfg.scenario == "compare" || cfg.scenario == "observables") {
        RunConfig c = cfg;
        if (cfg.emit.wavepacket) return run_wavepacket(c, log);
        return write_compare(c, run_compare(c, c.params), c.output_dir, log);
    }
    if (cfg.scenario == "wavepacket") return run_wavepacket(cfg, log);
    if (cfg.scenario == "sweep") return run_sweep(cfg, log);
    if (cfg.scenario == "rates") return run_rates(cfg, log);
    throw ConfigError("unknown scenario \"" + cfg.scenario + "\"");
}

}  // namespace dimerdyn
