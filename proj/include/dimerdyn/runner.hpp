// runner.hpp: configuration, scenario orchestration and deterministic output
//
// A run is described by one JSON document (unknown keys rejected). Scenarios:
//   compare      exact vs closure inversion plus all observables, report
//   observables  same frame stream, report centred on the observable checks
//   wavepacket   frame stream plus coordinate-space slices
//   sweep        independent compare runs over one parameter, run concurrently
//   rates        rate/branch table over a displacement range

#pragma once

#include "dimerdyn/exact.hpp"
#include "dimerdyn/model.hpp"
#include "dimerdyn/observables.hpp"
#include "dimerdyn/qhd.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dimerdyn {

struct TimeGrid {
    double t_start{0.0};
    double t_end{1.0};
    std::size_t n_samples{2};

    std::vector<double> points() const;
};

struct EmitFlags {
    bool frames{true};
    bool wavepacket{false};
    bool report{true};
};

struct WavepacketOptions {
    std::vector<double> times;        // empty: t = 0, mid-collapse, revival
    std::size_t points{801};
};

struct SweepOptions {
    std::string parameter{"alpha_bar"};  // alpha_bar | coupling | detuning
    std::vector<double> values;
    std::size_t threads{0};              // 0: hardware concurrency
};

struct RatesOptions {
    double alpha_min{0.2};
    double alpha_max{10.0};
    std::size_t n_points{99};
};

struct RunConfig {
    std::string scenario{"compare"};
    JcmParams params{JcmParams::make(1.0, 1.0, 0.25, 3.0)};
    std::optional<TimeGrid> grid;            // default chosen per scenario
    std::filesystem::path output_dir{"out"};
    EmitFlags emit;
    GammaConvention gamma_convention{GammaConvention::excitation};
    ClosureCoupling closure{ClosureCoupling::closed_form};
    WavepacketOptions wavepacket;
    SweepOptions sweep;
    RatesOptions rates;
};

// Throws ConfigError on malformed input, unknown keys or violated invariants.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// [0, 3 t_rev] with max(20 samples per vibrational period, 40 per inversion period).
TimeGrid default_compare_grid(const JcmParams& params, const QhdConstants& c);

// ---------------------------------------------------------------- simulation

struct FrameRow {
    double sz_exact{0.0};
    double sz_qhd{0.0};
    double sz_analytic{0.0};
    ObservableFrame frame;
};

// Largest deviations from t = 0 and smallest bound margins seen along a run.
struct RunStatistics {
    double norm_drift{0.0};
    double gamma_drift{0.0};
    double gamma2_drift{0.0};
    double energy_drift{0.0};
    double min_vib_bound{0.0};          // min <a^dag a> - |<a>|^2
    double min_el_bound{0.0};           // min <S+S-> - |<S+>|^2
    double min_el_quantum{0.0};         // min E_quant^el
    double max_purity_residual{0.0};    // max |Tr rho^2 - 1/2 - 2 R^2|
    double min_purity{1.0};
    double max_purity{1.0};
    double max_re_corr_literal{0.0};
    double max_re_corr_symmetrized{0.0};
    double phase_opposition{0.0};       // Pearson corr(E_vib_total, E_el_total)
    double max_tail_mass{0.0};
    bool truncation_warning{false};
};

struct Simulation {
    JcmParams params;
    QhdInit qhd;
    std::vector<double> times;
    std::vector<FrameRow> rows;
    RunStatistics stats;
};

struct SimulationOptions {
    GammaConvention gamma_convention{GammaConvention::excitation};
    ClosureCoupling closure{ClosureCoupling::closed_form};
    bool check_invariants{true};
};

// Exact and closure propagation on the grid with every frame checked.
// Throws InvariantViolation on the first failing frame and TruncationError
// when the top-five-level mass exceeds 1e-4.
Simulation simulate(const JcmParams& params, std::span<const double> times,
                    const SimulationOptions& opts = {});

// Leakage above which a run aborts instead of warning.
inline constexpr double kLeakageAbort = 1e-4;

// ---------------------------------------------------------------- analysis

struct CollapseRevival {
    std::optional<double> t_collapse;
    std::optional<double> t_revival;        // envelope peak of the first revival excursion
    std::optional<double> t_revival_onset;  // first crossing of the revival threshold
    double initial_amplitude{0.0};
    double window{0.0};
    double collapse_fraction{0.1};
    double revival_fraction{0.3};
};

// Rolling max-min over a centred window of two inversion periods. Needs at
// least 40 samples per period (InvalidParameter otherwise); a non-finite or
// non-positive period yields an empty result.
CollapseRevival detect_collapse_revival(std::span<const double> times, std::span<const double> values,
                                        double inversion_period, double collapse_fraction = 0.1,
                                        double revival_fraction = 0.3);

struct WindowError {
    double t_star{0.0};        // 1 / (2 pi g)
    double max_abs_dsz{0.0};   // max |S_z closure - S_z exact| for t < t_star
    std::size_t samples{0};
};

// Dense sampling of [0, t_star) independent of the output grid.
WindowError validity_window_error(const JcmParams& params, GammaConvention conv, ClosureCoupling closure,
                                  std::size_t samples = 401);

// Frame of largest sigma_q within one vibrational period centred on t_rev / 2.
double mid_collapse_time(const JcmParams& params, GammaConvention conv = GammaConvention::excitation,
                         std::size_t samples = 401);

struct ComparisonReport {
    WindowError window;
    double max_abs_dsz_overall{0.0};
    double max_abs_qhd_minus_analytic{0.0};
    CollapseRevival detection;
    double predicted_revival{0.0};
    RatePair rate_pair;
    RateSeries series;
    TimeScales scales{};
};

ComparisonReport build_comparison_report(const Simulation& sim, const SimulationOptions& opts);

// ---------------------------------------------------------------- output

// printf "%.17g"; NaN and infinities spelled out so the CSV stays parseable.
std::string format_double(double x);

void write_frames_csv(const std::filesystem::path& path, const Simulation& sim);
nlohmann::json report_json(const RunConfig& cfg, const Simulation& sim, const ComparisonReport& rep);

// Executes the configured scenario and writes its files under cfg.output_dir.
// Returns the list of written files; diagnostics go to `log`.
std::vector<std::filesystem::path> run(const RunConfig& cfg, std::ostream& log);

// The rates subcommand payload.
nlohmann::json rates_json(double g, double nbar, double delta, double omega, GammaConvention conv,
                          ClosureCoupling closure);

}  // namespace dimerdyn
