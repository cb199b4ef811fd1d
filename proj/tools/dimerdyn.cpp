// dimerdyn: command-line front end
//
//   dimerdyn run --config <path> [--out <dir>]
//   dimerdyn rates --g <f> --nbar <f> --delta <f> [--omega <f>]

#include "dimerdyn/errors.hpp"
#include "dimerdyn/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfig = 2,
    kInvariant = 3,
    kTruncation = 4,
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact and closure dynamics of a two-level system coupled to one vibrational mode"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    auto* run_cmd = app.add_subcommand("run", "Execute the scenario described by a JSON config");
    run_cmd->add_option("--config", config_path, "Path to the JSON config")->required();
    run_cmd->add_option("--out", out_dir, "Output directory (overrides output_dir)");

    double g = 0.0, nbar = 0.0, delta = 0.0, omega = 1.0;
    std::string convention = "excitation";
    std::string closure = "closed_form";
    auto* rates_cmd = app.add_subcommand("rates", "Print inversion/relaxation rates and time scales as JSON");
    rates_cmd->add_option("--g", g, "Coupling g")->required();
    rates_cmd->add_option("--nbar", nbar, "Initial mean quanta <a^dag a>")->required();
    rates_cmd->add_option("--delta", delta, "Detuning Omega - omega")->required();
    rates_cmd->add_option("--omega", omega, "Vibrational frequency")->capture_default_str();
    rates_cmd->add_option("--gamma-convention", convention, "excitation | operator")
        ->check(CLI::IsMember({"excitation", "operator"}))
        ->capture_default_str();
    rates_cmd->add_option("--closure", closure, "closed_form | commutator")
        ->check(CLI::IsMember({"closed_form", "commutator"}))
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            dimerdyn::RunConfig cfg = dimerdyn::load_config(config_path);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            const auto files = dimerdyn::run(cfg, std::cerr);
            for (const auto& f : files) std::cout << f.string() << '\n';
            return kOk;
        }
        const auto conv = convention == "operator" ? dimerdyn::GammaConvention::operator_def
                                                   : dimerdyn::GammaConvention::excitation;
        const auto cl = closure == "commutator" ? dimerdyn::ClosureCoupling::commutator
                                                : dimerdyn::ClosureCoupling::closed_form;
        std::cout << dimerdyn::rates_json(g, nbar, delta, omega, conv, cl).dump(2) << '\n';
        return kOk;
    } catch (const dimerdyn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const dimerdyn::InvariantViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvariant;
    } catch (const dimerdyn::TruncationError& e) {
        std::cerr << "truncation error: " << e.what() << " (suggested n_max " << e.suggested_n_max << ")\n";
        return kTruncation;
    } catch (const dimerdyn::InvalidParameter& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
