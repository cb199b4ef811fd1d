// observables.hpp: dispersions, energy partitions, Bloch vector, purity,
// electron-vibrational correlator and coordinate-space wavepackets
//
// All vibrational quantities use hbar = m = omega = 1, so q = (a + a^dag)/sqrt(2)
// and p = i(a^dag - a)/sqrt(2).

#pragma once

#include "dimerdyn/model.hpp"
#include "dimerdyn/moments.hpp"

#include <array>
#include <span>
#include <vector>

namespace dimerdyn {

struct Dispersions {
    double first{0.0};   // sigma_q or sigma_Sx
    double second{0.0};  // sigma_p or sigma_Sy
    double sum{0.0};     // vibrational: (sigma_q + sigma_p)/2; electronic: sigma_Sx + sigma_Sy
};

struct EnergySplit {
    double total{0.0};
    double classical{0.0};  // semiclassical (vibrational) or quasiclassical (electronic)
    double quantum{0.0};
};

// sigma_q = <q^2> - <q>^2, sigma_p = <p^2> - <p>^2; sum = <a^dag a> + 1/2 - |<a>|^2.
Dispersions vibrational_dispersions(const MomentSet& m);
EnergySplit vibrational_energies(const MomentSet& m, double omega);

// sigma_Sx = <S_x^2> - <S_x>^2 etc. for a spin 1/2; sum = 1/2 - |<S+>|^2.
Dispersions electronic_dispersions(const MomentSet& m);
EnergySplit electronic_energies(const MomentSet& m, double gap);

struct BlochData {
    std::array<double, 3> r{};  // (<S_x>, <S_y>, <S_z>) with S+ = S_x + i S_y
    double r2{0.0};             // |R|^2 from the components
    double r2_ladder{0.0};      // 1/4 + |<S+>|^2 - <S+S-><S-S+>
    double rxy2{0.0};           // |<S+>|^2
    double purity{1.0};         // Tr rho^2 = 1 + 2|<S+>|^2 - 2<S+S-><S-S+>
};

BlochData bloch_and_fidelity(const MomentSet& m);

struct Correlator {
    complex literal;      // as written: <beta> - <a><S+> - <a^dag><S+>
    complex symmetrized;  // <beta> - <a^dag><S-> + <a><S+>
    // Plotted magnitude: the symmetrized form is purely imaginary.
    double value() const { return symmetrized.imag(); }
};

Correlator correlator_beta_r(const MomentSet& m);

// One time sample of every derived observable.
struct ObservableFrame {
    double t{0.0};
    double sz{0.0};
    Dispersions vib;
    EnergySplit vib_energy;
    Dispersions el;
    EnergySplit el_energy;
    BlochData bloch;
    Correlator corr;
    double total_energy{0.0};  // E_vib_total + E_el_total + g <alpha> = <H>
};

ObservableFrame make_frame(const MomentSet& m, const JcmParams& params);

// Throws InvariantViolation (carrying m.t) when any of the following fails:
// uncertainty bounds >= -1e-12, E_quant^el / Omega >= -1e-12, both energy
// partitions closing to 1e-10 through the dispersion route, purity identity
// to 1e-10, purity in [1/2, 1] and R^2 in [0, 1/4] within 1e-12.
void check_frame_invariants(const ObservableFrame& f, const MomentSet& m, const JcmParams& params);

// ---------------------------------------------------------------- wavepackets

struct WavepacketSlice {
    double t{0.0};
    std::vector<double> q;
    std::vector<double> rho0;   // |psi_0(q)|^2
    std::vector<double> rho1;   // |psi_1(q)|^2
    std::vector<double> total;

    // Trapezoid integral of total over q.
    double integral() const;
};

// Uniform grid over [-|alpha| sqrt(2) - 6, |alpha| sqrt(2) + 6].
std::vector<double> default_wavepacket_grid(complex alpha_bar, std::size_t points = 801);

// psi_i(q) = sum_n c_{i,n} phi_n(q) with phi_n the normalized oscillator
// eigenfunctions from the three-term recurrence. Throws InvalidParameter for
// n_max > 600 or a grid that is not strictly increasing.
WavepacketSlice wavepacket_density(const StateVector& s, std::span<const double> q, double t = 0.0);

// phi_0..phi_{n_max} at one point, rescaled internally so large n and |q| do not overflow.
std::vector<double> oscillator_eigenfunctions(std::size_t n_max, double q);

// Positions of interior local maxima of total whose height is at least
// min_fraction of the global maximum, sorted by decreasing height.
std::vector<double> density_peaks(const WavepacketSlice& w, double min_fraction = 0.1);

}  // namespace dimerdyn
