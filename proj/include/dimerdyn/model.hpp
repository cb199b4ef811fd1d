// model.hpp: model parameters, product basis and initial states
//
// Dimensionless units: hbar = 1, the vibrational frequency sets the time unit.
// The product basis |i> (x) |n> with electronic level i in {0,1} and Fock
// number n in [0, n_max] is stored flat with k = 2n + i.

#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dimerdyn {

using complex = std::complex<double>;

// Dimer parameters in physical units (hbar = 1).
struct PhysicalDimerParams {
    std::array<double, 2> bare_energies{0.0, 0.0};     // eps_i^(0)
    std::array<double, 2> energy_gradients{0.0, 0.0};  // d eps_i / dq
    double mass{1.0};
    double vib_frequency{1.0};
    double coupling_gradient{0.0};                     // dJ/dq

    void validate() const;
};

// Rotating-wave two-level + one-mode model. Immutable once built.
class JcmParams {
public:
    // n_max defaults to default_cutoff(alpha_bar).
    static JcmParams make(double omega, double gap, double coupling, complex alpha_bar,
                          std::optional<std::size_t> n_max = std::nullopt);
    static JcmParams from_detuning(double omega, double detuning, double coupling,
                                   complex alpha_bar,
                                   std::optional<std::size_t> n_max = std::nullopt);

    double omega() const noexcept { return omega_; }
    double gap() const noexcept { return gap_; }
    double detuning() const noexcept { return detuning_; }
    double coupling() const noexcept { return coupling_; }
    complex alpha_bar() const noexcept { return alpha_bar_; }
    std::size_t n_max() const noexcept { return n_max_; }
    std::size_t dim() const noexcept { return 2 * (n_max_ + 1); }

    JcmParams with_n_max(std::size_t n_max) const;
    JcmParams with_alpha(complex alpha_bar) const;

    // Throws InvalidParameter unless delta == gap - omega bit for bit, g >= 0,
    // omega > 0 and n_max >= 1.
    void validate() const;

private:
    JcmParams(double omega, double gap, double coupling, complex alpha_bar, std::size_t n_max);

    double omega_;
    double gap_;
    double detuning_;
    double coupling_;
    complex alpha_bar_;
    std::size_t n_max_;
};

struct BasisLabel {
    int level;         // 0 or 1
    std::size_t fock;  // n

    friend bool operator==(const BasisLabel&, const BasisLabel&) = default;
};

constexpr std::size_t flatten(BasisLabel b) noexcept { return 2 * b.fock + static_cast<std::size_t>(b.level); }
constexpr BasisLabel unflatten(std::size_t k) noexcept { return {static_cast<int>(k % 2), k / 2}; }

// Amplitudes c_{i,n} over the truncated product basis.
class StateVector {
public:
    // Throws InvalidParameter if the length is odd, shorter than 4, or the
    // norm deviates from 1 by more than 1e-10.
    explicit StateVector(std::vector<complex> amplitudes);

    static StateVector basis_state(std::size_t n_max, int level, std::size_t fock);
    // (c0 |0> + c1 |1>) (x) sum_n osc[n] |n>; osc.size() == n_max + 1.
    static StateVector product(complex c0, complex c1, std::span<const complex> osc);

    std::size_t n_max() const noexcept { return amps_.size() / 2 - 1; }
    std::size_t size() const noexcept { return amps_.size(); }
    complex operator()(int level, std::size_t fock) const { return amps_[2 * fock + static_cast<std::size_t>(level)]; }
    std::span<const complex> amplitudes() const noexcept { return amps_; }

    double norm_squared() const noexcept;
    // Probability in the top `levels` Fock levels (both electronic states).
    double tail_mass(std::size_t levels = 5) const noexcept;

private:
    std::vector<complex> amps_;
};

double distance(const StateVector& a, const StateVector& b);

// ---------------------------------------------------------------- operations

JcmParams reduce_physical_model(const PhysicalDimerParams& p,
                                std::optional<std::size_t> n_max = std::nullopt);

// ceil(|alpha|^2 + 8|alpha| + 10); keeps the coherent tail below 1e-8 for |alpha|^2 <= 100.
std::size_t default_cutoff(complex alpha_bar);

// Coherent-state Fock amplitudes exp(-|a|^2/2) a^n / sqrt(n!) for n = 0..n_max,
// renormalized after the tail check. Throws TruncationError when the mass in
// the top five levels exceeds 1e-8.
std::vector<complex> coherent_amplitudes(complex alpha_bar, std::size_t n_max);

// Lower electronic level times the coherent state alpha_bar.
StateVector initial_state(const JcmParams& params);

// <gamma> and <gamma^2> for gamma = a^dag a + S+S- + 1/2.
struct GammaMoments {
    double mean;
    double second;
};
GammaMoments gamma_constants(const StateVector& s);

}  // namespace dimerdyn
