#include "dimerdyn/model.hpp"

#include "dimerdyn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dimerdyn {

void PhysicalDimerParams::validate() const {
    if (!(mass > 0.0)) throw InvalidParameter("PhysicalDimerParams: mass must be positive");
    if (!(vib_frequency > 0.0))
        throw InvalidParameter("PhysicalDimerParams: vibrational frequency must be positive");
}

JcmParams::JcmParams(double omega, double gap, double coupling, complex alpha_bar, std::size_t n_max)
    : omega_(omega),
      gap_(gap),
      detuning_(gap - omega),
      coupling_(coupling),
      alpha_bar_(alpha_bar),
      n_max_(n_max) {}

JcmParams JcmParams::make(double omega, double gap, double coupling, complex alpha_bar,
                          std::optional<std::size_t> n_max) {
    JcmParams p(omega, gap, coupling, alpha_bar, n_max.value_or(default_cutoff(alpha_bar)));
    p.validate();
    return p;
}

JcmParams JcmParams::from_detuning(double omega, double detuning, double coupling,
                                   complex alpha_bar, std::optional<std::size_t> n_max) {
    return make(omega, omega + detuning, coupling, alpha_bar, n_max);
}

JcmParams JcmParams::with_n_max(std::size_t n_max) const {
    return make(omega_, gap_, coupling_, alpha_bar_, n_max);
}

JcmParams JcmParams::with_alpha(complex alpha_bar) const {
    return make(omega_, gap_, coupling_, alpha_bar, default_cutoff(alpha_bar));
}

void JcmParams::validate() const {
    if (!(omega_ > 0.0) || !std::isfinite(omega_))
        throw InvalidParameter("JcmParams: omega must be positive and finite");
    if (!std::isfinite(gap_)) throw InvalidParameter("JcmParams: gap must be finite");
    if (detuning_ != gap_ - omega_) throw InvalidParameter("JcmParams: detuning != gap - omega");
    if (!(coupling_ >= 0.0) || !std::isfinite(coupling_))
        throw InvalidParameter("JcmParams: coupling must be >= 0");
    if (!std::isfinite(alpha_bar_.real()) || !std::isfinite(alpha_bar_.imag()))
        throw InvalidParameter("JcmParams: alpha_bar must be finite");
    if (n_max_ < 1) throw InvalidParameter("JcmParams: n_max must be >= 1");
}

// ---------------------------------------------------------------- StateVector

StateVector::StateVector(std::vector<complex> amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() < 4 || amps_.size() % 2 != 0)
        throw InvalidParameter("StateVector: length must be 2(n_max+1) with n_max >= 1");
    const double n2 = norm_squared();
    if (std::abs(n2 - 1.0) > 1e-10)
        throw InvalidParameter("StateVector: not normalized (|psi|^2 = " + std::to_string(n2) + ")");
}

StateVector StateVector::basis_state(std::size_t n_max, int level, std::size_t fock) {
    if (level != 0 && level != 1) throw InvalidParameter("basis_state: level must be 0 or 1");
    if (fock > n_max) throw InvalidParameter("basis_state: Fock number above cutoff");
    std::vector<complex> a(2 * (n_max + 1));
    a[flatten({level, fock})] = 1.0;
    return StateVector(std::move(a));
}

StateVector StateVector::product(complex c0, complex c1, std::span<const complex> osc) {
    std::vector<complex> a(2 * osc.size());
    for (std::size_t n = 0; n < osc.size(); ++n) {
        a[flatten({0, n})] = c0 * osc[n];
        a[flatten({1, n})] = c1 * osc[n];
    }
    return StateVector(std::move(a));
}

double StateVector::norm_squared() const noexcept {
    double s = 0.0;
    for (const auto& c : amps_) s += std::norm(c);
    return s;
}

double StateVector::tail_mass(std::size_t levels) const noexcept {
    const std::size_t nm = n_max();
    const std::size_t first = nm + 1 > levels ? nm + 1 - levels : 0;
    double s = 0.0;
    for (std::size_t n = first; n <= nm; ++n) s += std::norm(amps_[2 * n]) + std::norm(amps_[2 * n + 1]);
    return s;
}

double distance(const StateVector& a, const StateVector& b) {
    if (a.size() != b.size()) throw InvalidParameter("distance: state dimensions differ");
    double s = 0.0;
    const auto x = a.amplitudes();
    const auto y = b.amplitudes();
    for (std::size_t k = 0; k < x.size(); ++k) s += std::norm(x[k] - y[k]);
    return std::sqrt(s);
}

// ---------------------------------------------------------------- operations

JcmParams reduce_physical_model(const PhysicalDimerParams& p, std::optional<std::size_t> n_max) {
    p.validate();
    const double m = p.mass;
    const double w = p.vib_frequency;
    const double k = m * w * w;

    std::array<double, 2> renormalized{};
    std::array<double, 2> minima{};
    for (std::size_t i = 0; i < 2; ++i) {
        const double d = p.energy_gradients[i];
        renormalized[i] = p.bare_energies[i] + d * d / (2.0 * k);
        minima[i] = d / k;
    }
    const double gap = renormalized[1] - renormalized[0];
    // Zero momentum offset: alpha = q sqrt(m w / 2), measured from the lower surface.
    const double shift = minima[1] - minima[0];
    const complex alpha{shift * std::sqrt(m * w / 2.0), 0.0};
    const double g = std::sqrt(1.0 / (2.0 * m * w)) * p.coupling_gradient;
    // The sign of g is a phase convention of |1>; the model stores |g|.
    return JcmParams::make(w, gap, std::abs(g), alpha, n_max);
}

std::size_t default_cutoff(complex alpha_bar) {
    const double a = std::abs(alpha_bar);
    return static_cast<std::size_t>(std::ceil(a * a + 8.0 * a + 10.0));
}

std::vector<complex> coherent_amplitudes(complex alpha_bar, std::size_t n_max) {
    std::vector<complex> c(n_max + 1);
    const double r = std::abs(alpha_bar);
    if (r == 0.0) {
        c[0] = 1.0;
        return c;
    }
    const double phase = std::arg(alpha_bar);
    const double log_r = std::log(r);
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double nn = static_cast<double>(n);
        const double log_mag = -0.5 * r * r + nn * log_r - 0.5 * std::lgamma(nn + 1.0);
        c[n] = std::polar(std::exp(log_mag), nn * phase);
    }

    double tail = 0.0;
    double total = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) {
        total += std::norm(c[n]);
        if (n + 5 > n_max) tail += std::norm(c[n]);
    }
    if (tail >= 1e-8 || 1.0 - total >= 1e-8) {
        const std::size_t suggested = std::max(default_cutoff(alpha_bar), n_max + 1);
        throw TruncationError("coherent_amplitudes: Fock cutoff " + std::to_string(n_max) +
                                  " too small for |alpha|^2 = " + std::to_string(r * r) +
                                  "; use n_max >= " + std::to_string(suggested),
                              suggested);
    }
    const double scale = 1.0 / std::sqrt(total);
    for (auto& x : c) x *= scale;
    return c;
}

StateVector initial_state(const JcmParams& params) {
    params.validate();
    const auto osc = coherent_amplitudes(params.alpha_bar(), params.n_max());
    return StateVector::product(1.0, 0.0, osc);
}

GammaMoments gamma_constants(const StateVector& s) {
    GammaMoments g{0.0, 0.0};
    const auto a = s.amplitudes();
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto [level, n] = unflatten(k);
        const double gamma = static_cast<double>(n) + level + 0.5;
        const double p = std::norm(a[k]);
        g.mean += p * gamma;
        g.second += p * gamma * gamma;
    }
    return g;
}

}  // namespace dimerdyn
