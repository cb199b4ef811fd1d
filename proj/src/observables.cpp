#include "dimerdyn/observables.hpp"

#include "dimerdyn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

namespace dimerdyn {

Dispersions vibrational_dispersions(const MomentSet& m) {
    // q^2 = (a^2 + a^dag^2 + 2 a^dag a + 1)/2 and p^2 = -(a^2 + a^dag^2 - 2 a^dag a - 1)/2.
    const double cross = 2.0 * m.n + 1.0 - 2.0 * std::norm(m.a);
    const double ladder = 2.0 * (m.a2 - m.a * m.a).real();
    Dispersions d;
    d.first = 0.5 * (cross + ladder);
    d.second = 0.5 * (cross - ladder);
    d.sum = 0.5 * (d.first + d.second);
    return d;
}

EnergySplit vibrational_energies(const MomentSet& m, double omega) {
    EnergySplit e;
    e.total = omega * (m.n + 0.5);
    e.classical = omega * std::norm(m.a);
    e.quantum = e.total - e.classical;
    return e;
}

Dispersions electronic_dispersions(const MomentSet& m) {
    // S_x^2 = S_y^2 = 1/4 for spin 1/2; <S_x>^2 - <S_y>^2 = Re <S+>^2.
    const double cross = 1.0 - 2.0 * std::norm(m.s_plus);
    const double ladder = 2.0 * (m.s_plus * m.s_plus).real();
    Dispersions d;
    d.first = 0.25 * (cross - ladder);
    d.second = 0.25 * (cross + ladder);
    d.sum = d.first + d.second;
    return d;
}

EnergySplit electronic_energies(const MomentSet& m, double gap) {
    EnergySplit e;
    e.total = gap * m.s_plus_s_minus;
    e.classical = gap * std::norm(m.s_plus);
    e.quantum = e.total - e.classical;
    return e;
}

BlochData bloch_and_fidelity(const MomentSet& m) {
    BlochData b;
    b.r = {m.s_plus.real(), m.s_plus.imag(), m.sz};
    b.r2 = b.r[0] * b.r[0] + b.r[1] * b.r[1] + b.r[2] * b.r[2];
    b.rxy2 = std::norm(m.s_plus);
    const double mixed = m.s_plus_s_minus * m.s_minus_s_plus();
    b.r2_ladder = 0.25 + b.rxy2 - mixed;
    b.purity = 1.0 + 2.0 * b.rxy2 - 2.0 * mixed;
    return b;
}

Correlator correlator_beta_r(const MomentSet& m) {
    const complex ad = std::conj(m.a);
    return {m.beta - m.a * m.s_plus - ad * m.s_plus, m.beta - ad * m.s_minus() + m.a * m.s_plus};
}

ObservableFrame make_frame(const MomentSet& m, const JcmParams& params) {
    ObservableFrame f;
    f.t = m.t;
    f.sz = m.sz;
    f.vib = vibrational_dispersions(m);
    f.vib_energy = vibrational_energies(m, params.omega());
    f.el = electronic_dispersions(m);
    f.el_energy = electronic_energies(m, params.gap());
    f.bloch = bloch_and_fidelity(m);
    f.corr = correlator_beta_r(m);
    f.total_energy = f.vib_energy.total + f.el_energy.total + params.coupling() * m.alpha;
    return f;
}

void check_frame_invariants(const ObservableFrame& f, const MomentSet& m, const JcmParams& params) {
    auto fail = [&](const char* what, double value) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "invariant violated at t = %.17g: %s (value %.6e)", m.t, what, value);
        throw InvariantViolation(buf, m.t);
    };
    const double w = params.omega();
    const double gap = params.gap();

    const double vib_bound = m.n - std::norm(m.a);
    if (vib_bound < -1e-12) fail("<a^dag a> - |<a>|^2 >= 0", vib_bound);
    const double el_bound = m.s_plus_s_minus - std::norm(m.s_plus);
    if (el_bound < -1e-12) fail("<S+S-> - |<S+>|^2 >= 0", el_bound);
    // E_quant^el carries the sign of the gap; the bound is on E_quant^el / Omega.
    if (gap != 0.0 && f.el_energy.quantum / gap < -1e-12)
        fail("electronic quantum energy has the sign of the gap", f.el_energy.quantum);

    // Dispersion route for the partitions, independent of the ladder subtraction.
    const double vib_close = f.vib_energy.total - f.vib_energy.classical - w * f.vib.sum;
    if (std::abs(vib_close) > 1e-10) fail("vibrational energy partition", vib_close);
    const double el_cl = gap * (0.5 - f.el.sum);
    const double el_q = gap * (m.sz + f.el.sum);
    const double el_close = f.el_energy.total - el_cl - el_q;
    if (std::abs(el_close) > 1e-10) fail("electronic energy partition", el_close);
    if (std::abs(el_cl - f.el_energy.classical) > 1e-10)
        fail("electronic quasiclassical energy, two routes", el_cl - f.el_energy.classical);

    const double purity_gap = f.bloch.purity - (0.5 + 2.0 * f.bloch.r2);
    if (std::abs(purity_gap) > 1e-10) fail("Tr rho^2 = 1/2 + 2 R^2", purity_gap);
    if (f.bloch.purity < 0.5 - 1e-12 || f.bloch.purity > 1.0 + 1e-12) fail("Tr rho^2 in [1/2, 1]", f.bloch.purity);
    if (f.bloch.r2 < -1e-12 || f.bloch.r2 > 0.25 + 1e-12) fail("R^2 in [0, 1/4]", f.bloch.r2);
}

// ---------------------------------------------------------------- wavepackets

double WavepacketSlice::integral() const {
    double s = 0.0;
    for (std::size_t k = 1; k < q.size(); ++k) s += 0.5 * (q[k] - q[k - 1]) * (total[k] + total[k - 1]);
    return s;
}

std::vector<double> default_wavepacket_grid(complex alpha_bar, std::size_t points) {
    if (points < 2) throw InvalidParameter("default_wavepacket_grid: need at least 2 points");
    const double half = std::abs(alpha_bar) * std::numbers::sqrt2 + 6.0;
    std::vector<double> q(points);
    for (std::size_t k = 0; k < points; ++k)
        q[k] = -half + 2.0 * half * static_cast<double>(k) / static_cast<double>(points - 1);
    return q;
}

std::vector<double> oscillator_eigenfunctions(std::size_t n_max, double q) {
    // Run the recurrence on phi_n * exp(-log_scale) and fold the scale back in per term.
    constexpr double kBig = 1e150;
    const double log_big = std::log(kBig);
    std::vector<double> phi(n_max + 1);
    double log_scale = -0.5 * q * q - 0.25 * std::log(std::numbers::pi);
    double prev = 0.0;
    double cur = 1.0;
    phi[0] = std::exp(log_scale);
    for (std::size_t n = 1; n <= n_max; ++n) {
        const double nn = static_cast<double>(n);
        const double next = std::sqrt(2.0 / nn) * q * cur - std::sqrt((nn - 1.0) / nn) * prev;
        prev = cur;
        cur = next;
        if (std::abs(cur) > kBig) {
            cur /= kBig;
            prev /= kBig;
            log_scale += log_big;
        }
        phi[n] = cur == 0.0 ? 0.0 : std::copysign(std::exp(std::log(std::abs(cur)) + log_scale), cur);
    }
    return phi;
}

WavepacketSlice wavepacket_density(const StateVector& s, std::span<const double> q, double t) {
    const std::size_t nm = s.n_max();
    if (nm > 600)
        throw InvalidParameter("wavepacket_density: oscillator recurrence limited to n_max <= 600, got " +
                               std::to_string(nm));
    if (q.size() < 2) throw InvalidParameter("wavepacket_density: grid needs at least 2 points");
    for (std::size_t k = 1; k < q.size(); ++k)
        if (!(q[k] > q[k - 1])) throw InvalidParameter("wavepacket_density: grid must be strictly increasing");

    const auto c = s.amplitudes();
    WavepacketSlice w;
    w.t = t;
    w.q.assign(q.begin(), q.end());
    w.rho0.resize(q.size());
    w.rho1.resize(q.size());
    w.total.resize(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        const auto phi = oscillator_eigenfunctions(nm, q[k]);
        complex psi0{}, psi1{};
        for (std::size_t n = 0; n <= nm; ++n) {
            psi0 += c[2 * n] * phi[n];
            psi1 += c[2 * n + 1] * phi[n];
        }
        w.rho0[k] = std::norm(psi0);
        w.rho1[k] = std::norm(psi1);
        w.total[k] = w.rho0[k] + w.rho1[k];
    }
    return w;
}

std::vector<double> density_peaks(const WavepacketSlice& w, double min_fraction) {
    if (w.total.empty()) return {};
    const double top = *std::max_element(w.total.begin(), w.total.end());
    std::vector<std::pair<double, double>> peaks;  // (height, q)
    for (std::size_t k = 1; k + 1 < w.total.size(); ++k) {
        const double v = w.total[k];
        if (v > w.total[k - 1] && v >= w.total[k + 1] && v >= min_fraction * top) peaks.emplace_back(v, w.q[k]);
    }
    std::sort(peaks.begin(), peaks.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    std::vector<double> out;
    out.reserve(peaks.size());
    for (const auto& p : peaks) out.push_back(p.second);
    return out;
}

}  // namespace dimerdyn
