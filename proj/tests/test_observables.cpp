#include "doctest.h"

#include "dimerdyn/errors.hpp"
#include "dimerdyn/exact.hpp"
#include "dimerdyn/observables.hpp"
#include "dimerdyn/qhd.hpp"
#include "dimerdyn/runner.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace dimerdyn;
using namespace testsupport;

namespace {

// Reduced electronic density matrix rho_ij = sum_n c_{i,n} conj(c_{j,n}).
Eigen::Matrix2cd reduced_rho(const StateVector& s) {
    Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();
    for (std::size_t n = 0; n <= s.n_max(); ++n)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) rho(i, j) += s(i, n) * std::conj(s(j, n));
    return rho;
}

// Index of the largest DFT magnitude of the mean-removed series, excluding DC.
std::size_t dominant_bin(const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(x.size());
    std::size_t best = 1;
    double best_mag = -1.0;
    const std::size_t n = x.size();
    for (std::size_t k = 1; k < n / 2; ++k) {
        cplx acc{};
        for (std::size_t j = 0; j < n; ++j)
            acc += (x[j] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * double(k * j % n) / double(n));
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best = k;
        }
    }
    return best;
}

}  // namespace

TEST_SUITE("observables") {

TEST_CASE("vibrational dispersions: coherent and Fock states") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, std::polar(2.5, 0.4));
    const auto d = vibrational_dispersions(measure(initial_state(p)));
    CHECK(d.first == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(d.second == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(d.first * d.second == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(d.sum == doctest::Approx(0.5).epsilon(1e-9));

    const auto f = vibrational_dispersions(measure(StateVector::basis_state(12, 0, 5)));
    CHECK(f.sum == doctest::Approx(5.5));
    CHECK(f.first == doctest::Approx(5.5));
}

TEST_CASE("vibrational dispersions match position and momentum operators") {
    std::mt19937 rng(11);
    const std::size_t nm = 16;
    const Mat a = op_a(nm);
    const Mat q = (a + a.adjoint()) / std::sqrt(2.0);
    const Mat p = cplx(0.0, 1.0) * (a.adjoint() - a) / std::sqrt(2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = random_state(nm, rng, 3);
        const Vec psi = to_vec(s);
        const double sq = (expect(psi, q * q) - expect(psi, q) * expect(psi, q)).real();
        const double spp = (expect(psi, p * p) - expect(psi, p) * expect(psi, p)).real();
        const auto d = vibrational_dispersions(measure(s));
        CHECK(std::abs(d.first - sq) < 1e-12);
        CHECK(std::abs(d.second - spp) < 1e-12);
        CHECK(d.first * d.second >= 0.25 - 1e-12);
    }
}

TEST_CASE("vibrational energies") {
    const auto p = JcmParams::make(1.3, 1.0, 0.25, 3.0);
    const auto e = vibrational_energies(measure(initial_state(p)), 1.3);
    CHECK(e.total == doctest::Approx(1.3 * 9.5).epsilon(1e-9));
    CHECK(e.classical == doctest::Approx(1.3 * 9.0).epsilon(1e-9));
    CHECK(e.quantum == doctest::Approx(0.65).epsilon(1e-9));
    CHECK(vibrational_energies(measure(StateVector::basis_state(4, 0, 0)), 1.0).classical == 0.0);
}

TEST_CASE("electronic dispersions and energies") {
    const MomentSet ground = measure(StateVector::basis_state(5, 0, 2));
    const auto d = electronic_dispersions(ground);
    CHECK(d.sum == 0.5);
    CHECK(d.first == 0.25);
    CHECK(d.second == 0.25);
    const auto e = electronic_energies(ground, 1.7);
    CHECK(e.total == 0.0);
    CHECK(e.classical == 0.0);
    CHECK(e.quantum == 0.0);

    const auto up = electronic_energies(measure(StateVector::basis_state(5, 1, 2)), 1.7);
    CHECK(up.total == 1.7);
    CHECK(up.quantum == 1.7);
    CHECK(up.classical == 0.0);

    std::vector<cplx> c(12);
    c[idx(0, 2)] = c[idx(1, 2)] = 1.0 / std::sqrt(2.0);
    const MomentSet eq = measure(StateVector(c));
    CHECK(electronic_dispersions(eq).sum == doctest::Approx(0.25));
    CHECK(electronic_dispersions(eq).first == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("electronic dispersions match spin operators") {
    std::mt19937 rng(17);
    const std::size_t nm = 8;
    const Mat sp = op_splus(nm);
    const Mat sx = (sp + sp.adjoint()) / 2.0;
    const Mat sy = (sp - sp.adjoint()) / cplx(0.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = random_state(nm, rng, 0);
        const Vec psi = to_vec(s);
        const auto d = electronic_dispersions(measure(s));
        CHECK(std::abs(d.first - (expect(psi, sx * sx) - expect(psi, sx) * expect(psi, sx)).real()) < 1e-13);
        CHECK(std::abs(d.second - (expect(psi, sy * sy) - expect(psi, sy) * expect(psi, sy)).real()) < 1e-13);
        const auto b = bloch_and_fidelity(measure(s));
        CHECK(std::abs(b.r[0] - expect(psi, sx).real()) < 1e-13);
        CHECK(std::abs(b.r[1] - expect(psi, sy).real()) < 1e-13);
    }
}

TEST_CASE("Bloch vector and purity against the reduced density matrix") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_state(6, rng, 0);
        const auto rho = reduced_rho(s);
        const double purity = (rho * rho).trace().real();
        const auto b = bloch_and_fidelity(measure(s));
        CHECK(std::abs(b.purity - purity) < 1e-13);
        CHECK(std::abs(b.r2 - b.r2_ladder) < 1e-13);
        CHECK(std::abs(b.purity - 0.5 - 2.0 * b.r2) < 1e-13);
    }
}

TEST_CASE("Bloch limits: pure product and maximally mixed") {
    const auto b = bloch_and_fidelity(measure(StateVector::basis_state(3, 1, 1)));
    CHECK(b.r2 == doctest::Approx(0.25));
    CHECK(b.purity == doctest::Approx(1.0));

    MomentSet mixed;
    mixed.s_plus_s_minus = 0.5;
    mixed.sz = 0.0;
    mixed.s_plus = 0.0;
    const auto m = bloch_and_fidelity(mixed);
    CHECK(m.r2 == 0.0);
    CHECK(m.purity == 0.5);
}

TEST_CASE("correlator: zero on product states and for factorized moments") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, 3.0);
    const auto c0 = correlator_beta_r(measure(initial_state(p)));
    CHECK(std::abs(c0.symmetrized) < 1e-12);
    CHECK(std::abs(c0.literal) < 1e-12);

    MomentSet m;
    m.a = {1.2, -0.4};
    m.s_plus = {0.1, 0.3};
    m.beta = std::conj(m.a) * m.s_minus() - m.a * m.s_plus;
    CHECK(std::abs(correlator_beta_r(m).symmetrized) < 1e-15);
}

TEST_CASE("correlator along the strong coupling run") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, 3.0);
    const auto s0 = initial_state(p);
    const ExactPropagator prop(RwaHamiltonian(p), s0);
    double max_re_sym = 0.0, max_re_man = 0.0, max_im = 0.0;
    for (int k = 0; k <= 600; ++k) {
        const double t = 0.25 * k;
        const auto c = correlator_beta_r(measure(prop.state_at(t), t));
        max_re_sym = std::max(max_re_sym, std::abs(c.symmetrized.real()));
        max_re_man = std::max(max_re_man, std::abs(c.literal.real()));
        max_im = std::max(max_im, std::abs(c.value()));
    }
    CHECK(max_re_sym < 1e-12);
    CHECK(max_re_man > 1e-2);  // literal form is not purely imaginary in general
    CHECK(max_im > 1e-2);
}

TEST_CASE("frame identities and invariant checks along both reference runs") {
    for (const auto& p : {JcmParams::make(1.0, 1.0, 0.025, 7.0), JcmParams::make(1.0, 1.0, 0.25, 3.0)}) {
        const auto s0 = initial_state(p);
        const RwaHamiltonian h(p);
        const ExactPropagator prop(h, s0);
        const double e0 = h.expectation(s0);
        for (int k = 0; k <= 300; ++k) {
            const double t = 3.0 * revival_time(p.coupling(), std::norm(p.alpha_bar())) * k / 300.0;
            const MomentSet m = measure(prop.state_at(t), t);
            const ObservableFrame f = make_frame(m, p);
            CHECK_NOTHROW(check_frame_invariants(f, m, p));
            CHECK(std::abs(f.vib_energy.total - f.vib_energy.classical - f.vib_energy.quantum) < 1e-10);
            CHECK(std::abs(f.vib_energy.quantum - p.omega() * f.vib.sum) < 1e-10);
            CHECK(std::abs(f.el_energy.quantum - p.gap() * (m.sz + f.el.sum)) < 1e-10);
            CHECK(f.el_energy.quantum >= -1e-12);
            CHECK(std::abs(f.total_energy - e0) < 1e-10);
        }
    }
}

TEST_CASE("invariant check rejects a corrupted frame with its time") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, 3.0);
    MomentSet m = measure(initial_state(p), 4.25);
    ObservableFrame f = make_frame(m, p);
    f.bloch.purity += 1e-6;
    try {
        check_frame_invariants(f, m, p);
        FAIL("expected InvariantViolation");
    } catch (const InvariantViolation& e) {
        CHECK(e.t == 4.25);
    }
    m.n = std::norm(m.a) - 1e-9;
    CHECK_THROWS_AS(check_frame_invariants(make_frame(m, p), m, p), InvariantViolation);
}

TEST_CASE("energy exchange: vibrational and electronic energies in opposite phase") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, 3.0);
    const auto sim = simulate(p, TimeGrid{0.0, 60.0, 1201}.points());
    CHECK(sim.stats.phase_opposition < 0.0);
    CHECK(sim.stats.energy_drift < 1e-10);
}

TEST_CASE("sigma_q and sigma_Sx fringes share their dominant frequency") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, 3.0);
    const auto s0 = initial_state(p);
    const ExactPropagator prop(RwaHamiltonian(p), s0);
    std::vector<double> sq, sx;
    const std::size_t n = 2048;
    const double t_end = revival_time(0.25, 9.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = t_end * double(k) / double(n);
        const MomentSet m = measure(prop.state_at(t), t);
        sq.push_back(vibrational_dispersions(m).first);
        sx.push_back(electronic_dispersions(m).first);
    }
    const auto bq = dominant_bin(sq);
    const auto bx = dominant_bin(sx);
    CHECK((bq > bx ? bq - bx : bx - bq) <= 1);
}

TEST_CASE("oscillator eigenfunctions match the Hermite closed form") {
    for (double q : {-3.1, -0.4, 0.0, 1.7, 5.5}) {
        const auto phi = oscillator_eigenfunctions(20, q);
        for (unsigned n = 0; n <= 20; ++n) {
            const double norm = 1.0 / std::sqrt(std::pow(2.0, n) * std::tgamma(n + 1.0) * std::sqrt(std::numbers::pi));
            const double ref = norm * std::hermite(n, q) * std::exp(-0.5 * q * q);
            CHECK(std::abs(phi[n] - ref) < 1e-12 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("oscillator eigenfunctions stay finite and orthonormal at high order") {
    const std::size_t nm = 600;
    const double h = 0.02;
    std::vector<std::vector<double>> rows;
    for (double q = -40.0; q <= 40.0 + 1e-12; q += h) rows.push_back(oscillator_eigenfunctions(nm, q));
    for (const auto& r : rows)
        for (double v : r) CHECK_FALSE(std::isnan(v));
    for (std::size_t a : {0u, 100u, 599u, 600u})
        for (std::size_t b : {0u, 100u, 600u}) {
            double s = 0.0;
            for (const auto& r : rows) s += r[a] * r[b] * h;
            CHECK(std::abs(s - (a == b ? 1.0 : 0.0)) < 1e-8);
        }
}

TEST_CASE("wavepacket: coherent Gaussian at t = 0") {
    // The amplitude tail beyond the default cutoff is ~1e-8, so pad the basis
    // to compare the density pointwise at 1e-10.
    const double a = 2.0;
    const auto p = JcmParams::make(1.0, 1.0, 0.25, a, 60);
    const auto q = default_wavepacket_grid(a);
    CHECK(q.size() == 801);
    CHECK(q.front() == doctest::Approx(-a * std::sqrt(2.0) - 6.0));
    const auto w = wavepacket_density(initial_state(p), q);
    for (std::size_t k = 0; k < q.size(); ++k) {
        const double x = q[k] - std::sqrt(2.0) * a;
        CHECK(std::abs(w.total[k] - std::exp(-x * x) / std::sqrt(std::numbers::pi)) < 1e-10);
        CHECK(w.rho1[k] == 0.0);
    }
    CHECK(std::abs(w.integral() - 1.0) < 1e-6);
    const auto peaks = density_peaks(w);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0] == doctest::Approx(std::sqrt(2.0) * a).epsilon(0.01));
}

TEST_CASE("wavepacket: normalized slices along a run and cutoff limit") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, 3.0);
    const ExactPropagator prop(RwaHamiltonian(p), initial_state(p));
    const auto q = default_wavepacket_grid(p.alpha_bar());
    for (double t : {0.0, 5.0, 20.0, 37.7, 75.4}) CHECK(std::abs(wavepacket_density(prop.state_at(t), q, t).integral() - 1.0) < 1e-6);

    const auto big = StateVector::basis_state(601, 0, 0);
    CHECK_THROWS_AS(wavepacket_density(big, q), InvalidParameter);
    const std::vector<double> bad{0.0, 0.0, 1.0};
    CHECK_THROWS_AS(wavepacket_density(initial_state(p), bad), InvalidParameter);
}

TEST_CASE("wavepacket splits into two branches at mid-collapse") {
    const auto p = JcmParams::make(1.0, 1.0, 0.25, 3.0);
    const double t = mid_collapse_time(p);
    const auto s = evolve_exact(RwaHamiltonian(p), initial_state(p), t);
    const auto w = wavepacket_density(s, default_wavepacket_grid(p.alpha_bar()), t);
    const auto peaks = density_peaks(w);
    REQUIRE(peaks.size() >= 2);
    CHECK(std::abs(peaks[0] - peaks[1]) > 2.0);
    const double sq0 = vibrational_dispersions(measure(initial_state(p))).first;
    CHECK(vibrational_dispersions(measure(s)).first >= 2.0 * sq0);
    // Vibrational energy is mostly quantum when the inversion has stalled.
    const auto e = vibrational_energies(measure(s), 1.0);
    CHECK(e.quantum > 0.5 * e.total);
}

}  // TEST_SUITE
