#include "dimerdyn/exact.hpp"

#include "dimerdyn/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace dimerdyn {

namespace {

// Fock-space ladder operator a on n_max+1 levels (truncated: a^dag|n_max> = 0).
Eigen::MatrixXd lowering(std::size_t n_max) {
    const auto d = static_cast<Eigen::Index>(n_max + 1);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

// Kronecker product with the Fock factor outermost, matching k = 2n + i.
Eigen::MatrixXd kron(const Eigen::MatrixXd& fock, const Eigen::Matrix2d& el) {
    Eigen::MatrixXd out(fock.rows() * 2, fock.cols() * 2);
    for (Eigen::Index r = 0; r < fock.rows(); ++r)
        for (Eigen::Index c = 0; c < fock.cols(); ++c) out.block<2, 2>(2 * r, 2 * c) = fock(r, c) * el;
    return out;
}

}  // namespace

// ---------------------------------------------------------------- Hamiltonian

RwaHamiltonian::RwaHamiltonian(JcmParams params) : params_(std::move(params)) {
    params_.validate();
    const double w = params_.omega();
    const double gap = params_.gap();
    const double g = params_.coupling();
    const std::size_t nm = params_.n_max();

    blocks_.reserve(nm + 2);
    blocks_.push_back({0, 1, {flatten({0, 0}), 0}, 0.5 * w, 0.0, 0.0});
    for (std::size_t N = 1; N <= nm; ++N) {
        const double nn = static_cast<double>(N);
        blocks_.push_back({N, 2, {flatten({0, N}), flatten({1, N - 1})},
                           w * (nn + 0.5), g * std::sqrt(nn), w * (nn - 0.5) + gap});
    }
    // |1,n_max> loses its partner |0,n_max+1> to the cutoff.
    blocks_.push_back({nm + 1, 1, {flatten({1, nm}), 0},
                       w * (static_cast<double>(nm) + 0.5) + gap, 0.0, 0.0});
}

Eigen::MatrixXd RwaHamiltonian::dense() const {
    const std::size_t nm = params_.n_max();
    const Eigen::MatrixXd a = lowering(nm);
    const Eigen::MatrixXd ad = a.transpose();
    const Eigen::MatrixXd id_f = Eigen::MatrixXd::Identity(a.rows(), a.cols());

    Eigen::Matrix2d sp, sm, id_e;
    sp << 0, 0, 1, 0;  // S+ |0> = |1>
    sm = sp.transpose();
    id_e.setIdentity();

    const double w = params_.omega();
    Eigen::MatrixXd h = w * kron(ad * a + 0.5 * id_f, id_e);
    h += params_.gap() * kron(id_f, sp * sm);
    h += params_.coupling() * (kron(ad, sm) + kron(a, sp));
    return h;
}

std::vector<double> RwaHamiltonian::block_energies() const {
    std::vector<double> e;
    e.reserve(params_.dim());
    for (const auto& b : blocks_) {
        if (b.size == 1) {
            e.push_back(b.h00);
            continue;
        }
        const double m = 0.5 * (b.h00 + b.h11);
        const double r = std::hypot(0.5 * (b.h00 - b.h11), b.h01);
        e.push_back(m - r);
        e.push_back(m + r);
    }
    std::sort(e.begin(), e.end());
    return e;
}

double RwaHamiltonian::expectation(const StateVector& s) const {
    if (s.n_max() != params_.n_max()) throw InvalidParameter("RwaHamiltonian: state cutoff mismatch");
    const auto c = s.amplitudes();
    double e = 0.0;
    for (const auto& b : blocks_) {
        const complex x = c[b.index[0]];
        e += b.h00 * std::norm(x);
        if (b.size == 2) {
            const complex y = c[b.index[1]];
            e += b.h11 * std::norm(y) + 2.0 * b.h01 * (std::conj(x) * y).real();
        }
    }
    return e;
}

RwaHamiltonian build_rwa_hamiltonian(const JcmParams& params) { return RwaHamiltonian(params); }

Eigen::MatrixXd gamma_matrix(std::size_t n_max) {
    const auto d = static_cast<Eigen::Index>(2 * (n_max + 1));
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const auto [level, n] = unflatten(static_cast<std::size_t>(k));
        g(k, k) = static_cast<double>(n) + level + 0.5;
    }
    return g;
}

// ---------------------------------------------------------------- propagation

ExactPropagator::ExactPropagator(const RwaHamiltonian& h, const StateVector& s0) : n_max_(s0.n_max()) {
    if (s0.n_max() != h.params().n_max()) throw InvalidParameter("ExactPropagator: state cutoff mismatch");
    const auto c = s0.amplitudes();
    modes_.reserve(h.blocks().size());
    for (const auto& b : h.blocks()) {
        Mode m{};
        m.size = b.size;
        m.index = b.index;
        if (b.size == 1) {
            m.energy = {b.h00, 0.0};
            m.c = 1.0;
            m.s = 0.0;
            m.weight = {c[b.index[0]], 0.0};
        } else {
            const double mid = 0.5 * (b.h00 + b.h11);
            const double r = std::hypot(0.5 * (b.h00 - b.h11), b.h01);
            const double theta = 0.5 * std::atan2(2.0 * b.h01, b.h00 - b.h11);
            m.c = std::cos(theta);
            m.s = std::sin(theta);
            m.energy = {mid + r, mid - r};
            const complex x = c[b.index[0]];
            const complex y = c[b.index[1]];
            m.weight = {m.c * x + m.s * y, -m.s * x + m.c * y};
        }
        modes_.push_back(m);
    }
}

StateVector ExactPropagator::state_at(double t) const {
    std::vector<complex> out(2 * (n_max_ + 1));
    for (const auto& m : modes_) {
        const complex up = m.weight[0] * std::polar(1.0, -m.energy[0] * t);
        if (m.size == 1) {
            out[m.index[0]] = up;
            continue;
        }
        const complex dn = m.weight[1] * std::polar(1.0, -m.energy[1] * t);
        out[m.index[0]] = m.c * up - m.s * dn;
        out[m.index[1]] = m.s * up + m.c * dn;
    }
    return StateVector(std::move(out));
}

StateVector evolve_exact(const RwaHamiltonian& h, const StateVector& s0, double t) {
    return ExactPropagator(h, s0).state_at(t);
}

PropagationResult evolve_exact(const RwaHamiltonian& h, const StateVector& s0,
                               std::span<const double> times) {
    const ExactPropagator prop(h, s0);
    PropagationResult res;
    res.times.assign(times.begin(), times.end());
    res.states.reserve(times.size());
    for (double t : times) {
        res.states.push_back(prop.state_at(t));
        res.max_tail_mass = std::max(res.max_tail_mass, res.states.back().tail_mass());
    }
    res.truncation_warning = res.max_tail_mass > kLeakageWarning;
    return res;
}

std::size_t dense_dimension_limit() {
    if (const char* env = std::getenv("DIMERDYN_MAX_DIM")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return 4000;
}

StateVector evolve_brute(const RwaHamiltonian& h, const StateVector& s0, double t) {
    const std::size_t dim = h.params().dim();
    if (dim > dense_dimension_limit())
        throw DimensionGuardError("evolve_brute: dense dimension " + std::to_string(dim) +
                                  " exceeds limit " + std::to_string(dense_dimension_limit()) +
                                  " (set DIMERDYN_MAX_DIM to override)");
    if (s0.n_max() != h.params().n_max()) throw InvalidParameter("evolve_brute: state cutoff mismatch");

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense());
    if (es.info() != Eigen::Success) throw std::runtime_error("evolve_brute: eigensolver failed");

    const auto amps = s0.amplitudes();
    const Eigen::Map<const Eigen::VectorXcd> psi0(amps.data(), static_cast<Eigen::Index>(amps.size()));
    const Eigen::MatrixXcd v = es.eigenvectors().cast<complex>();
    Eigen::VectorXcd coef = v.adjoint() * psi0;
    for (Eigen::Index k = 0; k < coef.size(); ++k) coef(k) *= std::polar(1.0, -es.eigenvalues()(k) * t);
    const Eigen::VectorXcd psi = v * coef;

    std::vector<complex> out(psi.data(), psi.data() + psi.size());
    // Rounding in the eigenbasis round trip is far below the 1e-10 constructor check.
    return StateVector(std::move(out));
}

// ---------------------------------------------------------------- measurement

MomentSet measure(const StateVector& s, double t) {
    const auto c = s.amplitudes();
    const std::size_t nm = s.n_max();

    MomentSet m;
    m.t = t;
    complex a{}, a2{}, sp{}, x{};
    double n = 0.0, p1 = 0.0;
    for (std::size_t k = 0; k <= nm; ++k) {
        const double kk = static_cast<double>(k);
        const complex c0 = c[2 * k];
        const complex c1 = c[2 * k + 1];
        const double w0 = std::norm(c0);
        const double w1 = std::norm(c1);
        n += kk * (w0 + w1);
        p1 += w1;
        sp += std::conj(c1) * c0;
        if (k >= 1) {
            const double r = std::sqrt(kk);
            a += r * (std::conj(c[2 * (k - 1)]) * c0 + std::conj(c[2 * (k - 1) + 1]) * c1);
        }
        if (k >= 2) {
            const double r = std::sqrt(kk * (kk - 1.0));
            a2 += r * (std::conj(c[2 * (k - 2)]) * c0 + std::conj(c[2 * (k - 2) + 1]) * c1);
        }
        if (k < nm) x += std::sqrt(kk + 1.0) * std::conj(c[2 * (k + 1)]) * c1;
    }
    m.a = a;
    m.a2 = a2;
    m.n = n;
    m.s_plus = sp;
    m.s_plus_s_minus = p1;
    m.sz = p1 - 0.5;
    m.alpha = 2.0 * x.real();
    m.beta = x - std::conj(x);
    m.gamma = n + p1 + 0.5;
    return m;
}

}  // namespace dimerdyn
