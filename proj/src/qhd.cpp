#include "dimerdyn/qhd.hpp"

#include "dimerdyn/errors.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dimerdyn {

namespace {

using Mat6c = Eigen::Matrix<complex, 6, 6>;
using Vec6c = Eigen::Matrix<complex, 6, 1>;

Vec6c to_vec(const std::array<complex, 6>& x) {
    Vec6c v;
    for (int k = 0; k < 6; ++k) v(k) = x[static_cast<std::size_t>(k)];
    return v;
}

std::array<complex, 6> from_vec(const Vec6c& v) {
    std::array<complex, 6> x{};
    for (int k = 0; k < 6; ++k) x[static_cast<std::size_t>(k)] = v(k);
    return x;
}

// (1 - cos(sqrt(w2) t)) / w2, continued to w2 < 0 through cosh and to w2 = 0 as t^2/2.
double one_minus_cos_over(double w2, double t) {
    const double x = std::sqrt(std::abs(w2)) * t;
    if (std::abs(x) < 1e-6) return 0.5 * t * t;
    if (w2 > 0.0) {
        const double s = std::sin(0.5 * x);
        return 2.0 * s * s / w2;
    }
    const double s = std::sinh(0.5 * x);
    return -2.0 * s * s / w2;
}

}  // namespace

std::string_view to_string(GammaConvention c) noexcept {
    return c == GammaConvention::operator_def ? "operator" : "excitation";
}

std::string_view to_string(ClosureCoupling c) noexcept {
    return c == ClosureCoupling::commutator ? "commutator" : "closed_form";
}

double QhdConstants::g_eff() const noexcept { return std::sqrt(0.5 * kappa() * g); }

void QhdConstants::validate() const {
    if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidParameter("QhdConstants: g must be >= 0");
    if (!std::isfinite(delta)) throw InvalidParameter("QhdConstants: delta must be finite");
    if (gamma2 < gamma0 * gamma0 - 1e-9 * std::max(1.0, gamma0 * gamma0))
        throw InvalidParameter("QhdConstants: <gamma^2> < <gamma>^2");
}

complex closure_triple(complex a, complex b, complex c, complex ab, complex ac, complex bc) {
    return a * bc + b * ac + c * ab - 2.0 * a * b * c;
}

Eigen::Matrix<double, 6, 6> qhd_system_matrix(const QhdConstants& c) {
    const double d = c.delta;
    const double k = c.kappa();
    Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
    m(0, 1) = -d;
    m(1, 0) = -d;
    m(1, 5) = k;
    m(2, 1) = c.g;
    m(3, 4) = -d;
    // <S_z gamma^2> replaced by 2<S_z gamma><gamma> + <S_z><gamma^2> - 2<S_z><gamma>^2
    m(4, 2) = k * (c.gamma2 - 2.0 * c.gamma0 * c.gamma0);
    m(4, 3) = -d;
    m(4, 5) = 2.0 * k * c.gamma0;
    m(5, 4) = c.g;
    return m;
}

std::vector<QhdState> qhd_propagate(const QhdState& s0, const QhdConstants& c,
                                    std::span<const double> times) {
    // The gamma-weighted variables are about gamma0 times larger than the bare
    // ones, which makes M strongly non-normal. Rescaling them by 1/gamma0 brings
    // all entries to the same order before diagonalizing, so eigenphases stay
    // accurate out to t ~ 1e4.
    const double scale = std::max(1.0, std::abs(c.gamma0));
    Eigen::Matrix<double, 6, 1> d;
    d << 1.0, 1.0, 1.0, 1.0 / scale, 1.0 / scale, 1.0 / scale;
    const Eigen::Matrix<double, 6, 6> m = d.asDiagonal() * qhd_system_matrix(c) * d.cwiseInverse().asDiagonal();
    const Vec6c y0 = d.cast<complex>().cwiseProduct(to_vec(s0.x));

    const Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>> es(m);
    const Mat6c v = es.eigenvectors();
    const Eigen::PartialPivLU<Mat6c> lu(v);
    const bool diagonal_route = es.info() == Eigen::Success && lu.rcond() > 1e-10;
    const Vec6c w = diagonal_route ? Vec6c(lu.solve(y0)) : Vec6c::Zero();
    const Mat6c mc = m.cast<complex>();

    std::vector<QhdState> out;
    out.reserve(times.size());
    for (double t : times) {
        const double dt = t - s0.t;
        Vec6c y;
        if (diagonal_route) {
            Vec6c phased;
            for (int k = 0; k < 6; ++k) phased(k) = w(k) * std::exp(complex(0.0, -dt) * es.eigenvalues()(k));
            y = v * phased;
        } else {
            // Defective or nearly defective M (e.g. a coalescing frequency pair).
            y = (complex(0.0, -dt) * mc).exp() * y0;
        }
        out.push_back({t, from_vec(y.cwiseQuotient(d.cast<complex>()))});
    }
    return out;
}

std::vector<QhdState> qhd_propagate_rk4(const QhdState& s0, const QhdConstants& c,
                                        std::span<const double> times, double omega) {
    const Mat6c a = complex(0.0, -1.0) * qhd_system_matrix(c).cast<complex>();
    const RatePair r = rates(c);
    double h = 0.01 / omega;
    if (r.omega1 > 0.0) h = std::min(h, 0.01 / r.omega1);

    auto rhs = [&](const Vec6c& x) -> Vec6c { return a * x; };
    Vec6c x = to_vec(s0.x);
    double t = s0.t;
    std::vector<QhdState> out;
    out.reserve(times.size());
    for (double target : times) {
        if (target < t) throw InvalidParameter("qhd_propagate_rk4: times must be nondecreasing");
        while (t < target) {
            const double step = std::min(h, target - t);
            const Vec6c k1 = rhs(x);
            const Vec6c k2 = rhs(x + 0.5 * step * k1);
            const Vec6c k3 = rhs(x + 0.5 * step * k2);
            const Vec6c k4 = rhs(x + step * k3);
            x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = (target - t <= h) ? target : t + step;
        }
        out.push_back({target, from_vec(x)});
    }
    return out;
}

QhdInit qhd_init_from_state(const StateVector& s, const JcmParams& params, GammaConvention conv,
                            ClosureCoupling closure) {
    const double shift = conv == GammaConvention::excitation ? 0.5 : 0.0;
    const auto c = s.amplitudes();
    const std::size_t nm = s.n_max();

    // alpha and beta only couple |0,n+1> with |1,n>, i.e. act inside the sector
    // with gamma = n + 3/2, so gamma-weighted moments can be summed sector by sector.
    complex x{}, xg{};
    double g1 = 0.0, g2 = 0.0, sz = 0.0, szg = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const auto [level, n] = unflatten(k);
        const double p = std::norm(c[k]);
        const double gam = static_cast<double>(n) + level + 0.5 - shift;
        g1 += p * gam;
        g2 += p * gam * gam;
        const double z = level - 0.5;
        sz += p * z;
        szg += p * z * gam;
    }
    for (std::size_t n = 0; n < nm; ++n) {
        const complex term = std::sqrt(static_cast<double>(n) + 1.0) * std::conj(c[2 * (n + 1)]) * c[2 * n + 1];
        x += term;
        xg += term * (static_cast<double>(n) + 1.5 - shift);
    }
    const complex alpha = x + std::conj(x);
    const complex beta = x - std::conj(x);
    const complex alpha_g = xg + std::conj(xg);
    const complex beta_g = xg - std::conj(xg);

    QhdInit init;
    init.state.t = 0.0;
    init.state.x = {alpha, -beta, sz, alpha_g, -beta_g, szg};
    init.constants = {g1, g2, params.detuning(), params.coupling(), closure};
    return init;
}

RatePair rates(const QhdConstants& c) {
    if (!(c.gamma0 > 0.0)) throw InvalidParameter("rates: gamma0 must be positive");
    const double ge = c.g_eff();
    const double d2 = c.delta * c.delta;
    const double sq = std::sqrt(c.gamma0);
    RatePair r;
    r.omega1_sq = d2 + 2.0 * ge * ge * (c.gamma0 + sq);
    r.omega2_sq = d2 + 2.0 * ge * ge * (c.gamma0 - sq);
    r.omega1 = std::sqrt(r.omega1_sq);
    r.omega2 = std::sqrt(std::abs(r.omega2_sq));
    r.sub_quantum = r.omega2_sq < 0.0;
    const double w2_real = r.sub_quantum ? 0.0 : r.omega2;
    r.t_plus_inv = 0.5 * (r.omega1 + w2_real);
    r.t_minus_inv = 0.5 * (r.omega1 - w2_real);
    return r;
}

double inversion_analytic(double t, const QhdConstants& c, double sz0) {
    if (!(c.gamma0 > 0.0)) throw InvalidParameter("inversion_analytic: gamma0 must be positive");
    const RatePair r = rates(c);
    const double ge2 = c.g_eff() * c.g_eff();
    const double sq = std::sqrt(c.gamma0);
    const double k1 = 0.5 * ge2 * sq * (sq + 1.0);
    const double k2 = 0.5 * ge2 * sq * (sq - 1.0);
    const double rise = k1 * one_minus_cos_over(r.omega1_sq, t) + k2 * one_minus_cos_over(r.omega2_sq, t);
    return sz0 * (1.0 - 2.0 * rise);
}

RateSeries rate_expansions(const QhdConstants& c) {
    const RatePair exact = rates(c);
    const double ge = c.g_eff();
    const double d2 = c.delta * c.delta;
    const double s2g = std::sqrt(2.0 * c.gamma0);
    RateSeries s;
    if (ge > 0.0) {
        s.t_plus_inv = ge * s2g - ge / (4.0 * s2g) + d2 / (2.0 * ge * s2g);
        s.t_minus_inv = ge / std::numbers::sqrt2 * (1.0 + 1.0 / (8.0 * c.gamma0)) -
                        d2 / (4.0 * std::numbers::sqrt2 * ge * c.gamma0);
    }
    auto rel = [](double approx, double ref) { return ref != 0.0 ? std::abs(approx - ref) / std::abs(ref) : std::abs(approx); };
    s.rel_err_plus = rel(s.t_plus_inv, exact.t_plus_inv);
    s.rel_err_minus = rel(s.t_minus_inv, exact.t_minus_inv);
    s.in_regime = c.gamma0 >= 25.0 && std::abs(c.delta) <= 0.1 * c.g * std::sqrt(c.gamma0);
    return s;
}

TimeScales time_scales(const JcmParams& params, double gamma0, ClosureCoupling closure) {
    if (!(gamma0 > 0.0)) throw InvalidParameter("time_scales: gamma0 must be positive");
    QhdConstants c;
    c.g = params.coupling();
    c.closure = closure;
    const double ge = c.g_eff();
    return {params.omega(), ge * std::sqrt(2.0 * gamma0), ge / std::numbers::sqrt2,
            params.coupling() / std::sqrt(gamma0)};
}

double revival_time(double g, double gamma0) {
    if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
    return 2.0 * std::numbers::pi * std::sqrt(gamma0) / g;
}

double collapse_fit(double t, double g, double gamma0) {
    return 0.5 * std::cos(2.0 * std::sqrt(gamma0) * g * t) * std::exp(-g * g * t * t);
}

}  // namespace dimerdyn
