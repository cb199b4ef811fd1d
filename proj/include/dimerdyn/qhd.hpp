// qhd.hpp: six-variable moment closure of the rotating-wave model
//
// Variables x = (<alpha>, <beta>, <S_z>, <alpha gamma>, <beta gamma>, <S_z gamma>)
// obey i dx/dt = M x with a constant 6x6 matrix M once the triple moment
// <S_z gamma^2> is decomposed into pair and single moments. The beta-type
// entries hold -<beta^>, the sign for which i d<S_z>/dt = g x[1] matches the
// Heisenberg equation of the exact model.

#pragma once

#include "dimerdyn/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace dimerdyn {

// How gamma is counted when the closure constants are taken from a state.
//   operator_def: gamma = a^dag a + S+S- + 1/2
//   excitation:   gamma = a^dag a + S+S-   (number of quanta, used by default)
enum class GammaConvention { operator_def, excitation };

// Strength kappa of the beta-row coupling in the closed matrix.
//   closed_form: kappa = 2g, eigenfrequencies coincide with the closed-form
//                inversion and rate formulas
//   commutator:  kappa = 4g, the value [alpha, beta] = 4 N S_z gives for the
//                rotating-wave Hamiltonian
enum class ClosureCoupling { closed_form, commutator };

std::string_view to_string(GammaConvention c) noexcept;
std::string_view to_string(ClosureCoupling c) noexcept;

struct QhdState {
    double t{0.0};
    std::array<complex, 6> x{};

    complex alpha() const { return x[0]; }
    complex beta() const { return x[1]; }
    complex sz() const { return x[2]; }
    complex alpha_gamma() const { return x[3]; }
    complex beta_gamma() const { return x[4]; }
    complex sz_gamma() const { return x[5]; }
};

struct QhdConstants {
    double gamma0{0.5};   // <gamma>
    double gamma2{0.25};  // <gamma^2>
    double delta{0.0};
    double g{0.0};
    ClosureCoupling closure{ClosureCoupling::closed_form};

    double kappa() const noexcept { return closure == ClosureCoupling::commutator ? 4.0 * g : 2.0 * g; }
    // Coupling that plays the role of g in the closed-form formulas: g_eff^2 = kappa g / 2.
    double g_eff() const noexcept;
    // Throws InvalidParameter unless gamma2 >= gamma0^2 (up to rounding) and g >= 0.
    void validate() const;
};

// <ABC> ~ <A><BC> + <B><AC> + <C><AB> - 2<A><B><C>
complex closure_triple(complex a, complex b, complex c, complex ab, complex ac, complex bc);

Eigen::Matrix<double, 6, 6> qhd_system_matrix(const QhdConstants& c);

// exp(-i M t) x0 at each requested time.
std::vector<QhdState> qhd_propagate(const QhdState& s0, const QhdConstants& c,
                                    std::span<const double> times);

// Classical RK4 on the same system, step min(0.01/omega1, 0.01/omega). Cross-check only.
std::vector<QhdState> qhd_propagate_rk4(const QhdState& s0, const QhdConstants& c,
                                        std::span<const double> times, double omega = 1.0);

struct QhdInit {
    QhdState state;
    QhdConstants constants;
};

QhdInit qhd_init_from_state(const StateVector& s, const JcmParams& params,
                            GammaConvention conv = GammaConvention::excitation,
                            ClosureCoupling closure = ClosureCoupling::closed_form);

struct RatePair {
    double omega1{0.0};
    double omega2{0.0};         // |omega2| when sub_quantum
    double omega1_sq{0.0};
    double omega2_sq{0.0};
    double t_plus_inv{0.0};     // (omega1 + omega2) / 2
    double t_minus_inv{0.0};    // (omega1 - omega2) / 2
    bool sub_quantum{false};    // omega2^2 < 0: imaginary omega2, rates use real parts
};

RatePair rates(const QhdConstants& c);

// Closed-form S_z(t) for an uncorrelated start with <alpha> = <beta> = 0.
// Sz0 = -1/2 gives the two-cosine form; other Sz0 scale it linearly.
double inversion_analytic(double t, const QhdConstants& c, double sz0);

struct RateSeries {
    double t_plus_inv{0.0};
    double t_minus_inv{0.0};
    double rel_err_plus{0.0};   // relative to rates()
    double rel_err_minus{0.0};
    bool in_regime{true};       // gamma0 >= 25 and |delta| <= 0.1 g sqrt(gamma0)
};

// Expansions in delta and 1/sqrt(gamma0) to second order.
RateSeries rate_expansions(const QhdConstants& c);

struct TimeScales {
    double t1_inv;  // omega
    double t2_inv;  // g sqrt(2 gamma0)
    double t3_inv;  // g / sqrt(2)
    double t4_inv;  // g / sqrt(gamma0)
};

TimeScales time_scales(const JcmParams& params, double gamma0,
                       ClosureCoupling closure = ClosureCoupling::closed_form);

// 2 pi sqrt(gamma0) / g; infinite when g == 0.
double revival_time(double g, double gamma0);

// Reference envelope 1/2 cos(2 sqrt(gamma0) g t) exp(-g^2 t^2) for collapse comparisons.
double collapse_fit(double t, double g, double gamma0);

}  // namespace dimerdyn
