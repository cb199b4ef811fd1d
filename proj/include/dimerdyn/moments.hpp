// moments.hpp: first and second moments measured on one state

#pragma once

#include <complex>

namespace dimerdyn {

// Raw expectation values at time t. alpha = a^dag S- + a S+ is Hermitian,
// beta = a^dag S- - a S+ is anti-Hermitian so <beta> is purely imaginary.
struct MomentSet {
    double t{0.0};
    std::complex<double> a{};     // <a>
    std::complex<double> a2{};    // <a^2>
    double n{0.0};                // <a^dag a>
    std::complex<double> s_plus{};// <S+>
    double s_plus_s_minus{0.0};   // <S+ S->
    double sz{-0.5};              // <S_z> = <S+S-> - 1/2
    double alpha{0.0};            // <alpha>
    std::complex<double> beta{};  // <beta>
    double gamma{0.5};            // <gamma> = <a^dag a> + <S+S-> + 1/2

    std::complex<double> s_minus() const { return std::conj(s_plus); }
    double s_minus_s_plus() const { return 1.0 - s_plus_s_minus; }
};

}  // namespace dimerdyn
