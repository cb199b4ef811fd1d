// support.hpp: shared helpers for the test binaries
//
// Operators here are built from their matrix elements with plain loops so that
// they do not share code with the library under test.

#pragma once

#include "dimerdyn/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace testsupport {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline std::size_t idx(int level, std::size_t n) { return 2 * n + static_cast<std::size_t>(level); }

// <m|a|n> = sqrt(n) delta_{m,n-1}, identity on the electronic factor.
inline Mat op_a(std::size_t n_max) {
    const auto d = static_cast<Eigen::Index>(2 * (n_max + 1));
    Mat a = Mat::Zero(d, d);
    for (std::size_t n = 1; n <= n_max; ++n)
        for (int i = 0; i < 2; ++i)
            a(static_cast<Eigen::Index>(idx(i, n - 1)), static_cast<Eigen::Index>(idx(i, n))) = std::sqrt(double(n));
    return a;
}

// S+ |0,n> = |1,n>.
inline Mat op_splus(std::size_t n_max) {
    const auto d = static_cast<Eigen::Index>(2 * (n_max + 1));
    Mat s = Mat::Zero(d, d);
    for (std::size_t n = 0; n <= n_max; ++n)
        s(static_cast<Eigen::Index>(idx(1, n)), static_cast<Eigen::Index>(idx(0, n))) = 1.0;
    return s;
}

inline Vec to_vec(const dimerdyn::StateVector& s) {
    const auto a = s.amplitudes();
    Vec v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t k = 0; k < a.size(); ++k) v(static_cast<Eigen::Index>(k)) = a[k];
    return v;
}

inline cplx expect(const Vec& psi, const Mat& op) { return psi.dot(op * psi); }

// Normalized random state with zero weight in the top `clear` Fock levels, so
// truncated ladder products act as on the infinite space.
inline dimerdyn::StateVector random_state(std::size_t n_max, std::mt19937& rng, std::size_t clear = 3) {
    std::normal_distribution<double> nd;
    std::vector<cplx> c(2 * (n_max + 1));
    double norm = 0.0;
    for (std::size_t n = 0; n + clear <= n_max; ++n)
        for (int i = 0; i < 2; ++i) {
            c[idx(i, n)] = {nd(rng), nd(rng)};
            norm += std::norm(c[idx(i, n)]);
        }
    for (auto& x : c) x /= std::sqrt(norm);
    return dimerdyn::StateVector(std::move(c));
}

// Coherent amplitudes from the ratio recurrence c_n = c_{n-1} alpha / sqrt(n).
inline std::vector<cplx> coherent_by_recurrence(cplx alpha, std::size_t n_max) {
    std::vector<cplx> c(n_max + 1);
    c[0] = std::exp(-0.5 * std::norm(alpha));
    for (std::size_t n = 1; n <= n_max; ++n) c[n] = c[n - 1] * alpha / std::sqrt(double(n));
    return c;
}

}  // namespace testsupport
