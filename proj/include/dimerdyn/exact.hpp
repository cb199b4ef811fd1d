// exact.hpp: exact propagation of the rotating-wave Hamiltonian
//
//   H = omega (a^dag a + 1/2) + Omega S+S- + g (a^dag S- + a S+)
//
// H conserves the excitation number, so on the truncated basis it splits into
// the scalar sector {|0,0>}, 2x2 sectors {|0,N>, |1,N-1>} for 1 <= N <= n_max,
// and the scalar top sector {|1,n_max>}. Each sector is rotated by its own
// spectral decomposition, which is exact for any t.

#pragma once

#include "dimerdyn/model.hpp"
#include "dimerdyn/moments.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace dimerdyn {

struct SectorBlock {
    std::size_t excitations;           // N
    std::size_t size;                  // 1 or 2
    std::array<std::size_t, 2> index;  // flat indices of |0,N>, |1,N-1>
    double h00, h01, h11;              // h01, h11 unused when size == 1
};

class RwaHamiltonian {
public:
    explicit RwaHamiltonian(JcmParams params);

    const JcmParams& params() const noexcept { return params_; }
    std::span<const SectorBlock> blocks() const noexcept { return blocks_; }

    // Dense real-symmetric matrix assembled from the operator definitions,
    // independent of the sector list.
    Eigen::MatrixXd dense() const;

    // Sector eigenvalues, ascending.
    std::vector<double> block_energies() const;

    double expectation(const StateVector& s) const;

private:
    JcmParams params_;
    std::vector<SectorBlock> blocks_;
};

RwaHamiltonian build_rwa_hamiltonian(const JcmParams& params);

// Dense diagonal gamma = a^dag a + S+S- + 1/2 on the truncated basis.
Eigen::MatrixXd gamma_matrix(std::size_t n_max);

// Precomputed sector eigenbases with s0 projected onto them; state_at is O(n_max).
class ExactPropagator {
public:
    ExactPropagator(const RwaHamiltonian& h, const StateVector& s0);

    StateVector state_at(double t) const;
    std::size_t n_max() const noexcept { return n_max_; }

private:
    struct Mode {
        std::size_t size;
        std::array<std::size_t, 2> index;
        std::array<double, 2> energy;
        double c, s;                      // rotation: v+ = (c, s), v- = (-s, c)
        std::array<complex, 2> weight;    // projection of s0
    };
    std::size_t n_max_;
    std::vector<Mode> modes_;
};

struct PropagationResult {
    std::vector<double> times;
    std::vector<StateVector> states;
    double max_tail_mass{0.0};   // largest mass in the top five Fock levels
    bool truncation_warning{false};
};

// Leakage threshold on the top-five-level mass that raises the warning flag.
inline constexpr double kLeakageWarning = 1e-6;

StateVector evolve_exact(const RwaHamiltonian& h, const StateVector& s0, double t);
PropagationResult evolve_exact(const RwaHamiltonian& h, const StateVector& s0,
                               std::span<const double> times);

// Dense-dimension limit for the oracle; DIMERDYN_MAX_DIM overrides the default 4000.
std::size_t dense_dimension_limit();

// exp(-iHt) s0 through a full Hermitian eigendecomposition of the dense form.
// Throws DimensionGuardError above dense_dimension_limit().
StateVector evolve_brute(const RwaHamiltonian& h, const StateVector& s0, double t);

// All raw moments in a single pass over the amplitudes.
MomentSet measure(const StateVector& s, double t = 0.0);

}  // namespace dimerdyn
