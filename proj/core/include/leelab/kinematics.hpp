#pragma once

#include <vector>

namespace leelab {

// Rapidity beta = atanh(v). Requires |v| < 1; throws std::domain_error
// otherwise.
double rapidity_from_velocity(double v);

// Lorentz factor gamma = 1/sqrt(1 - v^2). Requires |v| < 1.
double gamma_factor(double v);

// Relativistic dispersion omega(k) = sqrt(mass^2 + k^2).
double dispersion(double mass, double k);

// Velocity, rapidity and Lorentz factor of one boost, kept together so a
// single validation covers all three.
struct BoostParams {
    double v = 0.0;
    double beta = 0.0;
    double gamma = 1.0;

    static BoostParams from_velocity(double v);
};

// Masses and couplings of the a -> b + c decay model.
struct ModelParams {
    double m_a = 1.0;
    double m_b = 0.4;
    double m_c = 0.3;
    double g = 0.05;
    double lambda_ff = 2.0;

    // Throws ConfigError unless all masses are positive, the decay channel
    // is open (m_b + m_c < m_a) and the form-factor width is positive.
    void validate() const;
};

// Uniform symmetric momentum lattice: modes[i] = (i - offset())*dk for
// i in [0, n_modes), so mode offset 0 sits exactly at k = 0.
struct MomentumGrid {
    int n_modes = 0;
    double dk = 0.0;
    std::vector<double> modes;

    int offset() const { return (n_modes - 1) / 2; }
    double k_max() const { return modes.empty() ? 0.0 : modes.back(); }

    // Throws ConfigError unless n_modes is odd and >= 3 and dk > 0.
    static MomentumGrid build(int n_modes, double dk);
};

// State space of the single-excitation decay model on one grid:
// n single-particle states A(p_i) at indices [0, n), then n^2 pair states
// BC(k_i, k_j) at index n + i*n + j, for n = n_modes.
//
// Total momentum is tracked as an integer multiple of dk so states can be
// grouped into exactly conserved momentum blocks with no floating-point
// comparisons.
struct SectorBasis {
    MomentumGrid grid;

    // States grouped by total momentum, ascending in the integer offset.
    std::vector<std::vector<long>> blocks;
    // blocks[b] holds the states with total momentum block_offsets[b]*dk.
    std::vector<int> block_offsets;
    // Position in `blocks` of each state.
    std::vector<int> block_of;

    int n() const { return grid.n_modes; }
    long size() const {
        long m = n();
        return m + m * m;
    }

    long index_single(int i) const;
    long index_pair(int i, int j) const;
    bool is_single(long idx) const { return idx < n(); }

    // Total momentum of a state as an integer multiple of dk.
    int momentum_offset(long idx) const;
    double total_momentum(long idx) const {
        return momentum_offset(idx) * grid.dk;
    }

    // Index into `blocks` for a given integer momentum offset, -1 if no
    // state carries that total momentum.
    int block_with_offset(int offset) const;

    static SectorBasis enumerate(const MomentumGrid& grid);
};

} // namespace leelab
