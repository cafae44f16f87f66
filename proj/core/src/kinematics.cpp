#include "leelab/kinematics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "leelab/errors.hpp"

namespace leelab {

double rapidity_from_velocity(double v) {
    if (!(std::abs(v) < 1.0)) {
        throw std::domain_error("rapidity_from_velocity: |v| must be < 1, got " +
                                std::to_string(v));
    }
    return std::atanh(v);
}

double gamma_factor(double v) {
    if (!(std::abs(v) < 1.0)) {
        throw std::domain_error("gamma_factor: |v| must be < 1, got " +
                                std::to_string(v));
    }
    return 1.0 / std::sqrt((1.0 - v) * (1.0 + v));
}

double dispersion(double mass, double k) { return std::hypot(mass, k); }

BoostParams BoostParams::from_velocity(double v) {
    BoostParams b;
    b.v = v;
    b.beta = rapidity_from_velocity(v);
    b.gamma = gamma_factor(v);
    return b;
}

void ModelParams::validate() const {
    if (!(m_a > 0.0) || !(m_b > 0.0) || !(m_c > 0.0)) {
        throw ConfigError("model: all masses must be positive");
    }
    if (!(m_b + m_c < m_a)) {
        throw ConfigError("model: decay channel closed, need m_b + m_c < m_a (got " +
                          std::to_string(m_b + m_c) + " >= " + std::to_string(m_a) + ")");
    }
    if (!std::isfinite(g)) {
        throw ConfigError("model: coupling g must be finite");
    }
    if (!(lambda_ff > 0.0) || !std::isfinite(lambda_ff)) {
        throw ConfigError("model: form-factor width lambda_ff must be positive");
    }
}

MomentumGrid MomentumGrid::build(int n_modes, double dk) {
    if (n_modes < 3 || n_modes % 2 == 0) {
        throw ConfigError("grid: n_modes must be odd and >= 3, got " +
                          std::to_string(n_modes));
    }
    if (!(dk > 0.0) || !std::isfinite(dk)) {
        throw ConfigError("grid: dk must be positive and finite");
    }
    MomentumGrid grid;
    grid.n_modes = n_modes;
    grid.dk = dk;
    grid.modes.resize(n_modes);
    const int off = grid.offset();
    for (int i = 0; i < n_modes; ++i) {
        grid.modes[i] = (i - off) * dk;
    }
    return grid;
}

long SectorBasis::index_single(int i) const { return i; }

long SectorBasis::index_pair(int i, int j) const {
    const long m = n();
    return m + static_cast<long>(i) * m + j;
}

int SectorBasis::momentum_offset(long idx) const {
    const int m = n();
    const int off = grid.offset();
    if (idx < m) {
        return static_cast<int>(idx) - off;
    }
    const long rest = idx - m;
    const int i = static_cast<int>(rest / m);
    const int j = static_cast<int>(rest % m);
    return (i - off) + (j - off);
}

int SectorBasis::block_with_offset(int offset) const {
    const int lowest = block_offsets.empty() ? 0 : block_offsets.front();
    const int pos = offset - lowest;
    if (pos < 0 || pos >= static_cast<int>(block_offsets.size())) return -1;
    return pos;
}

SectorBasis SectorBasis::enumerate(const MomentumGrid& grid) {
    SectorBasis basis;
    basis.grid = grid;
    const int off = grid.offset();
    const long dim = basis.size();

    // Pair states reach total momentum offsets in [-2*off, 2*off]; every
    // offset in that range occurs, so blocks can be indexed densely.
    const int lowest = -2 * off;
    basis.blocks.assign(4 * off + 1, {});
    basis.block_offsets.resize(4 * off + 1);
    for (int b = 0; b <= 4 * off; ++b) {
        basis.block_offsets[b] = lowest + b;
    }
    basis.block_of.resize(dim);
    for (long idx = 0; idx < dim; ++idx) {
        const int b = basis.momentum_offset(idx) - lowest;
        basis.blocks[b].push_back(idx);
        basis.block_of[idx] = b;
    }
    return basis;
}

} // namespace leelab
