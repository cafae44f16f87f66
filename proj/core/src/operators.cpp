#include "leelab/operators.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "leelab/errors.hpp"
#include "leelab/log.hpp"

namespace leelab {

HermitianOperator::HermitianOperator(Matrix m, std::string name)
    : name_(std::move(name)) {
    if (m.rows() != m.cols()) {
        throw NumericError(name_ + ": matrix must be square");
    }
    defect_ = (m - m.adjoint()).norm();
    const double scale = std::max(1.0, m.norm());
    if (defect_ > 1e-8 * scale) {
        throw NumericError(name_ + ": hermiticity defect " + std::to_string(defect_) +
                           " is beyond repair (limit 1e-8 relative)");
    }
    if (defect_ > 1e-12 * scale) {
        log_stage("build", name_ + ": repaired hermiticity defect " + std::to_string(defect_));
    }
    m_ = 0.5 * (m + m.adjoint().eval());
}

StateVector StateVector::from(Vector amps) {
    StateVector s;
    s.amplitudes = std::move(amps);
    s.cached_norm = s.amplitudes.norm();
    return s;
}

double interaction_kernel(const ModelParams& params, double dk, double k1, double k2) {
    const double lam2 = 2.0 * params.lambda_ff * params.lambda_ff;
    const double chi1 = std::exp(-k1 * k1 / lam2);
    const double chi2 = std::exp(-k2 * k2 / lam2);
    const double wa = dispersion(params.m_a, k1 + k2);
    const double wb = dispersion(params.m_b, k1);
    const double wc = dispersion(params.m_c, k2);
    return params.g * chi1 * chi2 / std::sqrt(8.0 * wa * wb * wc) * std::sqrt(dk);
}

RealVector free_hamiltonian_diagonal(const SectorBasis& basis, const ModelParams& params) {
    const int n = basis.n();
    RealVector diag(basis.size());
    for (int i = 0; i < n; ++i) {
        diag[basis.index_single(i)] = dispersion(params.m_a, basis.grid.modes[i]);
    }
    for (int i = 0; i < n; ++i) {
        const double wb = dispersion(params.m_b, basis.grid.modes[i]);
        for (int j = 0; j < n; ++j) {
            diag[basis.index_pair(i, j)] = wb + dispersion(params.m_c, basis.grid.modes[j]);
        }
    }
    return diag;
}

RealVector momentum_diagonal(const SectorBasis& basis) {
    // momentum_offset * dk rather than sums of mode values: states in the
    // same block then carry bit-identical momenta, so [H, P] vanishes
    // exactly for every dk, not only for binary-representable ones.
    RealVector diag(basis.size());
    for (long idx = 0; idx < basis.size(); ++idx) {
        diag[idx] = basis.momentum_offset(idx) * basis.grid.dk;
    }
    return diag;
}

SparseMatrix interaction_sparse(const SectorBasis& basis, const ModelParams& params) {
    const int n = basis.n();
    const int off = basis.grid.offset();
    const double dk = basis.grid.dk;
    std::vector<Eigen::Triplet<cplx>> entries;
    if (params.g != 0.0) {
        entries.reserve(2 * static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const int jt = (i - off) + (j - off);
                if (std::abs(jt) > off) continue;
                const double g_val =
                    interaction_kernel(params, dk, basis.grid.modes[i], basis.grid.modes[j]);
                const long row = basis.index_single(jt + off);
                const long col = basis.index_pair(i, j);
                entries.emplace_back(row, col, cplx(g_val, 0.0));
                entries.emplace_back(col, row, cplx(g_val, 0.0));
            }
        }
    }
    SparseMatrix m(basis.size(), basis.size());
    m.setFromTriplets(entries.begin(), entries.end());
    return m;
}

namespace {

// First-derivative stencil rows: central differences inside, first-order
// one-sided at the two edges.
std::vector<std::tuple<int, int, double>> derivative_entries(int n, double dk) {
    std::vector<std::tuple<int, int, double>> entries;
    entries.reserve(2 * static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        if (r == 0) {
            entries.emplace_back(0, 1, 1.0 / dk);
            entries.emplace_back(0, 0, -1.0 / dk);
        } else if (r == n - 1) {
            entries.emplace_back(n - 1, n - 1, 1.0 / dk);
            entries.emplace_back(n - 1, n - 2, -1.0 / dk);
        } else {
            entries.emplace_back(r, r + 1, 0.5 / dk);
            entries.emplace_back(r, r - 1, -0.5 / dk);
        }
    }
    return entries;
}

} // namespace

SparseMatrix free_boost_sparse(const SectorBasis& basis, const ModelParams& params) {
    const int n = basis.n();
    const double dk = basis.grid.dk;
    const auto d_entries = derivative_entries(n, dk);

    std::vector<double> wa(n), wb(n), wc(n);
    for (int i = 0; i < n; ++i) {
        wa[i] = dispersion(params.m_a, basis.grid.modes[i]);
        wb[i] = dispersion(params.m_b, basis.grid.modes[i]);
        wc[i] = dispersion(params.m_c, basis.grid.modes[i]);
    }

    std::vector<Eigen::Triplet<cplx>> entries;
    entries.reserve(d_entries.size() * (1 + 2 * static_cast<std::size_t>(n)));
    for (const auto& [r, c, v] : d_entries) {
        entries.emplace_back(basis.index_single(r), basis.index_single(c),
                             cplx(0.0, 0.5 * (wa[r] + wa[c]) * v));
        for (int j = 0; j < n; ++j) {
            entries.emplace_back(basis.index_pair(r, j), basis.index_pair(c, j),
                                 cplx(0.0, 0.5 * (wb[r] + wb[c]) * v));
        }
        for (int i = 0; i < n; ++i) {
            entries.emplace_back(basis.index_pair(i, r), basis.index_pair(i, c),
                                 cplx(0.0, 0.5 * (wc[r] + wc[c]) * v));
        }
    }
    SparseMatrix raw(basis.size(), basis.size());
    raw.setFromTriplets(entries.begin(), entries.end());
    SparseMatrix adj = SparseMatrix(raw.adjoint());
    return 0.5 * (raw + adj);
}

HermitianOperator build_free_hamiltonian(const SectorBasis& basis, const ModelParams& params) {
    return HermitianOperator(
        Matrix(free_hamiltonian_diagonal(basis, params).cast<cplx>().asDiagonal()), "H0");
}

HermitianOperator build_interaction(const SectorBasis& basis, const ModelParams& params) {
    return HermitianOperator(Matrix(interaction_sparse(basis, params)), "H_int");
}

HermitianOperator build_full_hamiltonian(const SectorBasis& basis, const ModelParams& params) {
    Matrix h = Matrix(interaction_sparse(basis, params));
    h.diagonal() += free_hamiltonian_diagonal(basis, params).cast<cplx>();
    return HermitianOperator(std::move(h), "H");
}

HermitianOperator build_momentum(const SectorBasis& basis) {
    return HermitianOperator(Matrix(momentum_diagonal(basis).cast<cplx>().asDiagonal()), "P");
}

HermitianOperator build_free_boost(const SectorBasis& basis, const ModelParams& params) {
    return HermitianOperator(Matrix(free_boost_sparse(basis, params)), "N0");
}

Matrix commutator(const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        throw NumericError("commutator: dimension mismatch");
    }
    return x * y - y * x;
}

SpectralDecomposition spectral(const HermitianOperator& op) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(op.matrix());
    if (solver.info() != Eigen::Success) {
        throw NumericError("spectral: eigensolver failed at dimension " +
                           std::to_string(op.dim()));
    }
    return SpectralDecomposition{solver.eigenvalues(), solver.eigenvectors()};
}

StateVector evolve(const SpectralDecomposition& dec, const StateVector& psi, double t) {
    Vector w = dec.eigenvectors.adjoint() * psi.amplitudes;
    w.array() *= (cplx(0.0, -t) * dec.eigenvalues.cast<cplx>().array()).exp();
    return StateVector::from(dec.eigenvectors * w);
}

StateVector evolve(const HermitianOperator& op, const StateVector& psi, double t) {
    return evolve(spectral(op), psi, t);
}

HermitianOperator conjugate_by_boost(const HermitianOperator& x,
                                     const HermitianOperator& n, double beta) {
    if (x.dim() != n.dim()) {
        throw NumericError("conjugate_by_boost: dimension mismatch");
    }
    if (beta == 0.0) {
        return x;
    }
    const SpectralDecomposition dec = spectral(n);
    const Vector phases =
        (cplx(0.0, beta) * dec.eigenvalues.cast<cplx>().array()).exp().matrix();
    const Matrix u = dec.eigenvectors * phases.asDiagonal() * dec.eigenvectors.adjoint();
    return HermitianOperator(u * x.matrix() * u.adjoint(), x.name());
}

BlockSpectral spectral_by_blocks(const HermitianOperator& op, const SectorBasis& basis,
                                 double offblock_tol) {
    const Matrix& x = op.matrix();
    if (x.rows() != basis.size()) {
        throw NumericError("spectral_by_blocks: operator does not match basis size");
    }
    const double limit = offblock_tol * std::max(1.0, x.norm());
    for (long c = 0; c < x.cols(); ++c) {
        for (long r = 0; r < x.rows(); ++r) {
            if (basis.block_of[r] != basis.block_of[c] && std::abs(x(r, c)) > limit) {
                throw NumericError(op.name() + ": entry (" + std::to_string(r) + "," +
                                   std::to_string(c) + ") couples different momentum blocks");
            }
        }
    }

    BlockSpectral dec;
    dec.dim = x.rows();
    dec.members = basis.blocks;
    dec.eig.reserve(basis.blocks.size());
    for (const auto& members : basis.blocks) {
        const long bs = static_cast<long>(members.size());
        Matrix sub(bs, bs);
        for (long a = 0; a < bs; ++a) {
            for (long b = 0; b < bs; ++b) {
                sub(a, b) = x(members[a], members[b]);
            }
        }
        Eigen::SelfAdjointEigenSolver<Matrix> solver(sub);
        if (solver.info() != Eigen::Success) {
            throw NumericError("spectral_by_blocks: eigensolver failed on a block of size " +
                               std::to_string(bs));
        }
        dec.eig.push_back({solver.eigenvalues(), solver.eigenvectors()});
    }
    return dec;
}

StateVector evolve_blocks(const BlockSpectral& dec, const StateVector& psi, double t) {
    if (psi.dim() != dec.dim) {
        throw NumericError("evolve_blocks: state does not match decomposition size");
    }
    Vector out(dec.dim);
    for (std::size_t b = 0; b < dec.members.size(); ++b) {
        const auto& members = dec.members[b];
        const long bs = static_cast<long>(members.size());
        Vector local(bs);
        for (long a = 0; a < bs; ++a) local[a] = psi.amplitudes[members[a]];
        Vector w = dec.eig[b].eigenvectors.adjoint() * local;
        w.array() *= (cplx(0.0, -t) * dec.eig[b].eigenvalues.cast<cplx>().array()).exp();
        local = dec.eig[b].eigenvectors * w;
        for (long a = 0; a < bs; ++a) out[members[a]] = local[a];
    }
    return StateVector::from(std::move(out));
}

cplx ModeSum::eval(double t) const {
    // Sequential ascending-index accumulation: the reduction order is fixed
    // so repeated runs are bitwise identical.
    cplx acc(0.0, 0.0);
    for (std::size_t j = 0; j < freq.size(); ++j) {
        acc += weight[j] * std::exp(cplx(0.0, -freq[j] * t));
    }
    return acc;
}

ModeSum amplitude_modes(const BlockSpectral& dec, const StateVector& bra,
                        const StateVector& ket) {
    if (bra.dim() != dec.dim || ket.dim() != dec.dim) {
        throw NumericError("amplitude_modes: state does not match decomposition size");
    }
    ModeSum modes;
    for (std::size_t b = 0; b < dec.members.size(); ++b) {
        const auto& members = dec.members[b];
        const long bs = static_cast<long>(members.size());
        Vector bra_local(bs), ket_local(bs);
        bool bra_zero = true, ket_zero = true;
        for (long a = 0; a < bs; ++a) {
            bra_local[a] = bra.amplitudes[members[a]];
            ket_local[a] = ket.amplitudes[members[a]];
            if (bra_local[a] != cplx(0.0, 0.0)) bra_zero = false;
            if (ket_local[a] != cplx(0.0, 0.0)) ket_zero = false;
        }
        if (bra_zero || ket_zero) continue;
        const Vector w = dec.eig[b].eigenvectors.adjoint() * bra_local;
        const Vector u = dec.eig[b].eigenvectors.adjoint() * ket_local;
        for (long j = 0; j < bs; ++j) {
            modes.freq.push_back(dec.eig[b].eigenvalues[j]);
            modes.weight.push_back(std::conj(w[j]) * u[j]);
        }
    }
    return modes;
}

} // namespace leelab
