#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "leelab/kinematics.hpp"

namespace leelab {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<cplx>;

// Dense Hermitian operator. Construction symmetrizes the input to
// (X + X^dagger)/2 and records the hermiticity defect ||X - X^dagger||_F of
// what was passed in. Defects above 1e-12 * max(1, ||X||_F) are logged,
// defects above 1e-8 * max(1, ||X||_F) abort with NumericError: roundoff is
// repaired silently, construction bugs are not.
class HermitianOperator {
public:
    HermitianOperator() = default;
    explicit HermitianOperator(Matrix m, std::string name = "operator");

    const Matrix& matrix() const { return m_; }
    long dim() const { return m_.rows(); }
    double hermiticity_defect() const { return defect_; }
    const std::string& name() const { return name_; }
    double frobenius_norm() const { return m_.norm(); }

private:
    Matrix m_;
    double defect_ = 0.0;
    std::string name_;
};

// Eigenvalues ascending, eigenvectors as matching columns.
struct SpectralDecomposition {
    RealVector eigenvalues;
    Matrix eigenvectors;
};

// Amplitude vector over a SectorBasis with its norm cached at construction.
struct StateVector {
    Vector amplitudes;
    double cached_norm = 0.0;

    static StateVector from(Vector amps);
    long dim() const { return amplitudes.size(); }
    double norm() const { return cached_norm; }
    double recompute_norm() const { return amplitudes.norm(); }
};

// Interaction kernel G(k1, k2) of the a <-> b + c vertex:
// g * chi(k1) * chi(k2) * [8 w_a(k1+k2) w_b(k1) w_c(k2)]^(-1/2) * sqrt(dk)
// with the Gaussian form factor chi(k) = exp(-k^2 / (2 lambda_ff^2)).
double interaction_kernel(const ModelParams& params, double dk, double k1, double k2);

// Diagonals of the free Hamiltonian and total momentum in the basis order.
RealVector free_hamiltonian_diagonal(const SectorBasis& basis, const ModelParams& params);
RealVector momentum_diagonal(const SectorBasis& basis);

// Sparse forms of the off-diagonal operators. These are the single source
// of entries; the dense builders below materialize them, so dense and
// sparse never disagree.
SparseMatrix interaction_sparse(const SectorBasis& basis, const ModelParams& params);
SparseMatrix free_boost_sparse(const SectorBasis& basis, const ModelParams& params);

HermitianOperator build_free_hamiltonian(const SectorBasis& basis, const ModelParams& params);
HermitianOperator build_interaction(const SectorBasis& basis, const ModelParams& params);
HermitianOperator build_full_hamiltonian(const SectorBasis& basis, const ModelParams& params);
HermitianOperator build_momentum(const SectorBasis& basis);

// Free boost generator N0 = (i/2)(w D + D w) per particle, with D the
// central finite-difference derivative in that particle's momentum
// (one-sided at the two edge modes) and w the particle's dispersion
// diagonal. Pair states get the sum of the b-particle and c-particle
// generators. The result is symmetrized to exact Hermiticity.
HermitianOperator build_free_boost(const SectorBasis& basis, const ModelParams& params);

// X Y - Y X; anti-Hermitian for Hermitian inputs.
Matrix commutator(const Matrix& x, const Matrix& y);

// Throws NumericError (carrying the dimension) if the solver fails.
SpectralDecomposition spectral(const HermitianOperator& op);

// exp(-i X t) psi through an existing decomposition of X, or one-shot.
StateVector evolve(const SpectralDecomposition& dec, const StateVector& psi, double t);
StateVector evolve(const HermitianOperator& op, const StateVector& psi, double t);

// e^{i beta N} X e^{-i beta N} via the spectral decomposition of N.
// beta = 0 returns X unchanged.
HermitianOperator conjugate_by_boost(const HermitianOperator& x,
                                     const HermitianOperator& n, double beta);

// Spectral decomposition restricted to each total-momentum block. Requires
// the operator to be block-diagonal: any entry coupling different blocks
// with magnitude above offblock_tol * max(1, ||X||_F) raises NumericError.
struct BlockSpectral {
    std::vector<std::vector<long>> members;
    std::vector<SpectralDecomposition> eig;
    long dim = 0;
};
BlockSpectral spectral_by_blocks(const HermitianOperator& op, const SectorBasis& basis,
                                 double offblock_tol = 1e-12);
StateVector evolve_blocks(const BlockSpectral& dec, const StateVector& psi, double t);

// <bra| exp(-i X t) |ket> reduced to sum_j weight_j * exp(-i freq_j t),
// keeping only modes where both states have support. Evaluating the sum is
// O(modes) per time sample, so one reduction serves a whole t-grid.
struct ModeSum {
    std::vector<double> freq;
    std::vector<cplx> weight;
    cplx eval(double t) const;
};
ModeSum amplitude_modes(const BlockSpectral& dec, const StateVector& bra,
                        const StateVector& ket);

} // namespace leelab
