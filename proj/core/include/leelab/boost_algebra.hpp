#pragma once

#include <utility>
#include <vector>

#include "leelab/operators.hpp"

namespace leelab {

// The model operators bundled in sparse form. H0 and P are exactly
// diagonal; H_int, N0 and the stencil N_int are sparse. This is the
// memory-scalable backing used for residual studies and least-squares
// refinement on fine grids; the dense builders materialize the same
// entries, so the two views never diverge.
struct SparseOperatorSet {
    RealVector h0;
    RealVector p;
    SparseMatrix h_int;
    SparseMatrix n0;
    SparseMatrix n_int; // built with global sign +1
    long dim = 0;
};
SparseOperatorSet build_sparse_operator_set(const SectorBasis& basis,
                                            const ModelParams& params);

// Interaction part of the boost generator: a first-difference stencil in
// total momentum. For each pair state BC(k1,k2) with total K = k1+k2:
// <A(K + sign*dk)|N_int|BC> = -i*G(k1,k2)/(2 dk) and
// <A(K - sign*dk)|N_int|BC> = +i*G(k1,k2)/(2 dk), plus conjugate mirrors.
SparseMatrix interaction_boost_stencil_sparse(const SectorBasis& basis,
                                              const ModelParams& params, int sign);
HermitianOperator build_interaction_boost_stencil(const SectorBasis& basis,
                                                  const ModelParams& params,
                                                  int sign = +1);

// Dense N0 + sign * N_int, the full boost generator candidate.
HermitianOperator build_boost_generator(const SectorBasis& basis, const ModelParams& params,
                                        int sign = +1);

// Frobenius residuals of the boost algebra [N,H]=iP, [N,P]=iH, [H,P]=0.
// r_NH and r_NP are relative (to ||P|| and ||H||); r_HP is absolute.
struct AlgebraResiduals {
    double r_NH = 0.0;
    double r_NP = 0.0;
    double r_HP = 0.0;
};
AlgebraResiduals algebra_residuals(const HermitianOperator& h, const HermitianOperator& p,
                                   const HermitianOperator& n);
AlgebraResiduals algebra_residuals_sparse(const SparseOperatorSet& ops,
                                          const SparseMatrix& n_full);

// The same residuals measured on a family of states (columns of psi):
// r_NH = ||([N,H] - iP) psi|| / ||P psi||, r_NP = ||([N,P] - iH) psi|| / ||H psi||.
// On smooth interior-supported states these follow the O(dk^2) stencil law;
// the whole-space Frobenius numbers do not, because the diagonal targets iP
// and iH are unreachable by any commutator with the diagonal P (commutators
// with a diagonal matrix have zero diagonal wherever the diagonal is
// degenerate, and momentum blocks are exactly degenerate in P).
struct StateResiduals {
    double r_NH = 0.0;
    double r_NP = 0.0;
};
StateResiduals algebra_residuals_on_states(const SparseOperatorSet& ops,
                                           const SparseMatrix& n_full, const Matrix& psi);

// Six normalized test states supported away from the grid edges: three
// Gaussian A-sector packets (centers 0, +k_max/4, -k_max/4) and three
// product Gaussians in the BC sector, all with width k_max/8.
Matrix interior_test_states(const SectorBasis& basis);

// ||[N,H] - iP||_F^2 + ||[N,P] - iH||_F^2 for N = n_full.
double boost_algebra_objective(const SparseOperatorSet& ops, const SparseMatrix& n_full);

// Global stencil sign, fixed by minimizing the full algebra objective over
// the two candidates N = N0 +/- N_int. The narrower criterion
// ||[N_int,P] - iH_int|| alone cannot decide: the commutator lives on the
// shifted blocks and iH_int on the momentum-conserving ones, disjoint
// supports, so that norm is exactly sign-independent on this lattice.
struct StencilSignChoice {
    int sign = +1;
    double objective_plus = 0.0;
    double objective_minus = 0.0;
};
StencilSignChoice select_stencil_sign(const SparseOperatorSet& ops);

// Upper-triangle index pairs (A row, BC column) covering total-momentum
// shifts {0, +-1, +-2} around each pair state: the stencil's own support
// plus nearest-neighbor blocks. Hermitian mirrors are implied.
std::vector<std::pair<long, long>> stencil_neighbor_pattern(const SectorBasis& basis);

// Least-squares refinement of the boost generator on a fixed sparsity
// pattern: minimizes ||[N,H]-iP||_F^2 + ||[N,P]-iH||_F^2 over the complex
// entries at the pattern positions (real parameterization, conjugate
// mirrors implied), keeping every off-pattern entry of the seed fixed.
// Conjugate-gradient iteration on the normal equations, started from the
// seed's pattern entries, so the objective never rises above the seed's.
struct RefineOptions {
    double grad_tol = 1e-10;     // relative gradient stopping tolerance
    double plateau_tol = 1e-14;  // relative objective decrease per window
    long plateau_window = 100;
    long max_iterations = 0;     // 0: 10 * (number of real unknowns)
};
struct RefineResult {
    SparseMatrix n_refined;
    bool converged = false;
    long iterations = 0;
    double objective_seed = 0.0;
    double objective_refined = 0.0;
    double gradient_rel = 0.0;
};
RefineResult refine_boost_least_squares(const SparseOperatorSet& ops,
                                        const SparseMatrix& n_seed,
                                        const std::vector<std::pair<long, long>>& pattern,
                                        const RefineOptions& options = {});

// gamma*(H - v*P): the boosted Hamiltonian, exact for commuting H, P.
HermitianOperator boosted_hamiltonian_closed_form(const HermitianOperator& h,
                                                  const HermitianOperator& p, double v);
// gamma*(P - v*H): the boosted momentum.
HermitianOperator boosted_momentum_closed_form(const HermitianOperator& h,
                                               const HermitianOperator& p, double v);

// Compares explicit conjugation e^{i beta N} X e^{-i beta N} (beta =
// atanh(v); the +beta direction together with stencil sign +1 is the
// recorded convention) against the closed forms. e_H and e_P are relative
// Frobenius norms over the whole space; the _states variants are measured
// on the supplied state family (pass interior_test_states output), relative
// to ||H psi|| and ||P psi||.
struct BoostIdentityErrors {
    double v = 0.0;
    double beta = 0.0;
    double e_H = 0.0;
    double e_P = 0.0;
    double e_H_states = 0.0;
    double e_P_states = 0.0;
};
BoostIdentityErrors verify_boost_identity(const HermitianOperator& h,
                                          const HermitianOperator& p,
                                          const HermitianOperator& n, double v,
                                          const Matrix* states = nullptr);

// Truncated commutator expansion sum_{j<=order} (i beta)^j ad_N^j(X) / j!.
Matrix bch_series(const HermitianOperator& x, const HermitianOperator& n, double beta,
                  int order);

// Least-squares projection of X onto span{H, P, N} under the Frobenius
// inner product Re trace(A^dagger B). Throws NumericError if the Gram
// matrix condition number exceeds 1e12.
struct SpanCoefficients {
    double h = 0.0;
    double p = 0.0;
    double n = 0.0;
    double residual_abs = 0.0; // ||X - projection||_F
    double residual_rel = 0.0; // residual_abs / ||X||_F
    double gram_condition = 0.0;
};
SpanCoefficients span_decomposition(const Matrix& x, const HermitianOperator& h,
                                    const HermitianOperator& p, const HermitianOperator& n);

// Fixed-step RK4 for dh/dbeta = -p, dp/dbeta = -h, h(0)=1, p(0)=0, sampled
// at every step up to beta_max (closed form: h = cosh, p = -sinh).
struct CoefficientTrajectory {
    std::vector<double> beta;
    std::vector<double> h;
    std::vector<double> p;
};
CoefficientTrajectory solve_coefficient_ode(double beta_max, double step);

} // namespace leelab
