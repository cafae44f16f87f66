#include "leelab/boost_algebra.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "leelab/errors.hpp"
#include "leelab/log.hpp"

namespace leelab {

namespace {

SparseMatrix diagonal_sparse(const RealVector& d, cplx scale) {
    std::vector<Eigen::Triplet<cplx>> entries;
    entries.reserve(d.size());
    for (long i = 0; i < d.size(); ++i) {
        entries.emplace_back(i, i, scale * d[i]);
    }
    SparseMatrix m(d.size(), d.size());
    m.setFromTriplets(entries.begin(), entries.end());
    return m;
}

// [N, diag(d)] has entries N(r,c) * (d(c) - d(r)).
SparseMatrix commutator_with_diagonal(const SparseMatrix& n, const RealVector& d) {
    std::vector<Eigen::Triplet<cplx>> entries;
    entries.reserve(n.nonZeros());
    for (int k = 0; k < n.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(n, k); it; ++it) {
            const double diff = d[it.col()] - d[it.row()];
            if (diff != 0.0) {
                entries.emplace_back(it.row(), it.col(), it.value() * diff);
            }
        }
    }
    SparseMatrix out(n.rows(), n.cols());
    out.setFromTriplets(entries.begin(), entries.end());
    return out;
}

// Squared Frobenius norms of [N, H] - iP and [N, P] - iH with
// H = diag(h0) + h_int, P = diag(p). The products N*h_int and h_int*N fill
// in O(n_modes^3) entries on this basis, so the norms are accumulated one
// column at a time through a dense workspace instead of materializing them.
struct ResidualNormsSquared {
    double nh = 0.0;
    double np = 0.0;
};

class ColumnWorkspace {
  public:
    explicit ColumnWorkspace(long dim)
        : values_(Vector::Zero(dim)), marked_(static_cast<std::size_t>(dim), 0) {
        touched_.reserve(256);
    }

    void add(long row, cplx value) {
        if (!marked_[static_cast<std::size_t>(row)]) {
            marked_[static_cast<std::size_t>(row)] = 1;
            touched_.push_back(row);
        }
        values_[row] += value;
    }

    void add_column(const SparseMatrix& m, long col, cplx scale) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            add(it.row(), scale * it.value());
        }
    }

    double flush_squared_norm() {
        double sq = 0.0;
        for (const long row : touched_) {
            sq += std::norm(values_[row]);
            values_[row] = cplx(0.0, 0.0);
            marked_[static_cast<std::size_t>(row)] = 0;
        }
        touched_.clear();
        return sq;
    }

  private:
    Vector values_;
    std::vector<char> marked_;
    std::vector<long> touched_;
};

ResidualNormsSquared residual_norms_squared(const SparseOperatorSet& ops,
                                            const SparseMatrix& n_full) {
    const cplx i(0.0, 1.0);
    ColumnWorkspace work(ops.dim);
    ResidualNormsSquared out;
    for (long j = 0; j < ops.dim; ++j) {
        // Column j of [N, H] - iP:
        //   N * h_int e_j + (h0[j] - diag(h0)) N e_j - h_int * N e_j - i p[j] e_j.
        for (SparseMatrix::InnerIterator it(ops.h_int, j); it; ++it) {
            work.add_column(n_full, it.row(), it.value());
        }
        for (SparseMatrix::InnerIterator it(n_full, j); it; ++it) {
            work.add(it.row(), it.value() * (ops.h0[j] - ops.h0[it.row()]));
            work.add_column(ops.h_int, it.row(), -it.value());
        }
        work.add(j, -i * ops.p[j]);
        out.nh += work.flush_squared_norm();

        // Column j of [N, P] - iH:
        //   (p[j] - diag(p)) N e_j - i h0[j] e_j - i h_int e_j.
        for (SparseMatrix::InnerIterator it(n_full, j); it; ++it) {
            work.add(it.row(), it.value() * (ops.p[j] - ops.p[it.row()]));
        }
        work.add(j, -i * ops.h0[j]);
        work.add_column(ops.h_int, j, -i);
        out.np += work.flush_squared_norm();
    }
    return out;
}

Matrix apply_hamiltonian(const SparseOperatorSet& ops, const Matrix& x) {
    return ops.h0.cast<cplx>().asDiagonal() * x + ops.h_int * x;
}

} // namespace

SparseOperatorSet build_sparse_operator_set(const SectorBasis& basis,
                                            const ModelParams& params) {
    SparseOperatorSet ops;
    ops.dim = basis.size();
    ops.h0 = free_hamiltonian_diagonal(basis, params);
    ops.p = momentum_diagonal(basis);
    ops.h_int = interaction_sparse(basis, params);
    ops.n0 = free_boost_sparse(basis, params);
    ops.n_int = interaction_boost_stencil_sparse(basis, params, +1);
    return ops;
}

SparseMatrix interaction_boost_stencil_sparse(const SectorBasis& basis,
                                              const ModelParams& params, int sign) {
    const int n = basis.n();
    const int off = basis.grid.offset();
    const double dk = basis.grid.dk;
    std::vector<Eigen::Triplet<cplx>> entries;
    if (params.g != 0.0) {
        entries.reserve(4 * static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const int jt = (i - off) + (j - off);
                const double g_val =
                    interaction_kernel(params, dk, basis.grid.modes[i], basis.grid.modes[j]);
                const long bc = basis.index_pair(i, j);
                for (int s : {+1, -1}) {
                    const int jp = jt + s * sign;
                    if (std::abs(jp) > off) continue;
                    const cplx val = cplx(0.0, -s * g_val / (2.0 * dk));
                    entries.emplace_back(basis.index_single(jp + off), bc, val);
                    entries.emplace_back(bc, basis.index_single(jp + off), std::conj(val));
                }
            }
        }
    }
    SparseMatrix m(basis.size(), basis.size());
    m.setFromTriplets(entries.begin(), entries.end());
    return m;
}

HermitianOperator build_interaction_boost_stencil(const SectorBasis& basis,
                                                  const ModelParams& params, int sign) {
    return HermitianOperator(Matrix(interaction_boost_stencil_sparse(basis, params, sign)),
                             "N_int");
}

HermitianOperator build_boost_generator(const SectorBasis& basis, const ModelParams& params,
                                        int sign) {
    const SparseMatrix n =
        free_boost_sparse(basis, params) + interaction_boost_stencil_sparse(basis, params, sign);
    return HermitianOperator(Matrix(n), "N");
}

AlgebraResiduals algebra_residuals(const HermitianOperator& h, const HermitianOperator& p,
                                   const HermitianOperator& n) {
    const cplx i(0.0, 1.0);
    AlgebraResiduals out;
    out.r_NH = (commutator(n.matrix(), h.matrix()) - i * p.matrix()).norm() / p.frobenius_norm();
    out.r_NP = (commutator(n.matrix(), p.matrix()) - i * h.matrix()).norm() / h.frobenius_norm();
    out.r_HP = commutator(h.matrix(), p.matrix()).norm();
    return out;
}

AlgebraResiduals algebra_residuals_sparse(const SparseOperatorSet& ops,
                                          const SparseMatrix& n_full) {
    const double h_norm =
        std::sqrt(ops.h0.squaredNorm() + ops.h_int.squaredNorm());
    const double p_norm = ops.p.norm();
    const ResidualNormsSquared sq = residual_norms_squared(ops, n_full);
    AlgebraResiduals out;
    out.r_NH = std::sqrt(sq.nh) / p_norm;
    out.r_NP = std::sqrt(sq.np) / h_norm;
    const SparseMatrix h_full = diagonal_sparse(ops.h0, cplx(1.0, 0.0)) + ops.h_int;
    const SparseMatrix hp = SparseMatrix(commutator_with_diagonal(h_full, ops.p));
    out.r_HP = hp.norm();
    return out;
}

StateResiduals algebra_residuals_on_states(const SparseOperatorSet& ops,
                                           const SparseMatrix& n_full, const Matrix& psi) {
    const Matrix h_psi = apply_hamiltonian(ops, psi);
    const Matrix p_psi = ops.p.cast<cplx>().asDiagonal() * psi;
    const Matrix n_psi = n_full * psi;
    const cplx i(0.0, 1.0);

    const Matrix nh = n_full * h_psi - apply_hamiltonian(ops, n_psi) - i * p_psi;
    const Matrix np = n_full * p_psi - ops.p.cast<cplx>().asDiagonal() * n_psi - i * h_psi;

    StateResiduals out;
    out.r_NH = nh.norm() / p_psi.norm();
    out.r_NP = np.norm() / h_psi.norm();
    return out;
}

Matrix interior_test_states(const SectorBasis& basis) {
    const int n = basis.n();
    const double kmax = basis.grid.k_max();
    const double sig = kmax / 8.0;
    const auto gauss = [sig](double k, double c) {
        return std::exp(-(k - c) * (k - c) / (4.0 * sig * sig));
    };

    Matrix psi = Matrix::Zero(basis.size(), 6);
    const double a_centers[3] = {0.0, kmax / 4.0, -kmax / 4.0};
    for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < n; ++i) {
            psi(basis.index_single(i), s) = gauss(basis.grid.modes[i], a_centers[s]);
        }
    }
    const double bc_centers[3][2] = {
        {0.0, 0.0}, {kmax / 4.0, -kmax / 8.0}, {-kmax / 8.0, kmax / 4.0}};
    for (int s = 0; s < 3; ++s) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                psi(basis.index_pair(i, j), 3 + s) = gauss(basis.grid.modes[i], bc_centers[s][0]) *
                                                     gauss(basis.grid.modes[j], bc_centers[s][1]);
            }
        }
    }
    for (int s = 0; s < 6; ++s) {
        psi.col(s) /= psi.col(s).norm();
    }
    return psi;
}

double boost_algebra_objective(const SparseOperatorSet& ops, const SparseMatrix& n_full) {
    const ResidualNormsSquared sq = residual_norms_squared(ops, n_full);
    return sq.nh + sq.np;
}

StencilSignChoice select_stencil_sign(const SparseOperatorSet& ops) {
    StencilSignChoice choice;
    choice.objective_plus = boost_algebra_objective(ops, SparseMatrix(ops.n0 + ops.n_int));
    choice.objective_minus = boost_algebra_objective(ops, SparseMatrix(ops.n0 - ops.n_int));
    choice.sign = (choice.objective_plus <= choice.objective_minus) ? +1 : -1;
    return choice;
}

std::vector<std::pair<long, long>> stencil_neighbor_pattern(const SectorBasis& basis) {
    const int n = basis.n();
    const int off = basis.grid.offset();
    std::vector<std::pair<long, long>> pattern;
    pattern.reserve(5 * static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int jt = (i - off) + (j - off);
            const long bc = basis.index_pair(i, j);
            for (int s = -2; s <= 2; ++s) {
                const int jp = jt + s;
                if (std::abs(jp) <= off) {
                    pattern.emplace_back(basis.index_single(jp + off), bc);
                }
            }
        }
    }
    return pattern;
}

namespace {

// Real parameterization of the patterned Hermitian unknowns: x holds the
// real parts of the upper entries first, then the imaginary parts.
struct PatternCoords {
    const std::vector<std::pair<long, long>>& pattern;
    long dim;

    long unknowns() const { return 2 * static_cast<long>(pattern.size()); }

    SparseMatrix assemble(const RealVector& x) const {
        const long m = static_cast<long>(pattern.size());
        std::vector<Eigen::Triplet<cplx>> entries;
        entries.reserve(2 * pattern.size());
        for (long k = 0; k < m; ++k) {
            const cplx v(x[k], x[m + k]);
            entries.emplace_back(pattern[k].first, pattern[k].second, v);
            entries.emplace_back(pattern[k].second, pattern[k].first, std::conj(v));
        }
        SparseMatrix out(dim, dim);
        out.setFromTriplets(entries.begin(), entries.end());
        return out;
    }

    // Projection of a matrix-space gradient G onto the coordinates:
    // d/d(re_k) = Re G(r,c) + Re G(c,r); d/d(im_k) = Im G(r,c) - Im G(c,r).
    RealVector gather(const SparseMatrix& g) const {
        const long m = static_cast<long>(pattern.size());
        RealVector out(2 * m);
        for (long k = 0; k < m; ++k) {
            const cplx grc = g.coeff(pattern[k].first, pattern[k].second);
            const cplx gcr = g.coeff(pattern[k].second, pattern[k].first);
            out[k] = grc.real() + gcr.real();
            out[m + k] = grc.imag() - gcr.imag();
        }
        return out;
    }
};

} // namespace

RefineResult refine_boost_least_squares(const SparseOperatorSet& ops,
                                        const SparseMatrix& n_seed,
                                        const std::vector<std::pair<long, long>>& pattern,
                                        const RefineOptions& options) {
    const PatternCoords coords{pattern, ops.dim};
    const long m = static_cast<long>(pattern.size());
    const long cap =
        options.max_iterations > 0 ? options.max_iterations : 10 * coords.unknowns();

    RealVector x(coords.unknowns());
    for (long k = 0; k < m; ++k) {
        const cplx v = n_seed.coeff(pattern[k].first, pattern[k].second);
        x[k] = v.real();
        x[m + k] = v.imag();
    }
    const SparseMatrix n_fixed = SparseMatrix(n_seed - coords.assemble(x));

    const SparseMatrix h_full = diagonal_sparse(ops.h0, cplx(1.0, 0.0)) + ops.h_int;
    const auto comm_h = [&h_full](const SparseMatrix& y) {
        return SparseMatrix(y * h_full - h_full * y);
    };
    const auto comm_p = [&ops](const SparseMatrix& y) {
        return commutator_with_diagonal(y, ops.p);
    };

    const auto residuals_at = [&](const RealVector& xv) {
        const SparseMatrix n_cur = SparseMatrix(n_fixed + coords.assemble(xv));
        const SparseMatrix r1 = SparseMatrix(diagonal_sparse(ops.p, cplx(0.0, 1.0)) - comm_h(n_cur));
        const SparseMatrix r2 = SparseMatrix(
            diagonal_sparse(ops.h0, cplx(0.0, 1.0)) + SparseMatrix(cplx(0.0, 1.0) * ops.h_int) -
            comm_p(n_cur));
        return std::make_pair(r1, r2);
    };

    RefineResult result;
    auto [r1, r2] = residuals_at(x);
    result.objective_seed = r1.squaredNorm() + r2.squaredNorm();
    double objective = result.objective_seed;

    RealVector s = coords.gather(SparseMatrix(comm_h(r1) + comm_p(r2)));
    const double s2_initial = s.squaredNorm();
    double s2 = s2_initial;
    RealVector direction = s;

    RealVector x_best = x;
    double objective_best = objective;

    std::vector<double> history;
    history.push_back(objective);

    if (s2_initial == 0.0) {
        result.converged = true; // the seed is already stationary on the pattern
    }
    long it = 0;
    while (!result.converged && it < cap) {
        ++it;
        const SparseMatrix step = coords.assemble(direction);
        const SparseMatrix q1 = comm_h(step);
        const SparseMatrix q2 = comm_p(step);
        const double qn = q1.squaredNorm() + q2.squaredNorm();
        if (qn == 0.0) {
            result.converged = true; // direction lies in the null space
            break;
        }
        const double alpha = s2 / qn;
        x += alpha * direction;
        r1 = SparseMatrix(r1 - alpha * q1);
        r2 = SparseMatrix(r2 - alpha * q2);

        const RealVector s_new = coords.gather(SparseMatrix(comm_h(r1) + comm_p(r2)));
        const double s2_new = s_new.squaredNorm();
        direction = s_new + (s2_new / s2) * direction;
        s2 = s2_new;

        objective = r1.squaredNorm() + r2.squaredNorm();
        history.push_back(objective);
        if (objective < objective_best) {
            objective_best = objective;
            x_best = x;
        } else if (objective > objective_best * (1.0 + 1e-9)) {
            // The recurred residual has lost accuracy; nothing below the best
            // iterate is reachable in double precision.
            result.converged = true;
            log_stage("solve", "boost refinement stopped on round-off breakdown at iteration " +
                                   std::to_string(it) + "; keeping the best iterate");
            break;
        }

        if (std::sqrt(s2 / s2_initial) <= options.grad_tol) {
            result.converged = true;
        } else if (it >= options.plateau_window) {
            const double drop = history[it - options.plateau_window] - objective;
            if (drop <= options.plateau_tol * std::max(1.0, objective)) {
                result.converged = true;
            }
        }
    }

    result.iterations = it;
    result.n_refined = SparseMatrix(n_fixed + coords.assemble(x_best));
    auto [f1, f2] = residuals_at(x_best);
    result.objective_refined = f1.squaredNorm() + f2.squaredNorm();
    if (s2_initial > 0.0) {
        const RealVector s_final = coords.gather(SparseMatrix(comm_h(f1) + comm_p(f2)));
        result.gradient_rel = std::sqrt(s_final.squaredNorm() / s2_initial);
    }
    if (!result.converged) {
        log_stage("solve", "boost refinement hit the iteration cap at " + std::to_string(it));
    }
    return result;
}

HermitianOperator boosted_hamiltonian_closed_form(const HermitianOperator& h,
                                                  const HermitianOperator& p, double v) {
    const double gamma = gamma_factor(v);
    return HermitianOperator(gamma * h.matrix() - (gamma * v) * p.matrix(), "H_boosted");
}

HermitianOperator boosted_momentum_closed_form(const HermitianOperator& h,
                                               const HermitianOperator& p, double v) {
    const double gamma = gamma_factor(v);
    return HermitianOperator(gamma * p.matrix() - (gamma * v) * h.matrix(), "P_boosted");
}

BoostIdentityErrors verify_boost_identity(const HermitianOperator& h,
                                          const HermitianOperator& p,
                                          const HermitianOperator& n, double v,
                                          const Matrix* states) {
    BoostIdentityErrors out;
    out.v = v;
    out.beta = rapidity_from_velocity(v);

    const Matrix closed_h = boosted_hamiltonian_closed_form(h, p, v).matrix();
    const Matrix closed_p = boosted_momentum_closed_form(h, p, v).matrix();

    Matrix conj_h, conj_p;
    if (out.beta == 0.0) {
        conj_h = h.matrix();
        conj_p = p.matrix();
    } else {
        const SpectralDecomposition dec = spectral(n);
        const Vector phases =
            (cplx(0.0, out.beta) * dec.eigenvalues.cast<cplx>().array()).exp().matrix();
        const Matrix u = dec.eigenvectors * phases.asDiagonal() * dec.eigenvectors.adjoint();
        conj_h = u * h.matrix() * u.adjoint();
        conj_p = u * p.matrix() * u.adjoint();
    }

    out.e_H = (conj_h - closed_h).norm() / h.frobenius_norm();
    out.e_P = (conj_p - closed_p).norm() / p.frobenius_norm();
    if (states != nullptr) {
        out.e_H_states =
            ((conj_h - closed_h) * (*states)).norm() / (h.matrix() * (*states)).norm();
        out.e_P_states =
            ((conj_p - closed_p) * (*states)).norm() / (p.matrix() * (*states)).norm();
    }
    return out;
}

Matrix bch_series(const HermitianOperator& x, const HermitianOperator& n, double beta,
                  int order) {
    if (order < 0) {
        throw ConfigError("bch_series: order must be >= 0");
    }
    Matrix acc = x.matrix();
    Matrix term = x.matrix();
    for (int j = 1; j <= order; ++j) {
        term = (cplx(0.0, beta) / static_cast<double>(j)) * commutator(n.matrix(), term);
        acc += term;
    }
    return acc;
}

SpanCoefficients span_decomposition(const Matrix& x, const HermitianOperator& h,
                                    const HermitianOperator& p, const HermitianOperator& n) {
    const Matrix* ops[3] = {&h.matrix(), &p.matrix(), &n.matrix()};
    const auto inner = [](const Matrix& a, const Matrix& b) {
        return (a.adjoint() * b).trace().real();
    };

    Eigen::Matrix3d gram;
    Eigen::Vector3d rhs;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            gram(a, b) = inner(*ops[a], *ops[b]);
        }
        rhs[a] = inner(*ops[a], x);
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(gram);
    const double lam_min = std::abs(eig.eigenvalues().minCoeff());
    const double lam_max = std::abs(eig.eigenvalues().maxCoeff());
    SpanCoefficients out;
    out.gram_condition = lam_min > 0.0 ? lam_max / lam_min
                                       : std::numeric_limits<double>::infinity();
    if (!(out.gram_condition <= 1e12)) {
        throw NumericError("span_decomposition: Gram matrix condition " +
                           std::to_string(out.gram_condition) + " exceeds 1e12");
    }

    const Eigen::Vector3d coeff = gram.ldlt().solve(rhs);
    out.h = coeff[0];
    out.p = coeff[1];
    out.n = coeff[2];
    const Matrix remainder =
        x - coeff[0] * h.matrix() - coeff[1] * p.matrix() - coeff[2] * n.matrix();
    out.residual_abs = remainder.norm();
    out.residual_rel = out.residual_abs / x.norm();
    return out;
}

CoefficientTrajectory solve_coefficient_ode(double beta_max, double step) {
    if (!(beta_max > 0.0) || !(step > 0.0)) {
        throw ConfigError("solve_coefficient_ode: beta_max and step must be positive");
    }

    CoefficientTrajectory out;
    double beta = 0.0, h = 1.0, p = 0.0;
    out.beta.push_back(beta);
    out.h.push_back(h);
    out.p.push_back(p);

    // dh/dbeta = -p, dp/dbeta = -h.
    const auto rk4_step = [&](double dt) {
        const double k1h = -p, k1p = -h;
        const double k2h = -(p + 0.5 * dt * k1p), k2p = -(h + 0.5 * dt * k1h);
        const double k3h = -(p + 0.5 * dt * k2p), k3p = -(h + 0.5 * dt * k2h);
        const double k4h = -(p + dt * k3p), k4p = -(h + dt * k3h);
        h += dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
        p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    };

    const long full_steps = static_cast<long>(std::floor(beta_max / step + 1e-12));
    for (long i = 0; i < full_steps; ++i) {
        rk4_step(step);
        beta = (i + 1) * step;
        out.beta.push_back(beta);
        out.h.push_back(h);
        out.p.push_back(p);
    }
    const double remainder = beta_max - full_steps * step;
    if (remainder > 1e-12 * beta_max) {
        rk4_step(remainder);
        out.beta.push_back(beta_max);
        out.h.push_back(h);
        out.p.push_back(p);
    }
    return out;
}

} // namespace leelab
