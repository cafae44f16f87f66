// Acceptance gate: one line per criterion, [PASS] or [FAIL], with the
// measured numbers inline. Exits nonzero if any criterion fails. Tolerances
// are pinned here and nowhere else.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "leelab/boost_algebra.hpp"
#include "leelab/evolution.hpp"
#include "leelab/kinematics.hpp"
#include "leelab/operators.hpp"

using namespace leelab;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int index, bool ok, const std::string& label, const std::string& detail) {
    if (!ok) {
        ++failures;
    }
    std::printf("[%s] %2d. %s: %s\n", ok ? "PASS" : "FAIL", index, label.c_str(),
                detail.c_str());
    std::fflush(stdout);
}

void report_error(int index, const std::string& label, const std::exception& e) {
    ++failures;
    std::printf("[FAIL] %2d. %s: unexpected error: %s\n", index, label.c_str(), e.what());
    std::fflush(stdout);
}

std::string fmt(const char* format, ...) {
    char buffer[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buffer, sizeof(buffer), format, args);
    va_end(args);
    return buffer;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Reference configuration: n_modes=41, dk=0.25, default masses and coupling.
const Model& reference_model() {
    static const Model model(ModelParams{}, 41, 0.25);
    return model;
}

double rest_guard(const Model& model) {
    const int rest_block =
        model.basis().block_of[model.basis().index_single(model.grid().offset())];
    return model.recurrence_guard(rest_block);
}

} // namespace

// Criteria 1 and 2: the exact speed-up law and its probability form on the
// closed route, reference config, v in {0.2, 0.5, 0.8}, 400 samples.
static void criteria_speedup() {
    const auto start = std::chrono::steady_clock::now();
    try {
        const Model& model = reference_model();
        const double width = 4.0 * model.grid().dk;
        const TimeGrid grid = TimeGrid::uniform(rest_guard(model), 400);

        const StateVector phi0 = make_phi0(model.basis());
        const StateVector packet = make_packet_phi0(model.basis(), width);
        const ModeSum rest = closed_form_modes(model, phi0.amplitudes, packet.amplitudes, 0.0);

        double law = 0.0, prob = 0.0;
        for (const double v : {0.2, 0.5, 0.8}) {
            const double gamma = gamma_factor(v);
            const AmplitudeSeries moving =
                amplitude_V(model, v, width, grid, BoostRoute::closed_form);
            for (std::size_t i = 0; i < grid.times.size(); ++i) {
                const cplx rescaled = rest.eval(gamma * grid.times[i]);
                law = std::max(law, std::abs(moving.values[i] - rescaled));
                prob = std::max(prob,
                                std::abs(std::norm(moving.values[i]) - std::norm(rescaled)));
            }
        }
        const double elapsed = seconds_since(start);
        report(1, law <= 1e-10 && elapsed < 60.0, "exact speed-up V(v,t) = V(0, gamma t)",
               fmt("max_t deviation %.3e (tol 1e-10), %.1f s (budget 60 s)", law, elapsed));
        report(2, prob <= 1e-10, "probability form of the speed-up",
               fmt("max_t deviation %.3e (tol 1e-10)", prob));
    } catch (const std::exception& e) {
        report_error(1, "exact speed-up V(v,t) = V(0, gamma t)", e);
        report_error(2, "probability form of the speed-up", e);
    }
}

// Criterion 3: Einstein dilation of fitted widths at p in {0.5, 1.0} on the
// reference grid. Criterion 4: the rest-frame width against the golden rule.
// Both run against the recurrence horizon of the reference grid, where only
// about 13% of the state decays; failures are reported with the measured
// numbers. The resolved grid (n=501, tests/physics) passes the same gates.
static void criteria_dilation_golden_rule() {
    const auto start = std::chrono::steady_clock::now();
    const Model& model = reference_model();
    const double guard = rest_guard(model);
    const TimeGrid grid = TimeGrid::uniform(guard, 400);
    const double rate_gr = golden_rule_estimate(model.params(), model.grid());
    const std::string horizon = fmt(
        "; Gamma*guard = %.3f, so only %.0f%% of the state decays inside the recurrence"
        " horizon %.1f and no clean exponential window exists on this grid (the resolved"
        " grid n=501 passes these gates, see the physics suite)",
        rate_gr * guard, 100.0 * (1.0 - std::exp(-rate_gr * guard)), guard);

    try {
        // min_r_squared = 0 postpones the quality gate so the measured values
        // can be reported; the gate is applied explicitly below.
        const DilationResult dilation =
            check_dilation(model, {0.5, 1.0}, grid, FitOptions{}, 0.0);
        const double elapsed = seconds_since(start);

        bool ok = dilation.fit_rest.r_squared >= 0.999 && elapsed < 120.0;
        std::string detail = fmt("rest r^2 %.6f (need >= 0.999)", dilation.fit_rest.r_squared);
        for (const DilationRow& row : dilation.rows) {
            ok = ok && std::abs(row.ratio - 1.0) <= 0.05 && row.fit.r_squared >= 0.999 &&
                 row.curve_max_dev <= 0.02;
            detail += fmt("; p=%g ratio %.4f (1 +- 0.05) r^2 %.6f curve %.4f (<= 0.02)",
                          row.p, row.ratio, row.fit.r_squared, row.curve_max_dev);
        }
        detail += fmt("; %.1f s (budget 120 s)", elapsed);
        if (!ok) {
            detail += horizon;
        }
        report(3, ok, "Einstein dilation of fitted widths", detail);
    } catch (const std::exception& e) {
        report(3, false, "Einstein dilation of fitted widths", e.what() + horizon);
    }

    try {
        FitOptions options;
        options.recurrence_guard = guard;
        const DecayFit fit = fit_decay(survival_A(model, 0.0, grid), options);
        const double ratio = fit.gamma_rate / rate_gr;
        std::string detail =
            fmt("Gamma_fit %.6e / Gamma_GR %.6e = %.4f (need 1 +- 0.10); window [%.2f, %.2f]"
                " sits against the recurrence guard %.2f, r^2 %.4f",
                fit.gamma_rate, rate_gr, ratio, fit.t1, fit.t2, guard, fit.r_squared);
        const bool ok = std::abs(ratio - 1.0) <= 0.10;
        if (!ok) {
            detail += horizon;
        }
        report(4, ok, "rest-frame width against the golden rule", detail);
    } catch (const std::exception& e) {
        report(4, false, "rest-frame width against the golden rule", e.what() + horizon);
    }
}

// Criterion 5: closed-route moments satisfy the relativistic relation.
static void criterion_moments() {
    try {
        const Model& model = reference_model();
        double worst_e = 0.0, worst_p = 0.0, worst_ratio = 0.0;
        for (const double v : {0.2, 0.5, 0.8}) {
            const double gamma = gamma_factor(v);
            const MomentPair m = boosted_moments(model, v, BoostRoute::closed_form);
            worst_e = std::max(worst_e, std::abs(m.avg_E - gamma * model.params().m_a));
            worst_p = std::max(worst_p,
                               std::abs(std::abs(m.avg_P) - gamma * v * model.params().m_a));
            worst_ratio = std::max(worst_ratio, std::abs(m.ratio_abs - v));
        }
        report(5, worst_e <= 1e-12 && worst_p <= 1e-12 && worst_ratio <= 1e-10,
               "boosted moments match gamma m_a and gamma v m_a",
               fmt("max |avg_E - gamma m| %.2e, max ||avg_P| - gamma v m| %.2e (tol 1e-12);"
                   " max |ratio - v| %.2e (tol 1e-10)",
                   worst_e, worst_p, worst_ratio));
    } catch (const std::exception& e) {
        report_error(5, "boosted moments match gamma m_a and gamma v m_a", e);
    }
}

// Criterion 6: free-theory residual convergence under dk halving at fixed
// k_max, plus strict objective descent of the refined generator.
static void criterion_algebra_convergence() {
    try {
        ModelParams free_params;
        free_params.g = 0.0;
        double nh[2], np[2];
        const int n_values[2] = {41, 81};
        const double dk_values[2] = {0.25, 0.125};
        for (int c = 0; c < 2; ++c) {
            const SectorBasis basis =
                SectorBasis::enumerate(MomentumGrid::build(n_values[c], dk_values[c]));
            const SparseOperatorSet ops = build_sparse_operator_set(basis, free_params);
            const StateResiduals st =
                algebra_residuals_on_states(ops, ops.n0, interior_test_states(basis));
            nh[c] = st.r_NH;
            np[c] = st.r_NP;
        }
        const double ratio_nh = nh[0] / nh[1];
        const double ratio_np = np[0] / np[1];

        const SectorBasis basis = SectorBasis::enumerate(MomentumGrid::build(41, 0.25));
        const SparseOperatorSet ops = build_sparse_operator_set(basis, ModelParams{});
        const StencilSignChoice sign = select_stencil_sign(ops);
        const SparseMatrix n_seed =
            ops.n0 + static_cast<double>(sign.sign) * ops.n_int;
        const RefineResult refined =
            refine_boost_least_squares(ops, n_seed, stencil_neighbor_pattern(basis));
        const AlgebraResiduals raw = algebra_residuals_sparse(ops, refined.n_refined);
        const StateResiduals states =
            algebra_residuals_on_states(ops, refined.n_refined, interior_test_states(basis));

        const bool ratios_ok = ratio_nh >= 3.2 && ratio_nh <= 4.8 && ratio_np >= 3.2 &&
                               ratio_np <= 4.8;
        const bool descent_ok = refined.objective_refined < refined.objective_seed;
        report(6, ratios_ok && descent_ok, "boost-algebra residual convergence",
               fmt("free-theory state residual ratios dk 0.25 -> 0.125: NH %.3f, NP %.3f"
                   " (need [3.2, 4.8]); refined objective %.6f < seed %.6f: %s;"
                   " refined residuals raw (%.4f, %.4f) states (%.5f, %.5f)",
                   ratio_nh, ratio_np, refined.objective_refined, refined.objective_seed,
                   descent_ok ? "yes" : "no", raw.r_NH, raw.r_NP, states.r_NH, states.r_NP));
    } catch (const std::exception& e) {
        report_error(6, "boost-algebra residual convergence", e);
    }
}

// Criterion 7: conjugation against the closed form. v=0 is exact; the error
// grows monotonically in beta for a fixed generator; the free-theory error
// shrinks under dk refinement.
static void criterion_boost_identity() {
    try {
        const SectorBasis basis = SectorBasis::enumerate(MomentumGrid::build(41, 0.25));
        const ModelParams params;
        const SparseOperatorSet ops = build_sparse_operator_set(basis, params);
        const StencilSignChoice sign = select_stencil_sign(ops);
        const HermitianOperator n(
            Matrix(SparseMatrix(ops.n0 + static_cast<double>(sign.sign) * ops.n_int)), "N");
        const HermitianOperator h = build_full_hamiltonian(basis, params);
        const HermitianOperator p = build_momentum(basis);

        const BoostIdentityErrors at_rest = verify_boost_identity(h, p, n, 0.0);
        const bool rest_exact = at_rest.e_H == 0.0 && at_rest.e_P == 0.0;

        // One spectral decomposition; per-beta conjugation is an elementwise
        // phase sandwich in the eigenbasis (Frobenius norms are invariant).
        const SpectralDecomposition dec = spectral(n);
        const Matrix h_rot = dec.eigenvectors.adjoint() * h.matrix() * dec.eigenvectors;
        const Matrix p_rot = dec.eigenvectors.adjoint() * p.matrix() * dec.eigenvectors;
        const double h_norm = h.frobenius_norm();

        bool monotone = true;
        double previous = 0.0;
        std::string sweep;
        for (int k = 1; k <= 10; ++k) {
            const double beta = 0.1 * k;
            const double v = std::tanh(beta);
            const double gamma = gamma_factor(v);
            const Vector phases =
                (cplx(0.0, beta) * dec.eigenvalues.cast<cplx>().array()).exp().matrix();
            const Matrix conj_h =
                phases.asDiagonal() * h_rot * phases.conjugate().asDiagonal();
            const double e_h =
                (conj_h - gamma * h_rot + (gamma * v) * p_rot).norm() / h_norm;
            if (k > 1 && e_h < previous - 1e-3) {
                monotone = false;
            }
            previous = e_h;
            if (k == 1 || k == 5 || k == 10) {
                sweep += fmt(" e_H(%.1f)=%.4f", beta, e_h);
            }
        }

        ModelParams free_params;
        free_params.g = 0.0;
        double free_e[2];
        const int n_values[2] = {17, 33};
        const double dk_values[2] = {0.25, 0.125};
        for (int c = 0; c < 2; ++c) {
            const SectorBasis b =
                SectorBasis::enumerate(MomentumGrid::build(n_values[c], dk_values[c]));
            const HermitianOperator hf = build_full_hamiltonian(b, free_params);
            const HermitianOperator pf = build_momentum(b);
            const HermitianOperator nf = build_free_boost(b, free_params);
            free_e[c] = verify_boost_identity(hf, pf, nf, std::tanh(0.5)).e_H;
        }

        report(7, rest_exact && monotone && free_e[1] < free_e[0],
               "boost identity: exact at rest, monotone in beta, finer under refinement",
               fmt("v=0: e_H %.1e e_P %.1e (exact);%s monotone %s; free-theory e_H"
                   " %.4f -> %.4f under dk 0.25 -> 0.125",
                   at_rest.e_H, at_rest.e_P, sweep.c_str(), monotone ? "yes" : "no",
                   free_e[0], free_e[1]));
    } catch (const std::exception& e) {
        report_error(7, "boost identity: exact at rest, monotone in beta", e);
    }
}

// Criterion 8: the coefficient ODE reproduces (cosh, -sinh) and preserves
// the hyperbolic invariant.
static void criterion_ode() {
    try {
        const CoefficientTrajectory traj = solve_coefficient_ode(2.0, 1e-3);
        double dev = 0.0, inv = 0.0;
        for (std::size_t i = 0; i < traj.beta.size(); ++i) {
            dev = std::max(dev, std::abs(traj.h[i] - std::cosh(traj.beta[i])));
            dev = std::max(dev, std::abs(traj.p[i] + std::sinh(traj.beta[i])));
            inv = std::max(inv, std::abs(traj.h[i] * traj.h[i] - traj.p[i] * traj.p[i] - 1.0));
        }
        report(8, dev <= 1e-9 && inv <= 1e-9, "coefficient ODE against (cosh, -sinh)",
               fmt("max coefficient deviation %.2e, max invariant deviation %.2e (tol 1e-9)",
                   dev, inv));
    } catch (const std::exception& e) {
        report_error(8, "coefficient ODE against (cosh, -sinh)", e);
    }
}

// Criterion 9: span decomposition of the conjugated free Hamiltonian at
// beta = 0.5. The coefficient tolerance is scaled by the measured span
// residual through the Gram inverse (first-order error propagation).
static void criterion_span() {
    try {
        const double beta = 0.5;
        ModelParams free_params;
        free_params.g = 0.0;
        const SectorBasis basis = SectorBasis::enumerate(MomentumGrid::build(17, 0.25));
        const HermitianOperator h = build_full_hamiltonian(basis, free_params);
        const HermitianOperator p = build_momentum(basis);
        const HermitianOperator n = build_free_boost(basis, free_params);

        const HermitianOperator conj = conjugate_by_boost(h, n, beta);
        const SpanCoefficients span = span_decomposition(conj.matrix(), h, p, n);

        const auto inner = [](const Matrix& a, const Matrix& b) {
            return (a.adjoint() * b).trace().real();
        };
        Eigen::Matrix3d gram;
        const Matrix* ops[3] = {&h.matrix(), &p.matrix(), &n.matrix()};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                gram(a, b) = inner(*ops[a], *ops[b]);
            }
        }
        const Eigen::Matrix3d gram_inv = gram.inverse();
        const double norms[3] = {h.frobenius_norm(), p.frobenius_norm(), n.frobenius_norm()};
        double tol[3];
        for (int a = 0; a < 3; ++a) {
            tol[a] = 0.0;
            for (int b = 0; b < 3; ++b) {
                tol[a] += std::abs(gram_inv(a, b)) * norms[b];
            }
            tol[a] *= span.residual_abs;
        }

        const double dev_h = std::abs(span.h - std::cosh(beta));
        const double dev_p = std::abs(span.p + std::sinh(beta));
        const bool ok = std::abs(span.n) <= 1e-6 && dev_h <= tol[0] && dev_p <= tol[1];
        std::string detail =
            fmt("n-coefficient %.2e (tol 1e-6); h %.5f vs cosh %.5f (dev %.4f, tol %.4f);"
                " p %.2e vs -sinh %.5f (dev %.4f, tol %.4f); span residual rel %.4f",
                std::abs(span.n), span.h, std::cosh(beta), dev_h, tol[0], span.p,
                -std::sinh(beta), dev_p, tol[1], span.residual_rel);
        if (!ok && std::abs(span.p) < 1e-12) {
            detail += "; the p-coefficient vanishes identically on this lattice: the"
                      " two bipartite halves of the stencil boost carry opposite momentum"
                      " flow, so the conjugated Hamiltonian picks up no net momentum"
                      " component at any grid size (same cancellation as the explicit"
                      " boosted moments)";
        }
        report(9, ok, "span decomposition of the conjugated Hamiltonian", detail);
    } catch (const std::exception& e) {
        report_error(9, "span decomposition of the conjugated Hamiltonian", e);
    }
}

// Criterion 10: the fast mixture component dies out at gamma^2 times the
// slow rate. The decay-resolving grid is used because the ratio needs two
// clean fits; the criterion pins only v = 0.8.
static void criterion_mixture() {
    try {
        ModelParams params;
        params.g = 0.06;
        params.lambda_ff = 8.0;
        const Model model(params, 501, 0.01);
        const double rate_gr = golden_rule_estimate(model.params(), model.grid());
        const double t_max = std::min(20.0 / rate_gr, rest_guard(model));
        const TimeGrid grid = TimeGrid::uniform(t_max, 400);
        FitOptions options;
        options.abs2_lo = 0.01;

        const double v = 0.8;
        const double w = std::sqrt(0.5);
        const MixtureResult mix =
            mixture_experiment(model, v, {w, w}, 4.0 * model.grid().dk, grid, options);
        const double gamma_sq = std::pow(gamma_factor(v), 2.0);
        if (!mix.rate_ratio.has_value()) {
            report(10, false, "mixture: fast component dies out at gamma^2 the slow rate",
                   "no rate ratio: one of the component fits failed");
            return;
        }
        const double rel = std::abs(*mix.rate_ratio / gamma_sq - 1.0);
        report(10, rel <= 0.25, "mixture: fast component dies out at gamma^2 the slow rate",
               fmt("Gamma_fast/Gamma_slow %.4f vs gamma^2 = 25/9 = %.4f (off by %.1f%%,"
                   " tol 25%%)",
                   *mix.rate_ratio, gamma_sq, 100.0 * rel));
    } catch (const std::exception& e) {
        report_error(10, "mixture: fast component dies out at gamma^2 the slow rate", e);
    }
}

// Criterion 11: byte-identical outputs across reruns, timing block aside.
static void criterion_determinism() {
    try {
        const fs::path dir = fs::temp_directory_path() / "leelab_acceptance";
        fs::create_directories(dir);
        const fs::path config_path = dir / "determinism.json";
        {
            std::ofstream out(config_path);
            out << R"({"grid": {"n_modes": 17, "dk": 0.25}, "velocities": [0.5],)"
                << R"( "momenta": [0.5], "t_grid": {"t_max": 10.0, "samples": 50}})";
        }
        const fs::path out_dir = dir / "run";
        fs::remove_all(out_dir);

        const std::vector<std::string> args = {"speedup", "--config", config_path.string(),
                                               "--out-dir", out_dir.string(), "--quiet"};
        if (leelab::cli::run_command(args) != 0) {
            report(11, false, "determinism across reruns", "first run failed");
            return;
        }
        std::map<std::string, std::string> first;
        for (const auto& entry : fs::directory_iterator(out_dir)) {
            std::ifstream in(entry.path(), std::ios::binary);
            std::ostringstream content;
            content << in.rdbuf();
            first[entry.path().filename().string()] = content.str();
        }
        if (leelab::cli::run_command(args) != 0) {
            report(11, false, "determinism across reruns", "second run failed");
            return;
        }

        const auto strip_timing = [](std::string text) {
            const auto begin = text.find("\"timing\"");
            if (begin == std::string::npos) {
                return text;
            }
            const auto end = text.find('}', begin);
            text.erase(begin, end - begin + 1);
            return text;
        };

        bool identical = true;
        std::string mismatch;
        std::size_t compared = 0;
        for (const auto& entry : fs::directory_iterator(out_dir)) {
            const std::string name = entry.path().filename().string();
            std::ifstream in(entry.path(), std::ios::binary);
            std::ostringstream content;
            content << in.rdbuf();
            std::string now = content.str();
            std::string before = first.at(name);
            ++compared;
            if (name == "report.json") {
                now = strip_timing(now);
                before = strip_timing(before);
            }
            if (now != before) {
                identical = false;
                mismatch = name;
            }
        }
        report(11, identical && compared == first.size() && compared >= 4,
               "determinism across reruns",
               identical ? fmt("%zu files byte-identical (report.json modulo the timing"
                               " block)",
                               compared)
                         : "mismatch in " + mismatch);
    } catch (const std::exception& e) {
        report_error(11, "determinism across reruns", e);
    }
}

int main() {
    std::printf("acceptance run: reference grid n=41 dk=0.25, resolved grid n=501 dk=0.01\n");
    criteria_speedup();
    criteria_dilation_golden_rule();
    criterion_moments();
    criterion_algebra_convergence();
    criterion_boost_identity();
    criterion_ode();
    criterion_span();
    criterion_mixture();
    criterion_determinism();
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
