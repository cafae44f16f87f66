#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "report.hpp"

#include "leelab/boost_algebra.hpp"
#include "leelab/errors.hpp"
#include "leelab/evolution.hpp"
#include "leelab/log.hpp"
#include "leelab/operators.hpp"

namespace leelab::cli {

namespace {

using nlohmann::json;

constexpr long kDenseCap = 4096;   // largest dimension densified for spectra
constexpr double kSpeedupTol = 1e-10;
constexpr double kMomentsTol = 1e-10;
constexpr double kBchBeta = 0.5;
constexpr double kOdeBetaMax = 2.0;
constexpr double kOdeStep = 1e-3;

std::string fmt_g(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%g", value);
    return buffer;
}

// ---------------------------------------------------------------------
// Shared pieces

struct AlgebraSummary {
    SparseOperatorSet ops;
    StencilSignChoice sign;
    SparseMatrix n_full;
    AlgebraResiduals raw;
    StateResiduals states;
    double objective = 0.0;
};

AlgebraSummary compute_algebra_summary(const SectorBasis& basis,
                                       const ModelParams& params) {
    log_stage("algebra", "building sparse operators at dimension " +
                             std::to_string(basis.size()));
    AlgebraSummary out;
    out.ops = build_sparse_operator_set(basis, params);
    out.sign = select_stencil_sign(out.ops);
    out.n_full = out.ops.n0 + static_cast<double>(out.sign.sign) * out.ops.n_int;
    out.raw = algebra_residuals_sparse(out.ops, out.n_full);
    out.states =
        algebra_residuals_on_states(out.ops, out.n_full, interior_test_states(basis));
    out.objective = boost_algebra_objective(out.ops, out.n_full);
    return out;
}

json residuals_json(const AlgebraSummary& summary) {
    return json{{"r_nh_raw", summary.raw.r_NH},
                {"r_np_raw", summary.raw.r_NP},
                {"r_hp", summary.raw.r_HP},
                {"r_nh_states", summary.states.r_NH},
                {"r_np_states", summary.states.r_NP},
                {"objective", summary.objective}};
}

void attach_algebra_summary(ReportBuilder& report, const AlgebraSummary& summary) {
    report.root()["residuals"] = residuals_json(summary);
    report.root()["sign_convention"] = summary.sign.sign;
}

// Refined generator on the stencil-neighbor pattern, seeded from n_full.
// The least-squares solver materializes commutator residuals whose fill-in
// grows with the cube of n_modes, so large grids are refused up front.
constexpr long kRefineDimCap = 25000;

json refine_json(const SparseOperatorSet& ops, const SectorBasis& basis,
                 const SparseMatrix& n_seed, SparseMatrix* n_out) {
    if (static_cast<long>(basis.size()) > kRefineDimCap) {
        throw NumericError("boost refinement materializes commutator residuals; dimension " +
                           std::to_string(basis.size()) + " exceeds the refine cap " +
                           std::to_string(kRefineDimCap) + "; use a smaller grid");
    }
    log_stage("refine", "least-squares refinement on the stencil pattern");
    const auto pattern = stencil_neighbor_pattern(basis);
    const RefineResult refined = refine_boost_least_squares(ops, n_seed, pattern);
    const AlgebraResiduals raw = algebra_residuals_sparse(ops, refined.n_refined);
    const StateResiduals states =
        algebra_residuals_on_states(ops, refined.n_refined, interior_test_states(basis));
    if (n_out != nullptr) {
        *n_out = refined.n_refined;
    }
    return json{{"converged", refined.converged},
                {"iterations", refined.iterations},
                {"objective_seed", refined.objective_seed},
                {"objective_refined", refined.objective_refined},
                {"gradient_rel", refined.gradient_rel},
                {"pattern_entries", pattern.size()},
                {"r_nh_raw", raw.r_NH},
                {"r_np_raw", raw.r_NP},
                {"r_nh_states", states.r_NH},
                {"r_np_states", states.r_NP}};
}

// Auto time grid: 400 samples (config) on [0, min(20/Gamma_GR, recurrence
// guard of the rest block)]; the resolved t_max is stored back into the
// config so the report echo reproduces the run.
TimeGrid resolve_time_grid(const Model& model, RunConfig& config) {
    if (config.t_grid.t_max == 0.0) {
        const int rest_block = model.basis().block_of[model.basis().index_single(
            model.grid().offset())];
        const double guard = model.recurrence_guard(rest_block);
        const double rate = golden_rule_estimate(model.params(), model.grid());
        double t_max = guard;
        if (rate > 0.0) {
            t_max = std::min(t_max, 20.0 / rate);
        }
        config.t_grid.t_max = t_max;
        log_stage("grid", "auto t_max = " + fmt_g(t_max) + " (golden-rule rate " +
                              fmt_g(rate) + ", recurrence guard " + fmt_g(guard) + ")");
    }
    return TimeGrid::uniform(config.t_grid.t_max, config.t_grid.samples);
}

FitOptions fit_options_from(const RunConfig& config) {
    FitOptions options;
    options.abs2_lo = config.fit.abs2_lo;
    options.abs2_hi = config.fit.abs2_hi;
    return options;
}

// exp(+i beta N) psi through a precomputed spectral decomposition.
Vector boost_state(const SpectralDecomposition& dec, double beta, const Vector& psi) {
    if (beta == 0.0) {
        return psi;
    }
    Vector w = dec.eigenvectors.adjoint() * psi;
    w.array() *= (cplx(0.0, beta) * dec.eigenvalues.cast<cplx>().array()).exp();
    return dec.eigenvectors * w;
}

std::string fits_csv_header() {
    return "label,p_or_v,m_eff,gamma_rate,t1,t2,r_squared\n";
}

void append_fit_row(std::string& csv, const std::string& label, double p_or_v,
                    const DecayFit& fit) {
    char buffer[256];
    std::snprintf(buffer, sizeof(buffer), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  label.c_str(), p_or_v, fit.m_eff, fit.gamma_rate, fit.t1, fit.t2,
                  fit.r_squared);
    csv += buffer;
}

// ---------------------------------------------------------------------
// Subcommands

void run_check_algebra(RunConfig& config, bool refine, ReportBuilder& report) {
    const MomentumGrid grid = MomentumGrid::build(config.n_modes, config.dk);
    const SectorBasis basis = SectorBasis::enumerate(grid);
    if (refine && static_cast<long>(basis.size()) > kRefineDimCap) {
        throw NumericError("boost refinement materializes commutator residuals; dimension " +
                           std::to_string(basis.size()) + " exceeds the refine cap " +
                           std::to_string(kRefineDimCap) + "; use a smaller grid");
    }
    const AlgebraSummary summary = compute_algebra_summary(basis, config.model);
    attach_algebra_summary(report, summary);

    json& results = report.results();
    results["sign_selection"] = json{{"sign", summary.sign.sign},
                                     {"objective_plus", summary.sign.objective_plus},
                                     {"objective_minus", summary.sign.objective_minus}};

    // Convergence pair: halve dk at fixed band reach k_max.
    const int n_fine = 2 * config.n_modes - 1;
    const double dk_fine = 0.5 * config.dk;
    log_stage("algebra", "refining the grid to n_modes=" + std::to_string(n_fine) +
                             ", dk=" + fmt_g(dk_fine));
    const SectorBasis basis_fine =
        SectorBasis::enumerate(MomentumGrid::build(n_fine, dk_fine));
    const AlgebraSummary fine = compute_algebra_summary(basis_fine, config.model);
    results["convergence"] =
        json{{"coarse", residuals_json(summary)},
             {"fine", residuals_json(fine)},
             {"grid_fine", json{{"n_modes", n_fine}, {"dk", dk_fine}}},
             {"ratio_nh_states", summary.states.r_NH / fine.states.r_NH},
             {"ratio_np_states", summary.states.r_NP / fine.states.r_NP}};

    if (refine) {
        results["refine"] = refine_json(summary.ops, basis, summary.n_full, nullptr);
    }
}

void run_boost_identity(RunConfig& config, bool refine, ReportBuilder& report) {
    const MomentumGrid grid = MomentumGrid::build(config.n_modes, config.dk);
    const SectorBasis basis = SectorBasis::enumerate(grid);
    if (basis.size() > kDenseCap) {
        throw NumericError("boost-identity needs dense spectra; dimension " +
                           std::to_string(basis.size()) + " exceeds " +
                           std::to_string(kDenseCap) +
                           "; use a coarser grid for this subcommand");
    }
    const AlgebraSummary summary = compute_algebra_summary(basis, config.model);
    attach_algebra_summary(report, summary);
    json& results = report.results();

    SparseMatrix n_sparse = summary.n_full;
    if (refine) {
        results["refine"] = refine_json(summary.ops, basis, summary.n_full, &n_sparse);
    }

    log_stage("boost", "dense operators and boost spectrum at dimension " +
                           std::to_string(basis.size()));
    const auto h = build_full_hamiltonian(basis, config.model);
    const auto p = build_momentum(basis);
    const HermitianOperator n(Matrix(n_sparse), refine ? "N_refined" : "N");
    const SpectralDecomposition dec = spectral(n);
    const Matrix states = interior_test_states(basis);

    // Everything below runs in the eigenbasis of N, where conjugation is an
    // elementwise phase sandwich; Frobenius norms are basis-invariant.
    const Matrix h_rot = dec.eigenvectors.adjoint() * h.matrix() * dec.eigenvectors;
    const Matrix p_rot = dec.eigenvectors.adjoint() * p.matrix() * dec.eigenvectors;
    const Matrix states_rot = dec.eigenvectors.adjoint() * states;
    const double h_norm = h.frobenius_norm();
    const double p_norm = p.frobenius_norm();
    const double h_states_norm = (h_rot * states_rot).norm();
    const double p_states_norm = (p_rot * states_rot).norm();

    const auto identity_errors = [&](double beta) {
        json row;
        const double v = std::tanh(beta);
        const double gamma = gamma_factor(v);
        Matrix conj_h = h_rot;
        Matrix conj_p = p_rot;
        if (beta != 0.0) {
            const Vector phase =
                (cplx(0.0, beta) * dec.eigenvalues.cast<cplx>().array()).exp().matrix();
            const Vector phase_conj = phase.conjugate();
            conj_h = phase.asDiagonal() * h_rot * phase_conj.asDiagonal();
            conj_p = phase.asDiagonal() * p_rot * phase_conj.asDiagonal();
        }
        const Matrix dev_h = conj_h - gamma * (h_rot - v * p_rot);
        const Matrix dev_p = conj_p - gamma * (p_rot - v * h_rot);
        row["beta"] = beta;
        row["v"] = v;
        row["e_H"] = dev_h.norm() / h_norm;
        row["e_P"] = dev_p.norm() / p_norm;
        row["e_H_states"] = (dev_h * states_rot).norm() / h_states_norm;
        row["e_P_states"] = (dev_p * states_rot).norm() / p_states_norm;
        return row;
    };

    results["at_rest"] = identity_errors(0.0);
    json sweep = json::array();
    for (const double beta : config.boost.beta_sweep) {
        log_stage("boost", "conjugation at rapidity " + fmt_g(beta));
        sweep.push_back(identity_errors(beta));
    }
    results["sweep"] = sweep;
}

void run_speedup(RunConfig& config, bool refine, ReportBuilder& report) {
    const Model model(config.model, config.n_modes, config.dk);
    const AlgebraSummary summary = compute_algebra_summary(model.basis(), config.model);
    attach_algebra_summary(report, summary);
    const TimeGrid grid = resolve_time_grid(model, config);
    json& results = report.results();

    const StateVector phi0 = make_phi0(model.basis());
    const StateVector packet = make_packet_phi0(model.basis(), config.packet_width);
    const ModeSum rest_modes =
        closed_form_modes(model, phi0.amplitudes, packet.amplitudes, 0.0);
    const AmplitudeSeries rest = evaluate_modes(rest_modes, grid, "V_v0");
    report.add_series(rest);

    const bool dense_ok = model.dimension() <= kDenseCap;
    std::unique_ptr<SpectralDecomposition> boost_dec;
    if (dense_ok) {
        SparseMatrix n_sparse = summary.n_full;
        if (refine) {
            results["refine"] =
                refine_json(summary.ops, model.basis(), summary.n_full, &n_sparse);
        }
        log_stage("speedup", "boost spectrum for the explicit route at dimension " +
                                 std::to_string(model.dimension()));
        const HermitianOperator n(Matrix(n_sparse), refine ? "N_refined" : "N");
        boost_dec = std::make_unique<SpectralDecomposition>(spectral(n));
    } else {
        log_stage("speedup", "skipping the explicit route: dimension " +
                                 std::to_string(model.dimension()) +
                                 " exceeds the dense cap " + std::to_string(kDenseCap));
        results["explicit_route"] = "skipped: dimension exceeds dense cap";
    }

    json rows = json::array();
    double worst_law = 0.0;
    for (const double v : config.velocities) {
        log_stage("speedup", "closed-form amplitude at v=" + fmt_g(v));
        const double gamma = gamma_factor(v);
        const AmplitudeSeries moving =
            amplitude_V(model, v, config.packet_width, grid, BoostRoute::closed_form);
        report.add_series(moving);

        double law_dev = 0.0, prob_dev = 0.0, max_abs = 0.0;
        for (std::size_t i = 0; i < grid.times.size(); ++i) {
            const cplx rescaled = rest_modes.eval(gamma * grid.times[i]);
            law_dev = std::max(law_dev, std::abs(moving.values[i] - rescaled));
            prob_dev = std::max(prob_dev, std::abs(std::norm(moving.values[i]) -
                                                   std::norm(rescaled)));
            max_abs = std::max(max_abs, std::abs(moving.values[i]));
        }
        worst_law = std::max(worst_law, std::max(law_dev, prob_dev));
        json row{{"v", v},
                 {"gamma", gamma},
                 {"law_max_dev", law_dev},
                 {"prob_max_dev", prob_dev},
                 {"max_abs", max_abs}};

        if (dense_ok) {
            log_stage("speedup", "explicit boost route at v=" + fmt_g(v));
            const double beta = rapidity_from_velocity(v);
            const Vector phi_b = boost_state(*boost_dec, beta, phi0.amplitudes);
            const Vector packet_b = boost_state(*boost_dec, beta, packet.amplitudes);
            const ModeSum explicit_modes =
                closed_form_modes(model, phi_b, packet_b, 0.0);
            const AmplitudeSeries explicit_series =
                evaluate_modes(explicit_modes, grid, "V_explicit_v" + fmt_g(v));
            report.add_series(explicit_series);
            double route_dev = 0.0;
            for (std::size_t i = 0; i < grid.times.size(); ++i) {
                route_dev = std::max(route_dev, std::abs(explicit_series.values[i] -
                                                         moving.values[i]));
            }
            row["explicit_route_max_dev"] = route_dev;
        }
        rows.push_back(row);
    }
    results["speedup"] = rows;
    results["law_tolerance"] = kSpeedupTol;
    if (worst_law > kSpeedupTol) {
        throw NumericError("speed-up law violated: max deviation " + fmt_g(worst_law) +
                           " exceeds " + fmt_g(kSpeedupTol));
    }
}

void run_dilation(RunConfig& config, ReportBuilder& report) {
    if (config.momenta.empty()) {
        throw ConfigError("config: missing required key \"momenta\" for dilation");
    }
    const Model model(config.model, config.n_modes, config.dk);
    const AlgebraSummary summary = compute_algebra_summary(model.basis(), config.model);
    attach_algebra_summary(report, summary);
    const TimeGrid grid = resolve_time_grid(model, config);
    const FitOptions options = fit_options_from(config);

    log_stage("dilation", "survival fits at rest and at " +
                              std::to_string(config.momenta.size()) + " momenta");
    const DilationResult result = check_dilation(model, config.momenta, grid, options,
                                                 config.fit.min_r_squared);

    report.add_series(survival_A(model, 0.0, grid));
    std::string fits = fits_csv_header();
    append_fit_row(fits, "A_p0", 0.0, result.fit_rest);

    json rows = json::array();
    for (const DilationRow& row : result.rows) {
        report.add_series(survival_A(model, row.p, grid));
        append_fit_row(fits, "A_p" + fmt_g(row.p), row.p, row.fit);
        rows.push_back(json{{"p", row.p},
                            {"gamma_m", row.gamma_m},
                            {"ratio", row.ratio},
                            {"curve_max_dev", row.curve_max_dev},
                            {"fit", fit_to_json(row.fit)}});
    }
    report.results()["dilation"] = json{{"fit_rest", fit_to_json(result.fit_rest)},
                                        {"m_fitted", result.fit_rest.m_eff},
                                        {"m_bare", config.model.m_a},
                                        {"rows", rows}};
    report.add_extra_file("fits.csv", fits);
}

void run_moments(RunConfig& config, bool refine, ReportBuilder& report) {
    const Model model(config.model, config.n_modes, config.dk);
    const AlgebraSummary summary = compute_algebra_summary(model.basis(), config.model);
    attach_algebra_summary(report, summary);
    json& results = report.results();

    const bool dense_ok = model.dimension() <= kDenseCap;
    std::unique_ptr<SpectralDecomposition> boost_dec;
    const StateVector phi0 = make_phi0(model.basis());
    if (dense_ok) {
        SparseMatrix n_sparse = summary.n_full;
        if (refine) {
            results["refine"] =
                refine_json(summary.ops, model.basis(), summary.n_full, &n_sparse);
        }
        log_stage("moments", "boost spectrum for the explicit route");
        const HermitianOperator n(Matrix(n_sparse), refine ? "N_refined" : "N");
        boost_dec = std::make_unique<SpectralDecomposition>(spectral(n));
    } else {
        log_stage("moments", "skipping the explicit route: dimension " +
                                 std::to_string(model.dimension()) +
                                 " exceeds the dense cap " + std::to_string(kDenseCap));
        results["explicit_route"] = "skipped: dimension exceeds dense cap";
    }

    const auto expectation = [&model](const Vector& w) {
        double e = 0.0, p = 0.0;
        for (long i = 0; i < w.size(); ++i) {
            const double w2 = std::norm(w[i]);
            e += model.free_energies()[i] * w2;
            p += model.momenta()[i] * w2;
        }
        const Vector h_int_w = model.interaction() * w;
        e += w.dot(h_int_w).real();
        return std::make_pair(p, e);
    };

    json rows = json::array();
    double worst_relation = 0.0;
    for (const double v : config.velocities) {
        const double gamma = gamma_factor(v);
        const MomentPair closed = boosted_moments(model, v, BoostRoute::closed_form);
        const double relation_dev = std::abs(closed.ratio_abs - std::abs(v));
        worst_relation = std::max(worst_relation, relation_dev);
        json row{{"v", v},
                 {"closed", json{{"avg_P", closed.avg_P},
                                 {"avg_E", closed.avg_E},
                                 {"ratio_abs", closed.ratio_abs},
                                 {"relation_dev", relation_dev},
                                 {"avg_E_target", gamma * config.model.m_a},
                                 {"avg_P_magnitude_target",
                                  gamma * std::abs(v) * config.model.m_a}}}};
        if (dense_ok) {
            const double beta = rapidity_from_velocity(v);
            const Vector w = boost_state(*boost_dec, beta, phi0.amplitudes);
            const auto [p_exp, e_exp] = expectation(w);
            row["explicit"] = json{{"avg_P", p_exp},
                                   {"avg_E", e_exp},
                                   {"ratio_abs", std::abs(p_exp) / e_exp}};
        }
        rows.push_back(row);
    }
    results["moments"] = rows;
    results["relation_tolerance"] = kMomentsTol;
    if (worst_relation > kMomentsTol) {
        throw NumericError("relativistic relation violated on the closed route: " +
                           fmt_g(worst_relation) + " exceeds " + fmt_g(kMomentsTol));
    }
}

void run_mixture(RunConfig& config, ReportBuilder& report) {
    const Model model(config.model, config.n_modes, config.dk);
    const AlgebraSummary summary = compute_algebra_summary(model.basis(), config.model);
    attach_algebra_summary(report, summary);
    const TimeGrid grid = resolve_time_grid(model, config);
    const FitOptions options = fit_options_from(config);
    const double w = std::sqrt(0.5); // equal amplitude weights

    json rows = json::array();
    std::string fits = fits_csv_header();
    for (const double v : config.velocities) {
        log_stage("mixture", "two-component evolution at v=" + fmt_g(v));
        const double gamma = gamma_factor(v);
        MixtureResult mix =
            mixture_experiment(model, v, {w, w}, config.packet_width, grid, options);
        mix.fast.label = "mix_fast_v" + fmt_g(v);
        mix.slow.label = "mix_slow_v" + fmt_g(v);
        report.add_series(mix.fast);
        report.add_series(mix.slow);

        json row{{"v", v},
                 {"p_mode", mix.p_mode},
                 {"gamma_squared", gamma * gamma},
                 {"weights", json::array({w, w})}};
        if (mix.fit_fast.has_value()) {
            row["fit_fast"] = fit_to_json(*mix.fit_fast);
            append_fit_row(fits, mix.fast.label, v, *mix.fit_fast);
        }
        if (mix.fit_slow.has_value()) {
            row["fit_slow"] = fit_to_json(*mix.fit_slow);
            append_fit_row(fits, mix.slow.label, mix.p_mode, *mix.fit_slow);
        }
        if (mix.rate_ratio.has_value()) {
            row["rate_ratio"] = *mix.rate_ratio;
        }
        rows.push_back(row);
    }
    report.results()["mixture"] = rows;
    report.add_extra_file("fits.csv", fits);
}

void run_appendix(RunConfig& config, bool refine, ReportBuilder& report) {
    json& results = report.results();

    log_stage("appendix", "coefficient flow, step " + fmt_g(kOdeStep) +
                              " up to rapidity " + fmt_g(kOdeBetaMax));
    const CoefficientTrajectory traj = solve_coefficient_ode(kOdeBetaMax, kOdeStep);
    double dev_h = 0.0, dev_p = 0.0, dev_inv = 0.0;
    for (std::size_t i = 0; i < traj.beta.size(); ++i) {
        dev_h = std::max(dev_h, std::abs(traj.h[i] - std::cosh(traj.beta[i])));
        dev_p = std::max(dev_p, std::abs(traj.p[i] + std::sinh(traj.beta[i])));
        dev_inv = std::max(dev_inv,
                           std::abs(traj.h[i] * traj.h[i] - traj.p[i] * traj.p[i] - 1.0));
    }
    results["ode"] = json{{"beta_max", kOdeBetaMax},
                          {"step", kOdeStep},
                          {"max_dev_h", dev_h},
                          {"max_dev_p", dev_p},
                          {"max_invariant_dev", dev_inv}};

    const MomentumGrid grid = MomentumGrid::build(config.n_modes, config.dk);
    const SectorBasis basis = SectorBasis::enumerate(grid);
    if (basis.size() > kDenseCap) {
        throw NumericError("appendix series need dense spectra; dimension " +
                           std::to_string(basis.size()) + " exceeds " +
                           std::to_string(kDenseCap) +
                           "; use a coarser grid for this subcommand");
    }
    const AlgebraSummary summary = compute_algebra_summary(basis, config.model);
    attach_algebra_summary(report, summary);

    SparseMatrix n_sparse = summary.n_full;
    if (refine) {
        results["refine"] = refine_json(summary.ops, basis, summary.n_full, &n_sparse);
    }
    const auto h = build_full_hamiltonian(basis, config.model);
    const auto p = build_momentum(basis);
    const HermitianOperator n(Matrix(n_sparse), refine ? "N_refined" : "N");

    log_stage("appendix", "commutator series at rapidity " + fmt_g(kBchBeta) +
                              ", dimension " + std::to_string(basis.size()));
    const HermitianOperator exact = conjugate_by_boost(h, n, kBchBeta);
    const double e2 = (bch_series(h, n, kBchBeta, 2) - exact.matrix()).norm();
    const double e4 = (bch_series(h, n, kBchBeta, 4) - exact.matrix()).norm();
    results["bch"] = json{{"beta", kBchBeta},
                          {"error_order2", e2},
                          {"error_order4", e4},
                          {"error_ratio", e4 > 0.0 ? e2 / e4 : 0.0}};

    log_stage("appendix", "span decomposition of the conjugated Hamiltonian");
    const SpanCoefficients span = span_decomposition(exact.matrix(), h, p, n);
    results["span"] = json{{"beta", kBchBeta},
                           {"coeff_h", span.h},
                           {"coeff_p", span.p},
                           {"coeff_n", span.n},
                           {"residual_abs", span.residual_abs},
                           {"residual_rel", span.residual_rel},
                           {"gram_condition", span.gram_condition},
                           {"cosh_beta", std::cosh(kBchBeta)},
                           {"sinh_beta", std::sinh(kBchBeta)}};
}

void run_scan(RunConfig& config, ReportBuilder& report) {
    if (config.velocities.empty()) {
        throw ConfigError("config: missing required key \"velocities\" for scan");
    }
    if (config.momenta.empty()) {
        throw ConfigError("config: missing required key \"momenta\" for scan");
    }
    const Model model(config.model, config.n_modes, config.dk);
    const AlgebraSummary summary = compute_algebra_summary(model.basis(), config.model);
    attach_algebra_summary(report, summary);
    const TimeGrid grid = resolve_time_grid(model, config);

    const StateVector phi0 = make_phi0(model.basis());
    const StateVector packet = make_packet_phi0(model.basis(), config.packet_width);
    const ModeSum rest_modes =
        closed_form_modes(model, phi0.amplitudes, packet.amplitudes, 0.0);

    // Per-velocity quantities: closed moments and the speed-up deviation.
    struct VelocityCell {
        MomentPair moments;
        double law_max_dev = 0.0;
    };
    std::vector<VelocityCell> v_cells;
    for (const double v : config.velocities) {
        log_stage("scan", "velocity column v=" + fmt_g(v));
        VelocityCell cell;
        cell.moments = boosted_moments(model, v, BoostRoute::closed_form);
        const double gamma = gamma_factor(v);
        const AmplitudeSeries moving =
            amplitude_V(model, v, config.packet_width, grid, BoostRoute::closed_form);
        for (std::size_t i = 0; i < grid.times.size(); ++i) {
            cell.law_max_dev =
                std::max(cell.law_max_dev,
                         std::abs(moving.values[i] - rest_modes.eval(gamma * grid.times[i])));
        }
        v_cells.push_back(cell);
    }

    // Per-momentum quantities: recurrence guard and the final survival.
    struct MomentumCell {
        double guard = 0.0;
        double abs2_final = 0.0;
    };
    std::vector<MomentumCell> p_cells;
    for (const double p : config.momenta) {
        log_stage("scan", "momentum row p=" + fmt_g(p));
        MomentumCell cell;
        const int block =
            model.basis().block_of[model.basis().index_single(model.mode_index(p))];
        cell.guard = model.recurrence_guard(block);
        const AmplitudeSeries series = survival_A(model, p, grid);
        cell.abs2_final = std::norm(series.values.back());
        p_cells.push_back(cell);
    }

    json rows = json::array();
    for (std::size_t iv = 0; iv < config.velocities.size(); ++iv) {
        for (std::size_t ip = 0; ip < config.momenta.size(); ++ip) {
            rows.push_back(json{{"v", config.velocities[iv]},
                                {"p", config.momenta[ip]},
                                {"avg_P", v_cells[iv].moments.avg_P},
                                {"avg_E", v_cells[iv].moments.avg_E},
                                {"ratio_abs", v_cells[iv].moments.ratio_abs},
                                {"speedup_max_dev", v_cells[iv].law_max_dev},
                                {"guard_p", p_cells[ip].guard},
                                {"abs2_p_final", p_cells[ip].abs2_final}});
        }
    }
    report.results()["scan"] = rows;
    report.results()["scan_rows"] = rows.size();
}

} // namespace

int run_command(int argc, const char* const* argv) {
    CLI::App app{"Decay laboratory for a boosted unstable particle on a momentum "
                 "lattice: boost-algebra residuals, exact speed-up checks, "
                 "dilation fits, moments, mixtures, and series appendices"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir_override;
    bool refine = false;
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress [stage] logs on stderr");

    struct SubSpec {
        const char* name;
        const char* description;
        CLI::App* sub = nullptr;
    };
    SubSpec subs[] = {
        {"check-algebra", "boost-algebra residuals plus a dk-halving convergence pair"},
        {"boost-identity", "conjugation vs closed form over the rapidity sweep"},
        {"speedup", "moving-packet amplitude against the rescaled resting amplitude"},
        {"dilation", "survival fits at the configured momenta and the ratio test"},
        {"moments", "boosted momentum and energy averages, both routes"},
        {"mixture", "two-component superposition with fast and slow fits"},
        {"appendix", "coefficient flow, commutator series, span decomposition"},
        {"scan", "cartesian velocity x momentum sweep of cheap exact quantities"},
    };
    for (SubSpec& spec : subs) {
        spec.sub = app.add_subcommand(spec.name, spec.description);
        spec.sub->add_option("--config", config_path, "JSON run configuration")
            ->required();
        spec.sub->add_option("--out-dir", out_dir_override,
                             "override the configured output directory");
        spec.sub->add_flag("--refine-boost", refine,
                           "least-squares refinement of the boost generator");
        spec.sub->add_flag("--quiet", quiet, "suppress [stage] logs on stderr");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    set_log_quiet(quiet);
    try {
        RunConfig config = load_config(config_path);
        if (!out_dir_override.empty()) {
            config.output_dir = out_dir_override;
        }
        const bool refine_run = refine || config.boost.use_refined;

        ReportBuilder report(json::object());
        StageTimer timer;
        std::string command;
        for (const SubSpec& spec : subs) {
            if (spec.sub->parsed()) {
                command = spec.name;
            }
        }
        report.root()["command"] = command;
        report.add_timing("load_config", timer.lap_seconds());

        if (command == "check-algebra") {
            run_check_algebra(config, refine_run, report);
        } else if (command == "boost-identity") {
            run_boost_identity(config, refine_run, report);
        } else if (command == "speedup") {
            run_speedup(config, refine_run, report);
        } else if (command == "dilation") {
            run_dilation(config, report);
        } else if (command == "moments") {
            run_moments(config, refine_run, report);
        } else if (command == "mixture") {
            run_mixture(config, report);
        } else if (command == "appendix") {
            run_appendix(config, refine_run, report);
        } else {
            run_scan(config, report);
        }
        report.add_timing("run", timer.lap_seconds());

        report.root()["config_echo"] = config_echo(config);
        log_stage("write", "report and series into " + config.output_dir);
        report.write(config.output_dir);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "[error] %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[error] %s\n", e.what());
        return 1;
    }
}

int run_command(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("leelab");
    for (const std::string& arg : args) {
        argv.push_back(arg.c_str());
    }
    return run_command(static_cast<int>(argv.size()), argv.data());
}

} // namespace leelab::cli
