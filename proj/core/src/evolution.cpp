#include "leelab/evolution.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "leelab/errors.hpp"
#include "leelab/log.hpp"

namespace leelab {

namespace {

constexpr long kDenseBoostLimit = 4096;

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// exp(i beta N) |psi> through the dense spectral decomposition of N.
Vector apply_boost_unitary(const SpectralDecomposition& dec, double beta,
                           const Vector& psi) {
    if (beta == 0.0) {
        return psi;
    }
    const Vector phases =
        (cplx(0.0, beta) * dec.eigenvalues.cast<cplx>().array()).exp().matrix();
    const Vector rotated = dec.eigenvectors.adjoint() * psi;
    return dec.eigenvectors * (phases.asDiagonal() * rotated);
}

SpectralDecomposition dense_boost_spectral(const Model& model,
                                           const HermitianOperator* boost_gen) {
    if (boost_gen == nullptr) {
        throw ConfigError("explicit boost route requires a boost generator");
    }
    if (model.dimension() > kDenseBoostLimit) {
        throw NumericError("explicit boost route needs a dense spectral decomposition; "
                           "dimension " +
                           std::to_string(model.dimension()) + " exceeds " +
                           std::to_string(kDenseBoostLimit));
    }
    if (boost_gen->dim() != model.dimension()) {
        throw ConfigError("boost generator dimension does not match the model");
    }
    return spectral(*boost_gen);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
};

LinearFit regress(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
    if (syy > 0.0) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (fit.intercept + fit.slope * x[i]);
            ss_res += r * r;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    }
    return fit;
}

} // namespace

TimeGrid TimeGrid::uniform(double t_max, int samples) {
    if (!(t_max > 0.0)) {
        throw ConfigError("time grid needs t_max > 0");
    }
    if (samples < 2) {
        throw ConfigError("time grid needs at least 2 samples");
    }
    TimeGrid grid;
    grid.times.resize(samples);
    for (int i = 0; i < samples; ++i) {
        grid.times[i] = t_max * static_cast<double>(i) / (samples - 1);
    }
    return grid;
}

Model::Model(const ModelParams& params, int n_modes, double dk)
    : params_(params), basis_(SectorBasis::enumerate(MomentumGrid::build(n_modes, dk))) {
    params_.validate();
    h0_ = free_hamiltonian_diagonal(basis_, params_);
    p_ = momentum_diagonal(basis_);
    h_int_ = interaction_sparse(basis_, params_);
}

Matrix Model::block_matrix(int block, double v) const {
    if (block < 0 || block >= block_count()) {
        throw ConfigError("block index " + std::to_string(block) + " out of range");
    }
    const double gamma = gamma_factor(v);
    const auto& members = basis_.blocks[block];
    const long d = static_cast<long>(members.size());
    Matrix m = Matrix::Zero(d, d);
    for (long r = 0; r < d; ++r) {
        m(r, r) = gamma * (h0_[members[r]] - v * p_[members[r]]);
    }
    // The interaction couples only states inside one block, so scanning the
    // rows of the members collects every off-diagonal entry.
    for (long r = 0; r < d; ++r) {
        for (SparseMatrix::InnerIterator it(h_int_, members[r]); it; ++it) {
            const auto pos = std::lower_bound(members.begin(), members.end(), it.row());
            if (pos != members.end() && *pos == it.row()) {
                const long rr = pos - members.begin();
                m(rr, r) += gamma * it.value();
            }
        }
    }
    return m;
}

SpectralDecomposition Model::block_spectral(int block, double v) const {
    const Matrix m = block_matrix(block, v);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) {
        throw NumericError("block eigendecomposition failed for block " +
                           std::to_string(block));
    }
    SpectralDecomposition dec;
    dec.eigenvalues = solver.eigenvalues();
    dec.eigenvectors = solver.eigenvectors();
    return dec;
}

double Model::mean_level_spacing(int block) const {
    const auto dec = block_spectral(block, 0.0);
    const long d = dec.eigenvalues.size();
    if (d < 2) {
        return std::numeric_limits<double>::infinity();
    }
    return (dec.eigenvalues[d - 1] - dec.eigenvalues[0]) / static_cast<double>(d - 1);
}

double Model::recurrence_guard(int block) const {
    const double spacing = mean_level_spacing(block);
    if (!std::isfinite(spacing) || spacing <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return M_PI / spacing;
}

int Model::mode_index(double p) const {
    const auto& modes = basis_.grid.modes;
    const int off = basis_.grid.offset();
    const long raw = off + std::llround(p / basis_.grid.dk);
    const long clamped = std::clamp<long>(raw, 0, basis_.n() - 1);
    const double nearest = modes[clamped];
    if (std::abs(nearest - p) <= 1e-9 * std::max(1.0, std::abs(p))) {
        return static_cast<int>(clamped);
    }
    const double other = (p > nearest && clamped + 1 < basis_.n()) ? modes[clamped + 1]
                         : (clamped > 0 ? modes[clamped - 1] : nearest);
    throw std::domain_error("momentum " + format_value(p) +
                            " is not a grid mode; nearest modes are " +
                            format_value(std::min(nearest, other)) + " and " +
                            format_value(std::max(nearest, other)));
}

StateVector make_phi0(const SectorBasis& basis) {
    Vector amps = Vector::Zero(basis.size());
    amps[basis.index_single(basis.grid.offset())] = cplx(1.0, 0.0);
    return StateVector::from(std::move(amps));
}

StateVector make_packet_phi0(const SectorBasis& basis, double width) {
    if (!(width > 0.0)) {
        throw ConfigError("packet width must be positive");
    }
    Vector amps = Vector::Zero(basis.size());
    for (int i = 0; i < basis.n(); ++i) {
        const double k = basis.grid.modes[i];
        amps[basis.index_single(i)] = std::exp(-k * k / (4.0 * width * width));
    }
    amps /= amps.norm();
    return StateVector::from(std::move(amps));
}

StateVector make_psi_p(const SectorBasis& basis, double p) {
    // Reuse the grid lookup of Model::mode_index without requiring a model:
    // the check is purely geometric.
    const auto& modes = basis.grid.modes;
    const int off = basis.grid.offset();
    const long raw = off + std::llround(p / basis.grid.dk);
    const long clamped = std::clamp<long>(raw, 0, basis.n() - 1);
    if (std::abs(modes[clamped] - p) > 1e-9 * std::max(1.0, std::abs(p))) {
        const double nearest = modes[clamped];
        const double other = (p > nearest && clamped + 1 < basis.n())
                                 ? modes[clamped + 1]
                                 : (clamped > 0 ? modes[clamped - 1] : nearest);
        throw std::domain_error("momentum " + format_value(p) +
                                " is not a grid mode; nearest modes are " +
                                format_value(std::min(nearest, other)) + " and " +
                                format_value(std::max(nearest, other)));
    }
    Vector amps = Vector::Zero(basis.size());
    amps[basis.index_single(static_cast<int>(clamped))] = cplx(1.0, 0.0);
    return StateVector::from(std::move(amps));
}

ModeSum closed_form_modes(const Model& model, const Vector& bra, const Vector& ket,
                          double v) {
    (void)gamma_factor(v); // validates |v| < 1
    if (bra.size() != model.dimension() || ket.size() != model.dimension()) {
        throw ConfigError("state dimension does not match the model");
    }
    ModeSum out;
    const auto& blocks = model.basis().blocks;
    for (int b = 0; b < model.block_count(); ++b) {
        const auto& members = blocks[b];
        bool bra_support = false, ket_support = false;
        for (const long m : members) {
            bra_support = bra_support || (bra[m] != cplx(0.0, 0.0));
            ket_support = ket_support || (ket[m] != cplx(0.0, 0.0));
        }
        if (!bra_support || !ket_support) {
            continue;
        }
        const long d = static_cast<long>(members.size());
        Vector bra_b(d), ket_b(d);
        for (long r = 0; r < d; ++r) {
            bra_b[r] = bra[members[r]];
            ket_b[r] = ket[members[r]];
        }
        const auto dec = model.block_spectral(b, v);
        const Vector bra_t = dec.eigenvectors.adjoint() * bra_b;
        const Vector ket_t = dec.eigenvectors.adjoint() * ket_b;
        for (long m = 0; m < d; ++m) {
            out.freq.push_back(dec.eigenvalues[m]);
            out.weight.push_back(std::conj(bra_t[m]) * ket_t[m]);
        }
    }
    return out;
}

AmplitudeSeries evaluate_modes(const ModeSum& modes, const TimeGrid& grid,
                               std::string label) {
    AmplitudeSeries series;
    series.t = grid.times;
    series.values.resize(grid.times.size());
    for (std::size_t i = 0; i < grid.times.size(); ++i) {
        series.values[i] = modes.eval(grid.times[i]);
    }
    series.label = std::move(label);
    return series;
}

AmplitudeSeries amplitude_V(const Model& model, double v, double width,
                            const TimeGrid& grid, BoostRoute route,
                            const HermitianOperator* boost_gen) {
    const StateVector phi0 = make_phi0(model.basis());
    const StateVector packet = make_packet_phi0(model.basis(), width);

    if (route == BoostRoute::closed_form) {
        const ModeSum modes = closed_form_modes(model, phi0.amplitudes,
                                                packet.amplitudes, v);
        return evaluate_modes(modes, grid, "V_v" + format_value(v));
    }

    const SpectralDecomposition dec = dense_boost_spectral(model, boost_gen);
    const double beta = rapidity_from_velocity(v);
    const Vector bra = apply_boost_unitary(dec, beta, phi0.amplitudes);
    const Vector ket = apply_boost_unitary(dec, beta, packet.amplitudes);
    const ModeSum modes = closed_form_modes(model, bra, ket, 0.0);
    return evaluate_modes(modes, grid, "V_explicit_v" + format_value(v));
}

AmplitudeSeries survival_A(const Model& model, double p, const TimeGrid& grid) {
    const StateVector psi = make_psi_p(model.basis(), p);
    const ModeSum modes = closed_form_modes(model, psi.amplitudes, psi.amplitudes, 0.0);
    return evaluate_modes(modes, grid, "A_p" + format_value(p));
}

DecayFit fit_decay(const AmplitudeSeries& series, const FitOptions& options) {
    if (series.t.size() < 20) {
        throw FitError("decay fit needs at least 20 samples, got " +
                       std::to_string(series.t.size()));
    }
    const std::size_t count = series.t.size();
    std::vector<bool> admissible(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double abs2 = std::norm(series.values[i]);
        admissible[i] = series.t[i] <= options.recurrence_guard &&
                        abs2 >= options.abs2_lo && abs2 <= options.abs2_hi;
    }

    std::size_t best_begin = 0, best_length = 0, run_begin = 0, run_length = 0;
    for (std::size_t i = 0; i <= count; ++i) {
        if (i < count && admissible[i]) {
            if (run_length == 0) {
                run_begin = i;
            }
            ++run_length;
        } else {
            if (run_length > best_length) {
                best_begin = run_begin;
                best_length = run_length;
            }
            run_length = 0;
        }
    }
    if (best_length < static_cast<std::size_t>(options.min_points)) {
        throw FitError(
            "no admissible fit window (|A|^2 in [" + format_value(options.abs2_lo) +
            ", " + format_value(options.abs2_hi) + "] before the recurrence guard " +
            format_value(options.recurrence_guard) +
            " covers fewer than " + std::to_string(options.min_points) +
            " samples); adjust the time grid, the fit thresholds, or the coupling");
    }

    std::vector<double> ts(best_length), log_abs2(best_length), phase(best_length);
    for (std::size_t i = 0; i < best_length; ++i) {
        const std::size_t idx = best_begin + i;
        ts[i] = series.t[idx];
        log_abs2[i] = std::log(std::norm(series.values[idx]));
        phase[i] = std::arg(series.values[idx]);
    }
    for (std::size_t i = 1; i < best_length; ++i) {
        double delta = phase[i] - phase[i - 1];
        while (delta > M_PI) delta -= 2.0 * M_PI;
        while (delta <= -M_PI) delta += 2.0 * M_PI;
        phase[i] = phase[i - 1] + delta;
    }

    const LinearFit amp_fit = regress(ts, log_abs2);
    if (amp_fit.slope > 0.0) {
        throw FitError("fit window shows growth instead of decay (log|A|^2 slope " +
                       format_value(amp_fit.slope) + ")");
    }
    const LinearFit phase_fit = regress(ts, phase);

    DecayFit fit;
    fit.gamma_rate = -amp_fit.slope;
    fit.m_eff = -phase_fit.slope;
    fit.t1 = ts.front();
    fit.t2 = ts.back();
    fit.r_squared = amp_fit.r_squared;
    fit.recurrence_guard = options.recurrence_guard;
    return fit;
}

DilationResult check_dilation(const Model& model, const std::vector<double>& p_list,
                              const TimeGrid& grid, const FitOptions& options,
                              double min_r_squared) {
    const int block_rest = model.basis().block_of[model.basis().index_single(
        model.grid().offset())];

    FitOptions rest_options = options;
    rest_options.recurrence_guard =
        std::min(options.recurrence_guard, model.recurrence_guard(block_rest));

    const StateVector psi0 = make_psi_p(model.basis(), 0.0);
    const ModeSum modes_rest =
        closed_form_modes(model, psi0.amplitudes, psi0.amplitudes, 0.0);
    const AmplitudeSeries series_rest = evaluate_modes(modes_rest, grid, "A_p0");

    DilationResult result;
    result.fit_rest = fit_decay(series_rest, rest_options);
    if (result.fit_rest.r_squared < min_r_squared) {
        throw FitError("rest-frame fit quality r^2 = " +
                       format_value(result.fit_rest.r_squared) + " is below " +
                       format_value(min_r_squared) +
                       "; no clean exponential window on this grid");
    }
    const double m_fit = result.fit_rest.m_eff;
    if (!(m_fit > 0.0)) {
        throw FitError("rest-frame fitted mass is not positive");
    }

    for (const double p : p_list) {
        DilationRow row;
        row.p = p;
        const int ip = model.mode_index(p);
        const int block = model.basis().block_of[model.basis().index_single(ip)];
        FitOptions p_options = options;
        p_options.recurrence_guard =
            std::min(options.recurrence_guard, model.recurrence_guard(block));

        const AmplitudeSeries series_p = survival_A(model, p, grid);
        row.fit = fit_decay(series_p, p_options);
        if (row.fit.r_squared < min_r_squared) {
            throw FitError("fit quality r^2 = " + format_value(row.fit.r_squared) +
                           " at p = " + format_value(p) + " is below " +
                           format_value(min_r_squared));
        }
        row.gamma_m = std::sqrt(p * p + m_fit * m_fit) / m_fit;
        row.ratio = row.fit.gamma_rate * row.gamma_m / result.fit_rest.gamma_rate;

        row.curve_max_dev = 0.0;
        for (std::size_t i = 0; i < series_p.t.size(); ++i) {
            const double t = series_p.t[i];
            if (t < row.fit.t1 || t > row.fit.t2) {
                continue;
            }
            const double abs2_p = std::norm(series_p.values[i]);
            const double abs2_rest = std::norm(modes_rest.eval(t / row.gamma_m));
            row.curve_max_dev =
                std::max(row.curve_max_dev, std::abs(abs2_p - abs2_rest));
        }
        result.rows.push_back(row);
    }
    return result;
}

MomentPair boosted_moments(const Model& model, double v, BoostRoute route,
                           const HermitianOperator* boost_gen) {
    const BoostParams boost = BoostParams::from_velocity(v);
    const StateVector phi0 = make_phi0(model.basis());

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

    MomentPair out;
    if (route == BoostRoute::closed_form) {
        const auto [p_exp, e_exp] = expectation(phi0.amplitudes);
        out.avg_P = boost.gamma * (p_exp - boost.v * e_exp);
        out.avg_E = boost.gamma * (e_exp - boost.v * p_exp);
    } else {
        const SpectralDecomposition dec = dense_boost_spectral(model, boost_gen);
        const Vector w = apply_boost_unitary(dec, boost.beta, phi0.amplitudes);
        const auto [p_exp, e_exp] = expectation(w);
        out.avg_P = p_exp;
        out.avg_E = e_exp;
    }
    out.ratio_abs = std::abs(out.avg_P) / out.avg_E;
    return out;
}

MixtureResult mixture_experiment(const Model& model, double v,
                                 std::pair<double, double> weights, double width,
                                 const TimeGrid& grid, const FitOptions& options) {
    const double norm2 = weights.first * weights.first + weights.second * weights.second;
    if (std::abs(norm2 - 1.0) > 1e-12) {
        throw ConfigError("mixture weights must satisfy w_fast^2 + w_slow^2 = 1");
    }
    const BoostParams boost = BoostParams::from_velocity(v);

    MixtureResult result;
    const double target = boost.gamma * boost.v * model.params().m_a;
    const int off = model.grid().offset();
    const long raw = off + std::llround(target / model.grid().dk);
    const long ip = std::clamp<long>(raw, 0, model.basis().n() - 1);
    if (ip != raw) {
        log_stage("mixture", "classical momentum " + format_value(target) +
                                 " lies outside the grid; clamped to " +
                                 format_value(model.grid().modes[ip]));
    }
    result.p_mode = model.grid().modes[ip];

    const int block_rest = model.basis().block_of[model.basis().index_single(off)];
    const int block_p = model.basis().block_of[model.basis().index_single(
        static_cast<int>(ip))];

    AmplitudeSeries fast = amplitude_V(model, v, width, grid, BoostRoute::closed_form);
    fast.label = "mix_fast";
    for (auto& value : fast.values) {
        value *= weights.first;
    }
    AmplitudeSeries slow = survival_A(model, result.p_mode, grid);
    slow.label = "mix_slow";
    for (auto& value : slow.values) {
        value *= weights.second;
    }

    if (weights.first != 0.0) {
        FitOptions fast_options = options;
        // V(v,t) sweeps the rest-frame spectrum at rate gamma, so its
        // recurrences arrive earlier by the same factor.
        fast_options.recurrence_guard = std::min(
            options.recurrence_guard, model.recurrence_guard(block_rest) / boost.gamma);
        result.fit_fast = fit_decay(fast, fast_options);
    }
    if (weights.second != 0.0) {
        FitOptions slow_options = options;
        slow_options.recurrence_guard =
            std::min(options.recurrence_guard, model.recurrence_guard(block_p));
        result.fit_slow = fit_decay(slow, slow_options);
    }
    if (result.fit_fast && result.fit_slow && result.fit_slow->gamma_rate > 0.0) {
        result.rate_ratio = result.fit_fast->gamma_rate / result.fit_slow->gamma_rate;
    }
    result.fast = std::move(fast);
    result.slow = std::move(slow);
    return result;
}

double golden_rule_estimate(const ModelParams& params, const MomentumGrid& grid) {
    params.validate();
    if (params.g == 0.0) {
        return 0.0;
    }
    const auto pair_energy = [&params](double k) {
        return dispersion(params.m_b, k) + dispersion(params.m_c, k);
    };
    const double k_max = grid.k_max();
    if (pair_energy(k_max) < params.m_a) {
        throw NumericError("resonant momentum lies outside the grid band; "
                           "increase the grid reach n_modes * dk");
    }
    double lo = 0.0, hi = k_max;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (pair_energy(mid) < params.m_a) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double k_star = 0.5 * (lo + hi);
    const double de_dk = k_star / dispersion(params.m_b, k_star) +
                         k_star / dispersion(params.m_c, k_star);
    const double g_val = interaction_kernel(params, grid.dk, k_star, -k_star);
    return 2.0 * M_PI * g_val * g_val * 2.0 / (de_dk * grid.dk);
}

} // namespace leelab
