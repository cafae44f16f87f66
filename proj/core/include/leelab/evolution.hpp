#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leelab/kinematics.hpp"
#include "leelab/operators.hpp"

namespace leelab {

// Uniform sample times t_i = t_max * i / (samples - 1), i in [0, samples).
struct TimeGrid {
    std::vector<double> times;

    // Throws ConfigError unless t_max > 0 and samples >= 2.
    static TimeGrid uniform(double t_max, int samples);
};

// A complex amplitude sampled on a time grid. For unit-normalized bra and
// ket every |value| stays below 1 + 1e-9 (Cauchy-Schwarz).
struct AmplitudeSeries {
    std::vector<double> t;
    std::vector<cplx> values;
    std::string label;
};

// Sparse-backed model bundle: diagonals, interaction, and exact
// total-momentum blocks. All evolutions run per block, so the full dense
// Hamiltonian is never materialized.
class Model {
public:
    Model(const ModelParams& params, int n_modes, double dk);

    const ModelParams& params() const { return params_; }
    const SectorBasis& basis() const { return basis_; }
    const MomentumGrid& grid() const { return basis_.grid; }
    const RealVector& free_energies() const { return h0_; }
    const RealVector& momenta() const { return p_; }
    const SparseMatrix& interaction() const { return h_int_; }
    long dimension() const { return basis_.size(); }
    int block_count() const { return static_cast<int>(basis_.blocks.size()); }

    // Dense restriction of gamma(v) * (H - v*P) to one momentum block.
    Matrix block_matrix(int block, double v) const;
    SpectralDecomposition block_spectral(int block, double v) const;

    // Mean nearest-neighbor spacing of the block's energy eigenvalues;
    // infinity for single-state blocks.
    double mean_level_spacing(int block) const;
    // Latest trustworthy evolution time pi / mean_level_spacing.
    double recurrence_guard(int block) const;

    // Grid index of the mode equal to p, or a domain error naming the
    // nearest modes when p is not on the grid.
    int mode_index(double p) const;

private:
    ModelParams params_;
    SectorBasis basis_;
    RealVector h0_;
    RealVector p_;
    SparseMatrix h_int_;
};

// Unit vector on A(0): exact zero-momentum eigenvector, nonstationary
// under the interacting Hamiltonian.
StateVector make_phi0(const SectorBasis& basis);

// Normalized Gaussian packet on the single-particle sector with
// amplitudes proportional to exp(-p^2 / (4 width^2)); zero average
// momentum by symmetry. Throws ConfigError unless width > 0.
StateVector make_packet_phi0(const SectorBasis& basis, double width);

// Unit vector on A(p) for a grid mode p: exact momentum eigenvector.
// Throws std::domain_error naming the nearest modes if p is off the grid.
StateVector make_psi_p(const SectorBasis& basis, double p);

// Frequencies and weights of <bra| exp(-i t gamma(H - vP)) |ket>
// accumulated block by block (both vectors restricted to each exact
// momentum block; blocks without weight are skipped).
ModeSum closed_form_modes(const Model& model, const Vector& bra, const Vector& ket,
                          double v);

// Evaluate a mode sum over a time grid.
AmplitudeSeries evaluate_modes(const ModeSum& modes, const TimeGrid& grid,
                               std::string label);

enum class BoostRoute { closed_form, explicit_boost };

// V(v,t): overlap of the resting detector state phi0 with the boosted
// packet evolved to time t.
//   closed_form:    <phi0, exp(-i t (gamma H - gamma v P)) Phi0>
//   explicit_boost: <exp(i beta N) phi0, exp(-i H t) exp(i beta N) Phi0>
// The explicit route needs `boost_gen` and a dense spectral decomposition,
// so it is limited to dimensions <= 4096 (NumericError beyond).
AmplitudeSeries amplitude_V(const Model& model, double v, double width,
                            const TimeGrid& grid, BoostRoute route,
                            const HermitianOperator* boost_gen = nullptr);

// A_p(t) = <psi_p, exp(-i H t) psi_p>, computed inside the total-momentum
// block of p.
AmplitudeSeries survival_A(const Model& model, double p, const TimeGrid& grid);

// Window thresholds for decay fits. The window is the largest contiguous
// sample range with abs2_lo <= |A|^2 <= abs2_hi and t <= recurrence_guard;
// it must contain at least min_points samples.
struct FitOptions {
    double abs2_lo = 0.05;
    double abs2_hi = 0.9;
    int min_points = 10;
    double recurrence_guard = std::numeric_limits<double>::infinity();
};

struct DecayFit {
    double m_eff = 0.0;      // minus the unwrapped-phase slope
    double gamma_rate = 0.0; // minus the log|A|^2 slope
    double t1 = 0.0;
    double t2 = 0.0;
    double r_squared = 0.0;  // of the log|A|^2 regression
    double recurrence_guard = 0.0;
};

// Exponential-window fit of a decay series. Throws FitError if the series
// is shorter than 20 samples, if no admissible window exists, or if the
// window shows growth instead of decay.
DecayFit fit_decay(const AmplitudeSeries& series, const FitOptions& options);

struct DilationRow {
    double p = 0.0;
    DecayFit fit;
    double gamma_m = 1.0;       // sqrt(p^2 + m_fit^2) / m_fit
    double ratio = 0.0;         // Gamma_p * gamma_m / Gamma_0
    double curve_max_dev = 0.0; // max_t | |A_p(t)|^2 - |A_0(t/gamma_m)|^2 |
};

struct DilationResult {
    DecayFit fit_rest;
    std::vector<DilationRow> rows;
};

// Survival fits at rest and at each momentum in p_list; the fit window
// guard comes from each momentum's own block. Fits below min_r_squared
// raise FitError (the dilation law is only meaningful for clean
// exponential windows).
DilationResult check_dilation(const Model& model, const std::vector<double>& p_list,
                              const TimeGrid& grid, const FitOptions& options,
                              double min_r_squared);

struct MomentPair {
    double avg_P = 0.0;
    double avg_E = 0.0;
    double ratio_abs = 0.0; // |avg_P| / avg_E
};

// Momentum and energy averages of the boosted detector state.
//   closed_form:    <phi0|(gamma P - gamma v H)|phi0>, <phi0|(gamma H - gamma v P)|phi0>
//   explicit_boost: <L phi0|P|L phi0>, <L phi0|H|L phi0> with L = exp(i beta N)
MomentPair boosted_moments(const Model& model, double v, BoostRoute route,
                           const HermitianOperator* boost_gen = nullptr);

struct MixtureResult {
    double p_mode = 0.0; // grid mode nearest gamma * v * m_a
    AmplitudeSeries fast;
    AmplitudeSeries slow;
    std::optional<DecayFit> fit_fast;
    std::optional<DecayFit> fit_slow;
    std::optional<double> rate_ratio; // Gamma_fast / Gamma_slow
};

// Two-component superposition: a boosted packet (fast component, amplitude
// weight_fast * V(v,t)) against the momentum eigenstate at the classical
// momentum gamma*v*m_a (slow component, weight_slow * A_p(t)). Components
// with zero weight are reported as zero series and skipped by the fits.
// Throws ConfigError unless weight_fast^2 + weight_slow^2 = 1 within 1e-12.
MixtureResult mixture_experiment(const Model& model, double v,
                                 std::pair<double, double> weights, double width,
                                 const TimeGrid& grid, const FitOptions& options);

// Weak-coupling decay rate of the resting unstable state: resonant mode k*
// solves omega_b(k) + omega_c(k) = m_a, and
//   Gamma = 2 pi |G(k*,-k*)|^2 * 2 / (dE/dk(k*) * dk)
// counting both intersections of the pair continuum. Returns 0 for g = 0;
// throws NumericError if the resonance lies outside the grid band.
double golden_rule_estimate(const ModelParams& params, const MomentumGrid& grid);

} // namespace leelab
