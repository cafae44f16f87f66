#include <benchmark/benchmark.h>

#include "leelab/boost_algebra.hpp"
#include "leelab/evolution.hpp"

namespace {

using namespace leelab;

Model make_model(int n_modes) {
    return Model(ModelParams{}, n_modes, 0.25);
}

// Survival series of the rest state: one block spectral decomposition plus
// a 400-sample mode evaluation. This is the inner loop of every decay fit.
void BM_SurvivalSeries(benchmark::State& state) {
    const Model model = make_model(static_cast<int>(state.range(0)));
    const TimeGrid grid = TimeGrid::uniform(10.0, 400);
    for (auto _ : state) {
        AmplitudeSeries series = survival_A(model, 0.0, grid);
        benchmark::DoNotOptimize(series.values.data());
    }
}
BENCHMARK(BM_SurvivalSeries)->Arg(41)->Arg(81)->Unit(benchmark::kMillisecond);

// Closed-route boosted packet amplitude V(v, t): block-by-block spectral
// decompositions over every block the packet touches.
void BM_ClosedFormAmplitude(benchmark::State& state) {
    const Model model = make_model(static_cast<int>(state.range(0)));
    const TimeGrid grid = TimeGrid::uniform(10.0, 400);
    const double width = 4.0 * model.grid().dk;
    for (auto _ : state) {
        AmplitudeSeries series =
            amplitude_V(model, 0.5, width, grid, BoostRoute::closed_form);
        benchmark::DoNotOptimize(series.values.data());
    }
}
BENCHMARK(BM_ClosedFormAmplitude)->Arg(41)->Arg(81)->Unit(benchmark::kMillisecond);

// Evaluating a precomputed mode sum, isolating the per-sample cost from the
// spectral work.
void BM_ModeSumEval(benchmark::State& state) {
    const Model model = make_model(41);
    const StateVector phi0 = make_phi0(model.basis());
    const ModeSum modes =
        closed_form_modes(model, phi0.amplitudes, phi0.amplitudes, 0.0);
    const TimeGrid grid = TimeGrid::uniform(10.0, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        AmplitudeSeries series = evaluate_modes(modes, grid, "survival");
        benchmark::DoNotOptimize(series.values.data());
    }
}
BENCHMARK(BM_ModeSumEval)->Arg(400)->Arg(2000)->Unit(benchmark::kMicrosecond);

// Sparse operator assembly: basis enumeration, diagonals, interaction, and
// both boost stencil parts.
void BM_BuildOperators(benchmark::State& state) {
    const int n_modes = static_cast<int>(state.range(0));
    const ModelParams params;
    for (auto _ : state) {
        const SectorBasis basis = SectorBasis::enumerate(MomentumGrid::build(n_modes, 0.25));
        SparseOperatorSet ops = build_sparse_operator_set(basis, params);
        benchmark::DoNotOptimize(ops.h_int.nonZeros());
    }
}
BENCHMARK(BM_BuildOperators)->Arg(41)->Arg(81)->Unit(benchmark::kMillisecond);

// Whole-space commutator residual norms, computed column by column without
// materializing the O(n_modes^3) fill-in of the sparse products.
void BM_AlgebraResidualNorms(benchmark::State& state) {
    const int n_modes = static_cast<int>(state.range(0));
    const SectorBasis basis = SectorBasis::enumerate(MomentumGrid::build(n_modes, 0.25));
    const SparseOperatorSet ops = build_sparse_operator_set(basis, ModelParams{});
    const SparseMatrix n_full = ops.n0 + ops.n_int;
    for (auto _ : state) {
        AlgebraResiduals residuals = algebra_residuals_sparse(ops, n_full);
        benchmark::DoNotOptimize(residuals.r_NH);
    }
}
BENCHMARK(BM_AlgebraResidualNorms)->Arg(41)->Arg(81)->Arg(161)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
