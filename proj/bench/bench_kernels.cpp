// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "phasetopo/config.hpp"
#include "phasetopo/verify.hpp"

using namespace phasetopo;

namespace {

struct Setup {
    Problem problem;
    PhaseField phi;
    Eigen::VectorXd u, p;
    std::vector<VoigtMatrix> tensors;

    explicit Setup(int level) : problem(build_problem(load_config("cantilever_3material"), level)) {
        phi = verify::random_interior_field(*problem.mesh, 3, 7);
        u = problem.cost->solve_state(phi);
        p = problem.cost->solve_adjoint(phi, u);
        tensors = problem.cost->cell_tensors(phi);
    }
};

Setup& setup(int level) {
    static std::map<int, std::unique_ptr<Setup>> cache;
    auto& s = cache[level];
    if (!s) s = std::make_unique<Setup>(level);
    return *s;
}

void assembly(benchmark::State& state, KernelMode mode) {
    Setup& s = setup(static_cast<int>(state.range(0)));
    const ElasticityAssembler assembler(*s.problem.mesh, true);
    for (auto _ : state) benchmark::DoNotOptimize(assembler.assemble(s.tensors, mode));
    state.counters["cells"] = s.problem.mesh->num_cells();
}

void sensitivity(benchmark::State& state, KernelMode mode) {
    Setup& s = setup(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(s.problem.cost->elastic_sensitivity(s.phi, s.u, s.p, mode));
    state.counters["nodes"] = s.problem.mesh->num_nodes();
}

void gradient(benchmark::State& state, KernelMode mode) {
    Setup& s = setup(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(s.problem.cost->gradient(s.phi, s.u, s.p, mode));
}

}  // namespace

BENCHMARK_CAPTURE(assembly, serial, KernelMode::Serial)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(assembly, parallel, KernelMode::Parallel)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(sensitivity, serial, KernelMode::Serial)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(sensitivity, parallel, KernelMode::Parallel)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(gradient, serial, KernelMode::Serial)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(gradient, parallel, KernelMode::Parallel)->DenseRange(5, 7)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
