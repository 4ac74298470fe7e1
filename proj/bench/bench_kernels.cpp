// Serial reference vs OpenMP kernels on the reference scenario.
//   bench_kernels --benchmark_filter=dose_matrix

#include <benchmark/benchmark.h>

#include <random>

#include "prosper/dose.hpp"
#include "prosper/kernels.hpp"
#include "prosper/scenario.hpp"

namespace {

using namespace prosper;

struct Fixture {
    TriMesh target;
    std::vector<Vec3> samples;
    std::vector<Seed> sources;
    std::vector<std::pair<Vec3, Vec3>> segments;
    std::vector<double> current;
    std::vector<std::uint32_t> active;
    kernels::DoseMatrix matrix;

    Fixture()
    {
        const Scenario s = load_scenario("reference");
        target = s.target();
        samples = interior_samples(target, 10000, 1);
        const auto box = target.bounds();
        const Vec3 lo = box.min(), hi = box.max();
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        auto in_box = [&] { return Vec3(lo.x() + u(rng) * (hi.x() - lo.x()), lo.y() + u(rng) * (hi.y() - lo.y()),
                                        lo.z() + u(rng) * (hi.z() - lo.z())); };
        for (int i = 0; i < 400; ++i) sources.push_back(Seed{in_box(), 0.5});
        for (int i = 0; i < 200; ++i) segments.emplace_back(in_box() - Vec3(0, 80, 0), in_box());
        matrix = kernels::serial::dose_matrix(sources, samples, DoseParams{});
        current.assign(samples.size(), 0.0);
        for (std::size_t c = 0; c < 30; ++c)
            for (std::size_t k = 0; k < samples.size(); ++k) current[k] += matrix.row(c * 13)[k];
        for (std::uint32_t k = 0; k < samples.size(); ++k)
            if (current[k] < 145.0) active.push_back(k);
    }
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

template <bool Parallel>
void dose_at_points(benchmark::State& state)
{
    const Fixture& f = fixture();
    const std::span<const Seed> seeds(f.sources.data(), 60);
    for (auto _ : state) {
        auto d = Parallel ? kernels::parallel::dose_at_points(f.samples, seeds, DoseParams{})
                          : kernels::serial::dose_at_points(f.samples, seeds, DoseParams{});
        benchmark::DoNotOptimize(d.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.samples.size() * seeds.size()));
}

template <bool Parallel>
void dose_matrix(benchmark::State& state)
{
    const Fixture& f = fixture();
    for (auto _ : state) {
        auto m = Parallel ? kernels::parallel::dose_matrix(f.sources, f.samples, DoseParams{})
                          : kernels::serial::dose_matrix(f.sources, f.samples, DoseParams{});
        benchmark::DoNotOptimize(m.values.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.samples.size() * f.sources.size()));
}

template <bool Parallel>
void candidate_gains(benchmark::State& state)
{
    const Fixture& f = fixture();
    for (auto _ : state) {
        auto g = Parallel ? kernels::parallel::candidate_gains(f.matrix, f.current, 145.0, f.active)
                          : kernels::serial::candidate_gains(f.matrix, f.current, 145.0, f.active);
        benchmark::DoNotOptimize(g.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.matrix.rows * f.active.size()));
}

template <bool Parallel>
void closest_points(benchmark::State& state)
{
    const Fixture& f = fixture();
    const std::span<const Vec3> queries(f.samples.data(), 2000);
    for (auto _ : state) {
        auto c = Parallel ? kernels::parallel::closest_points(queries, f.target)
                          : kernels::serial::closest_points(queries, f.target);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.size()));
}

template <bool Parallel>
void segment_clearance(benchmark::State& state)
{
    const Fixture& f = fixture();
    for (auto _ : state) {
        for (const auto& [a, b] : f.segments) {
            auto c = Parallel ? kernels::parallel::segment_clearance(a, b, f.target)
                              : kernels::serial::segment_clearance(a, b, f.target);
            benchmark::DoNotOptimize(c);
        }
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.segments.size()));
}

}  // namespace

BENCHMARK(dose_at_points<false>)->Name("dose_at_points/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(dose_at_points<true>)->Name("dose_at_points/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(dose_matrix<false>)->Name("dose_matrix/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(dose_matrix<true>)->Name("dose_matrix/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(candidate_gains<false>)->Name("candidate_gains/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(candidate_gains<true>)->Name("candidate_gains/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(closest_points<false>)->Name("closest_points/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(closest_points<true>)->Name("closest_points/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(segment_clearance<false>)->Name("segment_clearance/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(segment_clearance<true>)->Name("segment_clearance/parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
