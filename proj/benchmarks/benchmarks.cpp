#include <benchmark/benchmark.h>

#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pipeplan/cost_model.hpp"
#include "pipeplan/model_graph.hpp"
#include "pipeplan/partitioner.hpp"
#include "pipeplan/planner.hpp"
#include "pipeplan/simulator.hpp"

using namespace pipeplan;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ModelGraph load_model(const std::string& name) {
    return parse_model(slurp(std::string(PIPEPLAN_FIXTURE_DIR) + "/" + name));
}

Cluster uniform_cluster(int devices, double cap_flops = 2e9, double mbps = 400) {
    Cluster c;
    for (int i = 0; i < devices; ++i)
        c.devices.push_back({"dev" + std::to_string(i), cap_flops, 1.0});
    c.bandwidth_bytes_per_s = mbps * 125000.0;
    c.bytes_per_element = 4;
    return c;
}

// Pointwise conv chain with an n-piece singleton decomposition, for scaling
// the planner DP over the piece count.
ModelGraph conv_chain(int n_convs) {
    InputShape in{16, 32, 32};
    std::vector<LayerSpec> layers;
    std::vector<std::pair<int, int>> edges;
    LayerSpec input;
    input.id = 0;
    input.kind = LayerKind::Input;
    layers.push_back(input);
    for (int i = 1; i <= n_convs; ++i) {
        LayerSpec l;
        l.id = i;
        l.kind = LayerKind::Conv;
        l.kernel_h = l.kernel_w = 3;
        l.stride_h = l.stride_w = 1;
        l.pad_h = l.pad_w = 1;
        l.in_channels = l.out_channels = 16;
        layers.push_back(l);
        edges.emplace_back(i - 1, i);
    }
    LayerSpec out;
    out.id = n_convs + 1;
    out.kind = LayerKind::Output;
    layers.push_back(out);
    edges.emplace_back(n_convs, n_convs + 1);
    return ModelGraph::from_parts("chain", in, std::move(layers), std::move(edges));
}

void bench_partition(benchmark::State& state, const char* fixture) {
    ModelGraph g = load_model(fixture);
    for (auto _ : state) {
        PartitionResult r = partition(g, 5);
        benchmark::DoNotOptimize(r);
    }
}

} // namespace

BENCHMARK_CAPTURE(bench_partition, vgg16, "vgg16.json")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_partition, yolov2, "yolov2.json")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_partition, inception_c, "inception_c.json")
    ->Unit(benchmark::kMillisecond);

static void bench_plan_devices(benchmark::State& state) {
    ModelGraph g = load_model("vgg16.json");
    std::vector<Piece> pieces = partition(g, 5).pieces;
    Cluster c = uniform_cluster(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        PipelinePlan p = plan(pieces, g, c, kInf);
        benchmark::DoNotOptimize(p);
    }
}
BENCHMARK(bench_plan_devices)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

static void bench_plan_pieces(benchmark::State& state) {
    ModelGraph g = conv_chain(static_cast<int>(state.range(0)));
    std::vector<Piece> pieces = partition(g, 5).pieces;
    Cluster c = uniform_cluster(4);
    for (auto _ : state) {
        PipelinePlan p = plan_homogeneous(pieces, g, c, kInf);
        benchmark::DoNotOptimize(p);
    }
}
BENCHMARK(bench_plan_pieces)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void bench_simulate_frames(benchmark::State& state) {
    ModelGraph g = load_model("vgg16.json");
    Cluster c = uniform_cluster(4);
    PipelinePlan p = plan(partition(g, 5).pieces, g, c, kInf);
    SimConfig cfg;
    cfg.frames = static_cast<int>(state.range(0));
    cfg.jitter_pct = 5.0;
    cfg.seed = 1;
    for (auto _ : state) {
        SimReport rep = simulate(p, g, c, cfg);
        benchmark::DoNotOptimize(rep);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bench_simulate_frames)->Arg(100)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
