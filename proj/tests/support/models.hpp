#ifndef PIPEPLAN_TESTS_MODELS_HPP
#define PIPEPLAN_TESTS_MODELS_HPP

#include <string>
#include <utility>
#include <vector>

#include "pipeplan/model_graph.hpp"

namespace pipeplan::testing {

// Chain of 1x1 convs on a one-row map: piece compute costs are exact seconds
// on a 1 GFLOP/s device and strips can never split, so planner and simulator
// arithmetic is bit-exact and hand-checkable.
inline ModelGraph seconds_chain(const std::vector<double>& gflops) {
    InputShape in{1000, 1, 1000};
    std::vector<LayerSpec> layers;
    std::vector<std::pair<int, int>> edges;
    LayerSpec input;
    input.id = 0;
    input.kind = LayerKind::Input;
    layers.push_back(input);
    int cin = 1000;
    for (std::size_t i = 0; i < gflops.size(); ++i) {
        // flops = cin * W * cout with W = 1000
        int cout = static_cast<int>(gflops[i] * 1e9 / (cin * 1000.0));
        LayerSpec l;
        l.id = static_cast<int>(i) + 1;
        l.kind = LayerKind::Conv;
        l.in_channels = cin;
        l.out_channels = cout;
        layers.push_back(l);
        edges.emplace_back(l.id - 1, l.id);
        cin = cout;
    }
    LayerSpec out;
    out.id = static_cast<int>(gflops.size()) + 1;
    out.kind = LayerKind::Output;
    layers.push_back(out);
    edges.emplace_back(out.id - 1, out.id);
    return ModelGraph::from_parts("seconds", in, std::move(layers), std::move(edges));
}

// Chain of identical pointwise convs on an 8-row map, so stages can hold
// multi-device strips and per-slot requirements tie exactly.
inline ModelGraph tall_chain(int n_convs) {
    InputShape in{8, 8, 64};
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
        l.in_channels = l.out_channels = 8;
        layers.push_back(l);
        edges.emplace_back(i - 1, i);
    }
    LayerSpec out;
    out.id = n_convs + 1;
    out.kind = LayerKind::Output;
    layers.push_back(out);
    edges.emplace_back(n_convs, n_convs + 1);
    return ModelGraph::from_parts("tallchain", in, std::move(layers), std::move(edges));
}

// Chain of two 3x3 convs on a 16-row map: split strips compute halo rows, so
// per-device redundancy is strictly positive.
inline ModelGraph halo_chain() {
    InputShape in{8, 16, 16};
    std::vector<LayerSpec> layers;
    std::vector<std::pair<int, int>> edges;
    LayerSpec input;
    input.id = 0;
    input.kind = LayerKind::Input;
    layers.push_back(input);
    for (int i = 1; i <= 2; ++i) {
        LayerSpec l;
        l.id = i;
        l.kind = LayerKind::Conv;
        l.kernel_h = l.kernel_w = 3;
        l.stride_h = l.stride_w = 1;
        l.pad_h = l.pad_w = 1;
        l.in_channels = l.out_channels = 8;
        layers.push_back(l);
        edges.emplace_back(i - 1, i);
    }
    LayerSpec out;
    out.id = 3;
    out.kind = LayerKind::Output;
    layers.push_back(out);
    edges.emplace_back(2, 3);
    return ModelGraph::from_parts("halochain", in, std::move(layers), std::move(edges));
}

// Two-layer 1x7 then 7x1 chain: each layer needs halo in exactly one axis, so
// splitting between them avoids almost all redundancy while fusing them pays
// a two-axis halo.
inline ModelGraph cross_kernel_model() {
    LayerSpec input;
    input.id = 0;
    input.kind = LayerKind::Input;
    LayerSpec a;
    a.id = 1;
    a.kind = LayerKind::Conv;
    a.kernel_h = 1;
    a.kernel_w = 7;
    a.stride_h = a.stride_w = 1;
    a.pad_h = 0;
    a.pad_w = 3;
    a.in_channels = a.out_channels = 4;
    LayerSpec b = a;
    b.id = 2;
    b.kernel_h = 7;
    b.kernel_w = 1;
    b.pad_h = 3;
    b.pad_w = 0;
    LayerSpec out;
    out.id = 3;
    out.kind = LayerKind::Output;
    return ModelGraph::from_parts("cross", {4, 33, 33}, {input, a, b, out},
                                  {{0, 1}, {1, 2}, {2, 3}});
}

} // namespace pipeplan::testing

#endif
