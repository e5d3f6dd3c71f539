#ifndef PIPEPLAN_TESTS_RECEPTIVE_FIELD_HPP
#define PIPEPLAN_TESTS_RECEPTIVE_FIELD_HPP

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "pipeplan/cost_model.hpp"
#include "pipeplan/model_graph.hpp"
#include "pipeplan/vertex_set.hpp"

namespace pipeplan::testing {

// Brute-force one-layer receptive field: mark every input row any output row
// in [out_lo, out_hi) touches. Padding rows fall outside [0, in_extent) and
// are simply not marked.
inline std::vector<char> touched_input_rows(int kernel, int stride, int pad, int in_extent,
                                            int out_lo, int out_hi) {
    std::vector<char> marked(static_cast<std::size_t>(in_extent), 0);
    for (int r = out_lo; r < out_hi; ++r) {
        int first = r * stride - pad;
        for (int t = first; t < first + kernel; ++t)
            if (t >= 0 && t < in_extent) marked[static_cast<std::size_t>(t)] = 1;
    }
    return marked;
}

// Hull [first, last+1) of the marked rows; {0, 0} when none are marked.
inline std::pair<int, int> marked_hull(const std::vector<char>& marked) {
    int lo = -1, hi = -1;
    for (int i = 0; i < static_cast<int>(marked.size()); ++i)
        if (marked[static_cast<std::size_t>(i)]) {
            if (lo < 0) lo = i;
            hi = i;
        }
    if (lo < 0) return {0, 0};
    return {lo, hi + 1};
}

inline bool marks_contiguous(const std::vector<char>& marked) {
    auto [lo, hi] = marked_hull(marked);
    for (int i = lo; i < hi; ++i)
        if (!marked[static_cast<std::size_t>(i)]) return false;
    return true;
}

inline int marked_count(const std::vector<char>& marked) {
    return static_cast<int>(std::count(marked.begin(), marked.end(), char(1)));
}

// Reverse-propagate the demanded output rows of `sink` through the members of
// `scope` along one dimension, marking every row each layer touches on each
// producer's output map. Demand reaching a vertex outside `scope` is recorded
// on it but not pushed further, so the marks at a piece's external producers
// give the piece-local receptive field. `horizontal` selects the width axis.
inline std::map<int, std::vector<char>> touched_rows(const ModelGraph& g,
                                                     const ShapeTable& shapes,
                                                     const VertexSet& scope, int sink,
                                                     int out_lo, int out_hi, bool horizontal) {
    auto extent_of = [&](int id) {
        const Region& r = shapes.at(id);
        return horizontal ? r.width_cols : r.height_rows;
    };
    std::map<int, std::vector<char>> demand; // layer id -> marked output rows
    for (const LayerSpec& l : g.layers())
        demand[l.id].assign(static_cast<std::size_t>(extent_of(l.id)), 0);
    for (int r = out_lo; r < out_hi; ++r) demand[sink][static_cast<std::size_t>(r)] = 1;

    std::vector<int> order = topological_order(g);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (!scope.test(*it)) continue;
        const LayerSpec& l = g.layer(*it);
        const std::vector<char>& out = demand[l.id];
        int kernel = l.is_compute() ? (horizontal ? l.kernel_w : l.kernel_h) : 1;
        int stride = l.is_compute() ? (horizontal ? l.stride_w : l.stride_h) : 1;
        int pad = l.is_compute() ? (horizontal ? l.pad_w : l.pad_h) : 0;
        for (int u : g.predecessors(l.id)) {
            std::vector<char>& in = demand[u];
            int in_extent = static_cast<int>(in.size());
            for (int r = 0; r < static_cast<int>(out.size()); ++r) {
                if (!out[static_cast<std::size_t>(r)]) continue;
                int first = r * stride - pad;
                for (int t = first; t < first + kernel; ++t)
                    if (t >= 0 && t < in_extent) in[static_cast<std::size_t>(t)] = 1;
            }
        }
    }
    return demand;
}

// Receptive-field extent of one interior output pixel of `sink`, measured as
// the number of rows demanded on `source`'s output map.
inline int receptive_extent(const ModelGraph& g, const ShapeTable& shapes,
                            const VertexSet& scope, int sink, int source, bool horizontal) {
    const Region& out = shapes.at(sink);
    int mid = (horizontal ? out.width_cols : out.height_rows) / 2;
    auto demand = touched_rows(g, shapes, scope, sink, mid, mid + 1, horizontal);
    return marked_count(demand.at(source));
}

// Whole-model receptive field of `sink` on the model input map.
inline int model_receptive_extent(const ModelGraph& g, const ShapeTable& shapes, int sink,
                                  bool horizontal) {
    return receptive_extent(g, shapes, g.all_vertices(), sink, g.input_id(), horizontal);
}

} // namespace pipeplan::testing

#endif
