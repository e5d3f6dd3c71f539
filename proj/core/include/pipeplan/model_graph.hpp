#ifndef PIPEPLAN_MODEL_GRAPH_HPP
#define PIPEPLAN_MODEL_GRAPH_HPP

#include <climits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pipeplan/errors.hpp"
#include "pipeplan/vertex_set.hpp"

namespace pipeplan {

enum class LayerKind { Input, Conv, Pool, Add, Concat, Output };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
    int id = 0;
    LayerKind kind = LayerKind::Conv;
    // kernel/stride/padding are meaningful for conv and pool only;
    // connectors behave as identity (kernel 1, stride 1, padding 0).
    int kernel_h = 1, kernel_w = 1;
    int stride_h = 1, stride_w = 1;
    int pad_h = 0, pad_w = 0;
    int in_channels = 0, out_channels = 0; // conv only

    bool is_conv() const { return kind == LayerKind::Conv; }
    bool is_pool() const { return kind == LayerKind::Pool; }
    bool is_compute() const { return is_conv() || is_pool(); }
    bool is_connector() const { return kind == LayerKind::Add || kind == LayerKind::Concat; }
};

struct InputShape {
    int channels = 0;
    int height = 0;
    int width = 0;
};

// Immutable DAG of layers. Construction validates: unique non-negative ids,
// both edge endpoints exist, no duplicate edges, acyclic, exactly one source
// and it is the input pseudo layer, at least one sink, conv/pool in-degree 1,
// non-source in-degree >= 1, field/kind consistency.
class ModelGraph {
public:
    static ModelGraph from_parts(std::string name, InputShape input,
                                 std::vector<LayerSpec> layers,
                                 std::vector<std::pair<int, int>> edges);

    const std::string& name() const { return name_; }
    const InputShape& input_shape() const { return input_; }
    const std::vector<LayerSpec>& layers() const { return layers_; } // ascending id
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    bool has_layer(int id) const { return index_.count(id) > 0; }
    const LayerSpec& layer(int id) const;
    const std::vector<int>& successors(int id) const;
    const std::vector<int>& predecessors(int id) const;

    int layer_count() const { return static_cast<int>(layers_.size()); }
    int input_id() const { return input_id_; }
    std::vector<int> sink_ids() const; // no successors, ascending
    VertexSet all_vertices() const;

private:
    std::string name_;
    InputShape input_;
    std::vector<LayerSpec> layers_;
    std::vector<std::pair<int, int>> edges_;
    std::map<int, std::size_t> index_;
    std::map<int, std::vector<int>> succ_, pred_;
    int input_id_ = -1;
};

// JSON model file round trip.
ModelGraph parse_model(const std::string& json_text);
std::string write_model(const ModelGraph& g);

// Kahn's algorithm; ties broken by ascending layer id.
std::vector<int> topological_order(const ModelGraph& g);

// Size of the largest antichain of conv/pool layers under reachability,
// computed exactly as (#conv/pool) minus a maximum bipartite matching on the
// transitive closure (Dilworth).
int graph_width(const ModelGraph& g);

inline constexpr int kInfiniteDiameter = INT_MAX;

// Greatest pairwise shortest-path distance inside the subgraph induced by
// piece, edges taken as undirected. 0 for a singleton, kInfiniteDiameter if
// the induced subgraph is disconnected. Throws on an empty piece or on ids
// missing from g.
int piece_diameter(const VertexSet& piece, const ModelGraph& g);

// All-pairs undirected shortest-path distances over the whole graph.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    DistanceMatrix(std::vector<int> ids, std::vector<int> dist);
    // kInfiniteDiameter when unreachable
    int at(int u, int v) const;

private:
    std::map<int, int> index_;
    std::vector<int> dist_;
    std::size_t n_ = 0;
};

DistanceMatrix undirected_distances(const ModelGraph& g);

// Every ending piece of the residual view: a non-empty subset closed under
// successors inside the view, containing forced, avoiding pinned, whose
// vertices lie pairwise within max_diameter of each other measured in the
// full graph. The whole view is always yielded as a fallback even when it
// breaks the distance bound or touches pinned. Output is sorted canonically.
std::vector<VertexSet> enumerate_ending_pieces(const VertexSet& view, const ModelGraph& g,
                                               const VertexSet& forced, int max_diameter,
                                               const DistanceMatrix& dist,
                                               const VertexSet& pinned);

std::vector<VertexSet> enumerate_ending_pieces(const VertexSet& view, const ModelGraph& g,
                                               const VertexSet& forced, int max_diameter);

} // namespace pipeplan

#endif
