#include "pipeplan/model_graph.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <set>

namespace pipeplan {

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Input: return "input";
        case LayerKind::Conv: return "conv";
        case LayerKind::Pool: return "pool";
        case LayerKind::Add: return "add";
        case LayerKind::Concat: return "concat";
        case LayerKind::Output: return "output";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "input") return LayerKind::Input;
    if (name == "conv") return LayerKind::Conv;
    if (name == "pool") return LayerKind::Pool;
    if (name == "add") return LayerKind::Add;
    if (name == "concat") return LayerKind::Concat;
    if (name == "output") return LayerKind::Output;
    throw ParseError("unknown layer type '" + name + "'");
}

ModelGraph ModelGraph::from_parts(std::string name, InputShape input,
                                  std::vector<LayerSpec> layers,
                                  std::vector<std::pair<int, int>> edges) {
    ModelGraph g;
    g.name_ = std::move(name);
    g.input_ = input;
    if (input.channels <= 0 || input.height <= 0 || input.width <= 0)
        throw ValidationError("model input shape must be positive");

    std::sort(layers.begin(), layers.end(),
              [](const LayerSpec& a, const LayerSpec& b) { return a.id < b.id; });
    for (const auto& l : layers) {
        if (l.id < 0) throw ValidationError("layer id must be non-negative");
        if (g.index_.count(l.id)) throw ValidationError("duplicate layer id " + std::to_string(l.id));
        if (l.is_compute()) {
            if (l.kernel_h < 1 || l.kernel_w < 1) throw ValidationError("kernel must be >= 1");
            if (l.stride_h < 1 || l.stride_w < 1) throw ValidationError("stride must be >= 1");
            if (l.pad_h < 0 || l.pad_w < 0) throw ValidationError("padding must be >= 0");
            if (l.is_pool() && (l.stride_h > l.kernel_h || l.stride_w > l.kernel_w))
                throw ValidationError("pool layer " + std::to_string(l.id) +
                                      " stride must not exceed kernel");
        }
        if (l.is_conv() && (l.in_channels < 1 || l.out_channels < 1))
            throw ValidationError("conv layer " + std::to_string(l.id) + " needs positive channel counts");
        g.index_[l.id] = g.layers_.size();
        g.layers_.push_back(l);
        g.succ_[l.id];
        g.pred_[l.id];
    }
    if (g.layers_.empty()) throw ValidationError("model has no layers");

    std::set<std::pair<int, int>> seen;
    for (auto [from, to] : edges) {
        if (!g.index_.count(from) || !g.index_.count(to))
            throw ValidationError("edge [" + std::to_string(from) + "," + std::to_string(to) +
                                  "] references a missing layer");
        if (from == to)
            throw ValidationError("self edge on layer " + std::to_string(from));
        if (!seen.insert({from, to}).second)
            throw ValidationError("duplicate edge [" + std::to_string(from) + "," + std::to_string(to) + "]");
        g.succ_[from].push_back(to);
        g.pred_[to].push_back(from);
    }
    g.edges_.assign(seen.begin(), seen.end());
    for (auto& [id, v] : g.succ_) std::sort(v.begin(), v.end());
    for (auto& [id, v] : g.pred_) std::sort(v.begin(), v.end());

    // exactly one source, and it must be the input pseudo layer
    for (const auto& l : g.layers_) {
        bool is_source = g.pred_.at(l.id).empty();
        if (l.kind == LayerKind::Input) {
            if (!is_source) throw ValidationError("input layer may not have incoming edges");
            if (g.input_id_ != -1) throw ValidationError("more than one input layer");
            g.input_id_ = l.id;
        } else if (is_source) {
            throw ValidationError("layer " + std::to_string(l.id) + " has no incoming edge");
        }
        if (l.kind == LayerKind::Output && !g.succ_.at(l.id).empty())
            throw ValidationError("output layer may not have outgoing edges");
        if (l.is_compute() && g.pred_.at(l.id).size() > 1)
            throw ValidationError("conv/pool layer " + std::to_string(l.id) + " must have exactly one input");
    }
    if (g.input_id_ == -1) throw ValidationError("model has no input layer");
    if (g.sink_ids().empty()) throw ValidationError("model has no sink layer");

    // acyclicity: Kahn over all vertices must consume the whole graph
    std::map<int, int> indeg;
    for (const auto& l : g.layers_) indeg[l.id] = static_cast<int>(g.pred_.at(l.id).size());
    std::deque<int> frontier;
    for (auto& [id, d] : indeg)
        if (d == 0) frontier.push_back(id);
    int consumed = 0;
    while (!frontier.empty()) {
        int id = frontier.front();
        frontier.pop_front();
        ++consumed;
        for (int t : g.succ_.at(id))
            if (--indeg[t] == 0) frontier.push_back(t);
    }
    if (consumed != g.layer_count()) throw ValidationError("model graph contains a cycle");
    return g;
}

const LayerSpec& ModelGraph::layer(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("unknown layer id " + std::to_string(id));
    return layers_[it->second];
}

const std::vector<int>& ModelGraph::successors(int id) const {
    auto it = succ_.find(id);
    if (it == succ_.end()) throw ValidationError("unknown layer id " + std::to_string(id));
    return it->second;
}

const std::vector<int>& ModelGraph::predecessors(int id) const {
    auto it = pred_.find(id);
    if (it == pred_.end()) throw ValidationError("unknown layer id " + std::to_string(id));
    return it->second;
}

std::vector<int> ModelGraph::sink_ids() const {
    std::vector<int> out;
    for (const auto& l : layers_)
        if (succ_.at(l.id).empty()) out.push_back(l.id);
    return out;
}

VertexSet ModelGraph::all_vertices() const {
    VertexSet s;
    for (const auto& l : layers_) s.set(l.id);
    return s;
}

std::vector<int> topological_order(const ModelGraph& g) {
    std::map<int, int> indeg;
    for (const auto& l : g.layers()) indeg[l.id] = static_cast<int>(g.predecessors(l.id).size());
    std::priority_queue<int, std::vector<int>, std::greater<int>> frontier;
    for (auto& [id, d] : indeg)
        if (d == 0) frontier.push(id);
    std::vector<int> order;
    order.reserve(indeg.size());
    while (!frontier.empty()) {
        int id = frontier.top();
        frontier.pop();
        order.push_back(id);
        for (int t : g.successors(id))
            if (--indeg[t] == 0) frontier.push(t);
    }
    return order;
}

namespace {

// augmenting path search for the chain-cover matching
bool try_augment(int u, const std::vector<std::vector<int>>& adj, std::vector<int>& match_right,
                 std::vector<char>& visited) {
    for (int v : adj[u]) {
        if (visited[v]) continue;
        visited[v] = 1;
        if (match_right[v] < 0 || try_augment(match_right[v], adj, match_right, visited)) {
            match_right[v] = u;
            return true;
        }
    }
    return false;
}

} // namespace

int graph_width(const ModelGraph& g) {
    std::vector<int> compute_ids;
    for (const auto& l : g.layers())
        if (l.is_compute()) compute_ids.push_back(l.id);
    int n = static_cast<int>(compute_ids.size());
    if (n == 0) return 0;

    // reachability over the whole graph, then restricted to conv/pool
    std::map<int, VertexSet> reach;
    auto order = topological_order(g);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        VertexSet r;
        for (int t : g.successors(*it)) {
            r.set(t);
            r |= reach[t];
        }
        reach[*it] = std::move(r);
    }

    std::map<int, int> pos;
    for (int i = 0; i < n; ++i) pos[compute_ids[i]] = i;
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i) {
        const VertexSet& r = reach[compute_ids[i]];
        for (int j = 0; j < n; ++j)
            if (i != j && r.test(compute_ids[j])) adj[i].push_back(j);
    }

    std::vector<int> match_right(n, -1);
    int matched = 0;
    for (int u = 0; u < n; ++u) {
        std::vector<char> visited(n, 0);
        if (try_augment(u, adj, match_right, visited)) ++matched;
    }
    return n - matched;
}

namespace {

std::vector<int> bfs_distances(int start, const std::map<int, std::vector<int>>& neighbors,
                               const std::map<int, int>& index) {
    std::vector<int> dist(index.size(), kInfiniteDiameter);
    std::deque<int> queue{start};
    dist[index.at(start)] = 0;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int v : neighbors.at(u)) {
            std::size_t vi = index.at(v);
            if (dist[vi] == kInfiniteDiameter) {
                dist[vi] = dist[index.at(u)] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

} // namespace

int piece_diameter(const VertexSet& piece, const ModelGraph& g) {
    if (piece.empty()) throw ValidationError("diameter of an empty piece");
    std::map<int, std::vector<int>> neighbors;
    std::map<int, int> index;
    piece.for_each([&](int id) {
        if (!g.has_layer(id)) throw ValidationError("piece references unknown layer " + std::to_string(id));
        index[id] = static_cast<int>(index.size());
        neighbors[id];
    });
    piece.for_each([&](int id) {
        for (int t : g.successors(id))
            if (piece.test(t)) {
                neighbors[id].push_back(t);
                neighbors[t].push_back(id);
            }
    });
    int diameter = 0;
    for (auto& [id, idx] : index) {
        auto dist = bfs_distances(id, neighbors, index);
        for (int d : dist) {
            if (d == kInfiniteDiameter) return kInfiniteDiameter;
            diameter = std::max(diameter, d);
        }
    }
    return diameter;
}

DistanceMatrix::DistanceMatrix(std::vector<int> ids, std::vector<int> dist)
    : dist_(std::move(dist)), n_(ids.size()) {
    for (std::size_t i = 0; i < ids.size(); ++i) index_[ids[i]] = static_cast<int>(i);
}

int DistanceMatrix::at(int u, int v) const {
    auto iu = index_.find(u), iv = index_.find(v);
    if (iu == index_.end() || iv == index_.end())
        throw ValidationError("distance query for unknown layer id");
    return dist_[static_cast<std::size_t>(iu->second) * n_ + static_cast<std::size_t>(iv->second)];
}

DistanceMatrix undirected_distances(const ModelGraph& g) {
    std::map<int, std::vector<int>> neighbors;
    std::map<int, int> index;
    std::vector<int> ids;
    for (const auto& l : g.layers()) {
        index[l.id] = static_cast<int>(ids.size());
        ids.push_back(l.id);
        neighbors[l.id];
    }
    for (auto [from, to] : g.edges()) {
        neighbors[from].push_back(to);
        neighbors[to].push_back(from);
    }
    std::size_t n = ids.size();
    std::vector<int> dist(n * n, kInfiniteDiameter);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = bfs_distances(ids[i], neighbors, index);
        std::copy(row.begin(), row.end(), dist.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return DistanceMatrix(std::move(ids), std::move(dist));
}

namespace {

struct EndingPieceEnumerator {
    const ModelGraph& g;
    const VertexSet& view;
    int max_diameter;
    const DistanceMatrix& dist;
    std::vector<VertexSet>* out;

    bool within_bound(const VertexSet& s, int v) const {
        bool ok = true;
        s.for_each([&](int u) {
            if (ok && dist.at(u, v) > max_diameter) ok = false;
        });
        return ok;
    }

    bool addable(const VertexSet& s, int v) const {
        for (int t : g.successors(v))
            if (view.test(t) && !s.test(t)) return false;
        return true;
    }

    void recurse(const VertexSet& s, const VertexSet& banned) {
        if (!s.empty()) out->push_back(s);
        std::vector<int> candidates;
        view.for_each([&](int v) {
            if (!s.test(v) && !banned.test(v) && addable(s, v)) candidates.push_back(v);
        });
        VertexSet blocked = banned;
        for (int v : candidates) {
            if (within_bound(s, v)) {
                VertexSet next = s;
                next.set(v);
                recurse(next, blocked);
            }
            blocked.set(v);
        }
    }
};

} // namespace

std::vector<VertexSet> enumerate_ending_pieces(const VertexSet& view, const ModelGraph& g,
                                               const VertexSet& forced, int max_diameter,
                                               const DistanceMatrix& dist,
                                               const VertexSet& pinned) {
    if (view.empty()) throw ValidationError("ending pieces of an empty view");
    if (!view.contains_all(forced)) throw ValidationError("forced set outside the view");
    if (max_diameter < 0) throw ValidationError("max_diameter must be >= 0");

    // forced vertices drag their whole successor closure along
    VertexSet seed = forced;
    bool grew = true;
    while (grew) {
        grew = false;
        VertexSet next = seed;
        seed.for_each([&](int v) {
            for (int t : g.successors(v))
                if (view.test(t) && !next.test(t)) {
                    next.set(t);
                    grew = true;
                }
        });
        seed = next;
    }

    std::vector<VertexSet> result;
    bool seed_ok = !seed.intersects(pinned);
    if (seed_ok) {
        auto seed_ids = seed.ids();
        for (std::size_t i = 0; i + 1 < seed_ids.size() && seed_ok; ++i)
            for (std::size_t j = i + 1; j < seed_ids.size(); ++j)
                if (dist.at(seed_ids[i], seed_ids[j]) > max_diameter) {
                    seed_ok = false;
                    break;
                }
    }
    if (seed_ok) {
        EndingPieceEnumerator e{g, view, max_diameter, dist, &result};
        e.recurse(seed, pinned);
    }

    bool has_full = false;
    for (const auto& s : result)
        if (s == view) {
            has_full = true;
            break;
        }
    if (!has_full) result.push_back(view);

    std::sort(result.begin(), result.end(), VertexSetCanonicalLess{});
    return result;
}

std::vector<VertexSet> enumerate_ending_pieces(const VertexSet& view, const ModelGraph& g,
                                               const VertexSet& forced, int max_diameter) {
    return enumerate_ending_pieces(view, g, forced, max_diameter, undirected_distances(g), VertexSet{});
}

} // namespace pipeplan
