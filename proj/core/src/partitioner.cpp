#include "pipeplan/partitioner.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "pipeplan/errors.hpp"
#include "pipeplan/log.hpp"
#include "pipeplan/numfmt.hpp"

namespace pipeplan {

namespace {

struct DpEntry {
    double objective = 0;
    int piece_count = 0;
    VertexSet best;
};

// Min-max chain decomposition of one universe; peels ending pieces off the back.
class ChainDp {
public:
    ChainDp(const ModelGraph& g, const ShapeTable& shapes, const DistanceMatrix& dist,
            int max_diameter, std::unordered_map<VertexSet, double, VertexSetHash>& cmemo)
        : g_(g), shapes_(shapes), dist_(dist), max_diameter_(max_diameter), cmemo_(cmemo) {}

    std::vector<VertexSet> run(const VertexSet& universe, const VertexSet& pinned) {
        universe_ = universe;
        pinned_ = pinned;
        memo_.clear();
        solve(universe);
        std::vector<VertexSet> chain;
        VertexSet r = universe;
        while (!r.empty()) {
            VertexSet m = memo_.at(r).best;
            chain.push_back(m);
            r -= m;
        }
        std::reverse(chain.begin(), chain.end());
        return chain;
    }

    const MemoStats& stats() const { return stats_; }

    double redundancy(const VertexSet& piece) {
        auto it = cmemo_.find(piece);
        if (it != cmemo_.end()) return it->second;
        double c = piece_redundancy(piece, g_, shapes_);
        cmemo_.emplace(piece, c);
        return c;
    }

private:
    const DpEntry& solve(const VertexSet& residual) {
        auto it = memo_.find(residual);
        if (it != memo_.end()) {
            ++stats_.hits;
            return it->second;
        }
        VertexSet forced;
        residual.for_each([&](int v) {
            for (int u : g_.successors(v))
                if (universe_.test(u) && !residual.test(u)) {
                    forced.set(v);
                    return;
                }
        });
        auto candidates =
            enumerate_ending_pieces(residual, g_, forced, max_diameter_, dist_, pinned_);
        DpEntry best;
        bool have = false;
        for (const auto& m : candidates) {
            double c = redundancy(m);
            VertexSet rest = residual;
            rest -= m;
            double obj = c;
            int count = 1;
            if (!rest.empty()) {
                const DpEntry& sub = solve(rest);
                obj = std::max(sub.objective, c);
                count = sub.piece_count + 1;
            }
            bool better =
                !have || obj < best.objective ||
                (obj == best.objective &&
                 (count > best.piece_count ||
                  (count == best.piece_count && VertexSetCanonicalLess{}(m, best.best))));
            if (better) {
                best = DpEntry{obj, count, m};
                have = true;
            }
        }
        ++stats_.entries;
        return memo_.emplace(residual, best).first->second;
    }

    const ModelGraph& g_;
    const ShapeTable& shapes_;
    const DistanceMatrix& dist_;
    int max_diameter_;
    std::unordered_map<VertexSet, double, VertexSetHash>& cmemo_;
    VertexSet universe_, pinned_;
    std::unordered_map<VertexSet, DpEntry, VertexSetHash> memo_;
    MemoStats stats_;
};

bool has_compute(const VertexSet& s, const ModelGraph& g) {
    bool found = false;
    s.for_each([&](int v) {
        if (g.layer(v).is_compute()) found = true;
    });
    return found;
}

// Merge pure-connector pieces into the next piece (the trailing one backward)
// so no piece carries zero work.
std::vector<VertexSet> glue_connectors(std::vector<VertexSet> chain, const ModelGraph& g) {
    std::vector<VertexSet> out;
    VertexSet pending;
    for (auto& s : chain) {
        if (!has_compute(s, g)) {
            pending |= s;
            continue;
        }
        s |= pending;
        pending = VertexSet{};
        out.push_back(s);
    }
    if (!pending.empty()) {
        if (out.empty())
            out.push_back(pending);
        else
            out.back() |= pending;
    }
    return out;
}

PartitionResult finalize(std::vector<VertexSet> chain, const ModelGraph& g,
                         const ShapeTable& shapes, ChainDp& dp, MemoStats stats) {
    chain = glue_connectors(std::move(chain), g);
    PartitionResult r;
    r.memo_stats = stats;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        Piece p;
        p.index = static_cast<int>(i);
        p.vertices = chain[i];
        p.redundancy_flops = dp.redundancy(chain[i]);
        std::set<int> producers;
        chain[i].for_each([&](int v) {
            for (int u : g.predecessors(v))
                if (!chain[i].test(u)) producers.insert(u);
        });
        for (int u : producers) p.interface_in.emplace_back(u, shapes.at(u));
        for (int t : segment_sinks(chain[i], g)) p.interface_out.emplace_back(t, shapes.at(t));
        r.objective = std::max(r.objective, p.redundancy_flops);
        r.pieces.push_back(std::move(p));
    }
    validate_piece_chain(r.pieces, g);
    return r;
}

} // namespace

PartitionResult partition(const ModelGraph& g, int max_diameter) {
    if (max_diameter < 0) throw ValidationError("max_diameter must be >= 0");
    ShapeTable shapes = compute_full_shapes(g);
    DistanceMatrix dist = undirected_distances(g);
    std::unordered_map<VertexSet, double, VertexSetHash> cmemo;
    ChainDp dp(g, shapes, dist, max_diameter, cmemo);
    auto chain = dp.run(g.all_vertices(), VertexSet{});
    return finalize(std::move(chain), g, shapes, dp, dp.stats());
}

PartitionResult partition_large(const ModelGraph& g, int chunk_layers, int margin_layers,
                                int max_diameter) {
    if (margin_layers < 0) throw ValidationError("margin_layers must be >= 0");
    if (chunk_layers <= 2 * margin_layers)
        throw ValidationError("chunk_layers must exceed twice margin_layers");
    if (max_diameter < 0) throw ValidationError("max_diameter must be >= 0");

    ShapeTable shapes = compute_full_shapes(g);
    DistanceMatrix dist = undirected_distances(g);
    std::unordered_map<VertexSet, double, VertexSetHash> cmemo;
    std::vector<int> topo = topological_order(g);

    VertexSet remaining = g.all_vertices();
    VertexSet pinned;
    std::vector<VertexSet> chain;
    MemoStats total;
    ChainDp dp(g, shapes, dist, max_diameter, cmemo);

    while (!remaining.empty()) {
        VertexSet chunk;
        int taken = 0;
        for (int id : topo) {
            if (!remaining.test(id)) continue;
            chunk.set(id);
            if (++taken == chunk_layers) break;
        }
        bool last_chunk = chunk == remaining;

        auto sub = dp.run(chunk, pinned);
        total.entries += dp.stats().entries;
        total.hits += dp.stats().hits;
        if (last_chunk) {
            chain.insert(chain.end(), sub.begin(), sub.end());
            break;
        }

        // vertices on the cut feed the rest of the graph; only pieces at least
        // margin_layers away from them are safe to commit
        std::deque<int> frontier;
        std::map<int, int> cut_dist;
        chunk.for_each([&](int v) {
            for (int u : g.successors(v))
                if (!chunk.test(u)) {
                    cut_dist[v] = 0;
                    frontier.push_back(v);
                    return;
                }
        });
        while (!frontier.empty()) {
            int v = frontier.front();
            frontier.pop_front();
            auto step = [&](int u) {
                if (chunk.test(u) && !cut_dist.count(u)) {
                    cut_dist[u] = cut_dist[v] + 1;
                    frontier.push_back(u);
                }
            };
            for (int u : g.successors(v)) step(u);
            for (int u : g.predecessors(v)) step(u);
        }

        std::size_t keep = 0;
        for (const auto& piece : sub) {
            bool safe = true;
            piece.for_each([&](int v) {
                auto it = cut_dist.find(v);
                if (it != cut_dist.end() && it->second < margin_layers) safe = false;
            });
            if (!safe) break;
            ++keep;
        }
        if (keep == 0)
            throw ValidationError("chunk too small to retain any piece; raise chunk_layers");

        for (std::size_t i = 0; i < keep; ++i) {
            chain.push_back(sub[i]);
            remaining -= sub[i];
        }
        pinned = VertexSet{};
        remaining.for_each([&](int v) {
            for (int u : g.predecessors(v))
                if (!remaining.test(u)) {
                    pinned.set(v);
                    return;
                }
        });
        log_debug("committed " + std::to_string(keep) + " pieces, " +
                  std::to_string(remaining.count()) + " vertices left");
    }
    return finalize(std::move(chain), g, shapes, dp, total);
}

void validate_piece_chain(const std::vector<Piece>& pieces, const ModelGraph& g) {
    if (pieces.empty()) throw ValidationError("piece chain is empty");
    std::map<int, int> owner;
    VertexSet all;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (pieces[i].index != static_cast<int>(i))
            throw ValidationError("piece indices must run 0..L-1 in order");
        if (pieces[i].vertices.empty()) throw ValidationError("piece " + std::to_string(i) + " is empty");
        if (all.intersects(pieces[i].vertices))
            throw ValidationError("pieces overlap at piece " + std::to_string(i));
        all |= pieces[i].vertices;
        pieces[i].vertices.for_each([&](int v) { owner[v] = static_cast<int>(i); });
    }
    if (!(all == g.all_vertices())) throw ValidationError("pieces do not cover the graph");
    for (auto [from, to] : g.edges())
        if (owner.at(from) > owner.at(to))
            throw ValidationError("edge " + std::to_string(from) + "->" + std::to_string(to) +
                                  " runs against the chain order");
}

std::string write_pieces(const PartitionResult& r, const std::string& model_ref,
                         int max_diameter) {
    nlohmann::ordered_json doc;
    doc["model"] = model_ref;
    doc["max_diameter"] = max_diameter;
    doc["pieces"] = nlohmann::ordered_json::array();
    for (const auto& p : r.pieces) {
        nlohmann::ordered_json jp;
        jp["index"] = p.index;
        jp["layer_ids"] = p.vertices.ids();
        jp["redundancy_flops"] = quantize9(p.redundancy_flops);
        doc["pieces"].push_back(jp);
    }
    return doc.dump(2) + "\n";
}

PieceFile parse_pieces(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("piece file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("piece file must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "model" && it.key() != "max_diameter" && it.key() != "pieces")
            throw ParseError("unknown field '" + it.key() + "' in piece file");
    PieceFile f;
    if (!doc.contains("model") || !doc.at("model").is_string())
        throw ParseError("piece file needs a string 'model'");
    f.model_ref = doc.at("model").get<std::string>();
    if (!doc.contains("max_diameter") || !doc.at("max_diameter").is_number_integer())
        throw ParseError("piece file needs an integer 'max_diameter'");
    f.max_diameter = doc.at("max_diameter").get<int>();
    if (!doc.contains("pieces") || !doc.at("pieces").is_array() || doc.at("pieces").empty())
        throw ParseError("piece file needs a non-empty 'pieces' array");
    int expect = 0;
    for (const auto& jp : doc.at("pieces")) {
        if (!jp.is_object()) throw ParseError("each piece must be an object");
        for (auto it = jp.begin(); it != jp.end(); ++it)
            if (it.key() != "index" && it.key() != "layer_ids" && it.key() != "redundancy_flops")
                throw ParseError("unknown field '" + it.key() + "' in piece");
        if (!jp.contains("index") || !jp.at("index").is_number_integer() ||
            jp.at("index").get<int>() != expect)
            throw ParseError("piece indices must run 0..L-1 in order");
        ++expect;
        if (!jp.contains("layer_ids") || !jp.at("layer_ids").is_array() || jp.at("layer_ids").empty())
            throw ParseError("each piece needs a non-empty 'layer_ids' array");
        std::vector<int> ids;
        for (const auto& v : jp.at("layer_ids")) {
            if (!v.is_number_integer()) throw ParseError("layer_ids must be integers");
            ids.push_back(v.get<int>());
        }
        if (!jp.contains("redundancy_flops") || !jp.at("redundancy_flops").is_number())
            throw ParseError("each piece needs a numeric 'redundancy_flops'");
        f.pieces.emplace_back(std::move(ids), jp.at("redundancy_flops").get<double>());
    }
    return f;
}

std::vector<Piece> rebuild_pieces(const PieceFile& f, const ModelGraph& g) {
    ShapeTable shapes = compute_full_shapes(g);
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i < f.pieces.size(); ++i) {
        Piece p;
        p.index = static_cast<int>(i);
        for (int id : f.pieces[i].first) {
            if (!g.has_layer(id))
                throw ValidationError("piece references unknown layer " + std::to_string(id));
            if (p.vertices.test(id))
                throw ValidationError("duplicate layer " + std::to_string(id) + " in piece " +
                                      std::to_string(i));
            p.vertices.set(id);
        }
        p.redundancy_flops = f.pieces[i].second;
        std::set<int> producers;
        p.vertices.for_each([&](int v) {
            for (int u : g.predecessors(v))
                if (!p.vertices.test(u)) producers.insert(u);
        });
        for (int u : producers) p.interface_in.emplace_back(u, shapes.at(u));
        for (int t : segment_sinks(p.vertices, g)) p.interface_out.emplace_back(t, shapes.at(t));
        pieces.push_back(std::move(p));
    }
    validate_piece_chain(pieces, g);
    return pieces;
}

} // namespace pipeplan
