#ifndef PIPEPLAN_PARTITIONER_HPP
#define PIPEPLAN_PARTITIONER_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pipeplan/cost_model.hpp"
#include "pipeplan/model_graph.hpp"
#include "pipeplan/vertex_set.hpp"

namespace pipeplan {

struct Piece {
    int index = 0;
    VertexSet vertices;
    double redundancy_flops = 0;
    std::vector<std::pair<int, Region>> interface_in;   // external producer -> full map
    std::vector<std::pair<int, Region>> interface_out;  // segment sink -> full map
};

struct MemoStats {
    std::size_t entries = 0;
    std::size_t hits = 0;
};

struct PartitionResult {
    std::vector<Piece> pieces;
    double objective = 0;  // max piece redundancy
    MemoStats memo_stats;
};

// Chain decomposition minimizing the maximum per-piece redundancy.
PartitionResult partition(const ModelGraph& g, int max_diameter = 5);

// Chunked variant for graphs too large for one memo table: partition a
// topological prefix, commit pieces at least margin_layers away from the cut,
// recurse on the rest.
PartitionResult partition_large(const ModelGraph& g, int chunk_layers, int margin_layers,
                                int max_diameter = 5);

// Chain-structure check: every edge stays inside a piece or crosses forward.
void validate_piece_chain(const std::vector<Piece>& pieces, const ModelGraph& g);

struct PieceFile {
    std::string model_ref;
    int max_diameter = 0;
    std::vector<std::pair<std::vector<int>, double>> pieces;  // layer ids, redundancy
};

std::string write_pieces(const PartitionResult& r, const std::string& model_ref,
                         int max_diameter);
PieceFile parse_pieces(const std::string& json_text);

// Rebuild full Piece records (vertex sets, interfaces) from a parsed file.
std::vector<Piece> rebuild_pieces(const PieceFile& f, const ModelGraph& g);

} // namespace pipeplan

#endif
