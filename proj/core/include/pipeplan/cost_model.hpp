#ifndef PIPEPLAN_COST_MODEL_HPP
#define PIPEPLAN_COST_MODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pipeplan/model_graph.hpp"
#include "pipeplan/vertex_set.hpp"

namespace pipeplan {

// A horizontal strip of a feature map: full width, a contiguous row interval.
// height_rows == 0 means the region is empty.
struct Region {
    int channels = 0;
    int height_rows = 0;
    int width_cols = 0;
    int row_offset = 0;

    bool empty() const { return height_rows == 0; }
    int row_end() const { return row_offset + height_rows; }
    std::int64_t elements() const {
        return empty() ? 0
                       : static_cast<std::int64_t>(channels) * height_rows * width_cols;
    }
    bool operator==(const Region&) const = default;
};

struct LayerRegions {
    Region input;  // rows of the layer's input map(s); channels summed over inputs
    Region output;
};
using RegionMap = std::map<int, LayerRegions>;

// Full (unpartitioned) output map of every layer, keyed by layer id.
using ShapeTable = std::map<int, Region>;

ShapeTable compute_full_shapes(const ModelGraph& g);

// Full input map a layer reads from (channels summed over producers for connectors).
Region full_input_shape(const LayerSpec& l, const ModelGraph& g, const ShapeTable& shapes);

// Input rows a layer must read to produce `out`, clamped to the full input map.
Region required_input_region(const LayerSpec& l, const Region& out, const Region& full_in);

// Output rows computable from input strip `in`. With clamp_padding, zero padding
// counts only at true map borders the strip touches; otherwise the full padding
// is applied and the result is clamped to fit inside the full output map.
Region forward_output_region(const LayerSpec& l, const Region& in, const Region& full_in,
                             const Region& full_out, bool clamp_padding = false);

// Top-down demand propagation: each segment sink demands sink_regions rows.
RegionMap propagate_required(const VertexSet& segment, const ModelGraph& g,
                             const ShapeTable& shapes,
                             const std::map<int, Region>& sink_regions);

// Bottom-up forward pass from the rows available at each segment source.
RegionMap propagate_actual(const VertexSet& segment, const ModelGraph& g,
                           const ShapeTable& shapes,
                           const std::map<int, Region>& source_inputs,
                           bool clamp_padding = false);

double layer_flops(const LayerSpec& l, const Region& out);
double segment_flops(const VertexSet& segment, const ModelGraph& g, const RegionMap& rm);

struct DeviceSpec {
    std::string name;
    double capacity_flops = 0;  // FLOP/s
    double alpha = 1.0;         // regression coefficient on compute time
};

struct Cluster {
    std::vector<DeviceSpec> devices;
    double bandwidth_bytes_per_s = 0;
    int bytes_per_element = 4;

    bool uniform() const;
};

Cluster parse_cluster(const std::string& json_text);
std::string write_cluster(const Cluster& c);

double compute_time(const DeviceSpec& d, double flops);
std::int64_t feature_bytes(const Region& r, int bytes_per_element = 4);
double comm_time(std::int64_t bytes_in, std::int64_t bytes_out, double bandwidth_bytes_per_s);

struct CostBreakdown {
    std::map<std::string, double> t_comp_per_device;
    std::map<std::string, double> t_comm_per_device;
    std::map<std::string, double> flops_per_device;
    std::map<std::string, std::int64_t> bytes_in_per_device;
    std::map<std::string, std::int64_t> bytes_out_per_device;
    double master_input_transfer_s = 0;
    double stage_compute_s = 0;
    double stage_comm_s = 0;
    double stage_total_s = 0;
    double redundant_flops = 0;
    double total_flops = 0;
};

// Sinks of a segment: members whose successors all lie outside the segment.
std::vector<int> segment_sinks(const VertexSet& segment, const ModelGraph& g);

// The sink whose full map is tallest (ties: lowest id); strips are defined on it.
int primary_sink(const VertexSet& segment, const ModelGraph& g, const ShapeTable& shapes);

// Split height into m strips, earlier strips one row taller when it does not divide.
std::vector<Region> equal_strips(const Region& full, int m);

// Map a primary-sink strip onto another sink of the same segment, proportionally.
Region map_strip_to_sink(const Region& primary_full, const Region& primary_strip,
                         const Region& sink_full);

struct CostContext {
    const ModelGraph* g = nullptr;
    const ShapeTable* shapes = nullptr;
    double bandwidth_bytes_per_s = 0;
    int bytes_per_element = 4;
};

// Work one device performs for its strip of the segment's primary sink.
struct StripProfile {
    double flops = 0;
    std::int64_t bytes_in = 0;   // external rows it must receive
    std::int64_t bytes_out = 0;  // owned sink rows it must hand back
};

StripProfile strip_profile(const VertexSet& segment, const CostContext& ctx,
                           const Region& primary_strip);

// Bytes of every distinct external producer's full output map (the stage input).
std::int64_t stage_input_bytes(const VertexSet& segment, const CostContext& ctx);

CostBreakdown combine_stage(const std::vector<DeviceSpec>& devices,
                            const std::vector<StripProfile>& profiles,
                            double bandwidth_bytes_per_s, double master_input_transfer_s,
                            double baseline_flops);

// devices[0] is the stage master; strips[i] is device i's owned primary-sink rows.
CostBreakdown stage_cost(const VertexSet& segment, const std::vector<DeviceSpec>& devices,
                         const std::vector<Region>& strips, const CostContext& ctx,
                         bool first_stage);

// Single-device whole-map FLOPs of the segment (the no-partition baseline).
double segment_baseline_flops(const VertexSet& segment, const CostContext& ctx);

// Extra FLOPs a canonical 2-way equal split of every sink costs over no split.
double piece_redundancy(const VertexSet& piece, const ModelGraph& g, const ShapeTable& shapes);

} // namespace pipeplan

#endif
