#include "pipeplan/cost_model.hpp"

#include <algorithm>
#include <set>

#include "pipeplan/errors.hpp"

namespace pipeplan {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

bool is_passthrough(const LayerSpec& l) { return !l.is_compute(); }

// Output rows in [lo, hi) whose kernel window [r*s-p, r*s-p+k) overlaps the
// real extent [0, ext); with heavy padding the edge rows read padding only and
// must not widen the hull. {-1, -1} when every window misses the input.
std::pair<int, int> rows_reading_input(int lo, int hi, int k, int s, int p, int ext) {
    int first = lo, last = hi - 1;
    if (p >= k) first = std::max(first, (p - k) / s + 1);
    last = std::min(last, (ext - 1 + p) / s);
    if (first > last) return {-1, -1};
    return {first, last};
}

// Hull of two row intervals (widths are left-aligned so the union is their max).
Region merge_demand(const Region& a, const Region& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    Region r = a;
    int lo = std::min(a.row_offset, b.row_offset);
    int hi = std::max(a.row_end(), b.row_end());
    r.row_offset = lo;
    r.height_rows = hi - lo;
    r.width_cols = std::max(a.width_cols, b.width_cols);
    return r;
}

Region intersect_rows(const Region& a, const Region& b) {
    if (a.empty() || b.empty()) return Region{a.channels, 0, 0, 0};
    int lo = std::max(a.row_offset, b.row_offset);
    int hi = std::min(a.row_end(), b.row_end());
    Region r = a;
    r.row_offset = hi > lo ? lo : 0;
    r.height_rows = hi > lo ? hi - lo : 0;
    r.width_cols = std::min(a.width_cols, b.width_cols);
    if (r.height_rows == 0) r.width_cols = 0;
    return r;
}

std::vector<int> segment_topo(const VertexSet& segment, const ModelGraph& g) {
    std::vector<int> order;
    for (int id : topological_order(g))
        if (segment.test(id)) order.push_back(id);
    return order;
}

} // namespace

ShapeTable compute_full_shapes(const ModelGraph& g) {
    ShapeTable shapes;
    for (int id : topological_order(g)) {
        const LayerSpec& l = g.layer(id);
        const auto& preds = g.predecessors(id);
        switch (l.kind) {
            case LayerKind::Input:
                shapes[id] = Region{g.input_shape().channels, g.input_shape().height,
                                    g.input_shape().width, 0};
                break;
            case LayerKind::Conv:
            case LayerKind::Pool: {
                const Region& in = shapes.at(preds[0]);
                if (l.is_conv() && l.in_channels != in.channels)
                    throw ValidationError("layer " + std::to_string(id) + " expects " +
                                          std::to_string(l.in_channels) + " input channels, producer has " +
                                          std::to_string(in.channels));
                int h = (in.height_rows + 2 * l.pad_h - l.kernel_h) / l.stride_h + 1;
                int w = (in.width_cols + 2 * l.pad_w - l.kernel_w) / l.stride_w + 1;
                if (in.height_rows + 2 * l.pad_h < l.kernel_h || in.width_cols + 2 * l.pad_w < l.kernel_w ||
                    h <= 0 || w <= 0)
                    throw ValidationError("layer " + std::to_string(id) + ": input too small for kernel");
                shapes[id] = Region{l.is_conv() ? l.out_channels : in.channels, h, w, 0};
                break;
            }
            case LayerKind::Add:
            case LayerKind::Output: {
                const Region& first = shapes.at(preds[0]);
                for (int p : preds)
                    if (!(shapes.at(p) == first))
                        throw ValidationError("layer " + std::to_string(id) +
                                              ": input shapes disagree");
                shapes[id] = first;
                break;
            }
            case LayerKind::Concat: {
                const Region& first = shapes.at(preds[0]);
                int channels = 0;
                for (int p : preds) {
                    const Region& r = shapes.at(p);
                    if (r.height_rows != first.height_rows || r.width_cols != first.width_cols)
                        throw ValidationError("layer " + std::to_string(id) +
                                              ": concat inputs must share height and width");
                    channels += r.channels;
                }
                shapes[id] = Region{channels, first.height_rows, first.width_cols, 0};
                break;
            }
        }
    }
    return shapes;
}

Region full_input_shape(const LayerSpec& l, const ModelGraph& g, const ShapeTable& shapes) {
    if (l.kind == LayerKind::Input) return shapes.at(l.id);
    const auto& preds = g.predecessors(l.id);
    const Region& base = shapes.at(preds[0]);
    int channels = base.channels;
    if (l.is_conv()) {
        channels = l.in_channels;
    } else if (!l.is_pool()) {
        channels = 0;
        for (int p : preds) channels += shapes.at(p).channels;
    }
    return Region{channels, base.height_rows, base.width_cols, 0};
}

Region required_input_region(const LayerSpec& l, const Region& out, const Region& full_in) {
    if (out.empty()) throw ValidationError("required_input_region: empty output region");
    if (is_passthrough(l)) return out;
    int channels = l.is_conv() ? l.in_channels : out.channels;
    auto [rlo, rhi] = rows_reading_input(out.row_offset, out.row_end(), l.kernel_h, l.stride_h,
                                         l.pad_h, full_in.height_rows);
    auto [clo, chi] = rows_reading_input(0, out.width_cols, l.kernel_w, l.stride_w, l.pad_w,
                                         full_in.width_cols);
    if (rlo < 0 || clo < 0) return Region{channels, 0, 0, 0};
    int lo = std::max(0, rlo * l.stride_h - l.pad_h);
    int hi = std::min(full_in.height_rows, rhi * l.stride_h - l.pad_h + l.kernel_h);
    int wlo = std::max(0, clo * l.stride_w - l.pad_w);
    int whi = std::min(full_in.width_cols, chi * l.stride_w - l.pad_w + l.kernel_w);
    return Region{channels, hi - lo, whi - wlo, lo};
}

Region forward_output_region(const LayerSpec& l, const Region& in, const Region& full_in,
                             const Region& full_out, bool clamp_padding) {
    if (in.empty()) throw ValidationError("forward_output_region: empty input region");
    if (is_passthrough(l)) return in;
    int off, ext, wext;
    if (!clamp_padding) {
        ext = (in.height_rows + 2 * l.pad_h - l.kernel_h) / l.stride_h + 1;
        if (in.height_rows + 2 * l.pad_h < l.kernel_h) ext = 0;
        off = in.row_offset == 0 ? 0 : ceil_div(in.row_offset + l.pad_h, l.stride_h);
        ext = std::min(ext, full_out.height_rows);
        off = std::max(0, std::min(off, full_out.height_rows - ext));
        wext = (in.width_cols + 2 * l.pad_w - l.kernel_w) / l.stride_w + 1;
        if (in.width_cols + 2 * l.pad_w < l.kernel_w) wext = 0;
        wext = std::min(wext, full_out.width_cols);
    } else {
        int jmin = in.row_offset == 0 ? 0 : ceil_div(in.row_offset + l.pad_h, l.stride_h);
        int jmax;
        if (in.row_end() == full_in.height_rows) {
            jmax = full_out.height_rows - 1;
        } else if (in.row_end() + l.pad_h < l.kernel_h) {
            jmax = -1;
        } else {
            jmax = std::min((in.row_end() + l.pad_h - l.kernel_h) / l.stride_h,
                            full_out.height_rows - 1);
        }
        off = jmin;
        ext = jmax - jmin + 1;
        int wmax;
        if (in.width_cols == full_in.width_cols) {
            wmax = full_out.width_cols - 1;
        } else if (in.width_cols + l.pad_w < l.kernel_w) {
            wmax = -1;
        } else {
            wmax = std::min((in.width_cols + l.pad_w - l.kernel_w) / l.stride_w,
                            full_out.width_cols - 1);
        }
        wext = wmax + 1;
    }
    if (ext <= 0 || wext <= 0)
        throw ValidationError("forward_output_region: input strip too small for kernel of layer " +
                              std::to_string(l.id));
    int channels = l.is_conv() ? l.out_channels : in.channels;
    return Region{channels, ext, wext, off};
}

RegionMap propagate_required(const VertexSet& segment, const ModelGraph& g,
                             const ShapeTable& shapes,
                             const std::map<int, Region>& sink_regions) {
    for (int t : segment_sinks(segment, g))
        if (!sink_regions.count(t))
            throw ValidationError("missing sink region for layer " + std::to_string(t));

    RegionMap rm;
    std::vector<int> order = segment_topo(segment, g);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int v = *it;
        const LayerSpec& l = g.layer(v);
        Region demand{shapes.at(v).channels, 0, 0, 0};
        if (auto s = sink_regions.find(v); s != sink_regions.end()) demand = merge_demand(demand, s->second);
        for (int u : g.successors(v))
            if (segment.test(u)) demand = merge_demand(demand, rm.at(u).input);
        demand.channels = shapes.at(v).channels;
        Region full_in = full_input_shape(l, g, shapes);
        Region in;
        if (demand.empty()) {
            in = Region{full_in.channels, 0, 0, 0};
        } else {
            in = required_input_region(l, demand, full_in);
            in.channels = full_in.channels;
        }
        rm[v] = LayerRegions{in, demand};
    }
    return rm;
}

RegionMap propagate_actual(const VertexSet& segment, const ModelGraph& g,
                           const ShapeTable& shapes,
                           const std::map<int, Region>& source_inputs,
                           bool clamp_padding) {
    RegionMap rm;
    for (int v : segment_topo(segment, g)) {
        const LayerSpec& l = g.layer(v);
        Region full_in = full_input_shape(l, g, shapes);
        bool have = false;
        Region avail;
        for (int p : g.predecessors(v)) {
            if (!segment.test(p)) continue;
            const Region& r = rm.at(p).output;
            avail = have ? intersect_rows(avail, r) : r;
            have = true;
        }
        if (auto s = source_inputs.find(v); s != source_inputs.end()) {
            avail = have ? intersect_rows(avail, s->second) : s->second;
            have = true;
        }
        if (!have)
            throw ValidationError("segment source layer " + std::to_string(v) +
                                  " has no input region");
        Region in{full_in.channels, avail.height_rows, avail.width_cols, avail.row_offset};
        Region out;
        if (in.empty()) {
            in = Region{full_in.channels, 0, 0, 0};
            out = Region{shapes.at(v).channels, 0, 0, 0};
        } else if (l.is_compute()) {
            out = forward_output_region(l, in, full_in, shapes.at(v), clamp_padding);
        } else {
            out = Region{shapes.at(v).channels, in.height_rows, in.width_cols, in.row_offset};
        }
        rm[v] = LayerRegions{in, out};
    }
    return rm;
}

double layer_flops(const LayerSpec& l, const Region& out) {
    if (!l.is_conv() || out.empty()) return 0.0;
    return static_cast<double>(l.kernel_h) * l.kernel_w * l.in_channels * l.out_channels *
           out.height_rows * out.width_cols;
}

double segment_flops(const VertexSet& segment, const ModelGraph& g, const RegionMap& rm) {
    double total = 0;
    segment.for_each([&](int v) { total += layer_flops(g.layer(v), rm.at(v).output); });
    return total;
}

bool Cluster::uniform() const {
    for (const auto& d : devices)
        if (d.capacity_flops != devices[0].capacity_flops || d.alpha != devices[0].alpha)
            return false;
    return true;
}

double compute_time(const DeviceSpec& d, double flops) {
    if (d.capacity_flops <= 0)
        throw ValidationError("device " + d.name + " has non-positive capacity");
    return d.alpha * flops / d.capacity_flops;
}

std::int64_t feature_bytes(const Region& r, int bytes_per_element) {
    return r.elements() * bytes_per_element;
}

double comm_time(std::int64_t bytes_in, std::int64_t bytes_out, double bandwidth_bytes_per_s) {
    if (bandwidth_bytes_per_s <= 0) throw ValidationError("bandwidth must be positive");
    return static_cast<double>(bytes_in + bytes_out) / bandwidth_bytes_per_s;
}

std::vector<int> segment_sinks(const VertexSet& segment, const ModelGraph& g) {
    std::vector<int> sinks;
    segment.for_each([&](int v) {
        for (int u : g.successors(v))
            if (segment.test(u)) return;
        sinks.push_back(v);
    });
    return sinks;
}

int primary_sink(const VertexSet& segment, const ModelGraph& g, const ShapeTable& shapes) {
    auto sinks = segment_sinks(segment, g);
    if (sinks.empty()) throw ValidationError("segment has no sinks");
    int best = sinks[0];
    for (int t : sinks)
        if (shapes.at(t).height_rows > shapes.at(best).height_rows) best = t;
    return best;
}

std::vector<Region> equal_strips(const Region& full, int m) {
    if (m < 1 || m > full.height_rows)
        throw ValidationError("cannot split " + std::to_string(full.height_rows) + " rows into " +
                              std::to_string(m) + " strips");
    std::vector<Region> strips;
    int base = full.height_rows / m, rem = full.height_rows % m, off = 0;
    for (int i = 0; i < m; ++i) {
        int rows = base + (i < rem ? 1 : 0);
        strips.push_back(Region{full.channels, rows, full.width_cols, off});
        off += rows;
    }
    return strips;
}

Region map_strip_to_sink(const Region& primary_full, const Region& primary_strip,
                         const Region& sink_full) {
    std::int64_t hp = primary_full.height_rows, ht = sink_full.height_rows;
    int start = static_cast<int>(primary_strip.row_offset * ht / hp);
    int end = static_cast<int>(static_cast<std::int64_t>(primary_strip.row_end()) * ht / hp);
    if (end <= start) return Region{sink_full.channels, 0, 0, 0};
    return Region{sink_full.channels, end - start, sink_full.width_cols, start};
}

StripProfile strip_profile(const VertexSet& segment, const CostContext& ctx,
                           const Region& primary_strip) {
    const ModelGraph& g = *ctx.g;
    const ShapeTable& shapes = *ctx.shapes;
    auto sinks = segment_sinks(segment, g);
    int prim = primary_sink(segment, g, shapes);
    const Region& prim_full = shapes.at(prim);

    std::map<int, Region> sink_rows;
    for (int t : sinks)
        sink_rows[t] = t == prim ? primary_strip
                                 : map_strip_to_sink(prim_full, primary_strip, shapes.at(t));

    RegionMap rm = propagate_required(segment, g, shapes, sink_rows);

    std::map<int, Region> source_inputs;
    segment.for_each([&](int v) {
        bool external = g.predecessors(v).empty();
        for (int p : g.predecessors(v))
            if (!segment.test(p)) external = true;
        if (external) source_inputs[v] = rm.at(v).input;
    });

    RegionMap act = propagate_actual(segment, g, shapes, source_inputs);

    StripProfile prof;
    prof.flops = segment_flops(segment, g, act);
    segment.for_each([&](int v) {
        const Region& need = rm.at(v).input;
        if (g.layer(v).kind == LayerKind::Input && !need.empty())
            prof.bytes_in += feature_bytes(
                Region{shapes.at(v).channels, need.height_rows, need.width_cols, need.row_offset},
                ctx.bytes_per_element);
        for (int p : g.predecessors(v)) {
            if (segment.test(p) || need.empty()) continue;
            prof.bytes_in += feature_bytes(
                Region{shapes.at(p).channels, need.height_rows, need.width_cols, need.row_offset},
                ctx.bytes_per_element);
        }
    });
    for (int t : sinks) prof.bytes_out += feature_bytes(sink_rows.at(t), ctx.bytes_per_element);
    return prof;
}

std::int64_t stage_input_bytes(const VertexSet& segment, const CostContext& ctx) {
    std::set<int> producers;
    segment.for_each([&](int v) {
        for (int p : ctx.g->predecessors(v))
            if (!segment.test(p)) producers.insert(p);
    });
    std::int64_t bytes = 0;
    for (int p : producers) bytes += feature_bytes(ctx.shapes->at(p), ctx.bytes_per_element);
    return bytes;
}

CostBreakdown combine_stage(const std::vector<DeviceSpec>& devices,
                            const std::vector<StripProfile>& profiles,
                            double bandwidth_bytes_per_s, double master_input_transfer_s,
                            double baseline_flops) {
    CostBreakdown cb;
    cb.master_input_transfer_s = master_input_transfer_s;
    for (std::size_t i = 0; i < devices.size(); ++i) {
        double tc = compute_time(devices[i], profiles[i].flops);
        double tm = i == 0 ? 0.0
                           : comm_time(profiles[i].bytes_in, profiles[i].bytes_out,
                                       bandwidth_bytes_per_s);
        cb.t_comp_per_device[devices[i].name] = tc;
        cb.t_comm_per_device[devices[i].name] = tm;
        cb.flops_per_device[devices[i].name] = profiles[i].flops;
        cb.bytes_in_per_device[devices[i].name] = profiles[i].bytes_in;
        cb.bytes_out_per_device[devices[i].name] = profiles[i].bytes_out;
        cb.stage_compute_s = std::max(cb.stage_compute_s, tc);
        cb.stage_comm_s += tm;
        cb.total_flops += profiles[i].flops;
    }
    cb.stage_comm_s += master_input_transfer_s;
    cb.stage_total_s = cb.stage_compute_s + cb.stage_comm_s;
    cb.redundant_flops = cb.total_flops - baseline_flops;
    return cb;
}

CostBreakdown stage_cost(const VertexSet& segment, const std::vector<DeviceSpec>& devices,
                         const std::vector<Region>& strips, const CostContext& ctx,
                         bool first_stage) {
    if (devices.empty() || devices.size() != strips.size())
        throw ValidationError("stage needs one strip per device");
    int prim = primary_sink(segment, *ctx.g, *ctx.shapes);
    const Region& full = ctx.shapes->at(prim);
    int expect = 0;
    for (const auto& s : strips) {
        if (s.row_offset != expect || s.height_rows < 1)
            throw ValidationError("strips do not tile the output height");
        expect = s.row_end();
    }
    if (expect != full.height_rows)
        throw ValidationError("strips do not tile the output height");

    std::vector<StripProfile> profiles;
    profiles.reserve(devices.size());
    for (const auto& s : strips) profiles.push_back(strip_profile(segment, ctx, s));
    double baseline = segment_baseline_flops(segment, ctx);
    double transfer = first_stage
                          ? 0.0
                          : static_cast<double>(stage_input_bytes(segment, ctx)) /
                                ctx.bandwidth_bytes_per_s;
    return combine_stage(devices, profiles, ctx.bandwidth_bytes_per_s, transfer, baseline);
}

double segment_baseline_flops(const VertexSet& segment, const CostContext& ctx) {
    int prim = primary_sink(segment, *ctx.g, *ctx.shapes);
    return strip_profile(segment, ctx, ctx.shapes->at(prim)).flops;
}

double piece_redundancy(const VertexSet& piece, const ModelGraph& g, const ShapeTable& shapes) {
    CostContext ctx{&g, &shapes, 1.0, 4};
    int prim = primary_sink(piece, g, shapes);
    const Region& full = shapes.at(prim);
    if (full.height_rows < 2) return 0.0;
    auto halves = equal_strips(full, 2);
    double split = strip_profile(piece, ctx, halves[0]).flops +
                   strip_profile(piece, ctx, halves[1]).flops;
    return split - segment_baseline_flops(piece, ctx);
}

} // namespace pipeplan
