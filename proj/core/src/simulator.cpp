#include "pipeplan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include <json.hpp>

#include "pipeplan/errors.hpp"
#include "pipeplan/numfmt.hpp"

namespace pipeplan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One independent draw per (frame, stage, device position, phase) so the
// noise does not depend on event evaluation order.
double jitter_factor(const SimConfig& cfg, int frame, int stage, int device, int phase) {
    if (cfg.jitter_pct == 0) return 1.0;
    std::uint64_t h = cfg.seed;
    h = splitmix64(h ^ (0x1000000000000000ULL + static_cast<std::uint64_t>(frame)));
    h = splitmix64(h ^ (0x2000000000000000ULL + static_cast<std::uint64_t>(stage)));
    h = splitmix64(h ^ (0x3000000000000000ULL + static_cast<std::uint64_t>(device)));
    h = splitmix64(h ^ (0x4000000000000000ULL + static_cast<std::uint64_t>(phase)));
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return 1.0 + (2.0 * u - 1.0) * cfg.jitter_pct / 100.0;
}

enum Phase { kRecv = 0, kScatter = 1, kCompute = 2, kGather = 3 };

struct StageTiming {
    double master_transfer = 0;
    std::vector<double> t_comp;            // per device position
    std::vector<double> scatter, gather;   // per device position, [0] unused
};

} // namespace

std::map<std::string, std::pair<std::int64_t, std::int64_t>> estimate_memory(
    const StageConfig& stage, const ModelGraph& g, int bytes_per_element) {
    ShapeTable shapes = compute_full_shapes(g);
    std::int64_t model_bytes = 0;
    stage.segment.for_each([&](int v) {
        const LayerSpec& l = g.layer(v);
        if (l.is_conv())
            model_bytes += static_cast<std::int64_t>(bytes_per_element) *
                           (static_cast<std::int64_t>(l.kernel_h) * l.kernel_w * l.in_channels *
                                l.out_channels +
                            l.out_channels);
    });

    auto sinks = segment_sinks(stage.segment, g);
    int prim = primary_sink(stage.segment, g, shapes);
    const Region& prim_full = shapes.at(prim);
    std::vector<int> topo;
    {
        for (int v : topological_order(g))
            if (stage.segment.test(v)) topo.push_back(v);
    }

    std::map<std::string, std::pair<std::int64_t, std::int64_t>> out;
    for (std::size_t i = 0; i < stage.strips.size(); ++i) {
        std::map<int, Region> sink_rows;
        for (int t : sinks)
            sink_rows[t] = t == prim ? stage.strips[i]
                                     : map_strip_to_sink(prim_full, stage.strips[i],
                                                         shapes.at(t));
        RegionMap rm = propagate_required(stage.segment, g, shapes, sink_rows);
        std::map<int, Region> source_inputs;
        stage.segment.for_each([&](int v) {
            bool external = g.predecessors(v).empty();
            for (int p : g.predecessors(v))
                if (!stage.segment.test(p)) external = true;
            if (external) source_inputs[v] = rm.at(v).input;
        });
        RegionMap act = propagate_actual(stage.segment, g, shapes, source_inputs);

        // Live-set walk: external inputs are resident from the start, each
        // vertex allocates its output when computed, producers are freed once
        // every in-segment consumer has run, and sink outputs stay resident
        // for the gather.
        std::int64_t live = 0, peak = 0;
        std::map<int, std::int64_t> edge_buf;  // external edge key: consumer*1m + producer
        std::map<int, std::int64_t> out_buf;   // in-segment producer outputs
        std::map<int, int> pending;            // in-segment consumers left
        for (int v : topo) {
            const Region& need = rm.at(v).input;
            if (g.layer(v).kind != LayerKind::Input) {
                for (int p : g.predecessors(v)) {
                    if (stage.segment.test(p) || need.empty()) continue;
                    std::int64_t elems =
                        Region{shapes.at(p).channels, need.height_rows, need.width_cols,
                               need.row_offset}
                            .elements();
                    edge_buf[v * 1000000 + p] = elems;
                    live += elems;
                }
            }
            int consumers = 0;
            for (int u : g.successors(v))
                if (stage.segment.test(u)) ++consumers;
            pending[v] = consumers;
        }
        peak = live;
        for (int v : topo) {
            // the input pseudo layer's output is the received buffer itself
            std::int64_t elems = act.at(v).output.elements();
            out_buf[v] = elems;
            live += elems;
            peak = std::max(peak, live);
            for (int p : g.predecessors(v)) {
                if (stage.segment.test(p)) {
                    if (--pending[p] == 0) live -= out_buf[p];
                } else {
                    auto it = edge_buf.find(v * 1000000 + p);
                    if (it != edge_buf.end()) live -= it->second;
                }
            }
        }
        out[stage.device_names.at(i)] = {model_bytes,
                                         peak * static_cast<std::int64_t>(bytes_per_element)};
    }
    return out;
}

SimReport simulate(const PipelinePlan& plan, const ModelGraph& g, const Cluster& c,
                   const SimConfig& cfg) {
    if (plan.stages.empty()) throw ValidationError("plan has no stages");
    if (cfg.frames < 1) throw ValidationError("frames must be at least 1");
    if (cfg.jitter_pct < 0) throw ValidationError("jitter_pct must be non-negative");
    if (cfg.arrival_interval_s < 0)
        throw ValidationError("arrival interval must be non-negative");
    if (cfg.queue_capacity < 1)
        throw ValidationError("queue capacity 0 deadlocks the pipeline");
    std::set<std::string> known;
    for (const auto& d : c.devices) known.insert(d.name);
    for (const auto& s : plan.stages) {
        if (s.device_names.empty()) throw ValidationError("stage has no devices");
        for (const auto& n : s.device_names)
            if (!known.count(n))
                throw ValidationError("plan references unknown device '" + n + "'");
    }

    int S = static_cast<int>(plan.stages.size());
    int F = cfg.frames;
    double b = c.bandwidth_bytes_per_s;

    std::vector<StageTiming> timing(S);
    for (int k = 0; k < S; ++k) {
        const StageConfig& st = plan.stages[k];
        StageTiming& tm = timing[k];
        tm.master_transfer = st.cost.master_input_transfer_s;
        int m = static_cast<int>(st.device_names.size());
        tm.t_comp.resize(m);
        tm.scatter.assign(m, 0.0);
        tm.gather.assign(m, 0.0);
        for (int i = 0; i < m; ++i) {
            const std::string& name = st.device_names[i];
            tm.t_comp[i] = st.cost.t_comp_per_device.at(name);
            if (i > 0) {
                tm.scatter[i] = static_cast<double>(st.cost.bytes_in_per_device.at(name)) / b;
                tm.gather[i] = static_cast<double>(st.cost.bytes_out_per_device.at(name)) / b;
            }
        }
    }

    std::vector<std::vector<double>> start(F, std::vector<double>(S, 0.0));
    std::vector<std::vector<double>> placed(F, std::vector<double>(S, 0.0));
    std::vector<double> departure(F, 0.0);
    std::vector<double> frame_latency(F, 0.0);
    std::vector<std::vector<double>> free_at(F, std::vector<double>(S, 0.0));
    std::map<std::string, double> busy;
    SimReport rep;
    rep.frames = F;

    for (int f = 0; f < F; ++f) {
        for (int k = 0; k < S; ++k) {
            const StageTiming& tm = timing[k];
            int m = static_cast<int>(tm.t_comp.size());
            double avail = k == 0 ? cfg.arrival_interval_s * f : placed[f][k];
            double begin = avail;
            if (f > 0) begin = std::max(begin, free_at[f - 1][k]);
            double recv = jitter_factor(cfg, f, k, 0, kRecv) * tm.master_transfer;
            double scatter = 0, compute = 0, gather = 0;
            for (int i = 0; i < m; ++i) {
                double tc = jitter_factor(cfg, f, k, i, kCompute) * tm.t_comp[i];
                compute = std::max(compute, tc);
                busy[plan.stages[k].device_names[i]] += tc;
                if (i > 0) {
                    scatter += jitter_factor(cfg, f, k, i, kScatter) * tm.scatter[i];
                    gather += jitter_factor(cfg, f, k, i, kGather) * tm.gather[i];
                }
            }
            double service = recv + scatter + compute + gather;
            double done = begin + service;
            start[f][k] = begin;
            frame_latency[f] += service;
            if (k + 1 < S) {
                double q = done;
                if (f - cfg.queue_capacity >= 0)
                    q = std::max(q, start[f - cfg.queue_capacity][k + 1]);
                placed[f][k + 1] = q;
                free_at[f][k] = q;
            } else {
                departure[f] = done;
                free_at[f][k] = done;
            }
            if (cfg.record_timeline) {
                const std::string& master = plan.stages[k].device_names[0];
                rep.timeline.push_back({begin, "start", k, master, f});
                rep.timeline.push_back({done, "done", k, master, f});
            }
        }
    }

    int W = static_cast<int>(std::ceil(0.1 * F));
    rep.warmup_frames = W;
    double lat_sum = 0;
    int retained = 0;
    for (int f = W; f < F; ++f) {
        lat_sum += frame_latency[f];
        ++retained;
    }
    if (retained == 0) {
        for (int f = 0; f < F; ++f) lat_sum += frame_latency[f];
        retained = F;
    }
    rep.measured_latency_s = lat_sum / retained;
    if (F > W)
        rep.measured_period_s = (departure[F - 1] - departure[W - 1]) / (F - W);
    else
        rep.measured_period_s = rep.measured_latency_s;
    rep.throughput_fpm = rep.measured_period_s > 0 ? 60.0 / rep.measured_period_s : 0.0;

    ShapeTable shapes = compute_full_shapes(g);
    CostContext ctx{&g, &shapes, c.bandwidth_bytes_per_s, c.bytes_per_element};
    double makespan = departure[F - 1];
    for (int k = 0; k < S; ++k) {
        const StageConfig& st = plan.stages[k];
        double baseline = segment_baseline_flops(st.segment, ctx);
        const Region& full = shapes.at(primary_sink(st.segment, g, shapes));
        auto mem = estimate_memory(st, g, c.bytes_per_element);
        for (std::size_t i = 0; i < st.device_names.size(); ++i) {
            const std::string& name = st.device_names[i];
            DeviceReport dr;
            dr.device = name;
            dr.stage = k;
            dr.utilization_pct = makespan > 0 ? busy[name] / makespan * 100.0 : 0.0;
            double flops = st.cost.flops_per_device.at(name);
            double share = baseline * st.strips[i].height_rows / full.height_rows;
            dr.redundancy_pct = flops > 0 ? std::max(0.0, flops - share) / flops * 100.0 : 0.0;
            auto it = mem.find(name);
            dr.model_bytes = it->second.first;
            dr.feature_bytes = it->second.second;
            rep.per_device.push_back(std::move(dr));
        }
    }

    if (cfg.record_timeline)
        std::stable_sort(rep.timeline.begin(), rep.timeline.end(),
                         [](const TimelineEvent& a, const TimelineEvent& b) {
                             if (a.time_s != b.time_s) return a.time_s < b.time_s;
                             if (a.frame != b.frame) return a.frame < b.frame;
                             return a.stage < b.stage;
                         });
    return rep;
}

std::string write_sim_report_json(const SimReport& r) {
    nlohmann::ordered_json doc;
    doc["measured_period_s"] = quantize9(r.measured_period_s);
    doc["measured_latency_s"] = quantize9(r.measured_latency_s);
    doc["throughput_fpm"] = quantize9(r.throughput_fpm);
    doc["frames"] = r.frames;
    doc["warmup_frames"] = r.warmup_frames;
    doc["per_device"] = nlohmann::ordered_json::array();
    for (const auto& d : r.per_device) {
        nlohmann::ordered_json jd;
        jd["device"] = d.device;
        jd["stage"] = d.stage;
        jd["utilization_pct"] = quantize9(d.utilization_pct);
        jd["redundancy_pct"] = quantize9(d.redundancy_pct);
        jd["model_bytes"] = d.model_bytes;
        jd["feature_bytes"] = d.feature_bytes;
        doc["per_device"].push_back(std::move(jd));
    }
    if (!r.timeline.empty()) {
        doc["timeline"] = nlohmann::ordered_json::array();
        for (const auto& e : r.timeline) {
            nlohmann::ordered_json je;
            je["time_s"] = quantize9(e.time_s);
            je["event"] = e.event;
            je["stage"] = e.stage;
            je["device"] = e.device;
            je["frame"] = e.frame;
            doc["timeline"].push_back(std::move(je));
        }
    }
    return doc.dump(2) + "\n";
}

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

std::string write_sim_report_csv(const SimReport& r) {
    std::string out = "device,stage,utilization_pct,redundancy_pct,model_bytes,feature_bytes\n";
    for (const auto& d : r.per_device) {
        out += d.device + "," + std::to_string(d.stage) + "," + fmt9(d.utilization_pct) + "," +
               fmt9(d.redundancy_pct) + "," + std::to_string(d.model_bytes) + "," +
               std::to_string(d.feature_bytes) + "\n";
    }
    return out;
}

} // namespace pipeplan
