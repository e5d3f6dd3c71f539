#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pipeplan/cost_model.hpp"
#include "pipeplan/errors.hpp"
#include "pipeplan/model_graph.hpp"
#include "pipeplan/partitioner.hpp"
#include "pipeplan/planner.hpp"
#include "pipeplan/simulator.hpp"
#include "support/io.hpp"
#include "support/models.hpp"
#include "support/oracles.hpp"

using namespace pipeplan;
using namespace pipeplan::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Two stages of two device slots each on a heterogeneous {4,4,1,1} cluster;
// exercises the master scatter/gather path and unequal strips.
struct SplitScenario {
    ModelGraph g;
    Cluster cluster;
    std::vector<Piece> pieces;
    PipelinePlan plan;
};

SplitScenario make_split_scenario() {
    SplitScenario s{tall_chain(2), make_cluster({4e9, 4e9, 1e9, 1e9}, 400), {}, {}};
    s.pieces = singleton_pieces(s.g);
    Cluster avg = averaged_cluster(s.cluster);
    ShapeTable shapes = compute_full_shapes(s.g);
    UniformStageEval eval(s.pieces, s.g, shapes, avg);
    PipelinePlan plan_h = assemble_uniform_plan({{0, 0}, {1, 1}}, {2, 2}, eval, kInf);
    s.plan = adapt_heterogeneous(plan_h, s.pieces, s.g, s.cluster);
    return s;
}

PipelinePlan plan_fixture(const ModelGraph& g, const Cluster& c) {
    return plan(partition(g).pieces, g, c, kInf);
}

// Test-side replay of the frame recurrence, rebuilt from nothing but the plan
// cost tables. Every arithmetic expression matches the engine's evaluation
// order, so agreement is checked bitwise.
struct Replay {
    std::vector<std::vector<double>> start, done;
    std::vector<double> departure;
    double period = 0, latency = 0;
    int warmup = 0;
    std::map<std::string, double> util;
};

Replay replay_plan(const PipelinePlan& plan, const Cluster& c, const SimConfig& cfg) {
    int S = static_cast<int>(plan.stages.size());
    int F = cfg.frames;
    double b = c.bandwidth_bytes_per_s;
    Replay r;
    r.start.assign(F, std::vector<double>(S, 0.0));
    r.done.assign(F, std::vector<double>(S, 0.0));
    r.departure.assign(F, 0.0);
    std::vector<std::vector<double>> placed(F, std::vector<double>(S, 0.0));
    std::vector<std::vector<double>> free_at(F, std::vector<double>(S, 0.0));
    std::vector<double> frame_latency(F, 0.0);
    std::map<std::string, double> busy;

    for (int f = 0; f < F; ++f) {
        for (int k = 0; k < S; ++k) {
            const StageConfig& st = plan.stages[k];
            int m = static_cast<int>(st.device_names.size());
            double avail = k == 0 ? cfg.arrival_interval_s * f : placed[f][k];
            double begin = avail;
            if (f > 0) begin = std::max(begin, free_at[f - 1][k]);
            double recv = st.cost.master_input_transfer_s;
            double scatter = 0, compute = 0, gather = 0;
            for (int i = 0; i < m; ++i) {
                const std::string& name = st.device_names[i];
                double tc = st.cost.t_comp_per_device.at(name);
                compute = std::max(compute, tc);
                busy[name] += tc;
                if (i > 0) {
                    scatter += static_cast<double>(st.cost.bytes_in_per_device.at(name)) / b;
                    gather += static_cast<double>(st.cost.bytes_out_per_device.at(name)) / b;
                }
            }
            double service = recv + scatter + compute + gather;
            double done = begin + service;
            r.start[f][k] = begin;
            r.done[f][k] = done;
            frame_latency[f] += service;
            if (k + 1 < S) {
                double q = done;
                if (f - cfg.queue_capacity >= 0)
                    q = std::max(q, r.start[f - cfg.queue_capacity][k + 1]);
                placed[f][k + 1] = q;
                free_at[f][k] = q;
            } else {
                r.departure[f] = done;
                free_at[f][k] = done;
            }
        }
    }

    int W = static_cast<int>(std::ceil(0.1 * F));
    r.warmup = W;
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
    r.latency = lat_sum / retained;
    r.period = F > W ? (r.departure[F - 1] - r.departure[W - 1]) / (F - W) : r.latency;
    double makespan = r.departure[F - 1];
    for (const auto& [name, t] : busy) r.util[name] = makespan > 0 ? t / makespan * 100.0 : 0.0;
    return r;
}

struct FrameStageTimes {
    double start = -1, done = -1;
};

// Indexes the timeline and checks its structural guarantees: two events per
// (frame, stage) attributed to the stage master, sorted by time.
std::map<std::pair<int, int>, FrameStageTimes> index_timeline(const SimReport& rep,
                                                              const PipelinePlan& plan) {
    REQUIRE(rep.timeline.size() ==
            2u * static_cast<std::size_t>(rep.frames) * plan.stages.size());
    std::map<std::pair<int, int>, FrameStageTimes> by_frame_stage;
    double prev = -kInf;
    for (const auto& e : rep.timeline) {
        CHECK(e.time_s >= prev);
        prev = e.time_s;
        REQUIRE(e.stage >= 0);
        REQUIRE(e.stage < static_cast<int>(plan.stages.size()));
        CHECK(e.device == plan.stages[e.stage].device_names[0]);
        auto& slot = by_frame_stage[{e.frame, e.stage}];
        if (e.event == "start") {
            CHECK(slot.start == -1);
            slot.start = e.time_s;
        } else {
            REQUIRE(e.event == "done");
            CHECK(slot.done == -1);
            slot.done = e.time_s;
        }
    }
    // Causality: a frame finishes a stage before starting the next, and stage
    // starts never run backwards across frames.
    for (const auto& [key, t] : by_frame_stage) {
        auto [f, k] = key;
        CHECK(t.start <= t.done);
        if (k > 0) CHECK(by_frame_stage.at({f, k - 1}).done <= t.start);
        if (f > 0) CHECK(by_frame_stage.at({f - 1, k}).start <= t.start);
    }
    return by_frame_stage;
}

} // namespace

TEST_CASE("zero jitter reproduces the predicted period and latency") {
    SimConfig cfg;
    cfg.frames = 50;

    SUBCASE("vgg16 on four uniform devices") {
        ModelGraph g = parse_model(slurp(fixture_path("vgg16.json")));
        Cluster c = parse_cluster(slurp(fixture_path("cluster_uniform4.json")));
        PipelinePlan p = plan_fixture(g, c);
        SimReport rep = simulate(p, g, c, cfg);
        CHECK(rel_diff(rep.measured_period_s, p.predicted_period_s) <= 1e-9);
        CHECK(rel_diff(rep.measured_latency_s, p.predicted_latency_s) <= 1e-9);
    }

    SUBCASE("heterogeneous chain") {
        ModelGraph g = tall_chain(3);
        Cluster c = make_cluster({2.2e9, 1.2e9, 0.8e9}, 100);
        PipelinePlan p = plan_fixture(g, c);
        SimReport rep = simulate(p, g, c, cfg);
        CHECK(rel_diff(rep.measured_period_s, p.predicted_period_s) <= 1e-9);
        CHECK(rel_diff(rep.measured_latency_s, p.predicted_latency_s) <= 1e-9);
    }

    SUBCASE("stages with scattered strips") {
        SplitScenario s = make_split_scenario();
        REQUIRE(s.plan.stages.size() == 2);
        REQUIRE(s.plan.stages[0].device_names.size() == 2);
        SimReport rep = simulate(s.plan, s.g, s.cluster, cfg);
        CHECK(rel_diff(rep.measured_period_s, s.plan.predicted_period_s) <= 1e-9);
        CHECK(rel_diff(rep.measured_latency_s, s.plan.predicted_latency_s) <= 1e-9);
    }
}

TEST_CASE("a single device pipeline runs back to back at full utilization") {
    ModelGraph g = seconds_chain({2.0});
    Cluster c = make_cluster({1e9}, 1e21);
    PipelinePlan p = plan_fixture(g, c);
    REQUIRE(p.stages.size() == 1);
    SimConfig cfg;
    cfg.frames = 10;
    SimReport rep = simulate(p, g, c, cfg);
    CHECK(rep.measured_latency_s == 2.0);
    CHECK(rep.measured_period_s == 2.0);
    CHECK(rep.throughput_fpm == 30.0);
    CHECK(rep.frames == 10);
    CHECK(rep.warmup_frames == 1);
    REQUIRE(rep.per_device.size() == 1);
    CHECK(rep.per_device[0].stage == 0);
    CHECK(rep.per_device[0].utilization_pct == 100.0);
    CHECK(rep.per_device[0].redundancy_pct <= 1e-9);
}

TEST_CASE("a downstream stage with slack idles between frames") {
    // Stage services 2s then 1s: departures pace at 2s, the second device
    // works 10s out of the 21s makespan.
    ModelGraph g = seconds_chain({2.0, 1.0});
    Cluster c = make_cluster({1e9, 1e9}, 1e21);
    PipelinePlan p = plan_fixture(g, c);
    REQUIRE(p.stages.size() == 2);
    SimConfig cfg;
    cfg.frames = 10;
    SimReport rep = simulate(p, g, c, cfg);
    CHECK(rep.measured_period_s == 2.0);
    CHECK(rep.measured_latency_s == 3.0);
    REQUIRE(rep.per_device.size() == 2);
    CHECK(rep.per_device[0].utilization_pct == 20.0 / 21.0 * 100.0);
    CHECK(rep.per_device[1].utilization_pct == 10.0 / 21.0 * 100.0);
}

TEST_CASE("queueing waits shape departures but not measured latency") {
    // Middle stage is the 4s bottleneck; early frames pile up in front of it,
    // yet per-frame latency stays the 6s of actual service.
    ModelGraph g = seconds_chain({1.0, 4.0, 1.0});
    Cluster c = make_cluster({1e9, 1e9, 1e9}, 1e21);
    PipelinePlan p = plan_fixture(g, c);
    REQUIRE(p.stages.size() == 3);
    CHECK(p.predicted_period_s == 4.0);
    CHECK(p.predicted_latency_s == 6.0);

    SimConfig cfg;
    cfg.frames = 60;
    cfg.record_timeline = true;
    SimReport rep = simulate(p, g, c, cfg);
    CHECK(rep.measured_period_s == 4.0);
    CHECK(rep.measured_latency_s == 6.0);

    auto times = index_timeline(rep, p);
    // Pipeline fill: frame f leaves at latency + f * period, exactly.
    for (int f = 0; f < cfg.frames; ++f)
        CHECK(times.at({f, 2}).done == 6.0 + 4.0 * f);
    // Frame 2 onward really does wait for the bottleneck.
    CHECK(times.at({2, 1}).start > times.at({2, 0}).done);
}

TEST_CASE("replaying the recurrence from the plan reproduces the report") {
    SplitScenario s = make_split_scenario();

    auto check_against_replay = [&](const SimConfig& cfg) {
        SimConfig with_timeline = cfg;
        with_timeline.record_timeline = true;
        SimReport rep = simulate(s.plan, s.g, s.cluster, with_timeline);
        Replay mirror = replay_plan(s.plan, s.cluster, cfg);

        CHECK(rep.measured_period_s == mirror.period);
        CHECK(rep.measured_latency_s == mirror.latency);
        CHECK(rep.warmup_frames == mirror.warmup);
        for (const auto& d : rep.per_device) {
            REQUIRE(mirror.util.count(d.device) == 1);
            CHECK(d.utilization_pct == mirror.util.at(d.device));
        }
        auto times = index_timeline(rep, s.plan);
        for (int f = 0; f < cfg.frames; ++f)
            for (int k = 0; k < static_cast<int>(s.plan.stages.size()); ++k) {
                CHECK(times.at({f, k}).start == mirror.start[f][k]);
                CHECK(times.at({f, k}).done == mirror.done[f][k]);
            }
    };

    SUBCASE("saturated source") {
        SimConfig cfg;
        cfg.frames = 37;
        check_against_replay(cfg);
    }
    SUBCASE("timed source and deeper queues") {
        SimConfig cfg;
        cfg.frames = 25;
        cfg.arrival_interval_s = 0.004;
        cfg.queue_capacity = 3;
        check_against_replay(cfg);
        // The 4ms arrival gap dwarfs the stage times, so the source paces it.
        SimReport rep = simulate(s.plan, s.g, s.cluster, cfg);
        CHECK(rel_diff(rep.measured_period_s, 0.004) <= 1e-12);
    }
}

TEST_CASE("a slow source paces departures at the arrival interval") {
    ModelGraph g = seconds_chain({1.0});
    Cluster c = make_cluster({1e9}, 1e21);
    PipelinePlan p = plan_fixture(g, c);
    SimConfig cfg;
    cfg.frames = 30;
    cfg.arrival_interval_s = 2.0;
    SimReport rep = simulate(p, g, c, cfg);
    CHECK(rep.measured_period_s == 2.0);
    CHECK(rep.measured_latency_s == 1.0);
    // Busy 30s of a 59s makespan (last departure at 2*29 + 1).
    CHECK(rep.per_device[0].utilization_pct == 30.0 / 59.0 * 100.0);
}

TEST_CASE("a single frame falls back to whole run averages") {
    ModelGraph g = seconds_chain({2.0});
    Cluster c = make_cluster({1e9}, 1e21);
    PipelinePlan p = plan_fixture(g, c);
    SimConfig cfg;
    cfg.frames = 1;
    SimReport rep = simulate(p, g, c, cfg);
    CHECK(rep.warmup_frames == 1);
    CHECK(rep.measured_latency_s == 2.0);
    CHECK(rep.measured_period_s == 2.0);
}

TEST_CASE("jitter is reproducible and only slows the pipeline down") {
    SplitScenario s = make_split_scenario();
    SimConfig cfg;
    cfg.frames = 40;
    cfg.jitter_pct = 7.5;
    cfg.seed = 20240817;
    cfg.record_timeline = true;

    SimReport r1 = simulate(s.plan, s.g, s.cluster, cfg);
    SimReport r2 = simulate(s.plan, s.g, s.cluster, cfg);
    CHECK(write_sim_report_json(r1) == write_sim_report_json(r2));
    CHECK(write_sim_report_csv(r1) == write_sim_report_csv(r2));

    // Noise can only add to the critical path of a saturated pipeline.
    CHECK(r1.measured_period_s >= s.plan.predicted_period_s);
    index_timeline(r1, s.plan);
}

TEST_CASE("simulate rejects broken configurations") {
    ModelGraph g = seconds_chain({1.0});
    Cluster c = make_cluster({1e9}, 1e21);
    PipelinePlan p = plan_fixture(g, c);
    SimConfig cfg;

    SimConfig bad = cfg;
    bad.frames = 0;
    CHECK_THROWS_AS(simulate(p, g, c, bad), ValidationError);

    bad = cfg;
    bad.jitter_pct = -0.5;
    CHECK_THROWS_AS(simulate(p, g, c, bad), ValidationError);

    bad = cfg;
    bad.arrival_interval_s = -1.0;
    CHECK_THROWS_AS(simulate(p, g, c, bad), ValidationError);

    bad = cfg;
    bad.queue_capacity = 0;
    CHECK_THROWS_WITH_AS(simulate(p, g, c, bad), "queue capacity 0 deadlocks the pipeline",
                         ValidationError);

    CHECK_THROWS_WITH_AS(simulate(PipelinePlan{}, g, c, cfg), "plan has no stages",
                         ValidationError);

    PipelinePlan no_devices = p;
    no_devices.stages[0].device_names.clear();
    CHECK_THROWS_WITH_AS(simulate(no_devices, g, c, cfg), "stage has no devices",
                         ValidationError);

    Cluster renamed = c;
    renamed.devices[0].name = "other";
    CHECK_THROWS_WITH_AS(simulate(p, g, renamed, cfg),
                         "plan references unknown device 'dev0'", ValidationError);
}

TEST_CASE("memory estimates count stage weights and live features") {
    SUBCASE("one 3x3 conv stage holds its full kernel") {
        InputShape in{64, 32, 32};
        LayerSpec input;
        input.id = 0;
        input.kind = LayerKind::Input;
        LayerSpec conv;
        conv.id = 1;
        conv.kind = LayerKind::Conv;
        conv.kernel_h = conv.kernel_w = 3;
        conv.stride_h = conv.stride_w = 1;
        conv.pad_h = conv.pad_w = 1;
        conv.in_channels = conv.out_channels = 64;
        LayerSpec out;
        out.id = 2;
        out.kind = LayerKind::Output;
        ModelGraph g =
            ModelGraph::from_parts("oneconv", in, {input, conv, out}, {{0, 1}, {1, 2}});
        Cluster c = make_cluster({1e9}, 100);
        PipelinePlan p = plan_fixture(g, c);
        REQUIRE(p.stages.size() == 1);
        auto mem = estimate_memory(p.stages[0], g);
        // 4 bytes x (3*3*64*64 weights + 64 biases)
        CHECK(mem.at("dev0").first == 147712);
        CHECK(mem.at("dev0").second > 0);
    }

    SUBCASE("a pool only stage stores no model") {
        ModelGraph g = halo_chain();
        LayerSpec pool;
        pool.id = 4;
        pool.kind = LayerKind::Pool;
        pool.kernel_h = pool.kernel_w = 2;
        pool.stride_h = pool.stride_w = 2;
        InputShape in{8, 16, 16};
        std::vector<LayerSpec> layers;
        for (int v : topological_order(g)) layers.push_back(g.layer(v));
        // splice the pool between the last conv and the output connector
        layers.insert(layers.end() - 1, pool);
        ModelGraph gp = ModelGraph::from_parts("haloPool", in, std::move(layers),
                                               {{0, 1}, {1, 2}, {2, 4}, {4, 3}});
        ShapeTable shapes = compute_full_shapes(gp);
        StageConfig st;
        st.segment = VertexSet::single(4);
        st.device_names = {"solo"};
        st.strips = {shapes.at(4)};
        auto mem = estimate_memory(st, gp);
        CHECK(mem.at("solo").first == 0);
        // full 8x16x16 input resident plus the 8x8x8 pooled output
        CHECK(mem.at("solo").second == 10240);
    }

    SUBCASE("per stage weights tile the single stage total") {
        ModelGraph g = parse_model(slurp(fixture_path("vgg16.json")));
        Cluster solo = make_cluster({1e9}, 100);
        PipelinePlan whole = plan_fixture(g, solo);
        REQUIRE(whole.stages.size() == 1);
        auto whole_mem = estimate_memory(whole.stages[0], g);
        CHECK(whole_mem.at("dev0").first == 58858752);

        Cluster four = parse_cluster(slurp(fixture_path("cluster_uniform4.json")));
        PipelinePlan split = plan_fixture(g, four);
        std::int64_t summed = 0;
        for (const auto& st : split.stages) {
            auto mem = estimate_memory(st, g);
            std::int64_t stage_model = mem.at(st.device_names[0]).first;
            CHECK(stage_model <= 58858752);
            for (const auto& [name, pair] : mem) CHECK(pair.first == stage_model);
            summed += stage_model;
        }
        CHECK(summed == 58858752);
    }
}

TEST_CASE("device reports carry memory and redundancy per strip") {
    SUBCASE("reports match estimate_memory and follow plan order") {
        ModelGraph g = parse_model(slurp(fixture_path("vgg16.json")));
        Cluster c = parse_cluster(slurp(fixture_path("cluster_uniform4.json")));
        PipelinePlan p = plan_fixture(g, c);
        SimConfig cfg;
        cfg.frames = 5;
        SimReport rep = simulate(p, g, c, cfg);

        std::size_t idx = 0;
        for (std::size_t k = 0; k < p.stages.size(); ++k) {
            auto mem = estimate_memory(p.stages[k], g);
            for (const auto& name : p.stages[k].device_names) {
                REQUIRE(idx < rep.per_device.size());
                const DeviceReport& d = rep.per_device[idx++];
                CHECK(d.device == name);
                CHECK(d.stage == static_cast<int>(k));
                CHECK(d.model_bytes == mem.at(name).first);
                CHECK(d.feature_bytes == mem.at(name).second);
            }
        }
        CHECK(idx == rep.per_device.size());
    }

    SUBCASE("halo rows show up as redundancy") {
        ModelGraph g = halo_chain();
        Cluster c = make_cluster({1e9, 1e9}, 100);
        std::vector<Piece> pieces = singleton_pieces(g);
        ShapeTable shapes = compute_full_shapes(g);
        UniformStageEval eval(pieces, g, shapes, c);
        PipelinePlan p = assemble_uniform_plan({{0, 1}}, {2}, eval, kInf);
        REQUIRE(p.stages.size() == 1);
        REQUIRE(p.stages[0].strips.size() == 2);

        SimConfig cfg;
        cfg.frames = 8;
        SimReport rep = simulate(p, g, c, cfg);
        const StageConfig& st = p.stages[0];
        CostContext ctx{&g, &shapes, c.bandwidth_bytes_per_s, c.bytes_per_element};
        double baseline = segment_baseline_flops(st.segment, ctx);
        const Region& full = shapes.at(primary_sink(st.segment, g, shapes));
        REQUIRE(rep.per_device.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) {
            const DeviceReport& d = rep.per_device[i];
            double flops = st.cost.flops_per_device.at(d.device);
            double share = baseline * st.strips[i].height_rows / full.height_rows;
            CHECK(d.redundancy_pct == std::max(0.0, flops - share) / flops * 100.0);
            CHECK(d.redundancy_pct > 0.0);
        }
    }
}

TEST_CASE("report writers emit one row per device and stable json") {
    ModelGraph g = seconds_chain({2.0, 1.0});
    Cluster c = make_cluster({1e9, 1e9}, 1e21);
    PipelinePlan p = plan_fixture(g, c);
    SimConfig cfg;
    cfg.frames = 10;
    SimReport rep = simulate(p, g, c, cfg);

    std::string csv = write_sim_report_csv(rep);
    std::istringstream lines(csv);
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "device,stage,utilization_pct,redundancy_pct,model_bytes,feature_bytes");
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 5);
    }
    CHECK(rows == static_cast<int>(rep.per_device.size()));

    nlohmann::json doc = nlohmann::json::parse(write_sim_report_json(rep));
    for (const char* key : {"measured_period_s", "measured_latency_s", "throughput_fpm",
                            "frames", "warmup_frames", "per_device"})
        CHECK(doc.contains(key));
    CHECK(!doc.contains("timeline"));
    CHECK(doc["per_device"].size() == rep.per_device.size());
    for (const auto& jd : doc["per_device"])
        for (const char* key : {"device", "stage", "utilization_pct", "redundancy_pct",
                                "model_bytes", "feature_bytes"})
            CHECK(jd.contains(key));

    cfg.record_timeline = true;
    SimReport with_tl = simulate(p, g, c, cfg);
    nlohmann::json doc2 = nlohmann::json::parse(write_sim_report_json(with_tl));
    REQUIRE(doc2.contains("timeline"));
    CHECK(doc2["timeline"].size() == 2u * 10 * 2);
    for (const char* key : {"time_s", "event", "stage", "device", "frame"})
        CHECK(doc2["timeline"][0].contains(key));
}
