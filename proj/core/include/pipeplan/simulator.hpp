#ifndef PIPEPLAN_SIMULATOR_HPP
#define PIPEPLAN_SIMULATOR_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pipeplan/planner.hpp"

namespace pipeplan {

struct SimConfig {
    int frames = 100;
    double arrival_interval_s = 0; // 0 = saturated source
    double jitter_pct = 0;         // uniform +/- percent on compute and comm times
    std::uint64_t seed = 0;
    int queue_capacity = 1;        // frames buffered between adjacent stages
    bool record_timeline = false;
};

struct DeviceReport {
    std::string device;
    int stage = 0;
    double utilization_pct = 0;
    double redundancy_pct = 0;
    std::int64_t model_bytes = 0;
    std::int64_t feature_bytes = 0;
};

struct TimelineEvent {
    double time_s = 0;
    std::string event;
    int stage = 0;
    std::string device;
    int frame = 0;
};

struct SimReport {
    double measured_period_s = 0;  // steady-state inter-departure time
    double measured_latency_s = 0; // mean per-frame service time, waits excluded
    double throughput_fpm = 0;
    int frames = 0;
    int warmup_frames = 0;
    std::vector<DeviceReport> per_device;
    std::vector<TimelineEvent> timeline; // only when record_timeline is set
};

// Frame-by-frame replay of the plan: per stage the master receives the stage
// input, scatters non-master strips sequentially, every device computes in
// parallel, and the master gathers strip outputs sequentially before handing
// the frame to the next stage. Stages overlap across frames subject to
// queue_capacity backpressure.
SimReport simulate(const PipelinePlan& plan, const ModelGraph& g, const Cluster& c,
                   const SimConfig& cfg);

// Per device of the stage: bytes for the stage's conv weights (every device
// holds the whole stage model) and the peak of live feature buffers while the
// device computes its strip.
std::map<std::string, std::pair<std::int64_t, std::int64_t>> estimate_memory(
    const StageConfig& stage, const ModelGraph& g, int bytes_per_element = 4);

std::string write_sim_report_json(const SimReport& r);
std::string write_sim_report_csv(const SimReport& r);

} // namespace pipeplan

#endif
