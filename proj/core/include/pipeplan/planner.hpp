#ifndef PIPEPLAN_PLANNER_HPP
#define PIPEPLAN_PLANNER_HPP

#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pipeplan/cost_model.hpp"
#include "pipeplan/model_graph.hpp"
#include "pipeplan/partitioner.hpp"

namespace pipeplan {

struct StageConfig {
    int piece_first = 0;  // inclusive indices into the piece chain
    int piece_last = 0;
    VertexSet segment;
    std::vector<std::string> device_names;  // [0] is the stage master
    std::vector<Region> strips;             // strips[i] belongs to device_names[i]
    CostBreakdown cost;
};

struct PipelinePlan {
    std::vector<StageConfig> stages;
    double predicted_period_s = 0;
    double predicted_latency_s = 0;
    double t_lim_s = std::numeric_limits<double>::infinity();
    std::string model_ref;
    std::string cluster_ref;
};

class InfeasiblePlanError : public std::runtime_error {
public:
    InfeasiblePlanError(const std::string& msg, PipelinePlan best)
        : std::runtime_error(msg), best_plan(std::move(best)) {}
    PipelinePlan best_plan;  // lowest-latency configuration found
};

// All devices replaced by the cluster mean; bandwidth and names unchanged.
Cluster averaged_cluster(const Cluster& c);

// Memoized cost of a stage covering pieces [i..j] on the first m cluster
// devices with equal strips. Shared by the planner DP and the oracle so both
// score candidates with bit-identical values.
class UniformStageEval {
public:
    UniformStageEval(const std::vector<Piece>& pieces, const ModelGraph& g,
                     const ShapeTable& shapes, const Cluster& c);

    // nullptr when m exceeds the stage's strip rows
    const CostBreakdown* cost(int i, int j, int m);
    const VertexSet& segment(int i, int j);
    int primary_height(int i, int j);
    int piece_count() const { return static_cast<int>(pieces_->size()); }
    const Cluster& cluster() const { return *cluster_; }
    const CostContext& context() const { return ctx_; }

private:
    const std::vector<Piece>* pieces_;
    const Cluster* cluster_;
    CostContext ctx_;
    std::map<std::pair<int, int>, VertexSet> segments_;
    std::map<std::tuple<int, int, int>, std::optional<CostBreakdown>> costs_;
};

// Deterministic preference order on complete configurations.
bool config_better(double period_a, double latency_a,
                   const std::vector<std::pair<int, int>>& ranges_a, const std::vector<int>& devs_a,
                   double period_b, double latency_b,
                   const std::vector<std::pair<int, int>>& ranges_b,
                   const std::vector<int>& devs_b);

PipelinePlan assemble_uniform_plan(const std::vector<std::pair<int, int>>& ranges,
                                   const std::vector<int>& devs, UniformStageEval& eval,
                                   double t_lim_s);

// Exact min-period pipeline for a uniform cluster under the latency cap.
PipelinePlan plan_homogeneous(const std::vector<Piece>& pieces, const ModelGraph& g,
                              const Cluster& c, double t_lim_s);

// Integer strip rows minimizing the max per-device compute time. May return
// fewer strips than devices when the output has too few rows; callers drop the
// trailing devices.
std::vector<Region> balance_strips(const VertexSet& segment,
                                   const std::vector<DeviceSpec>& devices,
                                   const CostContext& ctx);

// Greedy reassignment of real devices onto the averaged plan's stage slots,
// fastest devices first toward the most demanding per-slot stages.
PipelinePlan adapt_heterogeneous(const PipelinePlan& plan_h, const std::vector<Piece>& pieces,
                                 const ModelGraph& g, const Cluster& c,
                                 bool prefer_min_slot_requirement = false);

// plan_homogeneous on the averaged cluster, then adapt_heterogeneous.
PipelinePlan plan(const std::vector<Piece>& pieces, const ModelGraph& g, const Cluster& c,
                  double t_lim_s, bool prefer_min_slot_requirement = false);

std::string write_plan(const PipelinePlan& p);
PipelinePlan parse_plan(const std::string& json_text, const ModelGraph& g, const Cluster& c);

} // namespace pipeplan

#endif
