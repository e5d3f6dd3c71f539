#ifndef PIPEPLAN_ORACLE_HPP
#define PIPEPLAN_ORACLE_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "pipeplan/planner.hpp"

namespace pipeplan {

struct OracleReport {
    PipelinePlan best_plan;
    std::uint64_t explored_states = 0;
    double wall_time_s = 0;
    std::optional<double> gap_vs; // period of a compared plan / best_plan period
};

// Exhaustive minimum-period search for a uniform cluster: every contiguous
// split of the piece chain crossed with every per-stage device count whose
// sum fits the cluster. Refuses instances with more than 10 pieces or
// 8 devices. Throws InfeasiblePlanError (carrying the minimum-latency plan)
// when no configuration meets t_lim_s.
OracleReport oracle_homogeneous(const std::vector<Piece>& pieces, const ModelGraph& g,
                                const Cluster& c, double t_lim_s);

// Additionally enumerates device groupings (devices deduplicated into
// capacity/alpha classes, idle devices allowed), the device order inside each
// stage, and every strip-height composition per stage. Refuses more than
// 8 pieces, 6 devices, or evaluated stage outputs taller than 64 rows.
// Uniform clusters defer to oracle_homogeneous.
OracleReport oracle_heterogeneous(const std::vector<Piece>& pieces, const ModelGraph& g,
                                  const Cluster& c, double t_lim_s);

} // namespace pipeplan

#endif
