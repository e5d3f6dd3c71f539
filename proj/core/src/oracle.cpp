#include "pipeplan/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "pipeplan/errors.hpp"

namespace pipeplan {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct UniformCandidate {
    double period = 0;
    double latency = 0;
    std::vector<std::pair<int, int>> ranges;
    std::vector<int> devs;
};

bool uniform_candidate_better(const UniformCandidate& a, const UniformCandidate& b) {
    return config_better(a.period, a.latency, a.ranges, a.devs, b.period, b.latency, b.ranges,
                         b.devs);
}

bool uniform_candidate_better_latency_first(const UniformCandidate& a,
                                            const UniformCandidate& b) {
    if (a.latency != b.latency) return a.latency < b.latency;
    return uniform_candidate_better(a, b);
}

} // namespace

OracleReport oracle_homogeneous(const std::vector<Piece>& pieces, const ModelGraph& g,
                                const Cluster& c, double t_lim_s) {
    auto t0 = Clock::now();
    if (pieces.empty()) throw ValidationError("piece chain is empty");
    if (c.devices.empty()) throw ValidationError("cluster has no devices");
    int L = static_cast<int>(pieces.size());
    int D = static_cast<int>(c.devices.size());
    if (L > 10 || D > 8) throw TooLargeError("instance too large");
    if (!c.uniform()) throw ValidationError("oracle_homogeneous requires a uniform cluster");

    ShapeTable shapes = compute_full_shapes(g);
    UniformStageEval eval(pieces, g, shapes, c);

    std::uint64_t explored = 0;
    std::optional<UniformCandidate> best, best_any;
    std::vector<std::pair<int, int>> ranges;
    std::vector<int> devs;

    // Walk every contiguous split with every device-count composition; a
    // complete walk is one explored state even when some stage cannot be
    // evaluated (more devices than output rows).
    auto walk = [&](auto&& self, int start, int used, double period, double latency,
                    bool valid) -> void {
        if (start == L) {
            ++explored;
            if (!valid) return;
            UniformCandidate cand{period, latency, ranges, devs};
            bool feasible = !std::isfinite(t_lim_s) || latency <= t_lim_s;
            if (feasible && (!best || uniform_candidate_better(cand, *best))) best = cand;
            if (!best_any || uniform_candidate_better_latency_first(cand, *best_any))
                best_any = cand;
            return;
        }
        for (int end = start + 1; end <= L; ++end) {
            for (int m = 1; used + m <= D; ++m) {
                const CostBreakdown* cb = eval.cost(start, end - 1, m);
                ranges.emplace_back(start, end - 1);
                devs.push_back(m);
                if (cb)
                    self(self, end, used + m, std::max(period, cb->stage_total_s),
                         latency + cb->stage_total_s, valid);
                else
                    self(self, end, used + m, period, latency, false);
                ranges.pop_back();
                devs.pop_back();
            }
        }
    };
    walk(walk, 0, 0, 0.0, 0.0, true);

    OracleReport rep;
    rep.explored_states = explored;
    if (!best) {
        if (!best_any) throw ValidationError("no pipeline configuration exists");
        PipelinePlan payload =
            assemble_uniform_plan(best_any->ranges, best_any->devs, eval, t_lim_s);
        throw InfeasiblePlanError("no pipeline satisfies the latency cap", std::move(payload));
    }
    rep.best_plan = assemble_uniform_plan(best->ranges, best->devs, eval, t_lim_s);
    rep.wall_time_s = seconds_since(t0);
    return rep;
}

namespace {

struct DeviceClass {
    DeviceSpec proto;               // representative capacity/alpha
    std::vector<std::string> names; // ascending
};

struct StageChoice {
    double total = 0;           // mirrors combine_stage's stage_total_s
    std::vector<int> classes;   // class index per strip position, [0] is master
    std::vector<int> heights;   // strip rows per position
};

struct RangeData {
    VertexSet segment;
    Region full;
    double transfer = 0; // master input transfer, 0 for the first stage
    std::map<std::pair<int, int>, StripProfile> profiles;
};

struct HetCandidate {
    double period = 0;
    double latency = 0;
    std::vector<std::pair<int, int>> ranges;
    std::vector<std::vector<int>> counts; // per stage, devices per class
};

bool het_candidate_better(const HetCandidate& a, const HetCandidate& b) {
    if (a.period != b.period) return a.period < b.period;
    if (a.latency != b.latency) return a.latency < b.latency;
    if (a.ranges.size() != b.ranges.size()) return a.ranges.size() < b.ranges.size();
    if (a.ranges != b.ranges) return a.ranges < b.ranges;
    return a.counts < b.counts;
}

bool het_candidate_better_latency_first(const HetCandidate& a, const HetCandidate& b) {
    if (a.latency != b.latency) return a.latency < b.latency;
    return het_candidate_better(a, b);
}

class HetSearch {
public:
    HetSearch(const std::vector<Piece>& pieces, const ModelGraph& g, const Cluster& c)
        : pieces_(pieces), g_(g), shapes_(compute_full_shapes(g)),
          ctx_{&g, &shapes_, c.bandwidth_bytes_per_s, c.bytes_per_element} {
        std::map<std::pair<double, double>, std::vector<std::string>> groups;
        for (const auto& d : c.devices)
            groups[{d.capacity_flops, d.alpha}].push_back(d.name);
        for (auto& [key, names] : groups) {
            std::sort(names.begin(), names.end());
            DeviceClass dc;
            dc.proto = DeviceSpec{names.front(), key.first, key.second};
            dc.names = names;
            classes_.push_back(std::move(dc));
        }
        std::sort(classes_.begin(), classes_.end(), [](const DeviceClass& a,
                                                       const DeviceClass& b) {
            if (a.proto.capacity_flops != b.proto.capacity_flops)
                return a.proto.capacity_flops > b.proto.capacity_flops;
            return a.proto.alpha < b.proto.alpha;
        });
    }

    const std::vector<DeviceClass>& classes() const { return classes_; }
    const CostContext& context() const { return ctx_; }

    RangeData& range(int i, int j) {
        auto key = std::make_pair(i, j);
        auto it = ranges_.find(key);
        if (it != ranges_.end()) return it->second;
        RangeData rd;
        for (int k = i; k <= j; ++k) rd.segment |= pieces_[k].vertices;
        rd.full = shapes_.at(primary_sink(rd.segment, g_, shapes_));
        if (rd.full.height_rows > 64) throw TooLargeError("instance too large");
        rd.transfer = i == 0 ? 0.0
                             : static_cast<double>(stage_input_bytes(rd.segment, ctx_)) /
                                   ctx_.bandwidth_bytes_per_s;
        return ranges_.emplace(key, std::move(rd)).first->second;
    }

    const StripProfile& profile(RangeData& rd, int off, int h) {
        auto key = std::make_pair(off, h);
        auto it = rd.profiles.find(key);
        if (it != rd.profiles.end()) return it->second;
        Region strip{rd.full.channels, h, rd.full.width_cols, off};
        return rd.profiles.emplace(key, strip_profile(rd.segment, ctx_, strip)).first->second;
    }

    // Best device order and strip heights for one stage over the given class
    // counts; nullopt when the group holds more devices than output rows.
    const std::optional<StageChoice>& best_group(int i, int j, const std::vector<int>& counts) {
        auto key = std::make_tuple(i, j, counts);
        auto it = groups_.find(key);
        if (it != groups_.end()) return it->second;

        std::optional<StageChoice> result;
        RangeData& rd = range(i, j);
        int m = 0;
        for (int n : counts) m += n;
        int H = rd.full.height_rows;
        if (m >= 1 && m <= H) {
            std::vector<int> perm;
            for (std::size_t ci = 0; ci < counts.size(); ++ci)
                perm.insert(perm.end(), counts[ci], static_cast<int>(ci));
            std::vector<int> heights(m);
            do {
                // compositions of H rows into m positive parts, lexicographic
                auto comp = [&](auto&& self, int pos, int left) -> void {
                    if (pos == m - 1) {
                        heights[pos] = left;
                        score(rd, perm, heights, result);
                        return;
                    }
                    for (int h = 1; left - h >= m - 1 - pos; ++h) {
                        heights[pos] = h;
                        self(self, pos + 1, left - h);
                    }
                };
                comp(comp, 0, H);
            } while (std::next_permutation(perm.begin(), perm.end()));
        }
        return groups_.emplace(key, std::move(result)).first->second;
    }

private:
    // Same arithmetic and accumulation order as combine_stage.
    void score(RangeData& rd, const std::vector<int>& perm, const std::vector<int>& heights,
               std::optional<StageChoice>& best) {
        double worst_comp = 0, comm = 0;
        int off = 0;
        for (std::size_t p = 0; p < perm.size(); ++p) {
            const StripProfile& pr = profile(rd, off, heights[p]);
            worst_comp = std::max(
                worst_comp,
                compute_time(classes_[perm[p]].proto, pr.flops));
            if (p > 0)
                comm += comm_time(pr.bytes_in, pr.bytes_out, ctx_.bandwidth_bytes_per_s);
            off += heights[p];
        }
        comm += rd.transfer;
        double total = worst_comp + comm;
        if (!best || total < best->total) best = StageChoice{total, perm, heights};
    }

    const std::vector<Piece>& pieces_;
    const ModelGraph& g_;
    ShapeTable shapes_;
    CostContext ctx_;
    std::vector<DeviceClass> classes_;
    std::map<std::pair<int, int>, RangeData> ranges_;
    std::map<std::tuple<int, int, std::vector<int>>, std::optional<StageChoice>> groups_;
};

PipelinePlan reconstruct_het_plan(HetSearch& search, const HetCandidate& cand,
                                  const Cluster& c, double t_lim_s) {
    std::map<std::string, const DeviceSpec*> by_name;
    for (const auto& d : c.devices) by_name[d.name] = &d;
    std::vector<std::size_t> next_of_class(search.classes().size(), 0);

    PipelinePlan p;
    p.t_lim_s = t_lim_s;
    for (std::size_t k = 0; k < cand.ranges.size(); ++k) {
        auto [i, j] = cand.ranges[k];
        const auto& choice = search.best_group(i, j, cand.counts[k]);
        if (!choice) throw ValidationError("oracle winner is not evaluable");
        StageConfig sc;
        sc.piece_first = i;
        sc.piece_last = j;
        RangeData& rd = search.range(i, j);
        sc.segment = rd.segment;
        std::vector<DeviceSpec> devs;
        int off = 0;
        for (std::size_t pos = 0; pos < choice->classes.size(); ++pos) {
            int ci = choice->classes[pos];
            const std::string& name = search.classes()[ci].names.at(next_of_class[ci]++);
            sc.device_names.push_back(name);
            devs.push_back(*by_name.at(name));
            sc.strips.push_back(
                Region{rd.full.channels, choice->heights[pos], rd.full.width_cols, off});
            off += choice->heights[pos];
        }
        sc.cost = stage_cost(sc.segment, devs, sc.strips, search.context(), i == 0);
        p.stages.push_back(std::move(sc));
    }
    p.predicted_period_s = 0;
    p.predicted_latency_s = 0;
    for (const auto& s : p.stages) {
        p.predicted_period_s = std::max(p.predicted_period_s, s.cost.stage_total_s);
        p.predicted_latency_s += s.cost.stage_total_s;
    }
    return p;
}

} // namespace

OracleReport oracle_heterogeneous(const std::vector<Piece>& pieces, const ModelGraph& g,
                                  const Cluster& c, double t_lim_s) {
    auto t0 = Clock::now();
    if (pieces.empty()) throw ValidationError("piece chain is empty");
    if (c.devices.empty()) throw ValidationError("cluster has no devices");
    int L = static_cast<int>(pieces.size());
    int D = static_cast<int>(c.devices.size());
    if (L > 8 || D > 6) throw TooLargeError("instance too large");
    if (c.uniform()) return oracle_homogeneous(pieces, g, c, t_lim_s);

    HetSearch search(pieces, g, c);
    int C = static_cast<int>(search.classes().size());
    std::vector<int> class_sizes;
    for (const auto& dc : search.classes())
        class_sizes.push_back(static_cast<int>(dc.names.size()));

    std::uint64_t explored = 0;
    std::optional<HetCandidate> best, best_any;
    std::vector<std::pair<int, int>> ranges;

    // For one split, distribute each class over the stages (idle devices
    // allowed), then score stages independently via best_group.
    auto assign = [&](auto&& self, std::vector<std::vector<int>>& counts, int ci) -> void {
        int S = static_cast<int>(ranges.size());
        if (ci == C) {
            for (int k = 0; k < S; ++k) {
                int m = 0;
                for (int cj = 0; cj < C; ++cj) m += counts[k][cj];
                if (m == 0) return;
            }
            ++explored;
            double period = 0, latency = 0;
            bool valid = true;
            for (int k = 0; k < S && valid; ++k) {
                const auto& choice =
                    search.best_group(ranges[k].first, ranges[k].second, counts[k]);
                if (!choice) {
                    valid = false;
                    break;
                }
                period = std::max(period, choice->total);
                latency += choice->total;
            }
            if (!valid) return;
            HetCandidate cand{period, latency, ranges, counts};
            bool feasible = !std::isfinite(t_lim_s) || latency <= t_lim_s;
            if (feasible && (!best || het_candidate_better(cand, *best))) best = cand;
            if (!best_any || het_candidate_better_latency_first(cand, *best_any))
                best_any = cand;
            return;
        }
        auto spread = [&](auto&& inner, int k, int left) -> void {
            if (k == S) {
                self(self, counts, ci + 1);
                return;
            }
            for (int take = 0; take <= left; ++take) {
                counts[k][ci] = take;
                inner(inner, k + 1, left - take);
            }
            counts[k][ci] = 0;
        };
        spread(spread, 0, class_sizes[ci]);
    };

    auto split = [&](auto&& self, int start) -> void {
        if (start == L) {
            if (static_cast<int>(ranges.size()) > D) return;
            std::vector<std::vector<int>> counts(ranges.size(), std::vector<int>(C, 0));
            assign(assign, counts, 0);
            return;
        }
        if (static_cast<int>(ranges.size()) >= D) return;
        for (int end = start + 1; end <= L; ++end) {
            ranges.emplace_back(start, end - 1);
            self(self, end);
            ranges.pop_back();
        }
    };
    split(split, 0);

    OracleReport rep;
    rep.explored_states = explored;
    if (!best) {
        if (!best_any) throw ValidationError("no pipeline configuration exists");
        throw InfeasiblePlanError("no pipeline satisfies the latency cap",
                                  reconstruct_het_plan(search, *best_any, c, t_lim_s));
    }
    rep.best_plan = reconstruct_het_plan(search, *best, c, t_lim_s);
    rep.wall_time_s = seconds_since(t0);
    return rep;
}

} // namespace pipeplan
