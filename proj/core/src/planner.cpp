#include "pipeplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "pipeplan/errors.hpp"
#include "pipeplan/log.hpp"
#include "pipeplan/numfmt.hpp"

namespace pipeplan {

Cluster averaged_cluster(const Cluster& c) {
    if (c.devices.empty()) throw ValidationError("cluster has no devices");
    double cap = 0, alpha = 0;
    for (const auto& d : c.devices) {
        cap += d.capacity_flops;
        alpha += d.alpha;
    }
    Cluster out = c;
    for (auto& d : out.devices) {
        d.capacity_flops = cap / c.devices.size();
        d.alpha = alpha / c.devices.size();
    }
    return out;
}

UniformStageEval::UniformStageEval(const std::vector<Piece>& pieces, const ModelGraph& g,
                                   const ShapeTable& shapes, const Cluster& c)
    : pieces_(&pieces), cluster_(&c),
      ctx_{&g, &shapes, c.bandwidth_bytes_per_s, c.bytes_per_element} {}

const VertexSet& UniformStageEval::segment(int i, int j) {
    auto key = std::make_pair(i, j);
    auto it = segments_.find(key);
    if (it != segments_.end()) return it->second;
    VertexSet s;
    for (int k = i; k <= j; ++k) s |= (*pieces_)[k].vertices;
    return segments_.emplace(key, std::move(s)).first->second;
}

int UniformStageEval::primary_height(int i, int j) {
    const VertexSet& seg = segment(i, j);
    return ctx_.shapes->at(primary_sink(seg, *ctx_.g, *ctx_.shapes)).height_rows;
}

const CostBreakdown* UniformStageEval::cost(int i, int j, int m) {
    auto key = std::make_tuple(i, j, m);
    auto it = costs_.find(key);
    if (it == costs_.end()) {
        std::optional<CostBreakdown> cb;
        const VertexSet& seg = segment(i, j);
        if (m >= 1 && m <= primary_height(i, j) &&
            m <= static_cast<int>(cluster_->devices.size())) {
            std::vector<DeviceSpec> devs(cluster_->devices.begin(),
                                         cluster_->devices.begin() + m);
            const Region& full = ctx_.shapes->at(primary_sink(seg, *ctx_.g, *ctx_.shapes));
            cb = stage_cost(seg, devs, equal_strips(full, m), ctx_, i == 0);
        }
        it = costs_.emplace(key, std::move(cb)).first;
    }
    return it->second ? &*it->second : nullptr;
}

bool config_better(double period_a, double latency_a,
                   const std::vector<std::pair<int, int>>& ranges_a, const std::vector<int>& devs_a,
                   double period_b, double latency_b,
                   const std::vector<std::pair<int, int>>& ranges_b,
                   const std::vector<int>& devs_b) {
    if (period_a != period_b) return period_a < period_b;
    if (latency_a != latency_b) return latency_a < latency_b;
    if (ranges_a.size() != ranges_b.size()) return ranges_a.size() < ranges_b.size();
    if (ranges_a != ranges_b) return ranges_a < ranges_b;
    return devs_a < devs_b;
}

namespace {

struct DpEntry {
    double period = 0;
    double latency = 0;
    std::vector<std::pair<int, int>> ranges;
    std::vector<int> devs;
};

bool entry_better(const DpEntry& a, const DpEntry& b) {
    return config_better(a.period, a.latency, a.ranges, a.devs, b.period, b.latency, b.ranges,
                         b.devs);
}

bool entry_better_latency_first(const DpEntry& a, const DpEntry& b) {
    if (a.latency != b.latency) return a.latency < b.latency;
    return entry_better(a, b);
}

// Keep only (period, latency)-undominated prefixes; suffix costs are additive
// in latency and max-composed in period, so dominated prefixes cannot win.
void pareto_insert(std::vector<DpEntry>& set, DpEntry e) {
    for (auto& x : set) {
        if (x.period <= e.period && x.latency <= e.latency) {
            if (x.period < e.period || x.latency < e.latency) return;
            if (!entry_better(e, x)) return;
            x = std::move(e);
            return;
        }
    }
    std::erase_if(set, [&](const DpEntry& x) {
        return x.period >= e.period && x.latency >= e.latency;
    });
    set.push_back(std::move(e));
}

std::optional<DpEntry> solve_uniform_dp(UniformStageEval& eval, double t_lim_s,
                                        bool minimize_latency) {
    int L = eval.piece_count();
    int D = static_cast<int>(eval.cluster().devices.size());
    std::vector<std::vector<std::vector<DpEntry>>> states(
        L + 1, std::vector<std::vector<DpEntry>>(D + 1));
    states[0][0].push_back(DpEntry{});
    for (int j = 0; j < L; ++j) {
        for (int p = 0; p <= D; ++p) {
            for (const DpEntry& e : states[j][p]) {
                for (int j2 = j + 1; j2 <= L; ++j2) {
                    for (int m = 1; m + p <= D; ++m) {
                        const CostBreakdown* cb = eval.cost(j, j2 - 1, m);
                        if (!cb) continue;
                        double period = std::max(e.period, cb->stage_total_s);
                        double latency = e.latency + cb->stage_total_s;
                        if (std::isfinite(t_lim_s) && latency > t_lim_s) continue;
                        DpEntry ne = e;
                        ne.period = period;
                        ne.latency = latency;
                        ne.ranges.emplace_back(j, j2 - 1);
                        ne.devs.push_back(m);
                        pareto_insert(states[j2][p + m], std::move(ne));
                    }
                }
            }
        }
    }
    std::optional<DpEntry> best;
    for (int p = 0; p <= D; ++p)
        for (const DpEntry& e : states[L][p]) {
            bool better = !best || (minimize_latency ? entry_better_latency_first(e, *best)
                                                     : entry_better(e, *best));
            if (better) best = e;
        }
    return best;
}

// Cost maps are computed with the first m cluster devices; rename them to the
// devices actually assigned to the stage (capacities are identical).
CostBreakdown rename_devices(const CostBreakdown& cb, const std::vector<std::string>& from,
                             const std::vector<std::string>& to) {
    CostBreakdown out = cb;
    out.t_comp_per_device.clear();
    out.t_comm_per_device.clear();
    out.flops_per_device.clear();
    out.bytes_in_per_device.clear();
    out.bytes_out_per_device.clear();
    for (std::size_t i = 0; i < from.size(); ++i) {
        out.t_comp_per_device[to[i]] = cb.t_comp_per_device.at(from[i]);
        out.t_comm_per_device[to[i]] = cb.t_comm_per_device.at(from[i]);
        out.flops_per_device[to[i]] = cb.flops_per_device.at(from[i]);
        out.bytes_in_per_device[to[i]] = cb.bytes_in_per_device.at(from[i]);
        out.bytes_out_per_device[to[i]] = cb.bytes_out_per_device.at(from[i]);
    }
    return out;
}

void rescore_plan(PipelinePlan& p) {
    p.predicted_period_s = 0;
    p.predicted_latency_s = 0;
    for (const auto& s : p.stages) {
        p.predicted_period_s = std::max(p.predicted_period_s, s.cost.stage_total_s);
        p.predicted_latency_s += s.cost.stage_total_s;
    }
}

} // namespace

PipelinePlan assemble_uniform_plan(const std::vector<std::pair<int, int>>& ranges,
                                   const std::vector<int>& devs, UniformStageEval& eval,
                                   double t_lim_s) {
    PipelinePlan p;
    p.t_lim_s = t_lim_s;
    const auto& devices = eval.cluster().devices;
    int used = 0;
    for (std::size_t k = 0; k < ranges.size(); ++k) {
        auto [i, j] = ranges[k];
        int m = devs[k];
        const CostBreakdown* cb = eval.cost(i, j, m);
        if (!cb) throw ValidationError("stage configuration is not evaluable");
        StageConfig sc;
        sc.piece_first = i;
        sc.piece_last = j;
        sc.segment = eval.segment(i, j);
        std::vector<std::string> from, to;
        for (int d = 0; d < m; ++d) {
            from.push_back(devices[d].name);
            to.push_back(devices[used + d].name);
        }
        sc.device_names = to;
        const Region& full =
            eval.context().shapes->at(primary_sink(sc.segment, *eval.context().g,
                                                   *eval.context().shapes));
        sc.strips = equal_strips(full, m);
        sc.cost = rename_devices(*cb, from, to);
        used += m;
        p.stages.push_back(std::move(sc));
    }
    rescore_plan(p);
    return p;
}

PipelinePlan plan_homogeneous(const std::vector<Piece>& pieces, const ModelGraph& g,
                              const Cluster& c, double t_lim_s) {
    if (pieces.empty()) throw ValidationError("piece chain is empty");
    if (c.devices.empty()) throw ValidationError("cluster has no devices");
    if (!c.uniform()) throw ValidationError("plan_homogeneous requires a uniform cluster");
    ShapeTable shapes = compute_full_shapes(g);
    UniformStageEval eval(pieces, g, shapes, c);
    auto best = solve_uniform_dp(eval, t_lim_s, false);
    if (!best) {
        auto fallback = solve_uniform_dp(eval, std::numeric_limits<double>::infinity(), true);
        if (!fallback) throw ValidationError("no pipeline configuration exists");
        throw InfeasiblePlanError(
            "no pipeline satisfies the latency cap",
            assemble_uniform_plan(fallback->ranges, fallback->devs, eval, t_lim_s));
    }
    return assemble_uniform_plan(best->ranges, best->devs, eval, t_lim_s);
}

std::vector<Region> balance_strips(const VertexSet& segment,
                                   const std::vector<DeviceSpec>& devices,
                                   const CostContext& ctx) {
    if (devices.empty()) throw ValidationError("balance_strips needs at least one device");
    const Region& full = ctx.shapes->at(primary_sink(segment, *ctx.g, *ctx.shapes));
    int H = full.height_rows;
    int m = static_cast<int>(devices.size());
    if (m > H) {
        log_info("stage has " + std::to_string(m) + " devices but only " + std::to_string(H) +
                 " rows; dropping " + std::to_string(m - H) + " device(s)");
        m = H;
    }

    double wsum = 0;
    for (int i = 0; i < m; ++i) wsum += devices[i].capacity_flops;
    std::vector<int> rows(m);
    std::vector<std::pair<double, int>> fracs;
    int given = 0;
    for (int i = 0; i < m; ++i) {
        double quota = H * devices[i].capacity_flops / wsum;
        rows[i] = static_cast<int>(quota);
        given += rows[i];
        fracs.emplace_back(-(quota - rows[i]), i);
    }
    std::sort(fracs.begin(), fracs.end());
    for (int k = 0; k < H - given; ++k) rows[fracs[k % m].second] += 1;
    for (int i = 0; i < m; ++i) {
        while (rows[i] == 0) {
            int donor = 0;
            for (int j = 1; j < m; ++j)
                if (rows[j] > rows[donor]) donor = j;
            rows[donor] -= 1;
            rows[i] += 1;
        }
    }

    std::map<std::pair<int, int>, double> flops_memo;
    auto strip_flops = [&](int off, int h) {
        auto key = std::make_pair(off, h);
        auto it = flops_memo.find(key);
        if (it != flops_memo.end()) return it->second;
        Region strip{full.channels, h, full.width_cols, off};
        double f = strip_profile(segment, ctx, strip).flops;
        flops_memo.emplace(key, f);
        return f;
    };
    auto eval_rows = [&](const std::vector<int>& r) {
        double worst = 0;
        int off = 0;
        for (int i = 0; i < m; ++i) {
            worst = std::max(worst, compute_time(devices[i], strip_flops(off, r[i])));
            off += r[i];
        }
        return worst;
    };

    double cur = eval_rows(rows);
    for (int iter = 0; iter < 100000; ++iter) {
        double best_val = cur;
        int best_b = -1, best_delta = 0;
        for (int b = 1; b < m; ++b) {
            for (int delta : {-1, +1}) {
                if (delta == -1 && rows[b - 1] <= 1) continue;
                if (delta == +1 && rows[b] <= 1) continue;
                std::vector<int> trial = rows;
                trial[b - 1] += delta;
                trial[b] -= delta;
                double val = eval_rows(trial);
                if (val < best_val) {
                    best_val = val;
                    best_b = b;
                    best_delta = delta;
                }
            }
        }
        if (best_b < 0) break;
        rows[best_b - 1] += best_delta;
        rows[best_b] -= best_delta;
        cur = best_val;
    }

    std::vector<Region> strips;
    int off = 0;
    for (int i = 0; i < m; ++i) {
        strips.push_back(Region{full.channels, rows[i], full.width_cols, off});
        off += rows[i];
    }
    return strips;
}

PipelinePlan adapt_heterogeneous(const PipelinePlan& plan_h, const std::vector<Piece>& pieces,
                                 const ModelGraph& g, const Cluster& c,
                                 bool prefer_min_slot_requirement) {
    (void)pieces;
    if (plan_h.stages.empty()) throw ValidationError("plan has no stages");
    std::size_t slots = 0;
    for (const auto& s : plan_h.stages) slots += s.device_names.size();
    if (slots > c.devices.size())
        throw ValidationError("cluster has fewer devices than the plan requires");

    ShapeTable shapes = compute_full_shapes(g);
    CostContext ctx{&g, &shapes, c.bandwidth_bytes_per_s, c.bytes_per_element};

    std::vector<DeviceSpec> sorted = c.devices;
    std::sort(sorted.begin(), sorted.end(), [](const DeviceSpec& a, const DeviceSpec& b) {
        if (a.capacity_flops != b.capacity_flops) return a.capacity_flops > b.capacity_flops;
        return a.name < b.name;
    });

    std::size_t n_stages = plan_h.stages.size();
    std::vector<double> slot_requirement(n_stages);
    std::vector<std::size_t> capacity_slots(n_stages);
    for (std::size_t k = 0; k < n_stages; ++k) {
        capacity_slots[k] = plan_h.stages[k].device_names.size();
        slot_requirement[k] =
            plan_h.stages[k].cost.total_flops / static_cast<double>(capacity_slots[k]);
    }

    // Fastest devices go to the stage with the heaviest per-slot work (or the
    // lightest, when prefer_min_slot_requirement is set). Ties favour the stage
    // with fewer devices assigned so far, then the earlier stage.
    std::vector<std::vector<DeviceSpec>> assigned(n_stages);
    std::size_t filled = 0;
    for (const auto& dev : sorted) {
        if (filled == slots) break;
        int pick = -1;
        for (std::size_t k = 0; k < n_stages; ++k) {
            if (assigned[k].size() == capacity_slots[k]) continue;
            if (pick < 0) {
                pick = static_cast<int>(k);
                continue;
            }
            auto pk = static_cast<std::size_t>(pick);
            bool better = false;
            if (slot_requirement[k] != slot_requirement[pk])
                better = prefer_min_slot_requirement
                             ? slot_requirement[k] < slot_requirement[pk]
                             : slot_requirement[k] > slot_requirement[pk];
            else if (assigned[k].size() != assigned[pk].size())
                better = assigned[k].size() < assigned[pk].size();
            if (better) pick = static_cast<int>(k);
        }
        assigned[static_cast<std::size_t>(pick)].push_back(dev);
        ++filled;
    }

    PipelinePlan out;
    out.t_lim_s = plan_h.t_lim_s;
    out.model_ref = plan_h.model_ref;
    out.cluster_ref = plan_h.cluster_ref;
    for (std::size_t k = 0; k < n_stages; ++k) {
        StageConfig sc;
        sc.piece_first = plan_h.stages[k].piece_first;
        sc.piece_last = plan_h.stages[k].piece_last;
        sc.segment = plan_h.stages[k].segment;
        std::vector<DeviceSpec>& devs = assigned[k];
        std::sort(devs.begin(), devs.end(), [](const DeviceSpec& a, const DeviceSpec& b) {
            if (a.capacity_flops != b.capacity_flops) return a.capacity_flops > b.capacity_flops;
            return a.name < b.name;
        });
        sc.strips = balance_strips(sc.segment, devs, ctx);
        if (sc.strips.size() < devs.size()) devs.resize(sc.strips.size());
        for (const auto& d : devs) sc.device_names.push_back(d.name);
        sc.cost = stage_cost(sc.segment, devs, sc.strips, ctx, k == 0);
        out.stages.push_back(std::move(sc));
    }
    rescore_plan(out);
    return out;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown_fields(const json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ParseError("unknown field '" + it.key() + "' in " + where);
}

} // namespace

std::string write_plan(const PipelinePlan& p) {
    ordered_json doc;
    doc["model"] = p.model_ref;
    doc["cluster"] = p.cluster_ref;
    if (std::isfinite(p.t_lim_s))
        doc["t_lim_s"] = quantize9(p.t_lim_s);
    else
        doc["t_lim_s"] = nullptr;
    doc["stages"] = ordered_json::array();
    for (const auto& s : p.stages) {
        ordered_json js;
        js["pieces"] = {s.piece_first, s.piece_last};
        std::vector<int> ids;
        s.segment.for_each([&](int v) { ids.push_back(v); });
        js["layer_ids"] = ids;
        js["devices"] = s.device_names;
        js["master"] = s.device_names.at(0);
        js["strips"] = ordered_json::array();
        for (std::size_t i = 0; i < s.strips.size(); ++i) {
            ordered_json st;
            st["device"] = s.device_names.at(i);
            st["row_start"] = s.strips[i].row_offset;
            st["row_end"] = s.strips[i].row_end();
            js["strips"].push_back(std::move(st));
        }
        js["t_comp_s"] = quantize9(s.cost.stage_compute_s);
        js["t_comm_s"] = quantize9(s.cost.stage_comm_s);
        js["t_stage_s"] = quantize9(s.cost.stage_total_s);
        doc["stages"].push_back(std::move(js));
    }
    doc["period_s"] = quantize9(p.predicted_period_s);
    doc["latency_s"] = quantize9(p.predicted_latency_s);
    return doc.dump(2) + "\n";
}

PipelinePlan parse_plan(const std::string& json_text, const ModelGraph& g, const Cluster& c) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("plan file must be a JSON object");
    reject_unknown_fields(doc, {"model", "cluster", "t_lim_s", "stages", "period_s", "latency_s"},
                          "plan");
    for (const char* key : {"model", "cluster", "stages"})
        if (!doc.contains(key))
            throw ParseError(std::string("plan is missing required field '") + key + "'");
    PipelinePlan p;
    if (!doc["model"].is_string()) throw ParseError("plan field 'model' must be a string");
    if (!doc["cluster"].is_string()) throw ParseError("plan field 'cluster' must be a string");
    p.model_ref = doc["model"].get<std::string>();
    p.cluster_ref = doc["cluster"].get<std::string>();
    p.t_lim_s = std::numeric_limits<double>::infinity();
    if (doc.contains("t_lim_s") && !doc["t_lim_s"].is_null()) {
        if (!doc["t_lim_s"].is_number() || doc["t_lim_s"].get<double>() <= 0)
            throw ParseError("plan field 't_lim_s' must be a positive number or null");
        p.t_lim_s = doc["t_lim_s"].get<double>();
    }
    if (!doc["stages"].is_array() || doc["stages"].empty())
        throw ParseError("plan field 'stages' must be a non-empty array");

    ShapeTable shapes = compute_full_shapes(g);
    CostContext ctx{&g, &shapes, c.bandwidth_bytes_per_s, c.bytes_per_element};
    std::map<std::string, const DeviceSpec*> by_name;
    for (const auto& d : c.devices) by_name[d.name] = &d;

    VertexSet covered;
    std::set<std::string> used_devices;
    int next_piece = 0;
    int stage_idx = 0;
    for (const auto& js : doc["stages"]) {
        if (!js.is_object()) throw ParseError("plan stage must be an object");
        std::string where = "stage " + std::to_string(stage_idx);
        reject_unknown_fields(js,
                              {"pieces", "layer_ids", "devices", "master", "strips", "t_comp_s",
                               "t_comm_s", "t_stage_s"},
                              where);
        for (const char* key : {"pieces", "layer_ids", "devices", "master", "strips"})
            if (!js.contains(key))
                throw ParseError(where + " is missing required field '" + key + "'");
        StageConfig sc;
        if (!js["pieces"].is_array() || js["pieces"].size() != 2 ||
            !js["pieces"][0].is_number_integer() || !js["pieces"][1].is_number_integer())
            throw ParseError(where + " field 'pieces' must be a pair of integers");
        sc.piece_first = js["pieces"][0].get<int>();
        sc.piece_last = js["pieces"][1].get<int>();
        if (sc.piece_first != next_piece || sc.piece_last < sc.piece_first)
            throw ValidationError(where + " piece range is not contiguous with its predecessor");
        next_piece = sc.piece_last + 1;
        if (!js["layer_ids"].is_array() || js["layer_ids"].empty())
            throw ParseError(where + " field 'layer_ids' must be a non-empty array");
        for (const auto& jv : js["layer_ids"]) {
            if (!jv.is_number_integer())
                throw ParseError(where + " layer ids must be integers");
            int v = jv.get<int>();
            if (!g.has_layer(v))
                throw ValidationError(where + " references unknown layer " + std::to_string(v));
            if (sc.segment.test(v) || covered.test(v))
                throw ValidationError(where + " repeats layer " + std::to_string(v));
            sc.segment.set(v);
        }
        covered |= sc.segment;
        if (!js["devices"].is_array() || js["devices"].empty())
            throw ParseError(where + " field 'devices' must be a non-empty array");
        std::vector<DeviceSpec> devs;
        for (const auto& jd : js["devices"]) {
            if (!jd.is_string()) throw ParseError(where + " device names must be strings");
            std::string name = jd.get<std::string>();
            auto it = by_name.find(name);
            if (it == by_name.end())
                throw ValidationError(where + " references unknown device '" + name + "'");
            if (!used_devices.insert(name).second)
                throw ValidationError("device '" + name + "' is used by more than one stage");
            sc.device_names.push_back(name);
            devs.push_back(*it->second);
        }
        if (!js["master"].is_string() ||
            js["master"].get<std::string>() != sc.device_names.front())
            throw ValidationError(where + " master must be the first listed device");
        if (!js["strips"].is_array() || js["strips"].size() != devs.size())
            throw ParseError(where + " must list one strip per device");
        const Region& full = shapes.at(primary_sink(sc.segment, g, shapes));
        std::size_t si = 0;
        for (const auto& jst : js["strips"]) {
            if (!jst.is_object()) throw ParseError(where + " strip must be an object");
            reject_unknown_fields(jst, {"device", "row_start", "row_end"}, where + " strip");
            for (const char* key : {"device", "row_start", "row_end"})
                if (!jst.contains(key))
                    throw ParseError(where + " strip is missing field '" + key + "'");
            if (!jst["device"].is_string() ||
                jst["device"].get<std::string>() != sc.device_names[si])
                throw ValidationError(where + " strips must follow the device order");
            if (!jst["row_start"].is_number_integer() || !jst["row_end"].is_number_integer())
                throw ParseError(where + " strip rows must be integers");
            int r0 = jst["row_start"].get<int>();
            int r1 = jst["row_end"].get<int>();
            if (r0 < 0 || r1 <= r0)
                throw ValidationError(where + " strip rows must satisfy 0 <= start < end");
            sc.strips.push_back(Region{full.channels, r1 - r0, full.width_cols, r0});
            ++si;
        }
        sc.cost = stage_cost(sc.segment, devs, sc.strips, ctx, stage_idx == 0);
        p.stages.push_back(std::move(sc));
        ++stage_idx;
    }
    if (!(covered == g.all_vertices()))
        throw ValidationError("plan stages do not cover the model exactly");
    rescore_plan(p);
    return p;
}

PipelinePlan plan(const std::vector<Piece>& pieces, const ModelGraph& g, const Cluster& c,
                  double t_lim_s, bool prefer_min_slot_requirement) {
    Cluster avg = averaged_cluster(c);
    PipelinePlan ph;
    try {
        ph = plan_homogeneous(pieces, g, avg, t_lim_s);
    } catch (InfeasiblePlanError& e) {
        throw InfeasiblePlanError(
            e.what(), adapt_heterogeneous(e.best_plan, pieces, g, c,
                                          prefer_min_slot_requirement));
    }
    PipelinePlan real =
        adapt_heterogeneous(ph, pieces, g, c, prefer_min_slot_requirement);
    if (std::isfinite(t_lim_s) && real.predicted_latency_s > t_lim_s)
        throw InfeasiblePlanError("adapted plan exceeds the latency cap", std::move(real));
    return real;
}

} // namespace pipeplan
