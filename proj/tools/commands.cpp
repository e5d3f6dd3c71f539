#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pipeplan/errors.hpp"
#include "pipeplan/log.hpp"
#include "pipeplan/model_graph.hpp"
#include "pipeplan/oracle.hpp"
#include "pipeplan/partitioner.hpp"
#include "pipeplan/planner.hpp"
#include "pipeplan/simulator.hpp"

namespace fs = std::filesystem;

namespace pipeplan::cli {

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    out << content;
    return out.good();
}

int missing_file(const std::string& path) {
    std::cerr << "error: cannot open '" << path << "'\n";
    return kUsageError;
}

// A referenced path is taken as written first, then relative to the file
// that referenced it.
std::optional<std::string> resolve_ref(const std::string& ref, const std::string& from_file) {
    if (fs::exists(ref)) return ref;
    fs::path alt = fs::path(from_file).parent_path() / ref;
    if (fs::exists(alt)) return alt.string();
    return std::nullopt;
}

int handle_domain_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
}

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt_ms(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", s);
    return buf;
}

struct LoadedPieces {
    ModelGraph graph;
    std::vector<Piece> pieces;
    std::string model_path;
};

// Throws ParseError/ValidationError; returns nullopt (after printing) only
// for missing files.
std::optional<LoadedPieces> load_pieces(const std::string& pieces_path, int& exit_code) {
    auto text = read_file(pieces_path);
    if (!text) {
        exit_code = missing_file(pieces_path);
        return std::nullopt;
    }
    PieceFile pf = parse_pieces(*text);
    auto model_path = resolve_ref(pf.model_ref, pieces_path);
    if (!model_path) {
        exit_code = missing_file(pf.model_ref);
        return std::nullopt;
    }
    auto model_text = read_file(*model_path);
    if (!model_text) {
        exit_code = missing_file(*model_path);
        return std::nullopt;
    }
    LoadedPieces lp{parse_model(*model_text), {}, *model_path};
    lp.pieces = rebuild_pieces(pf, lp.graph);
    return lp;
}

std::optional<Cluster> load_cluster(const std::string& cluster_path, int& exit_code) {
    auto text = read_file(cluster_path);
    if (!text) {
        exit_code = missing_file(cluster_path);
        return std::nullopt;
    }
    return parse_cluster(*text);
}

} // namespace

int cmd_partition(const std::string& model_path, int max_diameter, const std::string& out_path) {
    auto text = read_file(model_path);
    if (!text) return missing_file(model_path);
    try {
        // A model without layers is a malformed invocation, not a planning
        // failure.
        {
            auto doc = nlohmann::json::parse(*text, nullptr, false);
            if (!doc.is_discarded() && doc.is_object() && doc.contains("layers") &&
                doc["layers"].is_array() && doc["layers"].empty()) {
                std::cerr << "error: model has no layers\n";
                return kUsageError;
            }
        }
        ModelGraph g = parse_model(*text);
        Stopwatch sw;
        PartitionResult r = partition(g, max_diameter);
        log_info("partitioned '" + model_path + "' into " + std::to_string(r.pieces.size()) +
                 " piece(s) in " + fmt_ms(sw.seconds()) + " s");
        if (!out_path.empty() &&
            !write_file(out_path, write_pieces(r, model_path, max_diameter))) {
            std::cerr << "error: cannot write '" << out_path << "'\n";
            return kUsageError;
        }
        std::cout << "pieces: " << r.pieces.size() << "\n";
        std::cout << "objective_flops: " << fmt9(r.objective) << "\n";
        std::cout << "memo_entries: " << r.memo_stats.entries
                  << "\nmemo_hits: " << r.memo_stats.hits << "\n";
        return kOk;
    } catch (const std::exception& e) {
        return handle_domain_error(e);
    }
}

namespace {

void print_plan_summary(const PipelinePlan& p) {
    std::cout << "period_s: " << fmt9(p.predicted_period_s) << "\n";
    std::cout << "latency_s: " << fmt9(p.predicted_latency_s) << "\n";
    for (std::size_t k = 0; k < p.stages.size(); ++k) {
        const StageConfig& s = p.stages[k];
        std::cout << "stage " << k << ": pieces " << s.piece_first << "-" << s.piece_last
                  << ", layers " << s.segment.count() << ", devices";
        for (const auto& n : s.device_names) std::cout << " " << n;
        std::cout << ", t_stage_s " << fmt9(s.cost.stage_total_s) << "\n";
    }
}

} // namespace

int cmd_plan(const std::string& pieces_path, const std::string& cluster_path, double t_lim_s,
             const std::string& out_path) {
    try {
        int code = kOk;
        auto lp = load_pieces(pieces_path, code);
        if (!lp) return code;
        auto cluster = load_cluster(cluster_path, code);
        if (!cluster) return code;
        PipelinePlan p;
        Stopwatch sw;
        try {
            p = plan(lp->pieces, lp->graph, *cluster, t_lim_s);
            log_info("planned " + std::to_string(p.stages.size()) + " stage(s) over " +
                     std::to_string(cluster->devices.size()) + " device(s) in " +
                     fmt_ms(sw.seconds()) + " s");
        } catch (const InfeasiblePlanError& e) {
            std::cerr << "error: " << e.what() << "\n";
            PipelinePlan best = e.best_plan;
            best.model_ref = lp->model_path;
            best.cluster_ref = cluster_path;
            std::cout << write_plan(best);
            return kDomainError;
        }
        p.model_ref = lp->model_path;
        p.cluster_ref = cluster_path;
        if (!out_path.empty() && !write_file(out_path, write_plan(p))) {
            std::cerr << "error: cannot write '" << out_path << "'\n";
            return kUsageError;
        }
        print_plan_summary(p);
        return kOk;
    } catch (const std::exception& e) {
        return handle_domain_error(e);
    }
}

int cmd_oracle(const std::string& pieces_path, const std::string& cluster_path, double t_lim_s,
               const std::string& compare_path) {
    try {
        int code = kOk;
        auto lp = load_pieces(pieces_path, code);
        if (!lp) return code;
        auto cluster = load_cluster(cluster_path, code);
        if (!cluster) return code;
        OracleReport rep;
        try {
            rep = cluster->uniform()
                      ? oracle_homogeneous(lp->pieces, lp->graph, *cluster, t_lim_s)
                      : oracle_heterogeneous(lp->pieces, lp->graph, *cluster, t_lim_s);
        } catch (const InfeasiblePlanError& e) {
            std::cerr << "error: " << e.what() << "\n";
            std::cout << write_plan(e.best_plan);
            return kDomainError;
        }
        if (!compare_path.empty()) {
            auto plan_text = read_file(compare_path);
            if (!plan_text) return missing_file(compare_path);
            PipelinePlan compared = parse_plan(*plan_text, lp->graph, *cluster);
            rep.gap_vs = compared.predicted_period_s / rep.best_plan.predicted_period_s;
        }
        std::cout << "period_s: " << fmt9(rep.best_plan.predicted_period_s) << "\n";
        std::cout << "latency_s: " << fmt9(rep.best_plan.predicted_latency_s) << "\n";
        std::cout << "explored_states: " << rep.explored_states << "\n";
        std::cout << "wall_time_s: " << fmt9(rep.wall_time_s) << "\n";
        if (rep.gap_vs) std::cout << "gap: " << fmt9(*rep.gap_vs) << "\n";
        return kOk;
    } catch (const std::exception& e) {
        return handle_domain_error(e);
    }
}

int cmd_simulate(const std::string& plan_path, const std::string& cluster_path, int frames,
                 double jitter_pct, std::uint64_t seed, const std::string& out_path) {
    try {
        auto plan_text = read_file(plan_path);
        if (!plan_text) return missing_file(plan_path);
        int code = kOk;
        auto cluster = load_cluster(cluster_path, code);
        if (!cluster) return code;

        std::string model_ref;
        {
            auto doc = nlohmann::json::parse(*plan_text, nullptr, false);
            if (doc.is_discarded() || !doc.is_object() || !doc.contains("model") ||
                !doc["model"].is_string())
                throw ParseError("plan file does not name its model");
            model_ref = doc["model"].get<std::string>();
        }
        auto model_path = resolve_ref(model_ref, plan_path);
        if (!model_path) return missing_file(model_ref);
        auto model_text = read_file(*model_path);
        if (!model_text) return missing_file(*model_path);
        ModelGraph g = parse_model(*model_text);
        PipelinePlan p = parse_plan(*plan_text, g, *cluster);

        SimConfig cfg;
        cfg.frames = frames;
        cfg.jitter_pct = jitter_pct;
        cfg.seed = seed;
        Stopwatch sw;
        SimReport rep = simulate(p, g, *cluster, cfg);
        log_info("simulated " + std::to_string(frames) + " frame(s) in " + fmt_ms(sw.seconds()) +
                 " s");

        if (!out_path.empty()) {
            std::string base = out_path;
            if (base.size() > 5 && base.substr(base.size() - 5) == ".json")
                base = base.substr(0, base.size() - 5);
            if (!write_file(base + ".json", write_sim_report_json(rep)) ||
                !write_file(base + ".csv", write_sim_report_csv(rep))) {
                std::cerr << "error: cannot write '" << base << ".json/.csv'\n";
                return kUsageError;
            }
        }
        std::cout << "measured_period_s: " << fmt9(rep.measured_period_s) << "\n";
        std::cout << "measured_latency_s: " << fmt9(rep.measured_latency_s) << "\n";
        std::cout << "throughput_fpm: " << fmt9(rep.throughput_fpm) << "\n";
        return kOk;
    } catch (const std::exception& e) {
        return handle_domain_error(e);
    }
}

int cmd_report(const std::vector<std::string>& report_paths, const std::string& out_path) {
    try {
        std::string csv =
            "run,device,stage,utilization_pct,redundancy_pct,model_bytes,feature_bytes,"
            "period_s,latency_s\n";
        std::set<std::string> used_runs;
        for (const auto& path : report_paths) {
            auto text = read_file(path);
            if (!text) return missing_file(path);
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(*text);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError("invalid JSON in '" + path + "': " + e.what());
            }
            if (!doc.is_object() || !doc.contains("per_device") ||
                !doc["per_device"].is_array())
                throw ParseError("'" + path + "' is not a simulation report");
            std::string run = fs::path(path).stem().string();
            std::string candidate = run;
            for (int suffix = 2; used_runs.count(candidate); ++suffix)
                candidate = run + "-" + std::to_string(suffix);
            used_runs.insert(candidate);
            double period = doc.value("measured_period_s", 0.0);
            double latency = doc.value("measured_latency_s", 0.0);
            for (const auto& jd : doc["per_device"]) {
                csv += candidate + "," + jd.value("device", std::string()) + "," +
                       std::to_string(jd.value("stage", 0)) + "," +
                       fmt9(jd.value("utilization_pct", 0.0)) + "," +
                       fmt9(jd.value("redundancy_pct", 0.0)) + "," +
                       std::to_string(jd.value("model_bytes", std::int64_t{0})) + "," +
                       std::to_string(jd.value("feature_bytes", std::int64_t{0})) + "," +
                       fmt9(period) + "," + fmt9(latency) + "\n";
            }
        }
        if (!out_path.empty()) {
            if (!write_file(out_path, csv)) {
                std::cerr << "error: cannot write '" << out_path << "'\n";
                return kUsageError;
            }
        } else {
            std::cout << csv;
        }
        return kOk;
    } catch (const std::exception& e) {
        return handle_domain_error(e);
    }
}

} // namespace pipeplan::cli
