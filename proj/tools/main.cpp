#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"CNN pipeline partitioning, planning and simulation"};
    app.require_subcommand(1);

    std::string model_path, pieces_path, cluster_path, plan_path, out_path, compare_path;
    std::vector<std::string> report_paths;
    int max_diameter = 5;
    double t_lim = std::numeric_limits<double>::infinity();
    int frames = 100;
    double jitter = 0.0;
    std::uint64_t seed = 0;

    auto* partition = app.add_subcommand("partition", "Split a model into pipeline pieces");
    partition->add_option("model", model_path, "model JSON file")->required();
    partition->add_option("--max-diameter", max_diameter, "piece diameter bound");
    partition->add_option("-o,--output", out_path, "piece file to write");

    auto* plan = app.add_subcommand("plan", "Map pieces onto a device cluster");
    plan->add_option("pieces", pieces_path, "piece JSON file")->required();
    plan->add_option("cluster", cluster_path, "cluster JSON file")->required();
    plan->add_option("--t-lim", t_lim, "per-frame latency cap in seconds");
    plan->add_option("-o,--output", out_path, "plan file to write");

    auto* oracle = app.add_subcommand("oracle", "Exhaustively verify the optimal period");
    oracle->add_option("pieces", pieces_path, "piece JSON file")->required();
    oracle->add_option("cluster", cluster_path, "cluster JSON file")->required();
    oracle->add_option("--t-lim", t_lim, "per-frame latency cap in seconds");
    oracle->add_option("--compare", compare_path, "plan file to report the gap against");

    auto* simulate = app.add_subcommand("simulate", "Replay a plan over a frame stream");
    simulate->add_option("plan", plan_path, "plan JSON file")->required();
    simulate->add_option("cluster", cluster_path, "cluster JSON file")->required();
    simulate->add_option("--frames", frames, "frames to replay");
    simulate->add_option("--jitter", jitter, "uniform noise on timings, percent");
    simulate->add_option("--seed", seed, "jitter seed");
    simulate->add_option("-o,--output", out_path, "report stem; writes .json and .csv");

    auto* report = app.add_subcommand("report", "Merge simulation reports into one CSV");
    report->add_option("reports", report_paths, "report JSON files")->required();
    report->add_option("-o,--output", out_path, "merged CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return pipeplan::cli::kUsageError;
    }

    if (partition->parsed())
        return pipeplan::cli::cmd_partition(model_path, max_diameter, out_path);
    if (plan->parsed()) return pipeplan::cli::cmd_plan(pieces_path, cluster_path, t_lim, out_path);
    if (oracle->parsed())
        return pipeplan::cli::cmd_oracle(pieces_path, cluster_path, t_lim, compare_path);
    if (simulate->parsed())
        return pipeplan::cli::cmd_simulate(plan_path, cluster_path, frames, jitter, seed,
                                           out_path);
    if (report->parsed()) return pipeplan::cli::cmd_report(report_paths, out_path);
    return pipeplan::cli::kUsageError;
}
