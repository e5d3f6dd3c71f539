#ifndef PIPEPLAN_TOOLS_COMMANDS_HPP
#define PIPEPLAN_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace pipeplan::cli {

inline constexpr int kOk = 0;
inline constexpr int kDomainError = 1;
inline constexpr int kUsageError = 2;

int cmd_partition(const std::string& model_path, int max_diameter, const std::string& out_path);
int cmd_plan(const std::string& pieces_path, const std::string& cluster_path, double t_lim_s,
             const std::string& out_path);
int cmd_oracle(const std::string& pieces_path, const std::string& cluster_path, double t_lim_s,
               const std::string& compare_path);
int cmd_simulate(const std::string& plan_path, const std::string& cluster_path, int frames,
                 double jitter_pct, std::uint64_t seed, const std::string& out_path);
int cmd_report(const std::vector<std::string>& report_paths, const std::string& out_path);

} // namespace pipeplan::cli

#endif
