#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/paretosolve.hpp"

namespace riskshare {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int check_failed = 1;
inline constexpr int config = 2;
inline constexpr int infeasible = 3;
inline constexpr int unsupported = 4;
inline constexpr int bound_exceeded = 5;
}  // namespace exit_code

int exit_code_for(ErrorKind kind);

struct RunConfig {
    nlohmann::json raw;
    std::vector<RiskSpec> agents;
    nlohmann::json scenario;
    TiePolicy tie_policy = TiePolicy::lowest_index;
    PremiaPolicy premia_policy = PremiaPolicy::egalitarian_slack;
    std::uint64_t seed = 1;
    std::size_t n_paths = 10000;
    std::string base_dir = ".";  // relative file references resolve here
};

RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);
PathSetPtr build_scenario(const RunConfig& cfg);

int cmd_solve(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_evaluate(const RunConfig& cfg, const std::optional<std::string>& allocation_csv, const std::string& out_dir,
                 std::ostream& log);
int cmd_improve(const RunConfig& cfg, const std::string& allocation_csv, const std::string& out_dir, std::ostream& log);
int cmd_verify(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
int cmd_replicate_example(std::uint64_t seed, std::size_t n_paths, const std::optional<std::string>& out_dir,
                          std::ostream& log);
int cmd_plotdata(const RunConfig& cfg, const std::string& figure, const std::string& out_dir, std::ostream& log);

/// Full command-line entry point; errors are reported on `err` and mapped to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace riskshare
