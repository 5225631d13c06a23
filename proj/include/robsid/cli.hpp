#pragma once

// Command-line front end: simulate, identify, benchmark.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "robsid/bench.hpp"

namespace robsid::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 2,
    exit_data = 3,
    exit_numerical = 4,
    exit_malformed = 5,
};

/// Raised while resolving options; carries the exit code to report.
class CliError : public std::runtime_error {
public:
    CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

struct CliConfig {
    std::string command;
    std::optional<std::string> config_path;
    std::string out_path = "robsid_out";
    int verbosity = 0;

    BenchConfig bench;                 ///< runs, scheme, methods, gibbs, seed, threads
    Method method = Method::optimal;   ///< identify only

    std::string data_path;             ///< identify
    Index horizon = 0;                 ///< identify; 0 = from data header or length
    Index past = 0;                    ///< identify; 0 = horizon

    Index nx = 0;                      ///< simulate; 0 = sample n_x
    bool noiseless = false;            ///< simulate
};

/// Defaults < config file < flags. Throws CliError.
CliConfig parse_config(const std::vector<std::string>& args);

/// The resolved configuration as a single-line JSON string.
std::string resolved_config_json(const CliConfig& config);

void cmd_simulate(const CliConfig& config, std::ostream& log);
void cmd_identify(const CliConfig& config, std::ostream& log);
void cmd_benchmark(const CliConfig& config, std::ostream& log);

/// Summary of a benchmark as pretty-printed JSON.
std::string summary_json(const CliConfig& config, const RiskReport& report);

/// Full dispatch including error-to-exit-code mapping.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace robsid::cli
