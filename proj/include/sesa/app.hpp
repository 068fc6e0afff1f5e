#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sesa {

inline constexpr const char* kToolName = "sesa";
inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_internal = 1, exit_input = 2, exit_numerical = 3 };

/// Everything one command needs. Keys of the JSON config file and the
/// embedded run config are the long flag names with '-' replaced by '_'.
struct RunConfig {
    std::string command;  // impute | evaluate | discover | simulate
    std::string input;
    std::string output = ".";
    std::string variables;  // variable spec JSON; empty = all continuous
    std::string spec;       // SEM spec file, optional

    std::uint64_t seed = 0;
    double missing_rate = 0.3;
    std::vector<std::string> columns;
    int trials = 1;
    std::string method = "sesa";  // sesa | mean | median | knn | external:<path>
    int knn_k = 5;
    std::string format = "json";  // json | csv
    std::string effect_size = "statistic";  // statistic | z
    std::string wilcoxon_scope = "imputed";  // imputed | column

    int em_max_iter = 500;
    double em_tol = 1e-6;
    double ridge = 1e-6;
    std::string moments = "implied";  // implied | saturated

    double alpha = 1.0;
    double beta = 0.1;
    double gamma = 1e-3;
    double lr = 1e-3;
    int epochs = 500;
    double tol = 1e-5;
    double self_mask_rate = 0.1;
    std::string mode = "self-supervised";  // self-supervised | benchmark
    int dk = 0;

    double lambda1 = 0.1;
    double threshold = 0.3;
    int notears_inner_steps = 500;
    int notears_max_outer = 100;
    std::string suggest_outcome;
    bool suggest = false;
    std::string discover_input = "complete-case";  // complete-case | fiml

    bool lenient = false;

    /// Not part of the resolved config: results do not depend on it.
    int threads = 1;

    /// Throws InputError on bad enum values, ranges or missing files.
    void validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);
/// Keys absent from `j` keep the value in `base`; unknown keys are errors.
RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base);

/// Default thread count from SESA_THREADS (1 when unset or invalid).
int default_threads();

int cmd_impute(const RunConfig& cfg);
int cmd_evaluate(const RunConfig& cfg);
int cmd_discover(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);

/// Dispatches on cfg.command.
int run(const RunConfig& cfg);

/// Parses argv (subcommand, optional --config file, flags overriding it)
/// and runs the command. Errors are reported on stderr.
int run_cli(int argc, char** argv);

}  // namespace sesa
