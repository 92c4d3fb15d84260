#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdekf/filters.hpp"

namespace cdekf {

enum class Scenario {
    CstrAccuracy,   // sampling-rate sweep on the reactor model
    CstrIllCond,    // ill-conditioning sweep on the two-row measurement scheme
    VdpStiffness,   // stiffness sweep on the Van der Pol oscillator
    LtiOracle,      // linear model cross-checked against the exact filter
};

/// CLI names: cstr, cstr-ill, vdp, lti-test.
std::string_view scenario_id(Scenario scenario);
std::optional<Scenario> scenario_from_id(std::string_view id);
std::vector<double> default_sweep(Scenario scenario);

struct ExperimentConfig {
    Scenario scenario = Scenario::CstrAccuracy;
    std::vector<FilterVariant> variants{kAllVariants.begin(), kAllVariants.end()};
    double alpha = 1e3;
    double let_tol = 1e-4;
    double max_step = 0.1;
    int runs = 100;
    std::uint64_t base_seed = 42;
    std::vector<double> sweep;  // empty selects the scenario default
    std::string output_path;    // empty disables the CSV
    bool include_timing = true;
    int threads = 0;            // 0 picks the hardware concurrency
};

/// One aggregated row per (sweep value, variant).
struct RunReport {
    std::string scenario;
    double param = 0.0;
    std::string variant;
    double armse = 0.0;  // NaN when every run diverged
    double mean_cpu_seconds = 0.0;
    int failed_runs = 0;
    std::optional<double> first_failure_time;
};

/// Accumulated root mean square error over runs, instants and state
/// components: sqrt( (1/(M K)) sum_runs sum_k sum_j err^2 ). The component
/// sum is not averaged. Shapes must agree (M runs of K instants of
/// n-vectors); throws std::invalid_argument otherwise.
double armse(const std::vector<std::vector<Vector>>& truth_runs,
             const std::vector<std::vector<Vector>>& estimate_runs);

/// Runs the scenario's Monte Carlo protocol: per sweep value and run, one
/// shared truth/measurement stream consumed by every variant, ARMSE and
/// wall-time aggregation, failures recorded as data. Writes the CSV when the
/// config names an output path. Deterministic for a fixed config and seed.
std::vector<RunReport> run_experiment(const ExperimentConfig& config);

/// CSV schema: scenario,param,variant,armse,mean_cpu_s,failed_runs,first_failure_t
void write_reports_csv(const std::string& path, const std::vector<RunReport>& reports,
                       bool include_timing);

/// Flat key=value configuration text ('#' comments, blank lines ignored).
std::map<std::string, std::string> parse_config_file(const std::string& path);

}  // namespace cdekf
