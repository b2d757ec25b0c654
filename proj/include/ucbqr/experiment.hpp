#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ucbqr/data.hpp"
#include "ucbqr/metrics.hpp"
#include "ucbqr/model.hpp"

namespace ucbqr {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BurstSpec {
    int type = 0;
    int count = 0;
    double start = 0.0;
    double end = 0.0;
};

struct ScenarioSpec {
    enum class Kind { kSynthetic, kAppendixD, kCallLog, kInline };

    Kind kind = Kind::kSynthetic;
    SyntheticSpec synthetic;
    double appendix_d_horizon = 500.0;
    std::string calls_path;
    std::string schedule_path;
    LogScenarioOptions log_options;
    SystemConfig inline_config;
    double inline_horizon = 3600.0;
    std::vector<BurstSpec> bursts;
    std::uint64_t burst_seed = 7;
};

enum class SweepAxis { kEpisodeLength, kGamma, kMuInit };

std::string to_string(SweepAxis axis);

struct Sweep {
    SweepAxis axis = SweepAxis::kEpisodeLength;
    std::vector<double> values;
};

struct NamedPolicy {
    std::string label;
    PolicySpec spec;
};

struct ExperimentConfig {
    std::string name = "experiment";
    ScenarioSpec scenario;
    std::vector<NamedPolicy> policies;
    int replications = 1;
    std::optional<double> horizon;  // defaults to the scenario's
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::optional<Sweep> sweep;
    KpiOptions kpi;
    bool write_logs = false;
};

/// Parses the JSON experiment format. Throws ConfigParseError.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

/// Throws ScenarioError (or InvalidSpec/CsvError) when the scenario cannot be built.
Scenario build_scenario(const ScenarioSpec& spec);

/// Root seed of replication r; shared by every policy of an experiment.
std::uint64_t replication_seed(std::uint64_t experiment_seed, int replication);

struct CellResult {
    std::string label;
    PolicySpec spec;
    std::optional<double> sweep_value;
    KpiReport report;
    double plan_load_variance = 0.0;  // mean over episodes of the planned load variance
    int failed_replications = 0;
    std::string error;
    std::vector<std::string> files;

    bool ok() const { return failed_replications == 0 && error.empty(); }
};

struct ExperimentResult {
    std::string name;
    std::vector<CellResult> cells;
    int exit_code = 0;
};

struct RunOptions {
    int workers = 1;
    bool write_files = true;
};

/// Worker count from UCBQR_WORKERS, else the hardware concurrency.
int default_worker_count();

/// Runs every (policy x sweep point x replication) cell. Exit codes: 0 ok,
/// 3 scenario error, 4 solver failure in at least one cell.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

const CellResult* find_cell(const ExperimentResult& result, const std::string& label,
                            std::optional<double> sweep_value = std::nullopt);

std::vector<std::string> preset_names();
/// Throws std::invalid_argument for an unknown name.
ExperimentConfig make_preset(const std::string& name);

/// Stationary 3x3 system with widely spread payoffs and short episodes,
/// used to measure how close the learner gets to the oracle.
ExperimentConfig learning_gap_experiment();

struct BandCheck {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Empirical rates and busy fractions of the appendix-d run against the
/// published values.
std::vector<BandCheck> appendix_d_checks(const KpiReport& report);

/// Shape of the waiting-time series around injected bursts. The baseline is
/// the mean wait over the two hours before the first burst. Each burst must
/// be followed within 30 minutes by a bin at least 3x the baseline, and the
/// hour starting two hours after the last burst must average at most 2x the
/// baseline. For these checks `target` is the threshold, not a centre.
std::vector<BandCheck> burst_shape_checks(const KpiReport& report,
                                          const std::vector<BurstSpec>& bursts);

}  // namespace ucbqr
