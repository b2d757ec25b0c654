#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ucbqr {

// Time is measured in seconds and every rate is per second.

/// A compatible (customer type, server) pair.
struct Line {
    int type = 0;
    int server = 0;

    auto operator<=>(const Line&) const = default;
};

/// Piecewise-constant Poisson rate: `rate` applies from `start` until the
/// next segment's start (the last segment extends forever).
struct RateSegment {
    double start = 0.0;
    double rate = 0.0;

    bool operator==(const RateSegment&) const = default;
};

/// Arrivals of one customer type. Explicit timestamps and a Poisson rate
/// profile may both be present; the engine merges the two streams.
struct ArrivalSource {
    std::vector<double> timestamps;
    std::vector<RateSegment> poisson_profile;

    bool empty() const { return timestamps.empty() && poisson_profile.empty(); }
    bool operator==(const ArrivalSource&) const = default;
};

struct ExponentialService {
    double mean = 1.0;
    bool operator==(const ExponentialService&) const = default;
};

/// Service time exp(N(log_mean, log_sd^2)).
struct LogNormalService {
    double log_mean = 0.0;
    double log_sd = 1.0;
    bool operator==(const LogNormalService&) const = default;
};

/// Uniform resampling (with replacement) from observed durations.
struct EmpiricalService {
    std::vector<double> pool;
    bool operator==(const EmpiricalService&) const = default;
};

/// Per-agent service duration distribution of one line.
using ServiceSource = std::variant<ExponentialService, LogNormalService, EmpiricalService>;

/// Mean per-agent duration; nullopt for an empty empirical pool.
std::optional<double> mean_duration(const ServiceSource& source);

struct CapacityBreakpoint {
    double time = 0.0;
    int count = 0;
    bool operator==(const CapacityBreakpoint&) const = default;
};

/// Agent count of one server over time. An empty schedule means a single
/// agent at all times; otherwise the first breakpoint must be at t = 0.
struct CapacitySchedule {
    std::vector<CapacityBreakpoint> points;

    int count_at(double t) const;
    bool operator==(const CapacitySchedule&) const = default;
};

/// Static description of a skill-based queueing system.
struct SystemConfig {
    int num_types = 0;
    int num_servers = 0;
    std::vector<Line> lines;
    std::vector<ArrivalSource> arrivals;     // one per type
    std::vector<ServiceSource> service;      // one per line
    std::vector<double> payoff;              // Bernoulli mean per line
    std::vector<CapacitySchedule> capacity;  // one per server

    std::optional<int> line_index(int type, int server) const;
    bool operator==(const SystemConfig&) const = default;
};

/// Adjacency lists of a config's compatibility graph, as line indices.
struct Compatibility {
    std::vector<Line> lines;
    std::vector<std::vector<int>> lines_of_type;
    std::vector<std::vector<int>> lines_of_server;
    // line_at[type][server], -1 when incompatible
    std::vector<std::vector<int>> line_at;

    explicit Compatibility(const SystemConfig& config);
    Compatibility(int num_types, int num_servers, const std::vector<Line>& lines);

    int line(int type, int server) const { return line_at[type][server]; }
};

/// Output of every routing-rate optimization.
struct RoutingPlan {
    std::vector<double> rates;            // aligned with the problem's line list
    std::vector<double> rejection_rates;  // per type; empty unless the fallback ran
    double objective_value = 0.0;
    bool is_vertex = false;

    double total_rejection() const;
};

/// Spanning forest induced by the support of a vertex routing plan on the
/// bipartite (types + servers) graph. Parents of queues are servers and
/// parents of servers are queues.
struct SpanningForest {
    std::vector<std::optional<int>> parent_of_queue;   // per type
    std::vector<std::vector<int>> children_of_queue;   // per type, servers ascending
    std::vector<std::optional<int>> parent_of_server;  // per server
    std::vector<std::vector<int>> children_of_server;  // per server, types ascending
    std::vector<int> roots;        // root servers, one per component without rejection mass
    std::vector<int> root_queues;  // queues hanging off the rejection server
    std::vector<Line> edges;       // positive-rate lines, ascending
    std::vector<bool> type_in_forest;

    bool contains_type(int type) const { return type_in_forest[type]; }
};

enum class PolicyKind {
    kUcbQr,
    kUcbQrTree,
    kOracle,
    kFcfsAlis,
    kGreedy,
    kRandom,
    kThetaMu,
    kUcbQrLambda,
    kUcbQrMu,
};

std::string to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(const std::string& name);

/// True for the policies that re-solve a routing problem every episode.
bool is_episodic(PolicyKind kind);

/// The routing policy under test and its parameters. Defaults are the
/// values used for the call-center experiments.
struct PolicySpec {
    PolicyKind kind = PolicyKind::kUcbQr;
    double episode_length_h = 120.0;
    double epsilon = 1e-6;
    double penalty_p = 1e3;
    double gamma = 0.0;
    double holt_alpha = 0.5;
    double holt_beta = 0.2;
    double mu_init = 1e-3;
    // Fixed per-line routing rates (aligned with SystemConfig::lines). When
    // set, episodic policies skip estimation and solving and dispatch with
    // these rates and the true payoffs.
    std::optional<std::vector<double>> pinned_rates;

    bool operator==(const PolicySpec&) const = default;
};

struct Violation {
    std::string field;
    std::string message;
};

/// Empty iff every SystemConfig invariant holds. Never throws.
std::vector<Violation> validate_config(const SystemConfig& config);

std::vector<Violation> validate_policy(const PolicySpec& spec, const SystemConfig& config);

}  // namespace ucbqr
