#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucbqr/model.hpp"

namespace ucbqr {

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidSpec : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class CallOutcome { kHandled, kTransfer, kConference, kAbandon, kOther };

CallOutcome parse_outcome(const std::string& text);
std::string to_string(CallOutcome outcome);

/// One agent interaction from a call log. Times are seconds of the day.
struct CallRecord {
    std::string date;
    std::optional<double> vru_entry;
    std::optional<double> q_start;
    std::optional<double> ser_start;
    std::optional<double> ser_exit;
    int type = 0;
    CallOutcome outcome = CallOutcome::kHandled;
    std::string agent_id;
    int agent_group = 0;

    bool operator==(const CallRecord&) const = default;
};

/// Reads the call-log CSV (columns date, vru_entry, q_start, ser_start,
/// ser_exit, type, outcome, agent_id, agent_group, in any order). Abandoned
/// calls are dropped unless keep_abandoned is set.
std::vector<CallRecord> read_call_log(std::istream& in, bool keep_abandoned = false);
std::vector<CallRecord> read_call_log_file(const std::string& path, bool keep_abandoned = false);
void write_call_log(std::ostream& out, const std::vector<CallRecord>& records);

struct AgentScheduleRow {
    std::string date;
    int hour = 0;
    int agent_group = 0;
    int count = 0;
};

/// Agent-schedule CSV: date, hour, agent_group, count.
std::vector<AgentScheduleRow> read_agent_schedule(std::istream& in);
std::vector<AgentScheduleRow> read_agent_schedule_file(const std::string& path);

/// Hourly breakpoints for one group and date; hours without a row get zero agents.
CapacitySchedule capacity_from_schedule(const std::vector<AgentScheduleRow>& rows,
                                        const std::string& date, int agent_group);

struct PayoffTable {
    std::vector<Line> lines;  // in the requested order, dropped lines removed
    std::vector<double> theta;
    std::vector<Line> dropped;  // requested lines with no served calls
};

/// Fraction of served calls not ending in a transfer or conference, per
/// (type, agent group). With no requested lines, every observed pair is used.
PayoffTable derive_payoff(const std::vector<CallRecord>& records,
                          const std::vector<Line>& requested = {});

/// Rescales each type's payoffs to [0,1] by min-max and takes the square
/// root; single-line types get sqrt(theta), flat types get 1.
std::vector<double> transform_payoff(const std::vector<Line>& lines, const std::vector<double>& theta);

/// Lines with at least `threshold` served (non-abandoned) calls.
std::vector<Line> build_compatibility(const std::vector<CallRecord>& records, int threshold = 100);

/// A system ready to simulate, with the original ids of its dense indices.
struct Scenario {
    std::string name;
    SystemConfig config;
    std::vector<int> type_ids;    // dense type index -> original type id
    std::vector<int> server_ids;  // dense server index -> agent group
    double horizon = 0.0;
};

struct LogScenarioOptions {
    std::string date;            // the simulated day
    int threshold = 100;         // compatibility threshold over all given records
    bool transform = false;      // apply transform_payoff
    double horizon = 86400.0;
};

/// Builds a one-day scenario: lines from the threshold rule over all
/// records, payoffs from the chosen day, queue-join times of that day as
/// arrivals, empirical service pools from all records, hourly agent counts.
Scenario build_scenario_from_logs(const std::vector<CallRecord>& records,
                                  const std::vector<AgentScheduleRow>& schedule,
                                  const LogScenarioOptions& options);

/// Adds `count` arrivals of `type` at i.i.d. uniform times in [t1, t2].
Scenario inject_burst(Scenario scenario, int type, int count, double t1, double t2,
                      std::uint64_t seed);

struct SyntheticSpec {
    enum class ServiceKind { kExponential, kLogNormal };

    std::string name = "synthetic";
    int num_types = 0;
    int num_servers = 0;
    std::vector<Line> lines;  // empty: full compatibility
    std::vector<std::vector<RateSegment>> rate_profiles;  // per type
    ServiceKind service_kind = ServiceKind::kExponential;
    std::vector<double> service_means;  // per line, per-agent seconds
    double lognormal_sigma = 0.5;
    std::size_t pool_size = 0;  // > 0: sample empirical pools instead of parametric sources
    std::vector<double> theta;  // per line
    std::vector<CapacitySchedule> capacity;  // per server; empty: one agent each
    double horizon = 3600.0;
    std::uint64_t seed = 1;
    bool materialize_arrivals = true;  // false: keep the Poisson profiles
};

Scenario generate_synthetic(const SyntheticSpec& spec);

/// The 3x3 fully compatible example with lambda = (3, 7, 5) and per-server
/// exponential rates mu = (1, 5, 10).
Scenario appendix_d_scenario(double horizon = 500.0);

/// Vertex routing rates of that example with epsilon = 0.01, aligned with
/// its line order (row-major over type, server).
std::vector<double> appendix_d_rates();

/// Payoffs under which appendix_d_rates() is the unique LP optimum.
std::vector<double> appendix_d_theta();

}  // namespace ucbqr
