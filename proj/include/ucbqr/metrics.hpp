#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucbqr/event_log.hpp"
#include "ucbqr/model.hpp"

namespace ucbqr {

class EmptyLog : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ZeroOracle : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct KpiOptions {
    double bin_width = 60.0;
    double office_start = 6.0 * 3600.0;
    double office_end = 21.0 * 3600.0;
    std::size_t min_ci_observations = 5;
};

/// Mean over replications of a binned quantity. The interval is a normal
/// approximation and is absent for fewer than two replications or fewer
/// than min_ci_observations pooled observations.
struct BinStat {
    double start = 0.0;
    std::size_t observations = 0;
    double mean = 0.0;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
};

struct Quartiles {
    std::size_t count = 0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

struct ReplicationKpis {
    double total_payoff = 0.0;
    std::int64_t arrivals = 0;
    std::int64_t completions = 0;
    double payoff_per_completion = 0.0;
    double mean_wait = 0.0;  // over customers whose service started
    std::int64_t served = 0;
    std::vector<std::int64_t> routing_volume;  // per line
    std::vector<double> line_payoff;           // per line, sum of draws
    std::vector<double> busy_fraction;         // per server
    double load_variance = 0.0;                // of busy fractions
};

struct KpiReport {
    int replications = 0;
    double horizon = 0.0;
    std::vector<Line> lines;

    double total_payoff = 0.0;  // mean over replications
    std::optional<double> total_payoff_ci;  // half-width
    double payoff_per_completion = 0.0;
    double mean_wait = 0.0;
    std::optional<double> mean_wait_ci;
    std::optional<double> payoff_relative_to_oracle;

    std::vector<BinStat> waiting_time_series;  // binned by arrival time
    Quartiles office_hours_waiting;
    std::vector<double> routing_volume;  // per line, mean per replication
    std::vector<double> server_load;     // per server, mean busy fraction at the horizon
    double load_variance = 0.0;

    std::vector<double> series_times;  // bin boundaries (excluding 0)
    std::vector<std::vector<double>> empirical_rates;  // per line, D_ij(t)/t per series time
    std::vector<std::vector<double>> queue_lengths;    // per type, per series time

    std::vector<ReplicationKpis> per_replication;
};

ReplicationKpis replication_kpis(const EventLog& log, const std::vector<Line>& lines);

/// Compact per-replication summary from which reports are aggregated, so
/// logs can be discarded as soon as a replication finishes.
struct ReplicationDigest {
    int num_types = 0;
    int num_servers = 0;
    double horizon = 0.0;
    ReplicationKpis kpis;
    std::vector<double> bin_wait_sum;  // by arrival-time bin
    std::vector<std::size_t> bin_count;
    std::vector<std::vector<double>> departures_at;  // per line, per series time
    std::vector<std::vector<double>> queued_at;      // per type, per series time
    std::vector<double> office_waits;
};

ReplicationDigest digest_log(const EventLog& log, const std::vector<Line>& lines,
                             const KpiOptions& options = {});

KpiReport aggregate_digests(const std::vector<ReplicationDigest>& digests,
                            const std::vector<Line>& lines, const KpiOptions& options = {});

KpiReport compute_kpis(const std::vector<EventLog>& logs, const std::vector<Line>& lines,
                       const KpiOptions& options = {});

/// Ratio of mean total payoffs.
double relative_payoff(const KpiReport& policy, const KpiReport& oracle);

/// Flat CSV: metric,index,time,value,ci_low,ci_high.
void write_report_csv(std::ostream& out, const KpiReport& report);
std::string report_to_json(const KpiReport& report);

/// Waiting times of served customers, paired with their arrival times.
std::vector<std::pair<double, double>> waiting_times(const EventLog& log);

}  // namespace ucbqr
