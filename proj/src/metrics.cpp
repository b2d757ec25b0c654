#include "ucbqr/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "json.hpp"

namespace ucbqr {

namespace {

constexpr double kZ95 = 1.959963984540054;

std::map<std::pair<int, int>, int> line_lookup(const std::vector<Line>& lines) {
    std::map<std::pair<int, int>, int> out;
    for (std::size_t l = 0; l < lines.size(); ++l)
        out[{lines[l].type, lines[l].server}] = static_cast<int>(l);
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> ci_half_width(const std::vector<double>& v) {
    if (v.size() < 2) return std::nullopt;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return kZ95 * sd / std::sqrt(static_cast<double>(v.size()));
}

// Linear interpolation between closest ranks.
double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> series_times_for(double horizon, double bin_width) {
    std::vector<double> times;
    for (int b = 1;; ++b) {
        const double t = b * bin_width;
        if (t > horizon) break;
        times.push_back(t);
    }
    if (times.empty() || times.back() < horizon) times.push_back(horizon);
    return times;
}

std::string num(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::pair<double, double>> waiting_times(const EventLog& log) {
    std::unordered_map<std::int64_t, double> arrival;
    std::vector<std::pair<double, double>> out;
    for (const LogRecord& r : log.records) {
        if (r.kind == RecordKind::kArrival) {
            arrival[r.customer] = r.time;
        } else if (r.kind == RecordKind::kServiceStart) {
            const auto it = arrival.find(r.customer);
            if (it == arrival.end()) continue;
            out.emplace_back(it->second, r.time - it->second);
        }
    }
    return out;
}

ReplicationKpis replication_kpis(const EventLog& log, const std::vector<Line>& lines) {
    const auto lookup = line_lookup(lines);
    ReplicationKpis k;
    k.routing_volume.assign(lines.size(), 0);
    k.line_payoff.assign(lines.size(), 0.0);
    k.busy_fraction.assign(static_cast<std::size_t>(log.num_servers), 0.0);
    std::vector<double> busy(static_cast<std::size_t>(log.num_servers), 0.0);
    std::vector<std::optional<double>> busy_since(static_cast<std::size_t>(log.num_servers));

    for (const LogRecord& r : log.records) {
        switch (r.kind) {
            case RecordKind::kArrival: ++k.arrivals; break;
            case RecordKind::kServiceStart: busy_since[r.server] = r.time; break;
            case RecordKind::kDeparture: {
                ++k.completions;
                k.total_payoff += r.payoff;
                const auto it = lookup.find({r.type, r.server});
                if (it != lookup.end()) {
                    ++k.routing_volume[it->second];
                    k.line_payoff[it->second] += r.payoff;
                }
                if (busy_since[r.server]) busy[r.server] += r.time - *busy_since[r.server];
                busy_since[r.server].reset();
                break;
            }
            default: break;
        }
    }
    for (int j = 0; j < log.num_servers; ++j) {
        if (busy_since[j]) busy[j] += log.horizon - *busy_since[j];
        k.busy_fraction[j] = log.horizon > 0.0 ? busy[j] / log.horizon : 0.0;
    }
    const double mean_busy = mean_of(k.busy_fraction);
    for (double b : k.busy_fraction) k.load_variance += (b - mean_busy) * (b - mean_busy);
    if (k.completions > 0)
        k.payoff_per_completion = k.total_payoff / static_cast<double>(k.completions);

    const auto waits = waiting_times(log);
    k.served = static_cast<std::int64_t>(waits.size());
    double total_wait = 0.0;
    for (const auto& w : waits) total_wait += w.second;
    if (!waits.empty()) k.mean_wait = total_wait / static_cast<double>(waits.size());
    return k;
}

ReplicationDigest digest_log(const EventLog& log, const std::vector<Line>& lines,
                             const KpiOptions& options) {
    if (!(options.bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
    const auto lookup = line_lookup(lines);
    ReplicationDigest d;
    d.num_types = log.num_types;
    d.num_servers = log.num_servers;
    d.horizon = log.horizon;
    d.kpis = replication_kpis(log, lines);

    const auto num_bins =
        static_cast<std::size_t>(std::max(1.0, std::ceil(log.horizon / options.bin_width)));
    d.bin_wait_sum.assign(num_bins, 0.0);
    d.bin_count.assign(num_bins, 0);
    for (const auto& [arrival, wait] : waiting_times(log)) {
        const auto b = std::min(static_cast<std::size_t>(arrival / options.bin_width), num_bins - 1);
        d.bin_wait_sum[b] += wait;
        ++d.bin_count[b];
        if (arrival >= options.office_start && arrival < options.office_end)
            d.office_waits.push_back(wait);
    }

    const std::vector<double> times = series_times_for(log.horizon, options.bin_width);
    d.departures_at.assign(lines.size(), std::vector<double>(times.size(), 0.0));
    d.queued_at.assign(static_cast<std::size_t>(log.num_types),
                       std::vector<double>(times.size(), 0.0));
    std::vector<std::int64_t> departures(lines.size(), 0);
    std::vector<std::int64_t> queued(static_cast<std::size_t>(log.num_types), 0);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < times.size(); ++s) {
        while (pos < log.records.size() && log.records[pos].time <= times[s]) {
            const LogRecord& r = log.records[pos++];
            if (r.kind == RecordKind::kArrival) {
                ++queued[r.type];
            } else if (r.kind == RecordKind::kServiceStart) {
                --queued[r.type];
            } else if (r.kind == RecordKind::kDeparture) {
                const auto it = lookup.find({r.type, r.server});
                if (it != lookup.end()) ++departures[it->second];
            }
        }
        for (std::size_t l = 0; l < lines.size(); ++l)
            d.departures_at[l][s] = static_cast<double>(departures[l]);
        for (int i = 0; i < log.num_types; ++i) d.queued_at[i][s] = static_cast<double>(queued[i]);
    }
    return d;
}

KpiReport aggregate_digests(const std::vector<ReplicationDigest>& digests,
                            const std::vector<Line>& lines, const KpiOptions& options) {
    if (digests.empty()) throw EmptyLog("no replications to aggregate");
    const ReplicationDigest& first = digests.front();
    for (const ReplicationDigest& d : digests) {
        if (d.num_types != first.num_types || d.num_servers != first.num_servers ||
            d.horizon != first.horizon || d.bin_count.size() != first.bin_count.size())
            throw std::invalid_argument("replications do not share one scenario");
    }

    KpiReport rep;
    rep.replications = static_cast<int>(digests.size());
    rep.horizon = first.horizon;
    rep.lines = lines;
    rep.series_times = series_times_for(first.horizon, options.bin_width);
    const std::size_t num_times = rep.series_times.size();
    const std::size_t num_bins = first.bin_count.size();
    rep.routing_volume.assign(lines.size(), 0.0);
    rep.server_load.assign(static_cast<std::size_t>(first.num_servers), 0.0);
    rep.empirical_rates.assign(lines.size(), std::vector<double>(num_times, 0.0));
    rep.queue_lengths.assign(static_cast<std::size_t>(first.num_types),
                             std::vector<double>(num_times, 0.0));

    std::vector<double> totals;
    std::vector<double> mean_waits;
    std::int64_t completions = 0;
    double payoff_sum = 0.0;
    std::vector<std::vector<double>> bin_means(num_bins);
    std::vector<std::size_t> bin_obs(num_bins, 0);
    std::vector<double> office;

    for (const ReplicationDigest& d : digests) {
        const ReplicationKpis& k = d.kpis;
        totals.push_back(k.total_payoff);
        if (k.served > 0) mean_waits.push_back(k.mean_wait);
        completions += k.completions;
        payoff_sum += k.total_payoff;
        for (std::size_t l = 0; l < lines.size(); ++l)
            rep.routing_volume[l] += static_cast<double>(k.routing_volume[l]);
        for (int j = 0; j < first.num_servers; ++j) rep.server_load[j] += k.busy_fraction[j];
        for (std::size_t b = 0; b < num_bins; ++b) {
            if (d.bin_count[b] == 0) continue;
            bin_means[b].push_back(d.bin_wait_sum[b] / static_cast<double>(d.bin_count[b]));
            bin_obs[b] += d.bin_count[b];
        }
        office.insert(office.end(), d.office_waits.begin(), d.office_waits.end());
        for (std::size_t l = 0; l < lines.size(); ++l)
            for (std::size_t s = 0; s < num_times; ++s)
                rep.empirical_rates[l][s] += d.departures_at[l][s] / rep.series_times[s];
        for (int i = 0; i < first.num_types; ++i)
            for (std::size_t s = 0; s < num_times; ++s) rep.queue_lengths[i][s] += d.queued_at[i][s];
        rep.per_replication.push_back(k);
    }

    const double r = static_cast<double>(digests.size());
    for (double& v : rep.routing_volume) v /= r;
    for (double& v : rep.server_load) v /= r;
    for (auto& series : rep.empirical_rates)
        for (double& v : series) v /= r;
    for (auto& series : rep.queue_lengths)
        for (double& v : series) v /= r;
    const double mean_load = mean_of(rep.server_load);
    for (double b : rep.server_load) rep.load_variance += (b - mean_load) * (b - mean_load);

    rep.total_payoff = mean_of(totals);
    rep.total_payoff_ci = ci_half_width(totals);
    rep.payoff_per_completion = completions > 0 ? payoff_sum / static_cast<double>(completions) : 0.0;
    rep.mean_wait = mean_of(mean_waits);
    rep.mean_wait_ci = ci_half_width(mean_waits);

    for (std::size_t b = 0; b < num_bins; ++b) {
        BinStat stat;
        stat.start = static_cast<double>(b) * options.bin_width;
        stat.observations = bin_obs[b];
        stat.mean = mean_of(bin_means[b]);
        if (bin_obs[b] >= options.min_ci_observations) {
            if (const auto hw = ci_half_width(bin_means[b])) {
                stat.ci_low = stat.mean - *hw;
                stat.ci_high = stat.mean + *hw;
            }
        }
        rep.waiting_time_series.push_back(stat);
    }

    std::sort(office.begin(), office.end());
    rep.office_hours_waiting.count = office.size();
    rep.office_hours_waiting.q1 = quantile(office, 0.25);
    rep.office_hours_waiting.median = quantile(office, 0.5);
    rep.office_hours_waiting.q3 = quantile(office, 0.75);
    return rep;
}

KpiReport compute_kpis(const std::vector<EventLog>& logs, const std::vector<Line>& lines,
                       const KpiOptions& options) {
    if (logs.empty()) throw EmptyLog("no event logs to aggregate");
    std::vector<ReplicationDigest> digests;
    digests.reserve(logs.size());
    for (const EventLog& log : logs) digests.push_back(digest_log(log, lines, options));
    return aggregate_digests(digests, lines, options);
}

double relative_payoff(const KpiReport& policy, const KpiReport& oracle) {
    if (oracle.total_payoff == 0.0) throw ZeroOracle("oracle payoff is zero");
    return policy.total_payoff / oracle.total_payoff;
}

void write_report_csv(std::ostream& out, const KpiReport& report) {
    auto row = [&](const std::string& metric, const std::string& index, double time, double value,
                   std::optional<double> lo = std::nullopt, std::optional<double> hi = std::nullopt) {
        out << metric << ',' << index << ',' << num(time) << ',' << num(value) << ','
            << (lo ? num(*lo) : "") << ',' << (hi ? num(*hi) : "") << '\n';
    };
    auto line_name = [&](std::size_t l) {
        return std::to_string(report.lines[l].type) + ":" + std::to_string(report.lines[l].server);
    };
    out << "metric,index,time,value,ci_low,ci_high\n";
    row("replications", "", 0.0, report.replications);
    const auto pci = report.total_payoff_ci;
    row("total_payoff", "", report.horizon, report.total_payoff,
        pci ? std::optional(report.total_payoff - *pci) : std::nullopt,
        pci ? std::optional(report.total_payoff + *pci) : std::nullopt);
    row("payoff_per_completion", "", report.horizon, report.payoff_per_completion);
    if (report.payoff_relative_to_oracle)
        row("payoff_relative_to_oracle", "", report.horizon, *report.payoff_relative_to_oracle);
    const auto wci = report.mean_wait_ci;
    row("mean_wait", "", report.horizon, report.mean_wait,
        wci ? std::optional(report.mean_wait - *wci) : std::nullopt,
        wci ? std::optional(report.mean_wait + *wci) : std::nullopt);
    row("load_variance", "", report.horizon, report.load_variance);
    row("office_wait_q1", "", 0.0, report.office_hours_waiting.q1);
    row("office_wait_median", "", 0.0, report.office_hours_waiting.median);
    row("office_wait_q3", "", 0.0, report.office_hours_waiting.q3);
    for (std::size_t l = 0; l < report.routing_volume.size(); ++l)
        row("routing_volume", line_name(l), report.horizon, report.routing_volume[l]);
    for (std::size_t j = 0; j < report.server_load.size(); ++j)
        row("server_load", std::to_string(j), report.horizon, report.server_load[j]);
    for (const BinStat& b : report.waiting_time_series) {
        if (b.observations == 0) continue;
        row("waiting_time", "", b.start, b.mean, b.ci_low, b.ci_high);
    }
    for (std::size_t l = 0; l < report.empirical_rates.size(); ++l)
        for (std::size_t s = 0; s < report.series_times.size(); ++s)
            row("empirical_rate", line_name(l), report.series_times[s], report.empirical_rates[l][s]);
    for (std::size_t i = 0; i < report.queue_lengths.size(); ++i)
        for (std::size_t s = 0; s < report.series_times.size(); ++s)
            row("queue_length", std::to_string(i), report.series_times[s], report.queue_lengths[i][s]);
}

std::string report_to_json(const KpiReport& report) {
    using nlohmann::json;
    json j;
    j["replications"] = report.replications;
    j["horizon"] = report.horizon;
    j["total_payoff"] = report.total_payoff;
    j["total_payoff_ci"] = report.total_payoff_ci ? json(*report.total_payoff_ci) : json(nullptr);
    j["payoff_per_completion"] = report.payoff_per_completion;
    j["mean_wait"] = report.mean_wait;
    j["mean_wait_ci"] = report.mean_wait_ci ? json(*report.mean_wait_ci) : json(nullptr);
    j["payoff_relative_to_oracle"] =
        report.payoff_relative_to_oracle ? json(*report.payoff_relative_to_oracle) : json(nullptr);
    j["load_variance"] = report.load_variance;
    j["office_hours_waiting"] = {{"count", report.office_hours_waiting.count},
                                 {"q1", report.office_hours_waiting.q1},
                                 {"median", report.office_hours_waiting.median},
                                 {"q3", report.office_hours_waiting.q3}};
    json lines = json::array();
    for (std::size_t l = 0; l < report.lines.size(); ++l) {
        lines.push_back({{"type", report.lines[l].type},
                         {"server", report.lines[l].server},
                         {"routing_volume", report.routing_volume[l]},
                         {"empirical_rate", report.empirical_rates[l]}});
    }
    j["lines"] = lines;
    j["server_load"] = report.server_load;
    j["series_times"] = report.series_times;
    j["queue_lengths"] = report.queue_lengths;
    json bins = json::array();
    for (const BinStat& b : report.waiting_time_series) {
        if (b.observations == 0) continue;
        bins.push_back({{"start", b.start},
                        {"observations", b.observations},
                        {"mean", b.mean},
                        {"ci_low", b.ci_low ? json(*b.ci_low) : json(nullptr)},
                        {"ci_high", b.ci_high ? json(*b.ci_high) : json(nullptr)}});
    }
    j["waiting_time_series"] = bins;
    return j.dump(2);
}

}  // namespace ucbqr
