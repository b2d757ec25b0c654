#include "ucbqr/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "ucbqr/rng.hpp"

namespace ucbqr {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        std::string field = line.substr(start, pos - start);
        while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back())))
            field.pop_back();
        std::size_t lead = 0;
        while (lead < field.size() && std::isspace(static_cast<unsigned char>(field[lead]))) ++lead;
        out.push_back(field.substr(lead));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

template <class T>
T to_number(const std::string& field, const std::string& column, std::size_t row) {
    T value{};
    auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw CsvError("row " + std::to_string(row) + ": bad " + column + " value '" + field + "'");
    return value;
}

struct CsvTable {
    std::map<std::string, std::size_t> column;
    std::vector<std::vector<std::string>> rows;

    std::size_t index(const std::string& name) const {
        const auto it = column.find(name);
        if (it == column.end()) throw CsvError("missing column '" + name + "'");
        return it->second;
    }
};

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw CsvError("empty CSV input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv(line);
    for (std::size_t c = 0; c < header.size(); ++c) table.column[header[c]] = c;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != header.size())
            throw CsvError("row " + std::to_string(table.rows.size() + 1) + " has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(header.size()));
        table.rows.push_back(std::move(fields));
    }
    return table;
}

std::optional<double> optional_time(const std::string& field, const std::string& column,
                                    std::size_t row) {
    if (field.empty()) return std::nullopt;
    return to_number<double>(field, column, row);
}

std::string fmt_time(const std::optional<double>& t) {
    if (!t) return "";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, *t);
    return std::string(buf, res.ptr);
}

bool served(const CallRecord& r) {
    return r.outcome != CallOutcome::kAbandon && r.ser_start.has_value();
}

}  // namespace

CallOutcome parse_outcome(const std::string& text) {
    const std::string u = upper(text);
    if (u == "AGENT" || u == "HANDLED") return CallOutcome::kHandled;
    if (u == "TRANSFER") return CallOutcome::kTransfer;
    if (u == "CONFERENCE") return CallOutcome::kConference;
    if (u == "HANG" || u == "ABANDON" || u == "ABANDONED") return CallOutcome::kAbandon;
    return CallOutcome::kOther;
}

std::string to_string(CallOutcome outcome) {
    switch (outcome) {
        case CallOutcome::kHandled: return "HANDLED";
        case CallOutcome::kTransfer: return "TRANSFER";
        case CallOutcome::kConference: return "CONFERENCE";
        case CallOutcome::kAbandon: return "ABANDON";
        case CallOutcome::kOther: return "OTHER";
    }
    return "OTHER";
}

std::vector<CallRecord> read_call_log(std::istream& in, bool keep_abandoned) {
    const CsvTable t = read_csv(in);
    const std::size_t c_date = t.index("date"), c_vru = t.index("vru_entry"),
                      c_q = t.index("q_start"), c_ss = t.index("ser_start"),
                      c_se = t.index("ser_exit"), c_type = t.index("type"),
                      c_out = t.index("outcome"), c_agent = t.index("agent_id"),
                      c_group = t.index("agent_group");
    std::vector<CallRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& f = t.rows[r];
        CallRecord rec;
        rec.date = f[c_date];
        rec.vru_entry = optional_time(f[c_vru], "vru_entry", r + 1);
        rec.q_start = optional_time(f[c_q], "q_start", r + 1);
        rec.ser_start = optional_time(f[c_ss], "ser_start", r + 1);
        rec.ser_exit = optional_time(f[c_se], "ser_exit", r + 1);
        rec.type = to_number<int>(f[c_type], "type", r + 1);
        rec.outcome = parse_outcome(f[c_out]);
        rec.agent_id = f[c_agent];
        rec.agent_group = f[c_group].empty() ? -1 : to_number<int>(f[c_group], "agent_group", r + 1);
        if (rec.outcome == CallOutcome::kAbandon && !keep_abandoned) continue;
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<CallRecord> read_call_log_file(const std::string& path, bool keep_abandoned) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    return read_call_log(in, keep_abandoned);
}

void write_call_log(std::ostream& out, const std::vector<CallRecord>& records) {
    out << "date,vru_entry,q_start,ser_start,ser_exit,type,outcome,agent_id,agent_group\n";
    for (const CallRecord& r : records) {
        out << r.date << ',' << fmt_time(r.vru_entry) << ',' << fmt_time(r.q_start) << ','
            << fmt_time(r.ser_start) << ',' << fmt_time(r.ser_exit) << ',' << r.type << ','
            << to_string(r.outcome) << ',' << r.agent_id << ',';
        if (r.agent_group >= 0) out << r.agent_group;
        out << '\n';
    }
}

std::vector<AgentScheduleRow> read_agent_schedule(std::istream& in) {
    const CsvTable t = read_csv(in);
    const std::size_t c_date = t.index("date"), c_hour = t.index("hour"),
                      c_group = t.index("agent_group"), c_count = t.index("count");
    std::vector<AgentScheduleRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& f = t.rows[r];
        AgentScheduleRow row{f[c_date], to_number<int>(f[c_hour], "hour", r + 1),
                             to_number<int>(f[c_group], "agent_group", r + 1),
                             to_number<int>(f[c_count], "count", r + 1)};
        if (row.hour < 0 || row.hour > 23) throw CsvError("row " + std::to_string(r + 1) + ": hour out of range");
        if (row.count < 0) throw CsvError("row " + std::to_string(r + 1) + ": negative count");
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<AgentScheduleRow> read_agent_schedule_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    return read_agent_schedule(in);
}

CapacitySchedule capacity_from_schedule(const std::vector<AgentScheduleRow>& rows,
                                        const std::string& date, int agent_group) {
    std::vector<int> hourly(24, 0);
    for (const auto& r : rows)
        if (r.date == date && r.agent_group == agent_group) hourly[r.hour] = r.count;
    CapacitySchedule sched;
    for (int h = 0; h < 24; ++h) {
        if (h > 0 && hourly[h] == hourly[h - 1]) continue;
        sched.points.push_back({h * 3600.0, hourly[h]});
    }
    return sched;
}

PayoffTable derive_payoff(const std::vector<CallRecord>& records, const std::vector<Line>& requested) {
    std::map<Line, std::pair<std::int64_t, std::int64_t>> counts;  // successes, served
    for (const CallRecord& r : records) {
        if (!served(r)) continue;
        auto& c = counts[Line{r.type, r.agent_group}];
        ++c.second;
        if (r.outcome != CallOutcome::kTransfer && r.outcome != CallOutcome::kConference) ++c.first;
    }
    std::vector<Line> wanted = requested;
    if (wanted.empty())
        for (const auto& [line, c] : counts) wanted.push_back(line);
    PayoffTable table;
    for (const Line& line : wanted) {
        const auto it = counts.find(line);
        if (it == counts.end() || it->second.second == 0) {
            table.dropped.push_back(line);
            continue;
        }
        table.lines.push_back(line);
        table.theta.push_back(static_cast<double>(it->second.first) /
                              static_cast<double>(it->second.second));
    }
    return table;
}

std::vector<double> transform_payoff(const std::vector<Line>& lines, const std::vector<double>& theta) {
    if (lines.size() != theta.size()) throw std::invalid_argument("one payoff per line");
    std::map<int, std::pair<double, double>> range;  // type -> (min, max)
    std::map<int, int> degree;
    for (std::size_t l = 0; l < lines.size(); ++l) {
        auto [it, fresh] = range.try_emplace(lines[l].type, theta[l], theta[l]);
        if (!fresh) {
            it->second.first = std::min(it->second.first, theta[l]);
            it->second.second = std::max(it->second.second, theta[l]);
        }
        ++degree[lines[l].type];
    }
    std::vector<double> out(theta.size());
    for (std::size_t l = 0; l < lines.size(); ++l) {
        const int i = lines[l].type;
        const auto [lo, hi] = range[i];
        if (degree[i] == 1) {
            out[l] = std::sqrt(std::clamp(theta[l], 0.0, 1.0));
        } else if (hi == lo) {
            out[l] = 1.0;
        } else {
            out[l] = std::sqrt((theta[l] - lo) / (hi - lo));
        }
    }
    return out;
}

std::vector<Line> build_compatibility(const std::vector<CallRecord>& records, int threshold) {
    if (threshold < 1) throw std::invalid_argument("threshold must be at least 1");
    std::map<Line, int> counts;
    for (const CallRecord& r : records) {
        if (r.outcome == CallOutcome::kAbandon || r.agent_group < 0) continue;
        ++counts[Line{r.type, r.agent_group}];
    }
    std::vector<Line> out;
    for (const auto& [line, n] : counts)
        if (n >= threshold) out.push_back(line);
    return out;
}

Scenario build_scenario_from_logs(const std::vector<CallRecord>& records,
                                  const std::vector<AgentScheduleRow>& schedule,
                                  const LogScenarioOptions& options) {
    std::vector<CallRecord> day;
    for (const CallRecord& r : records)
        if (r.date == options.date) day.push_back(r);
    if (day.empty()) throw InvalidSpec("no calls on " + options.date);

    const std::vector<Line> compat = build_compatibility(records, options.threshold);
    PayoffTable payoff = derive_payoff(day, compat);

    // Service pools over all given records; lines without any drop out.
    std::map<Line, std::vector<double>> pools;
    for (const CallRecord& r : records) {
        if (!served(r) || !r.ser_exit) continue;
        const double d = *r.ser_exit - *r.ser_start;
        if (d > 0.0) pools[Line{r.type, r.agent_group}].push_back(d);
    }
    std::vector<Line> kept;
    std::vector<double> theta;
    for (std::size_t l = 0; l < payoff.lines.size(); ++l) {
        if (pools[payoff.lines[l]].empty()) continue;
        kept.push_back(payoff.lines[l]);
        theta.push_back(payoff.theta[l]);
    }
    if (kept.empty()) throw InvalidSpec("no line has both payoff and service observations");
    if (options.transform) theta = transform_payoff(kept, theta);

    Scenario sc;
    sc.name = "log-" + options.date;
    sc.horizon = options.horizon;
    std::map<int, int> type_index, server_index;
    for (const Line& line : kept) {
        type_index.try_emplace(line.type, 0);
        server_index.try_emplace(line.server, 0);
    }
    for (auto& [id, idx] : type_index) {
        idx = static_cast<int>(sc.type_ids.size());
        sc.type_ids.push_back(id);
    }
    for (auto& [id, idx] : server_index) {
        idx = static_cast<int>(sc.server_ids.size());
        sc.server_ids.push_back(id);
    }

    SystemConfig& cfg = sc.config;
    cfg.num_types = static_cast<int>(sc.type_ids.size());
    cfg.num_servers = static_cast<int>(sc.server_ids.size());
    for (std::size_t l = 0; l < kept.size(); ++l) {
        cfg.lines.push_back({type_index[kept[l].type], server_index[kept[l].server]});
        cfg.service.emplace_back(EmpiricalService{pools[kept[l]]});
        cfg.payoff.push_back(theta[l]);
    }
    cfg.arrivals.resize(sc.type_ids.size());
    for (const CallRecord& r : day) {
        const auto it = type_index.find(r.type);
        if (it == type_index.end()) continue;
        const auto t = r.q_start ? r.q_start : r.vru_entry;
        if (!t || *t < 0.0 || *t > options.horizon) continue;
        cfg.arrivals[it->second].timestamps.push_back(*t);
    }
    for (auto& a : cfg.arrivals) std::sort(a.timestamps.begin(), a.timestamps.end());
    for (int group : sc.server_ids)
        cfg.capacity.push_back(capacity_from_schedule(schedule, options.date, group));
    return sc;
}

Scenario inject_burst(Scenario scenario, int type, int count, double t1, double t2,
                      std::uint64_t seed) {
    if (type < 0 || type >= scenario.config.num_types)
        throw std::invalid_argument("burst type out of range");
    if (!(t1 < t2)) throw std::invalid_argument("burst window must have t1 < t2");
    if (count < 0) throw std::invalid_argument("burst count must be nonnegative");
    if (count == 0) return scenario;
    Rng rng = make_stream(seed, "burst", static_cast<std::uint64_t>(type));
    std::vector<double> extra(static_cast<std::size_t>(count));
    for (double& t : extra) t = t1 + (t2 - t1) * uniform01(rng);
    std::sort(extra.begin(), extra.end());
    auto& ts = scenario.config.arrivals[type].timestamps;
    std::vector<double> merged;
    merged.reserve(ts.size() + extra.size());
    std::merge(ts.begin(), ts.end(), extra.begin(), extra.end(), std::back_inserter(merged));
    ts = std::move(merged);
    return scenario;
}

Scenario generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_types <= 0 || spec.num_servers <= 0)
        throw InvalidSpec("type and server counts must be positive");
    if (!(spec.horizon > 0.0)) throw InvalidSpec("horizon must be positive");
    std::vector<Line> lines = spec.lines;
    if (lines.empty()) {
        for (int i = 0; i < spec.num_types; ++i)
            for (int j = 0; j < spec.num_servers; ++j) lines.push_back({i, j});
    }
    if (spec.rate_profiles.size() != static_cast<std::size_t>(spec.num_types))
        throw InvalidSpec("need one rate profile per type");
    if (spec.service_means.size() != lines.size()) throw InvalidSpec("need one service mean per line");
    if (spec.theta.size() != lines.size()) throw InvalidSpec("need one payoff per line");
    if (!spec.capacity.empty() && spec.capacity.size() != static_cast<std::size_t>(spec.num_servers))
        throw InvalidSpec("need one capacity schedule per server");
    for (double m : spec.service_means)
        if (!(m > 0.0)) throw InvalidSpec("service means must be positive");

    Scenario sc;
    sc.name = spec.name;
    sc.horizon = spec.horizon;
    for (int i = 0; i < spec.num_types; ++i) sc.type_ids.push_back(i);
    for (int j = 0; j < spec.num_servers; ++j) sc.server_ids.push_back(j);

    SystemConfig& cfg = sc.config;
    cfg.num_types = spec.num_types;
    cfg.num_servers = spec.num_servers;
    cfg.lines = lines;
    cfg.payoff = spec.theta;
    cfg.capacity = spec.capacity.empty()
                       ? std::vector<CapacitySchedule>(static_cast<std::size_t>(spec.num_servers))
                       : spec.capacity;

    const double sigma = spec.lognormal_sigma;
    for (std::size_t l = 0; l < lines.size(); ++l) {
        ServiceSource src;
        if (spec.service_kind == SyntheticSpec::ServiceKind::kExponential) {
            src = ExponentialService{spec.service_means[l]};
        } else {
            // Pick log_mean so the mean duration matches.
            src = LogNormalService{std::log(spec.service_means[l]) - 0.5 * sigma * sigma, sigma};
        }
        if (spec.pool_size > 0) {
            Rng rng = make_stream(spec.seed, "synthetic-service", l);
            EmpiricalService pool;
            pool.pool.reserve(spec.pool_size);
            for (std::size_t k = 0; k < spec.pool_size; ++k) {
                if (const auto* e = std::get_if<ExponentialService>(&src)) {
                    pool.pool.push_back(e->mean * standard_exponential(rng));
                } else {
                    const auto& ln = std::get<LogNormalService>(src);
                    // Box-Muller keeps the draw independent of the library's normal sampler.
                    const double z = std::sqrt(-2.0 * std::log(uniform_open01(rng))) *
                                     std::cos(2.0 * 3.141592653589793 * uniform01(rng));
                    pool.pool.push_back(std::exp(ln.log_mean + ln.log_sd * z));
                }
            }
            src = std::move(pool);
        }
        cfg.service.push_back(std::move(src));
    }

    cfg.arrivals.resize(static_cast<std::size_t>(spec.num_types));
    for (int i = 0; i < spec.num_types; ++i) {
        const auto& prof = spec.rate_profiles[i];
        for (std::size_t s = 0; s < prof.size(); ++s) {
            if (!(prof[s].rate >= 0.0) || (s > 0 && !(prof[s].start > prof[s - 1].start)))
                throw InvalidSpec("rate profile of type " + std::to_string(i) + " is malformed");
        }
        if (!spec.materialize_arrivals) {
            cfg.arrivals[i].poisson_profile = prof;
            continue;
        }
        Rng rng = make_stream(spec.seed, "synthetic-arrivals", static_cast<std::uint64_t>(i));
        auto& ts = cfg.arrivals[i].timestamps;
        for (std::size_t s = 0; s < prof.size(); ++s) {
            const double end = std::min(s + 1 < prof.size() ? prof[s + 1].start : spec.horizon,
                                        spec.horizon);
            if (prof[s].rate <= 0.0) continue;
            double t = prof[s].start;
            for (;;) {
                t += standard_exponential(rng) / prof[s].rate;
                if (t >= end) break;
                ts.push_back(t);
            }
        }
    }
    return sc;
}

Scenario appendix_d_scenario(double horizon) {
    SyntheticSpec spec;
    spec.name = "appendix-d";
    spec.num_types = 3;
    spec.num_servers = 3;
    const double lambda[3] = {3.0, 7.0, 5.0};
    const double mu[3] = {1.0, 5.0, 10.0};
    for (int i = 0; i < 3; ++i) spec.rate_profiles.push_back({{0.0, lambda[i]}});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) spec.service_means.push_back(1.0 / mu[j]);
    spec.theta = appendix_d_theta();
    spec.horizon = horizon;
    spec.materialize_arrivals = false;
    return generate_synthetic(spec);
}

std::vector<double> appendix_d_rates() {
    return {0.99, 2.01, 0.0, 0.0, 2.94, 4.06, 0.0, 0.0, 5.0};
}

std::vector<double> appendix_d_theta() {
    return {1.0, 0.9, 0.3, 0.4, 0.7, 0.5, 0.2, 0.3, 0.6};
}

}  // namespace ucbqr
