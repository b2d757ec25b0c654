#include "ucbqr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "ucbqr/config_io.hpp"
#include "ucbqr/engine.hpp"
#include "ucbqr/lp.hpp"
#include "ucbqr/rng.hpp"

namespace ucbqr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::optional<SweepAxis> parse_axis(const std::string& name) {
    for (SweepAxis a : {SweepAxis::kEpisodeLength, SweepAxis::kGamma, SweepAxis::kMuInit})
        if (to_string(a) == name) return a;
    return std::nullopt;
}

void apply_sweep(PolicySpec& spec, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::kEpisodeLength: spec.episode_length_h = value; break;
        case SweepAxis::kGamma: spec.gamma = value; break;
        case SweepAxis::kMuInit: spec.mu_init = value; break;
    }
}

double planned_load_variance(const std::vector<EpisodeSnapshot>& snapshots,
                             const SystemConfig& config) {
    if (snapshots.empty()) return 0.0;
    double total = 0.0;
    for (const EpisodeSnapshot& s : snapshots) {
        std::vector<double> rho(config.num_servers, 0.0);
        std::vector<bool> present(config.num_servers, false);
        for (std::size_t l = 0; l < config.lines.size(); ++l) {
            if (!(s.mu_hat[l] > 0.0)) continue;
            present[config.lines[l].server] = true;
            rho[config.lines[l].server] += s.rates[l] / s.mu_hat[l];
        }
        double sum = 0.0;
        int n = 0;
        for (int j = 0; j < config.num_servers; ++j)
            if (present[j]) {
                sum += rho[j];
                ++n;
            }
        if (n == 0) continue;
        const double mean = sum / n;
        for (int j = 0; j < config.num_servers; ++j)
            if (present[j]) total += (rho[j] - mean) * (rho[j] - mean);
    }
    return total / static_cast<double>(snapshots.size());
}

std::string cell_stem(const std::string& label, const std::optional<Sweep>& sweep,
                      std::optional<double> value) {
    std::string stem = "cell_" + label;
    if (sweep && value) stem += "_" + to_string(sweep->axis) + "-" + num(*value);
    return stem;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

// ---- preset scenarios ----------------------------------------------------

// Hourly profile scaled by `total` and split by `shares`.
std::vector<std::vector<RateSegment>> hourly_profiles(const std::vector<double>& hourly_level,
                                                      double total,
                                                      const std::vector<double>& shares) {
    std::vector<std::vector<RateSegment>> out(shares.size());
    for (std::size_t i = 0; i < shares.size(); ++i)
        for (std::size_t h = 0; h < hourly_level.size(); ++h)
            out[i].push_back({3600.0 * static_cast<double>(h), total * shares[i] * hourly_level[h]});
    return out;
}

CapacitySchedule day_shift(int night, int day, double from_hour, double to_hour) {
    CapacitySchedule c;
    c.points.push_back({0.0, night});
    c.points.push_back({from_hour * 3600.0, day});
    c.points.push_back({to_hour * 3600.0, night});
    return c;
}

SyntheticSpec burst_day_spec() {
    SyntheticSpec s;
    s.name = "burst-day";
    s.num_types = 5;
    s.num_servers = 4;
    const std::vector<double> level = {0.1, 0.1, 0.1, 0.1, 0.1, 0.15, 0.4, 0.7, 1.0, 1.0, 1.0, 1.0,
                                       1.0, 1.0, 1.0, 1.0, 1.0, 0.9,  0.7, 0.6, 0.5, 0.3, 0.2, 0.1};
    s.rate_profiles = hourly_profiles(level, 2.0, {0.3, 0.25, 0.2, 0.15, 0.1});
    const double theta[5][4] = {{0.85, 0.70, 0.60, 0.75},
                                {0.60, 0.90, 0.80, 0.65},
                                {0.70, 0.75, 0.95, 0.60},
                                {0.80, 0.60, 0.70, 0.90},
                                {0.65, 0.85, 0.75, 0.80}};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) {
            s.theta.push_back(theta[i][j]);
            s.service_means.push_back(16.0 + 2.0 * ((i + 2 * j) % 4));
        }
    for (int j = 0; j < 4; ++j) s.capacity.push_back(day_shift(6, 20, 6.0, 22.0));
    s.horizon = 16.0 * 3600.0;
    s.seed = 11;
    s.materialize_arrivals = false;
    return s;
}

SyntheticSpec varying_day_spec() {
    SyntheticSpec s;
    s.name = "rotating-day";
    s.num_types = 3;
    s.num_servers = 3;
    // One type at a time is busy for an hour, round robin. The busy type
    // outgrows its favourite server, so stale forecasts overload it.
    s.rate_profiles.resize(3);
    for (int block = 0; block < 24; ++block)
        for (int i = 0; i < 3; ++i)
            s.rate_profiles[i].push_back({3600.0 * block, (block + i) % 3 == 0 ? 1.5 : 0.5});
    s.theta = {0.9, 0.8, 0.75, 0.75, 0.9, 0.8, 0.8, 0.75, 0.9};
    s.service_means.assign(9, 8.0);
    for (int j = 0; j < 3; ++j) s.capacity.push_back(CapacitySchedule{{{0.0, 10}}});
    s.horizon = 24.0 * 3600.0;
    s.seed = 23;
    s.materialize_arrivals = false;
    return s;
}

SyntheticSpec ramp_day_spec() {
    SyntheticSpec s;
    s.name = "morning-ramp";
    s.num_types = 2;
    s.num_servers = 3;
    // Server 0 works around the clock; servers 1 and 2 (the better ones)
    // start at 07:00.
    const std::vector<double> level = {0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0};
    s.rate_profiles = hourly_profiles(level, 1.5, {0.5, 0.5});
    const double theta[2][3] = {{0.6, 0.9, 0.85}, {0.55, 0.85, 0.9}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) {
            s.theta.push_back(theta[i][j]);
            s.service_means.push_back(10.0);
        }
    s.capacity.push_back(CapacitySchedule{{{0.0, 12}}});
    s.capacity.push_back(day_shift(0, 6, 7.0, 24.0));
    s.capacity.push_back(day_shift(0, 6, 7.0, 24.0));
    s.horizon = 12.0 * 3600.0;
    s.seed = 31;
    s.materialize_arrivals = false;
    return s;
}

SyntheticSpec fairness_demo_spec() {
    SyntheticSpec s;
    s.name = "fairness-demo";
    s.num_types = 2;
    s.num_servers = 3;
    s.rate_profiles = {{{0.0, 0.5}}, {{0.0, 0.3}}};
    s.theta = {0.9, 0.6, 0.5, 0.8, 0.7, 0.4};
    s.service_means = std::vector<double>(6, 2.0);
    s.horizon = 4.0 * 3600.0;
    s.seed = 5;
    s.materialize_arrivals = false;
    return s;
}

ScenarioSpec synthetic(SyntheticSpec spec) {
    ScenarioSpec sc;
    sc.kind = ScenarioSpec::Kind::kSynthetic;
    sc.synthetic = std::move(spec);
    return sc;
}

NamedPolicy named(PolicyKind kind) {
    PolicySpec spec;
    spec.kind = kind;
    return {to_string(kind), spec};
}

}  // namespace

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::kEpisodeLength: return "episode_length_h";
        case SweepAxis::kGamma: return "gamma";
        case SweepAxis::kMuInit: return "mu_init";
    }
    return "unknown";
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigParseError(std::string("not valid JSON: ") + e.what());
    }
    try {
        ExperimentConfig c;
        if (j.contains("name")) c.name = j.at("name").get<std::string>();
        const json& sc = j.at("scenario");
        const std::string kind = sc.at("kind").get<std::string>();
        if (kind == "synthetic") {
            c.scenario.kind = ScenarioSpec::Kind::kSynthetic;
            c.scenario.synthetic = synthetic_spec_from_json(sc.at("spec"));
        } else if (kind == "appendix_d") {
            c.scenario.kind = ScenarioSpec::Kind::kAppendixD;
            if (sc.contains("horizon")) c.scenario.appendix_d_horizon = sc.at("horizon").get<double>();
        } else if (kind == "call_log") {
            c.scenario.kind = ScenarioSpec::Kind::kCallLog;
            c.scenario.calls_path = sc.at("calls").get<std::string>();
            c.scenario.schedule_path = sc.at("schedule").get<std::string>();
            c.scenario.log_options.date = sc.at("date").get<std::string>();
            if (sc.contains("threshold")) c.scenario.log_options.threshold = sc.at("threshold").get<int>();
            if (sc.contains("transform")) c.scenario.log_options.transform = sc.at("transform").get<bool>();
            if (sc.contains("horizon")) c.scenario.log_options.horizon = sc.at("horizon").get<double>();
        } else if (kind == "inline") {
            c.scenario.kind = ScenarioSpec::Kind::kInline;
            c.scenario.inline_config = system_config_from_json(sc.at("config"));
            c.scenario.inline_horizon = sc.at("horizon").get<double>();
        } else {
            throw ConfigParseError("unknown scenario kind '" + kind + "'");
        }
        if (sc.contains("bursts")) {
            for (const json& b : sc.at("bursts"))
                c.scenario.bursts.push_back({b.at("type").get<int>(), b.at("count").get<int>(),
                                             b.at("start").get<double>(), b.at("end").get<double>()});
        }
        if (sc.contains("burst_seed")) c.scenario.burst_seed = sc.at("burst_seed").get<std::uint64_t>();

        for (const json& p : j.at("policies")) {
            NamedPolicy np;
            np.spec = policy_spec_from_json(p);
            np.label = p.contains("label") ? p.at("label").get<std::string>() : to_string(np.spec.kind);
            c.policies.push_back(std::move(np));
        }
        if (c.policies.empty()) throw ConfigParseError("at least one policy is required");
        std::map<std::string, int> seen;
        for (NamedPolicy& np : c.policies) {
            const int n = ++seen[np.label];
            if (n > 1) np.label += "_" + std::to_string(n);
        }
        if (j.contains("replications")) c.replications = j.at("replications").get<int>();
        if (c.replications < 1) throw ConfigParseError("replications must be at least 1");
        if (j.contains("horizon") && !j.at("horizon").is_null()) c.horizon = j.at("horizon").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("sweep") && !j.at("sweep").is_null()) {
            const json& s = j.at("sweep");
            const auto axis = parse_axis(s.at("axis").get<std::string>());
            if (!axis) throw ConfigParseError("unknown sweep axis");
            Sweep sweep{*axis, s.at("values").get<std::vector<double>>()};
            if (sweep.values.empty()) throw ConfigParseError("sweep values must not be empty");
            c.sweep = sweep;
        }
        if (j.contains("kpi")) {
            const json& k = j.at("kpi");
            if (k.contains("bin_width")) c.kpi.bin_width = k.at("bin_width").get<double>();
            if (k.contains("office_start")) c.kpi.office_start = k.at("office_start").get<double>();
            if (k.contains("office_end")) c.kpi.office_end = k.at("office_end").get<double>();
        }
        if (j.contains("write_logs")) c.write_logs = j.at("write_logs").get<bool>();
        return c;
    } catch (const json::exception& e) {
        throw ConfigParseError(std::string("experiment config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig config = parse_experiment_config(buf.str());
    // Data files named relative to the config resolve against its directory.
    const fs::path base = fs::path(path).parent_path();
    for (std::string* file : {&config.scenario.calls_path, &config.scenario.schedule_path}) {
        if (!file->empty() && fs::path(*file).is_relative()) *file = (base / *file).string();
    }
    return config;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    json sc;
    switch (c.scenario.kind) {
        case ScenarioSpec::Kind::kSynthetic:
            sc["kind"] = "synthetic";
            sc["spec"] = to_json(c.scenario.synthetic);
            break;
        case ScenarioSpec::Kind::kAppendixD:
            sc["kind"] = "appendix_d";
            sc["horizon"] = c.scenario.appendix_d_horizon;
            break;
        case ScenarioSpec::Kind::kCallLog:
            sc["kind"] = "call_log";
            sc["calls"] = c.scenario.calls_path;
            sc["schedule"] = c.scenario.schedule_path;
            sc["date"] = c.scenario.log_options.date;
            sc["threshold"] = c.scenario.log_options.threshold;
            sc["transform"] = c.scenario.log_options.transform;
            sc["horizon"] = c.scenario.log_options.horizon;
            break;
        case ScenarioSpec::Kind::kInline:
            sc["kind"] = "inline";
            sc["config"] = to_json(c.scenario.inline_config);
            sc["horizon"] = c.scenario.inline_horizon;
            break;
    }
    json bursts = json::array();
    for (const BurstSpec& b : c.scenario.bursts)
        bursts.push_back({{"type", b.type}, {"count", b.count}, {"start", b.start}, {"end", b.end}});
    sc["bursts"] = bursts;
    sc["burst_seed"] = c.scenario.burst_seed;
    j["scenario"] = sc;
    json policies = json::array();
    for (const NamedPolicy& p : c.policies) {
        json pj = to_json(p.spec);
        pj["label"] = p.label;
        policies.push_back(pj);
    }
    j["policies"] = policies;
    j["replications"] = c.replications;
    if (c.horizon) j["horizon"] = *c.horizon;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    if (c.sweep) j["sweep"] = {{"axis", to_string(c.sweep->axis)}, {"values", c.sweep->values}};
    j["kpi"] = {{"bin_width", c.kpi.bin_width},
                {"office_start", c.kpi.office_start},
                {"office_end", c.kpi.office_end}};
    j["write_logs"] = c.write_logs;
    return j.dump(2);
}

Scenario build_scenario(const ScenarioSpec& spec) {
    Scenario sc;
    switch (spec.kind) {
        case ScenarioSpec::Kind::kSynthetic: sc = generate_synthetic(spec.synthetic); break;
        case ScenarioSpec::Kind::kAppendixD: sc = appendix_d_scenario(spec.appendix_d_horizon); break;
        case ScenarioSpec::Kind::kCallLog: {
            const auto calls = read_call_log_file(spec.calls_path);
            const auto schedule = read_agent_schedule_file(spec.schedule_path);
            sc = build_scenario_from_logs(calls, schedule, spec.log_options);
            break;
        }
        case ScenarioSpec::Kind::kInline:
            sc.name = "inline";
            sc.config = spec.inline_config;
            sc.horizon = spec.inline_horizon;
            for (int i = 0; i < sc.config.num_types; ++i) sc.type_ids.push_back(i);
            for (int j = 0; j < sc.config.num_servers; ++j) sc.server_ids.push_back(j);
            break;
    }
    for (const BurstSpec& b : spec.bursts) {
        if (b.type < 0 || b.type >= sc.config.num_types)
            throw ScenarioError("burst type " + std::to_string(b.type) + " out of range");
        sc = inject_burst(std::move(sc), b.type, b.count, b.start, b.end,
                          spec.burst_seed + static_cast<std::uint64_t>(b.start));
    }
    return sc;
}

std::uint64_t replication_seed(std::uint64_t experiment_seed, int replication) {
    return stream_seed(experiment_seed, "replication", static_cast<std::uint64_t>(replication));
}

int default_worker_count() {
    if (const char* env = std::getenv("UCBQR_WORKERS")) {
        int n = 0;
        const std::string s(env);
        auto res = std::from_chars(s.data(), s.data() + s.size(), n);
        if (res.ec == std::errc() && n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    ExperimentResult result;
    result.name = config.name;

    Scenario scenario;
    try {
        scenario = build_scenario(config.scenario);
    } catch (const ConfigParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ScenarioError(e.what());
    }
    const double horizon = config.horizon.value_or(scenario.horizon);
    {
        auto violations = validate_config(scenario.config);
        if (!(horizon > 0.0)) violations.push_back({"horizon", "must be positive"});
        if (!violations.empty()) {
            std::string what = "scenario invalid:";
            for (const Violation& v : violations) what += " " + v.field + ": " + v.message + ";";
            throw ScenarioError(what);
        }
    }

    // Cells in (policy, sweep point) order.
    std::vector<std::optional<double>> points;
    if (config.sweep) {
        for (double v : config.sweep->values) points.emplace_back(v);
    } else {
        points.emplace_back(std::nullopt);
    }
    struct CellWork {
        CellResult cell;
        std::vector<std::optional<ReplicationDigest>> digests;
        std::vector<double> plan_variance;
        std::vector<std::string> errors;
        std::vector<bool> config_error;
    };
    std::vector<CellWork> work;
    for (const NamedPolicy& p : config.policies) {
        for (const auto& v : points) {
            CellWork w;
            w.cell.label = p.label;
            w.cell.spec = p.spec;
            w.cell.sweep_value = v;
            if (v) apply_sweep(w.cell.spec, config.sweep->axis, *v);
            w.digests.resize(static_cast<std::size_t>(config.replications));
            w.plan_variance.assign(static_cast<std::size_t>(config.replications), 0.0);
            w.errors.resize(static_cast<std::size_t>(config.replications));
            w.config_error.assign(static_cast<std::size_t>(config.replications), false);
            work.push_back(std::move(w));
        }
    }

    const fs::path out_dir(config.output_dir);
    if (options.write_files) fs::create_directories(out_dir);

    const std::size_t num_jobs = work.size() * static_cast<std::size_t>(config.replications);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= num_jobs) return;
            CellWork& w = work[job / static_cast<std::size_t>(config.replications)];
            const int r = static_cast<int>(job % static_cast<std::size_t>(config.replications));
            const std::uint64_t seed = replication_seed(config.seed, r);
            try {
                ReplicationResult rr = run_replication(scenario.config, w.cell.spec, seed, horizon);
                w.digests[r] = digest_log(rr.log, scenario.config.lines, config.kpi);
                w.plan_variance[r] = planned_load_variance(rr.snapshots, scenario.config);
                if (options.write_files && config.write_logs) {
                    std::ofstream out(out_dir / (cell_stem(w.cell.label, config.sweep, w.cell.sweep_value) +
                                                 "_r" + std::to_string(r) + ".log.tsv"));
                    write_event_log(out, rr.log);
                }
            } catch (const ConfigInvalid& e) {
                w.errors[r] = e.what();
                w.config_error[r] = true;
            } catch (const PolicyFailure& e) {
                w.errors[r] = e.what();
            } catch (const std::exception& e) {
                w.errors[r] = e.what();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(num_jobs)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    bool solver_failure = false;
    bool config_failure = false;
    for (CellWork& w : work) {
        std::vector<ReplicationDigest> ok;
        double plan_var = 0.0;
        for (int r = 0; r < config.replications; ++r) {
            if (w.digests[r]) {
                ok.push_back(*w.digests[r]);
                plan_var += w.plan_variance[r];
            } else {
                ++w.cell.failed_replications;
                if (w.cell.error.empty()) w.cell.error = w.errors[r];
                if (w.config_error[r]) config_failure = true;
                else solver_failure = true;
            }
        }
        if (!ok.empty()) {
            w.cell.report = aggregate_digests(ok, scenario.config.lines, config.kpi);
            w.cell.plan_load_variance = plan_var / static_cast<double>(ok.size());
        }
        if (options.write_files) {
            const std::string stem = cell_stem(w.cell.label, config.sweep, w.cell.sweep_value);
            for (int r = 0; r < config.replications; ++r) {
                if (!w.digests[r]) continue;
                const KpiReport single = aggregate_digests({*w.digests[r]}, scenario.config.lines, config.kpi);
                const std::string file = stem + "_r" + std::to_string(r) + ".csv";
                std::ofstream out(out_dir / file);
                write_report_csv(out, single);
                w.cell.files.push_back(file);
            }
        }
        result.cells.push_back(std::move(w.cell));
    }

    // Payoff relative to the oracle run at the same sweep point.
    for (CellResult& c : result.cells) {
        if (c.report.replications == 0) continue;
        for (const CellResult& o : result.cells) {
            if (o.spec.kind != PolicyKind::kOracle || o.sweep_value != c.sweep_value ||
                o.report.replications == 0 || o.report.total_payoff == 0.0)
                continue;
            c.report.payoff_relative_to_oracle = relative_payoff(c.report, o.report);
            break;
        }
    }

    result.exit_code = config_failure ? 3 : (solver_failure ? 4 : 0);

    if (options.write_files) {
        std::ostringstream csv;
        csv << "policy,sweep_axis,sweep_value,replications,status,total_payoff,total_payoff_ci,"
               "payoff_per_completion,relative_payoff,mean_wait,mean_wait_ci,load_variance,"
               "plan_load_variance,office_wait_median\n";
        json cells = json::array();
        json summary = json::array();
        for (const CellResult& c : result.cells) {
            const KpiReport& r = c.report;
            const std::string axis = config.sweep ? to_string(config.sweep->axis) : "";
            const std::string value = c.sweep_value ? num(*c.sweep_value) : "";
            csv << c.label << ',' << axis << ',' << value << ',' << r.replications << ','
                << (c.ok() ? "ok" : "failed") << ',' << num(r.total_payoff) << ','
                << (r.total_payoff_ci ? num(*r.total_payoff_ci) : "") << ','
                << num(r.payoff_per_completion) << ','
                << (r.payoff_relative_to_oracle ? num(*r.payoff_relative_to_oracle) : "") << ','
                << num(r.mean_wait) << ',' << (r.mean_wait_ci ? num(*r.mean_wait_ci) : "") << ','
                << num(r.load_variance) << ',' << num(c.plan_load_variance) << ','
                << num(r.office_hours_waiting.median) << '\n';
            json cj = {{"policy", c.label},
                       {"spec", to_json(c.spec)},
                       {"sweep_value", c.sweep_value ? json(*c.sweep_value) : json(nullptr)},
                       {"status", c.ok() ? "ok" : "failed"},
                       {"failed_replications", c.failed_replications},
                       {"error", c.error},
                       {"files", c.files}};
            cells.push_back(cj);
            json sj = json::parse(report_to_json(r));
            sj["policy"] = c.label;
            sj["sweep_value"] = c.sweep_value ? json(*c.sweep_value) : json(nullptr);
            sj["plan_load_variance"] = c.plan_load_variance;
            summary.push_back(sj);
        }
        write_text(out_dir / "summary.csv", csv.str());
        write_text(out_dir / "summary.json", summary.dump(2));
        json manifest = {{"name", config.name},
                         {"scenario", scenario.name},
                         {"horizon", horizon},
                         {"replications", config.replications},
                         {"seed", config.seed},
                         {"exit_code", result.exit_code},
                         {"complete", result.exit_code == 0},
                         {"cells", cells}};
        write_text(out_dir / "manifest.json", manifest.dump(2));
    }
    return result;
}

const CellResult* find_cell(const ExperimentResult& result, const std::string& label,
                            std::optional<double> sweep_value) {
    for (const CellResult& c : result.cells)
        if (c.label == label && c.sweep_value == sweep_value) return &c;
    return nullptr;
}

std::vector<std::string> preset_names() {
    return {"appendix-d", "fairness-sweep", "burst-incident", "episode-sweep", "estimator-ablation"};
}

ExperimentConfig make_preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    c.output_dir = "out/" + name;
    if (name == "appendix-d") {
        c.scenario.kind = ScenarioSpec::Kind::kAppendixD;
        c.scenario.appendix_d_horizon = 500.0;
        NamedPolicy p = named(PolicyKind::kUcbQrTree);
        p.spec.epsilon = 0.01;
        p.spec.episode_length_h = 500.0;
        p.spec.pinned_rates = appendix_d_rates();
        c.policies = {p};
        c.replications = 100;
        c.kpi.bin_width = 50.0;
    } else if (name == "fairness-sweep") {
        c.scenario = synthetic(fairness_demo_spec());
        c.policies = {named(PolicyKind::kOracle)};
        c.sweep = Sweep{SweepAxis::kGamma, {0.0, 0.01, 0.1, 1.0}};
        c.replications = 1;
    } else if (name == "burst-incident") {
        c.scenario = synthetic(burst_day_spec());
        // 2000 extra customers within ten minutes at 10:00, 11:00 and 12:00.
        c.scenario.bursts = {{1, 2000, 36000.0, 36600.0},
                             {2, 2000, 39600.0, 40200.0},
                             {4, 2000, 43200.0, 43800.0}};
        c.policies = {named(PolicyKind::kUcbQr), named(PolicyKind::kUcbQrTree),
                      named(PolicyKind::kOracle), named(PolicyKind::kFcfsAlis),
                      named(PolicyKind::kGreedy), named(PolicyKind::kThetaMu),
                      named(PolicyKind::kRandom)};
        c.replications = 3;
    } else if (name == "episode-sweep") {
        c.scenario = synthetic(varying_day_spec());
        c.policies = {named(PolicyKind::kUcbQr), named(PolicyKind::kOracle)};
        c.sweep = Sweep{SweepAxis::kEpisodeLength, {60.0, 120.0, 300.0, 600.0, 1200.0}};
        c.replications = 5;
    } else if (name == "estimator-ablation") {
        c.scenario = synthetic(ramp_day_spec());
        NamedPolicy under = named(PolicyKind::kUcbQr);
        under.label = "UCBQR_mu_low";
        NamedPolicy over = named(PolicyKind::kUcbQr);
        over.label = "UCBQR_mu_high";
        over.spec.mu_init = 10.0;
        c.policies = {under, over, named(PolicyKind::kUcbQrMu), named(PolicyKind::kUcbQrLambda),
                      named(PolicyKind::kOracle)};
        c.replications = 5;
        c.kpi.bin_width = 300.0;
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    return c;
}

ExperimentConfig learning_gap_experiment() {
    SyntheticSpec s;
    s.name = "spread-payoffs";
    s.num_types = 3;
    s.num_servers = 3;
    s.rate_profiles = {{{0.0, 0.8}}, {{0.0, 0.6}}, {{0.0, 0.5}}};
    s.theta = {0.9, 0.2, 0.5, 0.3, 0.8, 0.1, 0.4, 0.6, 0.95};
    s.service_means.assign(9, 5.0);
    for (int j = 0; j < 3; ++j) s.capacity.push_back(CapacitySchedule{{{0.0, 5}}});
    s.horizon = 20000.0;
    s.seed = 41;
    s.materialize_arrivals = false;

    ExperimentConfig c;
    c.name = "learning-gap";
    c.output_dir = "out/learning-gap";
    c.scenario = synthetic(s);
    for (PolicyKind kind : {PolicyKind::kUcbQr, PolicyKind::kOracle, PolicyKind::kRandom}) {
        NamedPolicy p = named(kind);
        p.spec.episode_length_h = 10.0;
        c.policies.push_back(p);
    }
    c.replications = 10;
    c.kpi.bin_width = 600.0;
    return c;
}

std::vector<BandCheck> appendix_d_checks(const KpiReport& report) {
    std::vector<BandCheck> out;
    const std::pair<Line, double> rates[] = {
        {{0, 0}, 0.863}, {{0, 1}, 2.153}, {{1, 1}, 2.649}, {{1, 2}, 4.338}, {{2, 2}, 5.0}};
    for (const auto& [line, target] : rates) {
        BandCheck b;
        b.name = "rate(" + std::to_string(line.type + 1) + "," + std::to_string(line.server + 1) + ")";
        b.target = target;
        b.tolerance = 0.08;
        for (std::size_t l = 0; l < report.lines.size(); ++l)
            if (report.lines[l] == line) b.value = report.empirical_rates[l].back();
        b.pass = std::abs(b.value - b.target) <= b.tolerance;
        out.push_back(b);
    }
    const double busy[] = {0.852, 0.955, 0.936};
    for (int j = 0; j < 3; ++j) {
        BandCheck b;
        b.name = "busy(" + std::to_string(j + 1) + ")";
        b.target = busy[j];
        b.tolerance = 0.03;
        b.value = report.server_load.at(j);
        b.pass = std::abs(b.value - b.target) <= b.tolerance;
        out.push_back(b);
    }
    return out;
}

std::vector<BandCheck> burst_shape_checks(const KpiReport& report,
                                          const std::vector<BurstSpec>& bursts) {
    std::vector<BandCheck> out;
    if (bursts.empty()) return out;
    auto window_mean = [&](double a, double b) {
        double sum = 0.0;
        double n = 0.0;
        for (const BinStat& bin : report.waiting_time_series) {
            if (bin.start < a || bin.start >= b) continue;
            sum += bin.mean * static_cast<double>(bin.observations);
            n += static_cast<double>(bin.observations);
        }
        return n > 0.0 ? sum / n : 0.0;
    };
    auto window_peak = [&](double a, double b) {
        double m = 0.0;
        for (const BinStat& bin : report.waiting_time_series)
            if (bin.start >= a && bin.start < b) m = std::max(m, bin.mean);
        return m;
    };
    std::vector<BurstSpec> sorted = bursts;
    std::sort(sorted.begin(), sorted.end(),
              [](const BurstSpec& a, const BurstSpec& b) { return a.start < b.start; });
    const double baseline = window_mean(sorted.front().start - 7200.0, sorted.front().start);
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        BandCheck b;
        b.name = "peak after burst " + std::to_string(k + 1);
        b.value = window_peak(sorted[k].start, sorted[k].start + 1800.0);
        b.target = 3.0 * baseline;
        b.pass = b.value >= b.target && b.value > 0.0;
        out.push_back(b);
    }
    BandCheck rec;
    rec.name = "recovery";
    const double t = sorted.back().start + 7200.0;
    rec.value = window_mean(t, t + 3600.0);
    rec.target = 2.0 * baseline;
    rec.pass = rec.value <= rec.target;
    out.push_back(rec);
    return out;
}

}  // namespace ucbqr
