#include "ucbqr/config_io.hpp"

namespace ucbqr {

using nlohmann::json;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

json lines_to_json(const std::vector<Line>& lines) {
    json out = json::array();
    for (const Line& l : lines) out.push_back({l.type, l.server});
    return out;
}

std::vector<Line> lines_from_json(const json& j) {
    std::vector<Line> out;
    for (const json& e : j) {
        if (!e.is_array() || e.size() != 2) throw ConfigParseError("a line is a [type, server] pair");
        out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    }
    return out;
}

json profile_to_json(const std::vector<RateSegment>& prof) {
    json out = json::array();
    for (const RateSegment& s : prof) out.push_back({s.start, s.rate});
    return out;
}

std::vector<RateSegment> profile_from_json(const json& j) {
    std::vector<RateSegment> out;
    for (const json& e : j) {
        if (!e.is_array() || e.size() != 2)
            throw ConfigParseError("a rate segment is a [start, rate] pair");
        out.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    }
    return out;
}

json capacity_to_json(const CapacitySchedule& c) {
    json out = json::array();
    for (const CapacityBreakpoint& p : c.points) out.push_back({p.time, p.count});
    return out;
}

CapacitySchedule capacity_from_json(const json& j) {
    CapacitySchedule c;
    for (const json& e : j) {
        if (!e.is_array() || e.size() != 2)
            throw ConfigParseError("a capacity breakpoint is a [time, count] pair");
        c.points.push_back({e.at(0).get<double>(), e.at(1).get<int>()});
    }
    return c;
}

json service_to_json(const ServiceSource& s) {
    if (const auto* e = std::get_if<ExponentialService>(&s)) return {{"exponential", e->mean}};
    if (const auto* ln = std::get_if<LogNormalService>(&s))
        return {{"lognormal", {{"log_mean", ln->log_mean}, {"log_sd", ln->log_sd}}}};
    return {{"empirical", std::get<EmpiricalService>(s).pool}};
}

ServiceSource service_from_json(const json& j) {
    if (j.contains("exponential")) return ExponentialService{j.at("exponential").get<double>()};
    if (j.contains("lognormal")) {
        const json& p = j.at("lognormal");
        return LogNormalService{p.at("log_mean").get<double>(), p.at("log_sd").get<double>()};
    }
    if (j.contains("empirical")) return EmpiricalService{j.at("empirical").get<std::vector<double>>()};
    throw ConfigParseError("service source needs one of exponential, lognormal, empirical");
}

}  // namespace

json to_json(const SystemConfig& config) {
    json j;
    j["num_types"] = config.num_types;
    j["num_servers"] = config.num_servers;
    j["lines"] = lines_to_json(config.lines);
    json arrivals = json::array();
    for (const ArrivalSource& a : config.arrivals)
        arrivals.push_back({{"timestamps", a.timestamps}, {"poisson", profile_to_json(a.poisson_profile)}});
    j["arrivals"] = arrivals;
    json service = json::array();
    for (const ServiceSource& s : config.service) service.push_back(service_to_json(s));
    j["service"] = service;
    j["payoff"] = config.payoff;
    json capacity = json::array();
    for (const CapacitySchedule& c : config.capacity) capacity.push_back(capacity_to_json(c));
    j["capacity"] = capacity;
    return j;
}

SystemConfig system_config_from_json(const json& j) {
    try {
        SystemConfig c;
        c.num_types = j.at("num_types").get<int>();
        c.num_servers = j.at("num_servers").get<int>();
        c.lines = lines_from_json(j.at("lines"));
        for (const json& a : j.at("arrivals")) {
            ArrivalSource src;
            if (a.contains("timestamps")) src.timestamps = a.at("timestamps").get<std::vector<double>>();
            if (a.contains("poisson")) src.poisson_profile = profile_from_json(a.at("poisson"));
            c.arrivals.push_back(std::move(src));
        }
        for (const json& s : j.at("service")) c.service.push_back(service_from_json(s));
        c.payoff = j.at("payoff").get<std::vector<double>>();
        if (j.contains("capacity")) {
            for (const json& cap : j.at("capacity")) c.capacity.push_back(capacity_from_json(cap));
        } else {
            c.capacity.resize(static_cast<std::size_t>(std::max(c.num_servers, 0)));
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigParseError(std::string("system config: ") + e.what());
    }
}

json to_json(const PolicySpec& spec) {
    json j;
    j["kind"] = to_string(spec.kind);
    j["episode_length_h"] = spec.episode_length_h;
    j["epsilon"] = spec.epsilon;
    j["penalty_p"] = spec.penalty_p;
    j["gamma"] = spec.gamma;
    j["holt_alpha"] = spec.holt_alpha;
    j["holt_beta"] = spec.holt_beta;
    j["mu_init"] = spec.mu_init;
    if (spec.pinned_rates) j["pinned_rates"] = *spec.pinned_rates;
    return j;
}

PolicySpec policy_spec_from_json(const json& j) {
    try {
        PolicySpec s;
        const std::string kind = j.at("kind").get<std::string>();
        const auto parsed = parse_policy_kind(kind);
        if (!parsed) throw ConfigParseError("unknown policy kind '" + kind + "'");
        s.kind = *parsed;
        s.episode_length_h = get_or(j, "episode_length_h", s.episode_length_h);
        s.epsilon = get_or(j, "epsilon", s.epsilon);
        s.penalty_p = get_or(j, "penalty_p", s.penalty_p);
        s.gamma = get_or(j, "gamma", s.gamma);
        s.holt_alpha = get_or(j, "holt_alpha", s.holt_alpha);
        s.holt_beta = get_or(j, "holt_beta", s.holt_beta);
        s.mu_init = get_or(j, "mu_init", s.mu_init);
        if (j.contains("pinned_rates") && !j.at("pinned_rates").is_null())
            s.pinned_rates = j.at("pinned_rates").get<std::vector<double>>();
        return s;
    } catch (const json::exception& e) {
        throw ConfigParseError(std::string("policy: ") + e.what());
    }
}

json to_json(const SyntheticSpec& spec) {
    json j;
    j["name"] = spec.name;
    j["num_types"] = spec.num_types;
    j["num_servers"] = spec.num_servers;
    j["lines"] = lines_to_json(spec.lines);
    json profiles = json::array();
    for (const auto& p : spec.rate_profiles) profiles.push_back(profile_to_json(p));
    j["rate_profiles"] = profiles;
    j["service_kind"] =
        spec.service_kind == SyntheticSpec::ServiceKind::kExponential ? "exponential" : "lognormal";
    j["service_means"] = spec.service_means;
    j["lognormal_sigma"] = spec.lognormal_sigma;
    j["pool_size"] = spec.pool_size;
    j["theta"] = spec.theta;
    json capacity = json::array();
    for (const CapacitySchedule& c : spec.capacity) capacity.push_back(capacity_to_json(c));
    j["capacity"] = capacity;
    j["horizon"] = spec.horizon;
    j["seed"] = spec.seed;
    j["materialize_arrivals"] = spec.materialize_arrivals;
    return j;
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
    try {
        SyntheticSpec s;
        s.name = get_or<std::string>(j, "name", s.name);
        s.num_types = j.at("num_types").get<int>();
        s.num_servers = j.at("num_servers").get<int>();
        if (j.contains("lines")) s.lines = lines_from_json(j.at("lines"));
        for (const json& p : j.at("rate_profiles")) s.rate_profiles.push_back(profile_from_json(p));
        const std::string kind = get_or<std::string>(j, "service_kind", "exponential");
        if (kind == "exponential") {
            s.service_kind = SyntheticSpec::ServiceKind::kExponential;
        } else if (kind == "lognormal") {
            s.service_kind = SyntheticSpec::ServiceKind::kLogNormal;
        } else {
            throw ConfigParseError("service_kind must be exponential or lognormal");
        }
        s.service_means = j.at("service_means").get<std::vector<double>>();
        s.lognormal_sigma = get_or(j, "lognormal_sigma", s.lognormal_sigma);
        s.pool_size = get_or<std::size_t>(j, "pool_size", s.pool_size);
        s.theta = j.at("theta").get<std::vector<double>>();
        if (j.contains("capacity"))
            for (const json& c : j.at("capacity")) s.capacity.push_back(capacity_from_json(c));
        s.horizon = j.at("horizon").get<double>();
        s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
        s.materialize_arrivals = get_or(j, "materialize_arrivals", s.materialize_arrivals);
        return s;
    } catch (const json::exception& e) {
        throw ConfigParseError(std::string("synthetic scenario: ") + e.what());
    }
}

}  // namespace ucbqr
