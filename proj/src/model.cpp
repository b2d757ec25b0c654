#include "ucbqr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ucbqr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string line_name(const Line& line) {
    return "(" + std::to_string(line.type) + "," + std::to_string(line.server) + ")";
}

}  // namespace

std::optional<double> mean_duration(const ServiceSource& source) {
    return std::visit(
        overloaded{
            [](const ExponentialService& s) -> std::optional<double> { return s.mean; },
            [](const LogNormalService& s) -> std::optional<double> {
                return std::exp(s.log_mean + 0.5 * s.log_sd * s.log_sd);
            },
            [](const EmpiricalService& s) -> std::optional<double> {
                if (s.pool.empty()) return std::nullopt;
                return std::accumulate(s.pool.begin(), s.pool.end(), 0.0) /
                       static_cast<double>(s.pool.size());
            },
        },
        source);
}

int CapacitySchedule::count_at(double t) const {
    if (points.empty()) return 1;
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](double v, const CapacityBreakpoint& p) { return v < p.time; });
    if (it == points.begin()) return points.front().count;
    return std::prev(it)->count;
}

std::optional<int> SystemConfig::line_index(int type, int server) const {
    for (std::size_t l = 0; l < lines.size(); ++l) {
        if (lines[l].type == type && lines[l].server == server) return static_cast<int>(l);
    }
    return std::nullopt;
}

Compatibility::Compatibility(const SystemConfig& config)
    : Compatibility(config.num_types, config.num_servers, config.lines) {}

Compatibility::Compatibility(int num_types, int num_servers, const std::vector<Line>& lines)
    : lines(lines),
      lines_of_type(static_cast<std::size_t>(std::max(num_types, 0))),
      lines_of_server(static_cast<std::size_t>(std::max(num_servers, 0))),
      line_at(static_cast<std::size_t>(std::max(num_types, 0)),
              std::vector<int>(static_cast<std::size_t>(std::max(num_servers, 0)), -1)) {
    for (std::size_t l = 0; l < this->lines.size(); ++l) {
        const Line& line = this->lines[l];
        if (line.type < 0 || line.type >= num_types || line.server < 0 ||
            line.server >= num_servers)
            continue;
        lines_of_type[line.type].push_back(static_cast<int>(l));
        lines_of_server[line.server].push_back(static_cast<int>(l));
        line_at[line.type][line.server] = static_cast<int>(l);
    }
}

double RoutingPlan::total_rejection() const {
    return std::accumulate(rejection_rates.begin(), rejection_rates.end(), 0.0);
}

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::kUcbQr: return "UCBQR";
        case PolicyKind::kUcbQrTree: return "UCBQR_TREE";
        case PolicyKind::kOracle: return "ORACLE";
        case PolicyKind::kFcfsAlis: return "FCFS_ALIS";
        case PolicyKind::kGreedy: return "GREEDY";
        case PolicyKind::kRandom: return "RANDOM";
        case PolicyKind::kThetaMu: return "THETA_MU";
        case PolicyKind::kUcbQrLambda: return "UCBQR_LAMBDA";
        case PolicyKind::kUcbQrMu: return "UCBQR_MU";
    }
    return "UNKNOWN";
}

std::optional<PolicyKind> parse_policy_kind(const std::string& name) {
    for (PolicyKind kind :
         {PolicyKind::kUcbQr, PolicyKind::kUcbQrTree, PolicyKind::kOracle, PolicyKind::kFcfsAlis,
          PolicyKind::kGreedy, PolicyKind::kRandom, PolicyKind::kThetaMu,
          PolicyKind::kUcbQrLambda, PolicyKind::kUcbQrMu}) {
        if (to_string(kind) == name) return kind;
    }
    return std::nullopt;
}

bool is_episodic(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::kUcbQr:
        case PolicyKind::kUcbQrTree:
        case PolicyKind::kOracle:
        case PolicyKind::kUcbQrLambda:
        case PolicyKind::kUcbQrMu: return true;
        default: return false;
    }
}

std::vector<Violation> validate_config(const SystemConfig& config) {
    std::vector<Violation> out;
    auto add = [&](std::string field, std::string message) {
        out.push_back({std::move(field), std::move(message)});
    };

    if (config.num_types <= 0) add("num_types", "must be positive");
    if (config.num_servers <= 0) add("num_servers", "must be positive");

    std::set<Line> seen;
    std::vector<int> degree(static_cast<std::size_t>(std::max(config.num_types, 0)), 0);
    for (std::size_t l = 0; l < config.lines.size(); ++l) {
        const Line& line = config.lines[l];
        const std::string field = "lines[" + std::to_string(l) + "]";
        bool valid = true;
        if (line.type < 0 || line.type >= config.num_types) {
            add(field, "type index " + std::to_string(line.type) + " out of range");
            valid = false;
        }
        if (line.server < 0 || line.server >= config.num_servers) {
            add(field, "server index " + std::to_string(line.server) + " out of range");
            valid = false;
        }
        if (!seen.insert(line).second) add(field, "duplicate line " + line_name(line));
        if (valid) ++degree[line.type];
    }
    for (int i = 0; i < config.num_types; ++i) {
        if (degree[i] == 0)
            add("lines", "type " + std::to_string(i) + " has no compatible server");
    }

    if (config.arrivals.size() != static_cast<std::size_t>(std::max(config.num_types, 0))) {
        add("arrivals", "expected one arrival source per type");
    } else {
        for (std::size_t i = 0; i < config.arrivals.size(); ++i) {
            const ArrivalSource& src = config.arrivals[i];
            const std::string field = "arrivals[" + std::to_string(i) + "]";
            for (double t : src.timestamps) {
                if (!std::isfinite(t) || t < 0.0) {
                    add(field + ".timestamps", "timestamps must be finite and nonnegative");
                    break;
                }
            }
            if (!std::is_sorted(src.timestamps.begin(), src.timestamps.end()))
                add(field + ".timestamps", "timestamps must be non-decreasing");
            double prev = -1.0;
            for (const RateSegment& seg : src.poisson_profile) {
                if (!std::isfinite(seg.rate) || seg.rate < 0.0)
                    add(field + ".poisson_profile", "rates must be finite and nonnegative");
                if (!(seg.start > prev) || seg.start < 0.0)
                    add(field + ".poisson_profile", "segment starts must be strictly increasing");
                prev = seg.start;
            }
        }
    }

    if (config.service.size() != config.lines.size()) {
        add("service", "expected one service source per line");
    } else {
        for (std::size_t l = 0; l < config.service.size(); ++l) {
            const std::string field = "service[" + std::to_string(l) + "]";
            std::visit(overloaded{
                           [&](const ExponentialService& s) {
                               if (!(s.mean > 0.0) || !std::isfinite(s.mean))
                                   add(field, "exponential mean must be positive");
                           },
                           [&](const LogNormalService& s) {
                               if (!std::isfinite(s.log_mean) || !(s.log_sd >= 0.0))
                                   add(field, "lognormal parameters invalid");
                           },
                           [&](const EmpiricalService& s) {
                               if (s.pool.empty()) add(field, "empirical pool is empty");
                               for (double d : s.pool) {
                                   if (!(d > 0.0) || !std::isfinite(d)) {
                                       add(field, "durations must be positive");
                                       break;
                                   }
                               }
                           },
                       },
                       config.service[l]);
        }
    }

    if (config.payoff.size() != config.lines.size()) {
        add("payoff", "expected one payoff mean per line");
    } else {
        for (std::size_t l = 0; l < config.payoff.size(); ++l) {
            const double theta = config.payoff[l];
            if (!(theta >= 0.0 && theta <= 1.0))
                add("payoff[" + std::to_string(l) + "]", "payoff must lie in [0,1]");
        }
    }

    if (config.capacity.size() != static_cast<std::size_t>(std::max(config.num_servers, 0))) {
        add("capacity", "expected one capacity schedule per server");
    } else {
        for (std::size_t j = 0; j < config.capacity.size(); ++j) {
            const auto& pts = config.capacity[j].points;
            const std::string field = "capacity[" + std::to_string(j) + "]";
            if (!pts.empty() && pts.front().time != 0.0)
                add(field, "first breakpoint must be at time 0");
            for (std::size_t p = 0; p < pts.size(); ++p) {
                if (pts[p].count < 0) add(field, "agent counts must be nonnegative");
                if (p > 0 && !(pts[p].time > pts[p - 1].time))
                    add(field, "breakpoints must be strictly increasing");
            }
        }
    }
    return out;
}

std::vector<Violation> validate_policy(const PolicySpec& spec, const SystemConfig& config) {
    std::vector<Violation> out;
    auto add = [&](std::string field, std::string message) {
        out.push_back({std::move(field), std::move(message)});
    };
    if (!(spec.epsilon > 0.0 && spec.epsilon < 1.0)) add("epsilon", "must lie in (0,1)");
    if (!(spec.penalty_p > 0.0)) add("penalty_p", "must be positive");
    if (!(spec.gamma >= 0.0)) add("gamma", "must be nonnegative");
    if (!(spec.holt_alpha >= 0.0 && spec.holt_alpha <= 1.0)) add("holt_alpha", "must lie in [0,1]");
    if (!(spec.holt_beta >= 0.0 && spec.holt_beta <= 1.0)) add("holt_beta", "must lie in [0,1]");
    if (!(spec.mu_init > 0.0)) add("mu_init", "must be positive");
    if (!(spec.episode_length_h > 0.0)) add("episode_length_h", "must be positive");
    if (spec.kind == PolicyKind::kUcbQrTree && spec.gamma > 0.0)
        add("gamma", "tree routing requires a vertex solution; gamma must be 0");
    if (spec.pinned_rates) {
        if (spec.pinned_rates->size() != config.lines.size())
            add("pinned_rates", "expected one rate per line");
        for (double r : *spec.pinned_rates) {
            if (!(r >= 0.0)) {
                add("pinned_rates", "rates must be nonnegative");
                break;
            }
        }
    }
    return out;
}

}  // namespace ucbqr
