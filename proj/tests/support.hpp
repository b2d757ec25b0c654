#pragma once

// Shared helpers for the test suites: random instance generators, a
// brute-force LP oracle and an event-log replayer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ucbqr/engine.hpp"
#include "ucbqr/event_log.hpp"
#include "ucbqr/lp.hpp"
#include "ucbqr/model.hpp"
#include "ucbqr/rng.hpp"

namespace ucbqr::testing {

inline int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1)) % (hi - lo + 1);
}

inline double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Random compatibility graph in which every type has at least one server.
inline std::vector<Line> random_lines(Rng& rng, int types, int servers, double density) {
    std::vector<Line> lines;
    for (int i = 0; i < types; ++i) {
        bool any = false;
        for (int j = 0; j < servers; ++j) {
            if (uniform01(rng) < density) {
                lines.push_back({i, j});
                any = true;
            }
        }
        if (!any) {
            const int j = uniform_int(rng, 0, servers - 1);
            lines.push_back({i, j});
            std::sort(lines.begin(), lines.end());
        }
    }
    return lines;
}

inline LpProblem random_problem(Rng& rng, int max_types = 4, int max_servers = 4) {
    LpProblem p;
    p.num_types = uniform_int(rng, 1, max_types);
    p.num_servers = uniform_int(rng, 1, max_servers);
    p.lines = random_lines(rng, p.num_types, p.num_servers, 0.6);
    for (int i = 0; i < p.num_types; ++i)
        p.lambda_hat.push_back(uniform01(rng) < 0.1 ? 0.0 : uniform_real(rng, 0.1, 3.0));
    for (std::size_t l = 0; l < p.lines.size(); ++l) {
        p.mu_hat.push_back(uniform_real(rng, 0.5, 4.0));
        p.theta_hat.push_back(uniform01(rng) < 0.1 ? INFINITY : uniform01(rng));
    }
    p.epsilon = uniform01(rng) < 0.5 ? 1e-6 : 0.05;
    return p;
}

// Maximum of the routing LP found by enumerating every basis: all
// combinations of tight inequalities that, together with the flow
// equalities, pin down a unique point. nullopt when no vertex is feasible.
inline std::optional<double> brute_force_lp(const LpProblem& p, bool with_rejection) {
    std::vector<int> var_line;  // >= 0 line index, < 0 rejection of type -(v+1)
    for (std::size_t l = 0; l < p.lines.size(); ++l)
        if (p.lambda_hat[p.lines[l].type] > 0.0) var_line.push_back(static_cast<int>(l));
    if (with_rejection)
        for (int i = 0; i < p.num_types; ++i)
            if (p.lambda_hat[i] > 0.0) var_line.push_back(-(i + 1));
    const std::size_t n = var_line.size();
    if (n == 0) return 0.0;

    std::vector<double> c(n);
    for (std::size_t v = 0; v < n; ++v)
        c[v] = var_line[v] >= 0 ? capped_theta(p.theta_hat[var_line[v]]) : -p.penalty_p;

    using Row = std::pair<std::vector<double>, double>;
    std::vector<Row> eq, ineq;
    for (int i = 0; i < p.num_types; ++i) {
        if (!(p.lambda_hat[i] > 0.0)) continue;
        std::vector<double> a(n, 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            const int t = var_line[v] >= 0 ? p.lines[var_line[v]].type : -var_line[v] - 1;
            if (t == i) a[v] = 1.0;
        }
        eq.push_back({a, p.lambda_hat[i]});
    }
    for (int j = 0; j < p.num_servers; ++j) {
        std::vector<double> a(n, 0.0);
        bool any = false;
        for (std::size_t v = 0; v < n; ++v)
            if (var_line[v] >= 0 && p.lines[var_line[v]].server == j) {
                a[v] = 1.0 / p.mu_hat[var_line[v]];
                any = true;
            }
        if (any) ineq.push_back({a, 1.0 - p.epsilon});
    }
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<double> a(n, 0.0);
        a[v] = -1.0;
        ineq.push_back({a, 0.0});
    }
    if (eq.size() > n) return std::nullopt;
    const std::size_t pick = n - eq.size();

    std::optional<double> best;
    std::vector<std::size_t> chosen;
    auto solve_square = [&](const std::vector<Row>& rows) -> std::optional<std::vector<double>> {
        std::vector<std::vector<double>> m(n, std::vector<double>(n + 1));
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t k = 0; k < n; ++k) m[r][k] = rows[r].first[k];
            m[r][n] = rows[r].second;
        }
        for (std::size_t col = 0; col < n; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < n; ++r)
                if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
            if (std::abs(m[piv][col]) < 1e-12) return std::nullopt;
            std::swap(m[piv], m[col]);
            for (std::size_t r = 0; r < n; ++r) {
                if (r == col) continue;
                const double f = m[r][col] / m[col][col];
                if (f == 0.0) continue;
                for (std::size_t k = col; k <= n; ++k) m[r][k] -= f * m[col][k];
            }
        }
        std::vector<double> x(n);
        for (std::size_t r = 0; r < n; ++r) x[r] = m[r][n] / m[r][r];
        return x;
    };
    auto visit = [&](auto&& self, std::size_t start) -> void {
        if (chosen.size() == pick) {
            std::vector<Row> rows = eq;
            for (std::size_t k : chosen) rows.push_back(ineq[k]);
            const auto x = solve_square(rows);
            if (!x) return;
            for (const Row& r : ineq) {
                double lhs = 0.0;
                for (std::size_t k = 0; k < n; ++k) lhs += r.first[k] * (*x)[k];
                if (lhs > r.second + 1e-9) return;
            }
            double obj = 0.0;
            for (std::size_t k = 0; k < n; ++k) obj += c[k] * (*x)[k];
            if (!best || obj > *best) best = obj;
            return;
        }
        for (std::size_t k = start; k < ineq.size(); ++k) {
            if (ineq.size() - k < pick - chosen.size()) break;
            chosen.push_back(k);
            self(self, k + 1);
            chosen.pop_back();
        }
    };
    visit(visit, 0);
    return best;
}

// Plan feasibility: flow balance per type and the capacity bound per server.
inline bool plan_feasible(const LpProblem& p, const RoutingPlan& plan, double tol = 1e-7) {
    std::vector<double> flow(p.num_types, 0.0);
    for (std::size_t l = 0; l < p.lines.size(); ++l) {
        if (plan.rates[l] < -tol) return false;
        flow[p.lines[l].type] += plan.rates[l];
    }
    for (std::size_t i = 0; i < plan.rejection_rates.size(); ++i) {
        if (plan.rejection_rates[i] < -tol) return false;
        flow[i] += plan.rejection_rates[i];
    }
    for (int i = 0; i < p.num_types; ++i)
        if (std::abs(flow[i] - p.lambda_hat[i]) > tol * std::max(1.0, p.lambda_hat[i])) return false;
    for (double rho : server_loads(p, plan.rates))
        if (rho > 1.0 - p.epsilon + tol) return false;
    return true;
}

// Small random system for engine-level properties.
inline SystemConfig random_system(Rng& rng, bool schedules = true) {
    SystemConfig c;
    c.num_types = uniform_int(rng, 1, 3);
    c.num_servers = uniform_int(rng, 1, 3);
    c.lines = random_lines(rng, c.num_types, c.num_servers, 0.6);
    for (int i = 0; i < c.num_types; ++i) {
        ArrivalSource src;
        src.poisson_profile.push_back({0.0, uniform_real(rng, 0.05, 0.6)});
        if (uniform01(rng) < 0.5) src.poisson_profile.push_back({200.0, uniform_real(rng, 0.0, 0.8)});
        if (uniform01(rng) < 0.3) src.timestamps = {1.0, 1.0, 50.5, 120.0};
        c.arrivals.push_back(src);
    }
    for (std::size_t l = 0; l < c.lines.size(); ++l) {
        const double u = uniform01(rng);
        if (u < 0.6) c.service.push_back(ExponentialService{uniform_real(rng, 1.0, 6.0)});
        else if (u < 0.8) c.service.push_back(LogNormalService{1.0, 0.4});
        else c.service.push_back(EmpiricalService{{1.0, 2.5, 4.0, 7.0}});
        c.payoff.push_back(uniform01(rng));
    }
    for (int j = 0; j < c.num_servers; ++j) {
        CapacitySchedule s;
        s.points.push_back({0.0, uniform_int(rng, 0, 3)});
        if (schedules) {
            s.points.push_back({150.0, uniform_int(rng, 0, 3)});
            s.points.push_back({300.0, uniform_int(rng, 1, 3)});
        }
        c.capacity.push_back(s);
    }
    return c;
}

// Replays a log and reports the first inconsistency: a service for a
// customer who is not waiting, two services at one server, a departure that
// does not match the running service, a customer served twice, time running
// backwards, or an arrival count that does not balance.
struct ReplayResult {
    std::string error;  // empty when consistent
    std::int64_t arrivals = 0;
    std::int64_t departures = 0;
    std::int64_t waiting = 0;
    std::int64_t in_service = 0;
};

inline ReplayResult replay_log(const EventLog& log, const SystemConfig& config,
                               bool check_work_conservation = false) {
    ReplayResult r;
    std::map<std::int64_t, int> waiting;  // customer -> type
    std::vector<std::int64_t> serving(config.num_servers, -1);
    std::vector<int> agents(config.num_servers);
    for (int j = 0; j < config.num_servers; ++j) agents[j] = config.capacity[j].count_at(0.0);
    std::set<std::int64_t> seen, started;
    const Compatibility compat(config);

    auto conservation = [&]() -> std::string {
        for (int j = 0; j < config.num_servers; ++j) {
            if (serving[j] >= 0 || agents[j] == 0) continue;
            for (const auto& [id, type] : waiting)
                if (compat.line(type, j) >= 0)
                    return "server " + std::to_string(j) + " idle while customer " +
                           std::to_string(id) + " waits";
        }
        return {};
    };

    double last_time = 0.0;
    std::int64_t last_seq = -1;
    for (std::size_t k = 0; k < log.records.size(); ++k) {
        const LogRecord& rec = log.records[k];
        if (rec.time < last_time || rec.sequence <= last_seq) {
            r.error = "records out of order at " + std::to_string(k);
            return r;
        }
        last_time = rec.time;
        last_seq = rec.sequence;
        switch (rec.kind) {
            case RecordKind::kArrival:
                if (!seen.insert(rec.customer).second) {
                    r.error = "duplicate arrival " + std::to_string(rec.customer);
                    return r;
                }
                waiting[rec.customer] = rec.type;
                ++r.arrivals;
                break;
            case RecordKind::kServiceStart: {
                auto it = waiting.find(rec.customer);
                if (it == waiting.end() || !started.insert(rec.customer).second) {
                    r.error = "service start for customer not waiting: " + std::to_string(rec.customer);
                    return r;
                }
                if (compat.line(it->second, rec.server) < 0) {
                    r.error = "incompatible service start";
                    return r;
                }
                if (serving[rec.server] >= 0) {
                    r.error = "server " + std::to_string(rec.server) + " double-booked";
                    return r;
                }
                if (agents[rec.server] == 0) {
                    r.error = "service started at a server with no agents";
                    return r;
                }
                serving[rec.server] = rec.customer;
                waiting.erase(it);
                break;
            }
            case RecordKind::kDeparture:
                if (serving[rec.server] != rec.customer) {
                    r.error = "departure does not match running service";
                    return r;
                }
                serving[rec.server] = -1;
                ++r.departures;
                break;
            case RecordKind::kScheduleUpdate: agents[rec.server] = static_cast<int>(rec.detail); break;
            case RecordKind::kEpisodeEnd: break;
        }
        r.waiting = static_cast<std::int64_t>(waiting.size());
        r.in_service = std::count_if(serving.begin(), serving.end(), [](auto c) { return c >= 0; });
        if (r.arrivals != r.departures + r.waiting + r.in_service) {
            r.error = "arrivals do not balance at record " + std::to_string(k);
            return r;
        }
        const bool end_of_instant = k + 1 == log.records.size() || log.records[k + 1].time > rec.time;
        if (check_work_conservation && end_of_instant) {
            r.error = conservation();
            if (!r.error.empty()) {
                r.error += " at t=" + std::to_string(rec.time);
                return r;
            }
        }
    }
    return r;
}

inline SystemConfig single_queue(double lambda, double mean_service, int agents = 1) {
    SystemConfig c;
    c.num_types = 1;
    c.num_servers = 1;
    c.lines = {{0, 0}};
    c.arrivals = {ArrivalSource{{}, {{0.0, lambda}}}};
    c.service = {ExponentialService{mean_service}};
    c.payoff = {0.5};
    c.capacity = {CapacitySchedule{{{0.0, agents}}}};
    return c;
}

}  // namespace ucbqr::testing
