#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "ucbqr/data.hpp"
#include "ucbqr/engine.hpp"
#include "ucbqr/policies.hpp"

using namespace ucbqr;

namespace {

DispatchState open_state(int types, int servers, int agents = 1) {
    DispatchState s(types, servers);
    for (auto& v : s.servers) v.agents = agents;
    return s;
}

SystemConfig full_config(int types, int servers, std::vector<double> lambda,
                         std::vector<double> mean_service, std::vector<double> theta, int agents = 1) {
    SystemConfig c;
    c.num_types = types;
    c.num_servers = servers;
    for (int i = 0; i < types; ++i) {
        c.arrivals.push_back(ArrivalSource{{}, {{0.0, lambda[i]}}});
        for (int j = 0; j < servers; ++j) {
            c.lines.push_back({i, j});
            c.service.push_back(ExponentialService{mean_service[c.lines.size() - 1]});
        }
    }
    c.payoff = std::move(theta);
    for (int j = 0; j < servers; ++j) c.capacity.push_back(CapacitySchedule{{{0.0, agents}}});
    return c;
}

SpanningForest appendix_d_forest() {
    const Scenario sc = appendix_d_scenario();
    LpProblem p;
    p.num_types = 3;
    p.num_servers = 3;
    p.lines = sc.config.lines;
    p.lambda_hat = {3.0, 7.0, 5.0};
    p.mu_hat = true_service_rates(sc.config);
    p.theta_hat = sc.config.payoff;
    p.epsilon = 0.01;
    RoutingPlan plan;
    plan.rates = appendix_d_rates();
    plan.is_vertex = true;
    return extract_spanning_forest(plan, p);
}

EpisodeObservations empty_obs(const SystemConfig& c, int finished, double start, double end) {
    EpisodeObservations o;
    o.finished_episode = finished;
    o.start = start;
    o.end = end;
    o.payoffs.assign(c.lines.size(), {});
    o.durations.assign(c.lines.size(), {});
    o.arrivals.assign(c.num_types, 0);
    return o;
}

}  // namespace

TEST_SUITE("policies") {

TEST_CASE("routing probabilities") {
    const SystemConfig c = full_config(2, 2, {1, 1}, {1, 1, 1, 1}, {.5, .5, .5, .5});
    const auto p = routing_probabilities(c, std::vector<double>{1.0, 3.0, 0.0, 0.0});
    CHECK(p == std::vector<double>{0.25, 0.75, 0.0, 0.0});
}

TEST_CASE("fcfs-rr: degenerate distribution") {
    const Compatibility compat(1, 3, {{0, 0}, {0, 1}, {0, 2}});
    const std::vector<double> probs{1.0, 0.0, 0.0};
    DispatchState s = open_state(1, 3);
    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
        const auto d = dispatch_fcfs_rr_arrival(compat, probs, {k, 0, 0.0}, s, rng);
        CHECK(d.server == 0);
        CHECK(d.kind == ArrivalDecision::Kind::kStart);
    }
    s.servers[0].idle = false;
    const auto d = dispatch_fcfs_rr_arrival(compat, probs, {1, 0, 0.0}, s, rng);
    CHECK(d.kind == ArrivalDecision::Kind::kJoinVirtual);
    CHECK(d.server == 0);
}

TEST_CASE("fcfs-rr: even split") {
    const Compatibility compat(1, 2, {{0, 0}, {0, 1}});
    const std::vector<double> probs{0.5, 0.5};
    DispatchState s = open_state(1, 2);
    s.servers[0].idle = s.servers[1].idle = false;
    Rng rng(12345);
    int first = 0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) first += dispatch_fcfs_rr_arrival(compat, probs, {k, 0, 0.0}, s, rng).server == 0;
    CHECK(std::abs(first / double(n) - 0.5) < 0.02);
}

TEST_CASE("fcfs-rr: unrouted type spreads over compatible servers") {
    const Compatibility compat(2, 3, {{0, 0}, {1, 1}, {1, 2}});
    const std::vector<double> probs{1.0, 0.0, 0.0};
    DispatchState s = open_state(2, 3);
    for (auto& v : s.servers) v.idle = false;
    Rng rng(4);
    std::vector<int> hits(3, 0);
    for (int k = 0; k < 2000; ++k) ++hits[dispatch_fcfs_rr_arrival(compat, probs, {k, 1, 0.0}, s, rng).server];
    CHECK(hits[0] == 0);
    CHECK(hits[1] > 900);
    CHECK(hits[2] > 900);
}

TEST_CASE("fcfs-rr: completion") {
    DispatchState s = open_state(1, 2);
    CHECK(dispatch_fcfs_rr_free(0, s).kind == ServerDecision::Kind::kIdle);
    s.virtual_queues[0].push_back({5, 0, 1.0});
    CHECK(dispatch_fcfs_rr_free(0, s).kind == ServerDecision::Kind::kVirtualQueue);
    CHECK(dispatch_fcfs_rr_free(1, s).kind == ServerDecision::Kind::kIdle);
}

TEST_CASE("reshuffle keeps every customer and sorts queues") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const int types = testing::uniform_int(rng, 1, 3), servers = testing::uniform_int(rng, 1, 4);
        const auto lines = testing::random_lines(rng, types, servers, 0.6);
        const Compatibility compat(types, servers, lines);
        std::vector<double> probs(lines.size());
        for (auto& p : probs) p = uniform01(rng) < 0.3 ? 0.0 : uniform01(rng);
        // normalize per type
        for (int i = 0; i < types; ++i) {
            double t = 0.0;
            for (int l : compat.lines_of_type[i]) t += probs[l];
            for (int l : compat.lines_of_type[i]) probs[l] = t > 0.0 ? probs[l] / t : 0.0;
        }
        DispatchState s = open_state(types, servers);
        std::vector<std::int64_t> ids;
        for (int k = 0; k < 30; ++k) {
            const int i = testing::uniform_int(rng, 0, types - 1);
            const int l = compat.lines_of_type[i][0];
            s.virtual_queues[lines[l].server].push_back({k, i, std::floor(uniform01(rng) * 10)});
            ids.push_back(k);
        }
        reshuffle_virtual_queues(s, compat, probs, rng);
        std::vector<std::int64_t> after;
        for (int j = 0; j < servers; ++j) {
            const auto& q = s.virtual_queues[j];
            for (std::size_t m = 0; m < q.size(); ++m) {
                after.push_back(q[m].id);
                CHECK(compat.line(q[m].type, j) >= 0);
                if (m > 0) CHECK(q[m - 1].arrival_time <= q[m].arrival_time);
            }
        }
        std::sort(after.begin(), after.end());
        CHECK(after == ids);
    }
}

TEST_CASE("tree: child queue before parent queue") {
    const SpanningForest f = appendix_d_forest();
    const Scenario sc = appendix_d_scenario();
    const Compatibility compat(sc.config);
    DispatchState s = open_state(3, 3);
    s.type_queues[0].push_back({1, 0, 5.0});
    s.type_queues[1].push_back({2, 1, 1.0});
    const auto d = dispatch_tree_free(f, compat, sc.config.payoff, 1, s);
    CHECK(d.kind == ServerDecision::Kind::kTypeQueue);
    CHECK(d.type == 0);
    s.type_queues[0].clear();
    CHECK(dispatch_tree_free(f, compat, sc.config.payoff, 1, s).type == 1);
    s.type_queues[1].clear();
    CHECK(dispatch_tree_free(f, compat, sc.config.payoff, 1, s).kind == ServerDecision::Kind::kIdle);
}

TEST_CASE("tree: busy children send the customer to the parent") {
    const SpanningForest f = appendix_d_forest();
    const Scenario sc = appendix_d_scenario();
    const Compatibility compat(sc.config);
    DispatchState s = open_state(3, 3);
    s.servers[0].idle = false;
    const auto d = dispatch_tree_arrival(f, compat, sc.config.payoff, {1, 0, 0.0}, s);
    CHECK(d.kind == ArrivalDecision::Kind::kStart);
    CHECK(d.server == 1);
    s.servers[1].idle = false;
    // server 2 is compatible but neither child nor parent of queue 0
    CHECK(dispatch_tree_arrival(f, compat, sc.config.payoff, {1, 0, 0.0}, s).kind ==
          ArrivalDecision::Kind::kJoinQueue);
}

TEST_CASE("tree: best child by payoff") {
    const Compatibility compat(1, 2, {{0, 0}, {0, 1}});
    SpanningForest f;
    f.parent_of_queue = {std::nullopt};
    f.children_of_queue = {{0, 1}};
    f.parent_of_server = {0, 0};
    f.children_of_server = {{}, {}};
    f.edges = {{0, 0}, {0, 1}};
    f.type_in_forest = {true};
    const DispatchState s = open_state(1, 2);
    const std::vector<double> theta{0.3, 0.9};
    CHECK(dispatch_tree_arrival(f, compat, theta, {0, 0, 0.0}, s).server == 1);
    const std::vector<double> tied{0.5, 0.5};
    CHECK(dispatch_tree_arrival(f, compat, tied, {0, 0, 0.0}, s).server == 0);
}

TEST_CASE("tree dispatch stays on compatible lines") {
    Rng rng(202);
    int decisions = 0;
    for (int trial = 0; trial < 100; ++trial) {
        LpProblem p = testing::random_problem(rng);
        const RoutingPlan plan = solve_routing(p);
        SpanningForest f;
        try {
            f = extract_spanning_forest(plan, p);
        } catch (const CyclicSupport&) {
            continue;
        }
        const Compatibility compat(p.num_types, p.num_servers, p.lines);
        for (int round = 0; round < 20; ++round) {
            DispatchState s = open_state(p.num_types, p.num_servers);
            for (auto& v : s.servers) v.idle = uniform01(rng) < 0.5;
            for (int i = 0; i < p.num_types; ++i)
                if (uniform01(rng) < 0.5) s.type_queues[i].push_back({i, i, 0.0});
            const int i = testing::uniform_int(rng, 0, p.num_types - 1);
            const auto a = dispatch_tree_arrival(f, compat, p.theta_hat, {99, i, 1.0}, s);
            if (a.kind == ArrivalDecision::Kind::kStart) {
                CHECK(compat.line(i, a.server) >= 0);
                CHECK(s.servers[a.server].available());
            }
            const int j = testing::uniform_int(rng, 0, p.num_servers - 1);
            const auto d = dispatch_tree_free(f, compat, p.theta_hat, j, s);
            if (d.kind == ServerDecision::Kind::kTypeQueue) {
                CHECK(compat.line(d.type, j) >= 0);
                CHECK_FALSE(s.type_queues[d.type].empty());
            }
            ++decisions;
        }
    }
    CHECK(decisions > 1000);
}

TEST_CASE("static rules") {
    Rng rng(1);
    SUBCASE("fcfs-alis serves the longest wait") {
        const Compatibility compat(2, 1, {{0, 0}, {1, 0}});
        DispatchState s = open_state(2, 1);
        s.now = 100.0;
        s.type_queues[0].push_back({1, 0, 70.0});
        s.type_queues[1].push_back({2, 1, 10.0});
        const auto d = dispatch_static_free(PolicyKind::kFcfsAlis, compat, {}, {}, 0, s, rng);
        CHECK(d.type == 1);
    }
    SUBCASE("fcfs-alis picks the longest-idle server") {
        const Compatibility compat(1, 3, {{0, 0}, {0, 1}, {0, 2}});
        DispatchState s = open_state(1, 3);
        s.servers[0].idle_since = 50.0;
        s.servers[1].idle_since = 20.0;
        s.servers[2].idle_since = 20.0;
        CHECK(dispatch_static_arrival(PolicyKind::kFcfsAlis, compat, {}, {}, {0, 0, 60.0}, s, rng).server == 1);
    }
    SUBCASE("greedy prefers the best payoff") {
        const Compatibility compat(3, 1, {{0, 0}, {1, 0}, {2, 0}});
        const std::vector<double> theta{0.84, 0.5, 0.93};
        DispatchState s = open_state(3, 1);
        s.type_queues[0].push_back({1, 0, 0.0});
        s.type_queues[2].push_back({2, 2, 5.0});
        CHECK(dispatch_static_free(PolicyKind::kGreedy, compat, theta, {}, 0, s, rng).type == 2);
    }
    SUBCASE("theta-mu uses the product") {
        const Compatibility compat(1, 2, {{0, 0}, {0, 1}});
        const std::vector<double> theta{0.8, 0.9}, mu{2.0, 1.0};
        const DispatchState s = open_state(1, 2);
        CHECK(dispatch_static_arrival(PolicyKind::kThetaMu, compat, theta, mu, {0, 0, 0.0}, s, rng).server == 0);
    }
    SUBCASE("random covers the idle servers") {
        const Compatibility compat(1, 3, {{0, 0}, {0, 1}, {0, 2}});
        DispatchState s = open_state(1, 3);
        s.servers[1].agents = 0;
        std::vector<int> hits(3, 0);
        for (int k = 0; k < 3000; ++k)
            ++hits[dispatch_static_arrival(PolicyKind::kRandom, compat, {}, {}, {0, 0, 0.0}, s, rng).server];
        CHECK(hits[1] == 0);
        CHECK(std::abs(hits[0] - 1500) < 150);
    }
    SUBCASE("no idle server means wait") {
        const Compatibility compat(1, 1, {{0, 0}});
        DispatchState s = open_state(1, 1);
        s.servers[0].idle = false;
        const std::vector<double> theta{0.5}, mu{1.0};
        for (PolicyKind k : {PolicyKind::kFcfsAlis, PolicyKind::kGreedy, PolicyKind::kRandom})
            CHECK(dispatch_static_arrival(k, compat, theta, mu, {0, 0, 0.0}, s, rng).kind ==
                  ArrivalDecision::Kind::kJoinQueue);
    }
}

TEST_CASE("cold start") {
    const SystemConfig c = full_config(2, 2, {0.2, 0.3}, {1, 2, 3, 4}, {.1, .2, .3, .4});
    PolicySpec spec;
    spec.kind = PolicyKind::kUcbQrLambda;
    auto rt = make_oracle(c, spec, Rng(1));
    DispatchState s = open_state(2, 2);
    const auto snap = rt->episode_begin(1, empty_obs(c, 0, 0.0, 0.0), s);
    for (double t : snap.theta_hat) CHECK(std::isinf(t));
    CHECK(snap.lambda_hat[0] == doctest::Approx(0.2));
    CHECK(snap.lambda_hat[1] == doctest::Approx(0.3));
    for (double m : snap.mu_hat) CHECK(m == spec.mu_init);
    // the tiny prior capacity forces the fallback; every served unit is worth the cap
    const double served = 2 * (1 - spec.epsilon) * spec.mu_init;
    CHECK(snap.objective_value == doctest::Approx(kThetaCap * served - spec.penalty_p * (0.5 - served)));

    PolicySpec plain;
    auto learner = make_policy(c, plain, Rng(1));
    DispatchState s2 = open_state(2, 2);
    const auto first = learner->episode_begin(1, empty_obs(c, 0, 0.0, 0.0), s2);
    CHECK(first.lambda_hat == std::vector<double>{0.0, 0.0});
    for (double r : first.rates) CHECK(r == 0.0);
}

TEST_CASE("main path matches the LP on the snapshot inputs") {
    const SystemConfig c = full_config(2, 2, {0.2, 0.3}, {1, 2, 3, 4}, {.1, .2, .3, .4}, 3);
    PolicySpec spec;
    spec.episode_length_h = 100.0;
    PolicyRuntime rt(c, spec, {}, Rng(3));
    DispatchState s = open_state(2, 2, 3);
    rt.episode_begin(1, empty_obs(c, 0, 0.0, 0.0), s);
    EpisodeObservations o = empty_obs(c, 1, 0.0, 100.0);
    o.payoffs = {{1, 0}, {1}, {0, 0, 1}, {1, 1}};
    o.durations = {{2.0}, {1.0, 3.0}, {4.0}, {5.0}};
    o.arrivals = {40, 60};
    s.now = 100.0;
    const auto snap = rt.episode_begin(2, o, s);
    for (double t : snap.theta_hat) CHECK(std::isfinite(t));

    LpProblem p;
    p.num_types = 2;
    p.num_servers = 2;
    p.lines = c.lines;
    p.lambda_hat = snap.lambda_hat;
    p.mu_hat = snap.mu_hat;
    p.theta_hat = snap.theta_hat;
    p.epsilon = spec.epsilon;
    CHECK(snap.lambda_hat[0] == forecast_to_rate(rt.holt()[0].last_forecast, 100.0));
    CHECK(snap.mu_hat[1] == 3.0 * 2.0 / 4.0);  // two completions over 4 s, three agents
    const auto lp = solve_primary(p);
    REQUIRE(lp);
    CHECK(snap.rates == lp->rates);
    CHECK_FALSE(snap.used_fallback);
    for (int i = 0; i < 2; ++i) {
        double t = 0.0;
        for (int l : {2 * i, 2 * i + 1}) t += snap.probs[l];
        CHECK(t == doctest::Approx(1.0));
    }
}

TEST_CASE("overload falls back to rejection") {
    const SystemConfig c = full_config(1, 2, {3.0}, {1, 1}, {.5, .6});
    PolicySpec spec;
    spec.kind = PolicyKind::kOracle;
    auto rt = make_oracle(c, spec, Rng(1));
    DispatchState s = open_state(1, 2);
    const auto snap = rt->episode_begin(1, empty_obs(c, 0, 0.0, 0.0), s);
    CHECK(snap.used_fallback);
    REQUIRE(snap.rejection_rates.size() == 1);
    CHECK(snap.rejection_rates[0] == doctest::Approx(3.0 - 2.0 * (1.0 - spec.epsilon)));
    CHECK(snap.probs[0] + snap.probs[1] == doctest::Approx(1.0));
}

TEST_CASE("oracle plan is constant on a stationary system") {
    const SystemConfig c = full_config(2, 3, {0.2, 0.1}, {2, 3, 4, 5, 6, 7}, {.9, .5, .4, .3, .8, .7});
    PolicySpec spec;
    spec.kind = PolicyKind::kOracle;
    spec.episode_length_h = 50.0;
    const auto r = run_replication(c, spec, 5, 1000.0);
    REQUIRE(r.snapshots.size() > 10);
    for (const auto& snap : r.snapshots) {
        CHECK(snap.rates == r.snapshots.front().rates);
        CHECK(snap.theta_hat == c.payoff);
    }
}

TEST_CASE("variant flags") {
    const SystemConfig c = full_config(1, 2, {0.2}, {4, 8}, {.5, .6}, 2);
    DispatchState s = open_state(1, 2, 2);
    PolicySpec spec;
    spec.kind = PolicyKind::kUcbQrMu;
    auto mu_variant = make_oracle(c, spec, Rng(1));
    auto snap = mu_variant->episode_begin(1, empty_obs(c, 0, 0.0, 0.0), s);
    CHECK(snap.mu_hat == std::vector<double>{2.0 / 4.0, 2.0 / 8.0});
    CHECK(snap.lambda_hat[0] == 0.0);
    CHECK(std::isinf(snap.theta_hat[0]));

    spec.kind = PolicyKind::kUcbQrLambda;
    auto lambda_variant = make_oracle(c, spec, Rng(1));
    snap = lambda_variant->episode_begin(1, empty_obs(c, 0, 0.0, 0.0), s);
    CHECK(snap.lambda_hat[0] == doctest::Approx(0.2));
    CHECK(snap.mu_hat[0] == 2.0 * spec.mu_init);
    CHECK(std::isinf(snap.theta_hat[1]));

    CHECK(ground_truth_flags(PolicyKind::kOracle).theta);
    CHECK_FALSE(ground_truth_flags(PolicyKind::kUcbQrMu).lambda);
    spec.kind = PolicyKind::kUcbQr;
    CHECK_THROWS_AS(make_oracle(c, spec, Rng(1)), std::invalid_argument);
}

TEST_CASE("missing ground truth") {
    SystemConfig c = full_config(1, 1, {0.2}, {4}, {.5});
    c.service[0] = EmpiricalService{};
    PolicySpec spec;
    spec.kind = PolicyKind::kOracle;
    CHECK_THROWS_AS(make_oracle(c, spec, Rng(1)), MissingGroundTruth);
    CHECK_THROWS_AS(true_service_rates(c), MissingGroundTruth);
}

TEST_CASE("true arrival rates mix timestamps and profile") {
    SystemConfig c = full_config(1, 1, {0.5}, {4}, {.5});
    c.arrivals[0].poisson_profile = {{0.0, 0.5}, {100.0, 1.0}};
    c.arrivals[0].timestamps = {10.0, 150.0, 160.0, 300.0};
    const auto r = true_arrival_rates(c, 50.0, 200.0);
    CHECK(r[0] == doctest::Approx((2.0 + 0.5 * 50.0 + 1.0 * 100.0) / 150.0));
}

TEST_CASE("payoff draws match the line mean") {
    const SystemConfig c = full_config(1, 1, {0.5}, {1.0}, {0.3});
    PolicySpec spec;
    spec.kind = PolicyKind::kRandom;
    const auto r = run_replication(c, spec, 99, 40000.0);
    double n = 0, wins = 0;
    for (const auto& rec : r.log.records)
        if (rec.kind == RecordKind::kDeparture) {
            ++n;
            wins += rec.payoff;
        }
    const double sigma = std::sqrt(0.3 * 0.7 / n);
    CHECK(n > 15000);
    CHECK(std::abs(wins / n - 0.3) < 3.0 * sigma);
}

TEST_CASE("probabilities stay normalized across episodes") {
    Rng rng(66);
    for (int trial = 0; trial < 10; ++trial) {
        const SystemConfig c = testing::random_system(rng);
        for (PolicyKind k : {PolicyKind::kUcbQr, PolicyKind::kOracle, PolicyKind::kUcbQrMu}) {
            PolicySpec spec;
            spec.kind = k;
            spec.episode_length_h = 60.0;
            const auto r = run_replication(c, spec, trial, 600.0);
            for (const auto& snap : r.snapshots)
                for (int i = 0; i < c.num_types; ++i) {
                    double t = 0.0;
                    for (std::size_t l = 0; l < c.lines.size(); ++l)
                        if (c.lines[l].type == i) t += snap.probs[l];
                    CHECK((std::abs(t) < 1e-12 || std::abs(t - 1.0) < 1e-9));
                }
        }
    }
}

}  // TEST_SUITE
