#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "ucbqr/engine.hpp"
#include "ucbqr/event_log.hpp"
#include "ucbqr/metrics.hpp"

using namespace ucbqr;

namespace {

PolicySpec policy(PolicyKind kind, double h = 100.0) {
    PolicySpec p;
    p.kind = kind;
    p.episode_length_h = h;
    return p;
}

const PolicyKind kAllKinds[] = {PolicyKind::kUcbQr,     PolicyKind::kUcbQrTree,
                                PolicyKind::kOracle,    PolicyKind::kFcfsAlis,
                                PolicyKind::kGreedy,    PolicyKind::kRandom,
                                PolicyKind::kThetaMu,   PolicyKind::kUcbQrLambda,
                                PolicyKind::kUcbQrMu};

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("M/M/1 waiting time") {
    const SystemConfig c = testing::single_queue(0.5, 1.0);
    double total = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed : {1u, 2u}) {
        const auto r = run_replication(c, policy(PolicyKind::kRandom), seed, 1e5);
        for (auto [arrived, wait] : waiting_times(r.log)) {
            total += wait;
            ++n;
        }
    }
    const double mean = total / n;
    CHECK(n > 90000);
    CHECK(std::abs(mean - 1.0) < 0.1);
}

TEST_CASE("zero arrivals") {
    SystemConfig c = testing::single_queue(0.0, 1.0);
    c.capacity[0].points = {{0.0, 1}, {120.0, 3}, {240.0, 0}};
    const auto r = run_replication(c, policy(PolicyKind::kUcbQr, 100.0), 4, 500.0);
    std::set<RecordKind> kinds;
    for (const auto& rec : r.log.records) kinds.insert(rec.kind);
    CHECK(kinds == std::set<RecordKind>{RecordKind::kScheduleUpdate, RecordKind::kEpisodeEnd});
    int ends = 0;
    for (const auto& rec : r.log.records)
        if (rec.kind == RecordKind::kEpisodeEnd) {
            ++ends;
            CHECK(rec.time == 100.0 * rec.detail);
        }
    CHECK(ends == 5);
}

TEST_CASE("same seed, identical log") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const SystemConfig c = testing::random_system(rng);
        for (PolicyKind k : {PolicyKind::kUcbQr, PolicyKind::kRandom, PolicyKind::kUcbQrTree}) {
            const auto a = run_replication(c, policy(k), 1000 + trial, 600.0);
            const auto b = run_replication(c, policy(k), 1000 + trial, 600.0);
            CHECK(format_event_log(a.log) == format_event_log(b.log));
        }
    }
}

TEST_CASE("policies see the same arrivals") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const SystemConfig c = testing::random_system(rng);
        std::vector<std::vector<std::pair<double, int>>> seen;
        for (PolicyKind k : kAllKinds) {
            const auto r = run_replication(c, policy(k), 77, 600.0);
            std::vector<std::pair<double, int>> arrivals;
            for (const auto& rec : r.log.records)
                if (rec.kind == RecordKind::kArrival) arrivals.push_back({rec.time, rec.type});
            seen.push_back(arrivals);
        }
        for (const auto& s : seen) CHECK(s == seen.front());
    }
}

TEST_CASE("conservation holds on random logs") {
    Rng rng(41);
    for (int trial = 0; trial < 25; ++trial) {
        const SystemConfig c = testing::random_system(rng);
        for (PolicyKind k : kAllKinds) {
            CAPTURE(to_string(k));
            const auto r = run_replication(c, policy(k, 60.0), 500 + trial, 700.0);
            CHECK_FALSE(r.log.aborted);
            const auto rep = testing::replay_log(r.log, c, k == PolicyKind::kFcfsAlis);
            CHECK_MESSAGE(rep.error.empty(), rep.error);
        }
    }
}

TEST_CASE("explicit timestamps are replayed") {
    SystemConfig c = testing::single_queue(0.0, 1.0);
    c.arrivals[0] = ArrivalSource{{1.0, 1.0, 5.0, 900.0}, {}};
    const auto r = run_replication(c, policy(PolicyKind::kFcfsAlis), 3, 100.0);
    std::vector<double> times;
    for (const auto& rec : r.log.records)
        if (rec.kind == RecordKind::kArrival) times.push_back(rec.time);
    CHECK(times == std::vector<double>{1.0, 1.0, 5.0});
}

TEST_CASE("capacity scaling speeds up service") {
    SystemConfig c = testing::single_queue(0.0, 1.0, 4);
    c.arrivals[0] = ArrivalSource{{10.0}, {}};
    c.service[0] = EmpiricalService{{200.0}};
    const auto r = run_replication(c, policy(PolicyKind::kFcfsAlis), 3, 1000.0);
    double start = -1.0, end = -1.0;
    for (const auto& rec : r.log.records) {
        if (rec.kind == RecordKind::kServiceStart) {
            start = rec.time;
            CHECK(rec.detail == 50.0);
        }
        if (rec.kind == RecordKind::kDeparture) {
            end = rec.time;
            CHECK(rec.detail == 200.0);
        }
    }
    CHECK(start == 10.0);
    CHECK(end == 60.0);
}

TEST_CASE("agent change mid-service rescales the remainder") {
    SystemConfig c = testing::single_queue(0.0, 1.0, 2);
    c.arrivals[0] = ArrivalSource{{0.0}, {}};
    c.service[0] = EmpiricalService{{400.0}};
    c.capacity[0].points = {{0.0, 2}, {100.0, 4}};
    const auto r = run_replication(c, policy(PolicyKind::kFcfsAlis), 3, 1000.0);
    // 200 agent-seconds done by t=100, the remaining 200 at speed 4 take 50 s
    for (const auto& rec : r.log.records)
        if (rec.kind == RecordKind::kDeparture) CHECK(rec.time == 150.0);
}

TEST_CASE("apply_schedule_update examples") {
    ServerState s;
    s.status = ServerState::Status::kBusy;
    s.agents = 2;
    s.speed = 2;
    s.work = 400.0;
    s.remaining_work = 200.0;  // 100 s at two agents
    s.last_update = 50.0;
    s.scheduled_end = 150.0;
    apply_schedule_update(s, 4, 50.0);
    CHECK(s.scheduled_end == 100.0);
    CHECK(s.agents == 4);

    ServerState same = s;
    apply_schedule_update(same, 4, 60.0);
    CHECK(same.scheduled_end == s.scheduled_end);

    ServerState idle;
    idle.agents = 1;
    apply_schedule_update(idle, 0, 10.0);
    CHECK(idle.status == ServerState::Status::kInactive);
    CHECK(idle.agents == 0);
    apply_schedule_update(idle, 2, 20.0);
    CHECK(idle.status == ServerState::Status::kIdle);
    CHECK(idle.idle_since == 20.0);

    ServerState busy = s;
    apply_schedule_update(busy, 0, 70.0);
    CHECK(busy.status == ServerState::Status::kBusy);
    CHECK(busy.scheduled_end == 100.0);
    CHECK(busy.agents == 0);

    CHECK_THROWS_AS(apply_schedule_update(busy, -1, 80.0), std::invalid_argument);
}

TEST_CASE("zero agents take no new customers") {
    SystemConfig c = testing::single_queue(0.0, 1.0, 1);
    c.arrivals[0] = ArrivalSource{{10.0, 20.0}, {}};
    c.service[0] = EmpiricalService{{5.0}};
    c.capacity[0].points = {{0.0, 0}, {100.0, 1}};
    const auto r = run_replication(c, policy(PolicyKind::kFcfsAlis), 3, 1000.0);
    std::vector<double> starts;
    for (const auto& rec : r.log.records)
        if (rec.kind == RecordKind::kServiceStart) starts.push_back(rec.time);
    CHECK(starts == std::vector<double>{100.0, 105.0});
}

TEST_CASE("sample_service_duration") {
    Rng rng(1);
    CHECK(sample_service_duration(EmpiricalService{{200.0}}, 1, rng) == 200.0);
    CHECK(sample_service_duration(EmpiricalService{{200.0}}, 4, rng) == 50.0);
    CHECK_THROWS_AS(sample_service_duration(EmpiricalService{}, 1, rng), EmptyPool);
    CHECK_THROWS(sample_service_duration(ExponentialService{1.0}, 0, rng));

    double sum = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) sum += sample_service_duration(ExponentialService{257.0}, 1, rng);
    CHECK(std::abs(sum / n - 257.0) < 0.02 * 257.0);

    // empirical draws cover the pool uniformly
    std::map<double, int> hits;
    for (int k = 0; k < 30000; ++k) ++hits[sample_work(EmpiricalService{{1.0, 2.0, 3.0}}, rng)];
    REQUIRE(hits.size() == 3);
    for (auto [v, cnt] : hits) CHECK(std::abs(cnt - 10000) < 500);
}

TEST_CASE("invalid input is rejected") {
    SystemConfig c = testing::single_queue(0.5, 1.0);
    c.payoff[0] = 2.0;
    try {
        run_replication(c, policy(PolicyKind::kRandom), 1, 10.0);
        FAIL("expected ConfigInvalid");
    } catch (const ConfigInvalid& e) {
        REQUIRE(e.violations().size() == 1);
        CHECK(e.violations()[0].field == "payoff[0]");
    }
    c = testing::single_queue(0.5, 1.0);
    CHECK_THROWS_AS(run_replication(c, policy(PolicyKind::kRandom), 1, 0.0), ConfigInvalid);
    PolicySpec bad = policy(PolicyKind::kUcbQr);
    bad.episode_length_h = 0.0;
    CHECK_THROWS_AS(run_replication(c, bad, 1, 10.0), ConfigInvalid);
}

TEST_CASE("event log round trip") {
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const SystemConfig c = testing::random_system(rng);
        const auto r = run_replication(c, policy(PolicyKind::kUcbQr), trial, 400.0);
        std::stringstream ss;
        write_event_log(ss, r.log);
        const EventLog back = read_event_log(ss);
        CHECK(back == r.log);
        CHECK(format_event_log(back) == format_event_log(r.log));
    }
    std::stringstream junk("not a log\n1\t2\n");
    CHECK_THROWS(read_event_log(junk));
}

TEST_CASE("episodic policies report one snapshot per episode") {
    const SystemConfig c = testing::single_queue(0.3, 1.0);
    const auto r = run_replication(c, policy(PolicyKind::kUcbQr, 50.0), 2, 500.0);
    REQUIRE(r.snapshots.size() >= 10);
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
        CHECK(r.snapshots[k].episode == static_cast<int>(k) + 1);
        CHECK(r.snapshots[k].time == 50.0 * k);
    }
    const auto s = run_replication(c, policy(PolicyKind::kGreedy), 2, 500.0);
    CHECK(s.snapshots.empty());
}

}  // TEST_SUITE
