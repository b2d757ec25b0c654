#include "ucbqr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <queue>
#include <random>

#include "ucbqr/policies.hpp"

namespace ucbqr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Merges a type's explicit timestamps with a lazily generated
// piecewise-constant Poisson stream.
class ArrivalStream {
public:
    ArrivalStream(const ArrivalSource& source, Rng rng)
        : source_(&source), rng_(rng) {
        if (!source.poisson_profile.empty()) {
            poisson_clock_ = source.poisson_profile.front().start;
            advance_poisson();
        }
    }

    double peek() const {
        const double ts =
            next_ts_ < source_->timestamps.size() ? source_->timestamps[next_ts_] : kInf;
        return std::min(ts, next_poisson_);
    }

    void pop() {
        const double ts =
            next_ts_ < source_->timestamps.size() ? source_->timestamps[next_ts_] : kInf;
        if (ts <= next_poisson_) {
            ++next_ts_;
        } else {
            advance_poisson();
        }
    }

private:
    void advance_poisson() {
        const auto& prof = source_->poisson_profile;
        double budget = standard_exponential(rng_);
        double t = poisson_clock_;
        while (segment_ < prof.size()) {
            const double end = segment_ + 1 < prof.size() ? prof[segment_ + 1].start : kInf;
            const double rate = prof[segment_].rate;
            if (rate > 0.0 && t + budget / rate < end) {
                t += budget / rate;
                poisson_clock_ = t;
                next_poisson_ = t;
                return;
            }
            if (end == kInf) break;
            budget -= rate * (end - t);
            t = end;
            ++segment_;
        }
        segment_ = prof.size();
        next_poisson_ = kInf;
    }

    const ArrivalSource* source_;
    Rng rng_;
    std::size_t next_ts_ = 0;
    std::size_t segment_ = 0;
    double poisson_clock_ = 0.0;
    double next_poisson_ = kInf;
};

enum class EventKind { kArrival, kDeparture, kScheduleUpdate, kEpisodeEnd };

struct Event {
    double time;
    std::uint64_t sequence;
    EventKind kind;
    int index;           // type, server or episode
    std::int64_t value;  // departure token or new agent count

    bool operator>(const Event& other) const {
        if (time != other.time) return time > other.time;
        return sequence > other.sequence;
    }
};

struct Customer {
    int type;
    double arrival_time;
};

class Simulation {
public:
    Simulation(const SystemConfig& config, const PolicySpec& spec, std::uint64_t seed,
               double horizon)
        : config_(config),
          spec_(spec),
          horizon_(horizon),
          compat_(config),
          state_(config.num_types, config.num_servers),
          servers_(static_cast<std::size_t>(config.num_servers)),
          policy_(make_policy(config, spec, make_stream(seed, "policy"))) {
        for (int i = 0; i < config.num_types; ++i)
            arrivals_.emplace_back(config.arrivals[i], make_stream(seed, "arrivals", i));
        for (std::size_t l = 0; l < config.lines.size(); ++l) {
            service_rng_.push_back(make_stream(seed, "service", l));
            payoff_rng_.push_back(make_stream(seed, "payoff", l));
        }
        departure_token_.assign(static_cast<std::size_t>(config.num_servers), 0);
        result_.log.num_types = config.num_types;
        result_.log.num_servers = config.num_servers;
        result_.log.horizon = horizon;
        reset_observations(0.0);
    }

    ReplicationResult run() {
        try {
            start();
            while (!events_.empty()) {
                const Event ev = events_.top();
                if (ev.time > horizon_) break;
                events_.pop();
                now_ = ev.time;
                state_.now = now_;
                switch (ev.kind) {
                    case EventKind::kArrival: on_arrival(ev.index); break;
                    case EventKind::kDeparture: on_departure(ev.index, ev.value); break;
                    case EventKind::kScheduleUpdate:
                        on_schedule_update(ev.index, static_cast<int>(ev.value));
                        break;
                    case EventKind::kEpisodeEnd: on_episode_end(ev.index); break;
                }
            }
        } catch (const ConfigInvalid&) {
            throw;
        } catch (const std::exception& e) {
            result_.log.aborted = true;
            result_.log.abort_reason = e.what();
            throw PolicyFailure(std::string("replication aborted at t=") + std::to_string(now_) +
                                    ": " + e.what(),
                                std::move(result_));
        }
        return std::move(result_);
    }

private:
    void push(double time, EventKind kind, int index, std::int64_t value = 0) {
        events_.push(Event{time, next_sequence_++, kind, index, value});
    }

    void log(RecordKind kind, int type, int server, std::int64_t customer, int payoff,
             double detail) {
        const auto seq = static_cast<std::int64_t>(result_.log.records.size());
        result_.log.records.push_back({now_, seq, kind, type, server, customer, payoff, detail});
    }

    void sync_view(int j) {
        ServerView& v = state_.servers[j];
        v.agents = servers_[j].agents;
        v.idle = servers_[j].status != ServerState::Status::kBusy;
        v.idle_since = servers_[j].idle_since;
    }

    void reset_observations(double start) {
        obs_.start = start;
        obs_.payoffs.assign(config_.lines.size(), {});
        obs_.durations.assign(config_.lines.size(), {});
        obs_.arrivals.assign(static_cast<std::size_t>(config_.num_types), 0);
    }

    void schedule_next_arrival(int type) {
        const double t = arrivals_[type].peek();
        if (t <= horizon_) push(t, EventKind::kArrival, type);
    }

    void start() {
        for (int j = 0; j < config_.num_servers; ++j) {
            ServerState& s = servers_[j];
            s.agents = config_.capacity[j].count_at(0.0);
            s.status = s.agents > 0 ? ServerState::Status::kIdle : ServerState::Status::kInactive;
            sync_view(j);
        }
        for (int i = 0; i < config_.num_types; ++i) schedule_next_arrival(i);
        for (int j = 0; j < config_.num_servers; ++j) {
            for (const CapacityBreakpoint& p : config_.capacity[j].points) {
                if (p.time > 0.0 && p.time <= horizon_)
                    push(p.time, EventKind::kScheduleUpdate, j, p.count);
            }
        }
        if (spec_.episode_length_h <= horizon_)
            push(spec_.episode_length_h, EventKind::kEpisodeEnd, 1);
        begin_episode(1);
    }

    void begin_episode(int episode) {
        const std::size_t before = state_.waiting_count();
        EpisodeSnapshot snap = policy_->episode_begin(episode, obs_, state_);
        if (state_.waiting_count() != before)
            throw std::logic_error("policy changed the waiting population at an episode boundary");
        if (policy_->episodic()) result_.snapshots.push_back(std::move(snap));
        reset_observations(now_);
        obs_.finished_episode = episode - 1;
        for (int j = 0; j < config_.num_servers; ++j)
            if (state_.servers[j].available()) pull(j);
    }

    void on_episode_end(int episode) {
        log(RecordKind::kEpisodeEnd, -1, -1, -1, -1, episode);
        obs_.finished_episode = episode;
        obs_.end = now_;
        const double next_end = (episode + 1) * spec_.episode_length_h;
        if (next_end <= horizon_) push(next_end, EventKind::kEpisodeEnd, episode + 1);
        begin_episode(episode + 1);
    }

    void on_arrival(int type) {
        arrivals_[type].pop();
        const auto id = static_cast<std::int64_t>(customers_.size());
        customers_.push_back({type, now_});
        log(RecordKind::kArrival, type, -1, id, -1, 0.0);
        ++obs_.arrivals[type];
        schedule_next_arrival(type);

        const WaitingCustomer c{id, type, now_};
        const ArrivalDecision d = policy_->on_arrival(c, state_);
        switch (d.kind) {
            case ArrivalDecision::Kind::kStart:
                check_server(d.server, type);
                if (!state_.servers[d.server].available())
                    throw std::logic_error("policy started service at an unavailable server");
                start_service(d.server, c);
                break;
            case ArrivalDecision::Kind::kJoinQueue: state_.type_queues[type].push_back(c); break;
            case ArrivalDecision::Kind::kJoinVirtual:
                check_server(d.server, type);
                state_.virtual_queues[d.server].push_back(c);
                break;
        }
    }

    void check_server(int server, int type) const {
        if (server < 0 || server >= config_.num_servers || compat_.line(type, server) < 0)
            throw std::logic_error("policy routed type " + std::to_string(type) +
                                   " to incompatible server " + std::to_string(server));
    }

    void start_service(int j, const WaitingCustomer& c) {
        ServerState& s = servers_[j];
        const int l = compat_.line(c.type, j);
        const double work = sample_work(config_.service[l], service_rng_[l]);
        s.status = ServerState::Status::kBusy;
        s.customer = c.id;
        s.line = l;
        s.started_at = now_;
        s.work = work;
        s.remaining_work = work;
        s.last_update = now_;
        s.speed = s.agents;
        s.scheduled_end = now_ + work / s.agents;
        departure_token_[j] = ++token_;
        sync_view(j);
        log(RecordKind::kServiceStart, c.type, j, c.id, -1, s.scheduled_end - now_);
        push(s.scheduled_end, EventKind::kDeparture, j, token_);
    }

    void pull(int j) {
        const ServerDecision d = policy_->on_server_free(j, state_);
        switch (d.kind) {
            case ServerDecision::Kind::kIdle: return;
            case ServerDecision::Kind::kTypeQueue: {
                if (d.type < 0 || d.type >= config_.num_types || state_.type_queues[d.type].empty())
                    throw std::logic_error("policy pulled from an empty type queue");
                check_server(j, d.type);
                const WaitingCustomer c = state_.type_queues[d.type].front();
                state_.type_queues[d.type].pop_front();
                start_service(j, c);
                return;
            }
            case ServerDecision::Kind::kVirtualQueue: {
                if (state_.virtual_queues[j].empty())
                    throw std::logic_error("policy pulled from an empty virtual queue");
                const WaitingCustomer c = state_.virtual_queues[j].front();
                check_server(j, c.type);
                state_.virtual_queues[j].pop_front();
                start_service(j, c);
                return;
            }
        }
    }

    void on_departure(int j, std::int64_t token) {
        if (departure_token_[j] != token) return;  // superseded by a rescale
        ServerState& s = servers_[j];
        const int l = s.line;
        const int payoff = uniform01(payoff_rng_[l]) < config_.payoff[l] ? 1 : 0;
        log(RecordKind::kDeparture, config_.lines[l].type, j, s.customer, payoff, s.work);
        obs_.payoffs[l].push_back(payoff);
        obs_.durations[l].push_back(s.work);
        s.cumulative_busy += now_ - s.started_at;
        s.customer = -1;
        s.line = -1;
        s.idle_since = now_;
        s.status = s.agents > 0 ? ServerState::Status::kIdle : ServerState::Status::kInactive;
        sync_view(j);
        if (state_.servers[j].available()) pull(j);
    }

    void on_schedule_update(int j, int count) {
        log(RecordKind::kScheduleUpdate, -1, j, -1, -1, count);
        ServerState& s = servers_[j];
        const bool was_available = state_.servers[j].available();
        const double old_end = s.scheduled_end;
        apply_schedule_update(s, count, now_);
        sync_view(j);
        if (s.status == ServerState::Status::kBusy && s.scheduled_end != old_end) {
            departure_token_[j] = ++token_;
            push(s.scheduled_end, EventKind::kDeparture, j, token_);
        }
        if (!was_available && state_.servers[j].available()) pull(j);
    }

    const SystemConfig& config_;
    const PolicySpec& spec_;
    double horizon_;
    Compatibility compat_;
    DispatchState state_;
    std::vector<ServerState> servers_;
    std::unique_ptr<RoutingPolicy> policy_;
    std::vector<ArrivalStream> arrivals_;
    std::vector<Rng> service_rng_;
    std::vector<Rng> payoff_rng_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t next_sequence_ = 0;
    std::int64_t token_ = 0;
    std::vector<std::int64_t> departure_token_;
    std::vector<Customer> customers_;
    EpisodeObservations obs_;
    ReplicationResult result_;
    double now_ = 0.0;
};

}  // namespace

double sample_work(const ServiceSource& source, Rng& rng) {
    return std::visit(
        overloaded{
            [&](const ExponentialService& s) { return s.mean * standard_exponential(rng); },
            [&](const LogNormalService& s) {
                std::normal_distribution<double> normal(s.log_mean, s.log_sd);
                return std::exp(normal(rng));
            },
            [&](const EmpiricalService& s) {
                if (s.pool.empty()) throw EmptyPool("empirical service pool is empty");
                const auto n = s.pool.size();
                const auto k = std::min(static_cast<std::size_t>(uniform01(rng) * n), n - 1);
                return s.pool[k];
            },
        },
        source);
}

double sample_service_duration(const ServiceSource& source, int server_count, Rng& rng) {
    if (server_count < 1) throw std::invalid_argument("server_count must be at least 1");
    return sample_work(source, rng) / server_count;
}

void apply_schedule_update(ServerState& server, int new_count, double now) {
    if (new_count < 0) throw std::invalid_argument("agent count must be nonnegative");
    if (server.status == ServerState::Status::kBusy) {
        server.remaining_work =
            std::max(server.remaining_work - (now - server.last_update) * server.speed, 0.0);
        server.last_update = now;
        if (new_count > 0 && new_count != server.speed) {
            server.speed = new_count;
            server.scheduled_end = now + server.remaining_work / new_count;
        }
    } else if (new_count == 0) {
        server.status = ServerState::Status::kInactive;
    } else if (server.status == ServerState::Status::kInactive) {
        server.status = ServerState::Status::kIdle;
        server.idle_since = now;
    }
    server.agents = new_count;
}

ReplicationResult run_replication(const SystemConfig& config, const PolicySpec& policy,
                                  std::uint64_t seed, double horizon) {
    auto violations = validate_config(config);
    auto policy_violations = validate_policy(policy, config);
    violations.insert(violations.end(), policy_violations.begin(), policy_violations.end());
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        violations.push_back({"horizon", "must be positive and finite"});
    if (!violations.empty()) {
        std::string what = "invalid configuration:";
        for (const Violation& v : violations) what += " " + v.field + ": " + v.message + ";";
        throw ConfigInvalid(what, std::move(violations));
    }
    Simulation sim(config, policy, seed, horizon);
    return sim.run();
}

}  // namespace ucbqr
