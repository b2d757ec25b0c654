#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "ucbqr/model.hpp"

namespace ucbqr {

struct WaitingCustomer {
    std::int64_t id = 0;
    int type = 0;
    double arrival_time = 0.0;
};

struct ServerView {
    int agents = 0;
    bool idle = true;         // not serving anyone
    double idle_since = 0.0;  // meaningful when idle

    bool available() const { return idle && agents > 0; }
};

/// What a routing policy sees of the system: waiting customers and server
/// availability. Policies may only reorder or move waiting customers.
struct DispatchState {
    double now = 0.0;
    std::vector<std::deque<WaitingCustomer>> type_queues;     // per type, FIFO
    std::vector<std::deque<WaitingCustomer>> virtual_queues;  // per server
    std::vector<ServerView> servers;

    DispatchState() = default;
    DispatchState(int num_types, int num_servers);

    std::size_t waiting_count() const;
};

struct ArrivalDecision {
    enum class Kind { kStart, kJoinQueue, kJoinVirtual };
    Kind kind = Kind::kJoinQueue;
    int server = -1;

    static ArrivalDecision start(int server) { return {Kind::kStart, server}; }
    static ArrivalDecision join_queue() { return {Kind::kJoinQueue, -1}; }
    static ArrivalDecision join_virtual(int server) { return {Kind::kJoinVirtual, server}; }
};

/// What a freed server does next: idle, or take the head of a type queue
/// or of its own virtual queue.
struct ServerDecision {
    enum class Kind { kIdle, kTypeQueue, kVirtualQueue };
    Kind kind = Kind::kIdle;
    int type = -1;

    static ServerDecision idle() { return {Kind::kIdle, -1}; }
    static ServerDecision from_type(int type) { return {Kind::kTypeQueue, type}; }
    static ServerDecision from_virtual() { return {Kind::kVirtualQueue, -1}; }
};

/// Everything the engine hands a policy at an episode boundary.
struct EpisodeObservations {
    int finished_episode = 0;  // 0 before the first episode
    double start = 0.0;
    double end = 0.0;
    std::vector<std::vector<int>> payoffs;       // per line
    std::vector<std::vector<double>> durations;  // per line, per-agent work
    std::vector<int> arrivals;                   // per type
};

/// Plan and estimator values chosen at the start of an episode.
struct EpisodeSnapshot {
    int episode = 0;
    double time = 0.0;
    std::vector<double> lambda_hat;  // per type
    std::vector<double> mu_hat;      // per line, capacity used in the LP (0 when excluded)
    std::vector<double> theta_hat;   // per line, may be +inf
    std::vector<double> rates;       // per line
    std::vector<double> rejection_rates;
    std::vector<double> probs;       // per line
    std::vector<Line> forest_edges;
    bool used_fallback = false;
    bool forest_fallback = false;  // tree dispatch fell back to FCFS-ALIS
    double objective_value = 0.0;
};

class RoutingPolicy {
public:
    virtual ~RoutingPolicy() = default;

    virtual bool episodic() const = 0;
    virtual bool uses_virtual_queues() const = 0;

    /// Called at t = 0 with episode 1 and at every episode end with k + 1.
    virtual EpisodeSnapshot episode_begin(int episode, const EpisodeObservations& obs,
                                          DispatchState& state) = 0;
    virtual ArrivalDecision on_arrival(const WaitingCustomer& customer,
                                       const DispatchState& state) = 0;
    virtual ServerDecision on_server_free(int server, const DispatchState& state) = 0;
};

}  // namespace ucbqr
