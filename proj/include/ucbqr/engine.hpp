#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ucbqr/dispatch.hpp"
#include "ucbqr/event_log.hpp"
#include "ucbqr/model.hpp"
#include "ucbqr/rng.hpp"

namespace ucbqr {

class ConfigInvalid : public std::invalid_argument {
public:
    ConfigInvalid(const std::string& what, std::vector<Violation> violations)
        : std::invalid_argument(what), violations_(std::move(violations)) {}
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

class EmptyPool : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ReplicationResult {
    EventLog log;
    std::vector<EpisodeSnapshot> snapshots;  // episodic policies only
};

/// A routing policy threw mid-run. Carries everything recorded up to the
/// failure; partial().log.aborted is set.
class PolicyFailure : public std::runtime_error {
public:
    PolicyFailure(const std::string& what, ReplicationResult partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const ReplicationResult& partial() const { return partial_; }

private:
    ReplicationResult partial_;
};

/// Per-agent work drawn from a line's service source.
double sample_work(const ServiceSource& source, Rng& rng);

/// Wall-clock duration of a service started with `server_count` agents.
double sample_service_duration(const ServiceSource& source, int server_count, Rng& rng);

struct ServerState {
    enum class Status { kIdle, kBusy, kInactive };

    Status status = Status::kIdle;
    int agents = 1;
    std::int64_t customer = -1;
    int line = -1;
    double started_at = 0.0;
    double work = 0.0;            // per-agent work of the current service
    double remaining_work = 0.0;  // as of last_update
    double last_update = 0.0;
    int speed = 1;                // agent count the remaining work is processed at
    double scheduled_end = 0.0;
    double cumulative_busy = 0.0;
    double idle_since = 0.0;
};

/// Changes the agent count at time `now`. A running service keeps its
/// remaining work, now processed at the new speed; with zero agents it
/// finishes as scheduled and the server then goes inactive.
void apply_schedule_update(ServerState& server, int new_count, double now);

/// Simulates one replication. Identical inputs give bit-identical output.
/// Throws ConfigInvalid for a bad config/policy and PolicyFailure when the
/// policy's solver fails.
ReplicationResult run_replication(const SystemConfig& config, const PolicySpec& policy,
                                  std::uint64_t seed, double horizon);

}  // namespace ucbqr
