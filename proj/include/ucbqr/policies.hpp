#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ucbqr/dispatch.hpp"
#include "ucbqr/estimators.hpp"
#include "ucbqr/lp.hpp"
#include "ucbqr/model.hpp"
#include "ucbqr/rng.hpp"

namespace ucbqr {

class MissingGroundTruth : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mean arrival rate of each type over [t0, t1): explicit timestamps in the
/// window plus the integral of the Poisson profile, divided by the length.
std::vector<double> true_arrival_rates(const SystemConfig& config, double t0, double t1);

/// Per-agent service rate of every line (1 / mean duration).
std::vector<double> true_service_rates(const SystemConfig& config);

/// p_ij = x_ij / sum_k x_ik over real servers; all zero for a type with no
/// routed mass.
std::vector<double> routing_probabilities(const SystemConfig& config, std::span<const double> rates);

// Routing probability dispatch with per-server virtual queues.
ArrivalDecision dispatch_fcfs_rr_arrival(const Compatibility& compat, std::span<const double> probs,
                                         const WaitingCustomer& customer,
                                         const DispatchState& state, Rng& rng);
ServerDecision dispatch_fcfs_rr_free(int server, const DispatchState& state);

/// Empties the virtual queues and redistributes their customers by fresh
/// categorical draws, in arrival order, so each queue ends up sorted by
/// arrival time.
void reshuffle_virtual_queues(DispatchState& state, const Compatibility& compat,
                              std::span<const double> probs, Rng& rng);

// Spanning-forest dispatch. theta is per line (may contain +inf).
ArrivalDecision dispatch_tree_arrival(const SpanningForest& forest, const Compatibility& compat,
                                      std::span<const double> theta,
                                      const WaitingCustomer& customer, const DispatchState& state);
ServerDecision dispatch_tree_free(const SpanningForest& forest, const Compatibility& compat,
                                  std::span<const double> theta, int server,
                                  const DispatchState& state);

/// Static benchmark rules. theta and mu_per_agent are the true per-line
/// values; mu is scaled by the server's current agent count for THETA_MU.
ArrivalDecision dispatch_static_arrival(PolicyKind kind, const Compatibility& compat,
                                        std::span<const double> theta,
                                        std::span<const double> mu_per_agent,
                                        const WaitingCustomer& customer,
                                        const DispatchState& state, Rng& rng);
ServerDecision dispatch_static_free(PolicyKind kind, const Compatibility& compat,
                                    std::span<const double> theta,
                                    std::span<const double> mu_per_agent, int server,
                                    const DispatchState& state, Rng& rng);

/// Which parameters an episodic policy reads from ground truth instead of
/// estimating.
struct GroundTruthFlags {
    bool theta = false;
    bool lambda = false;
    bool mu = false;
};

GroundTruthFlags ground_truth_flags(PolicyKind kind);

/// Episodic learning policy: estimators, per-episode solve, and either
/// virtual-queue or spanning-forest dispatch.
class PolicyRuntime : public RoutingPolicy {
public:
    PolicyRuntime(const SystemConfig& config, PolicySpec spec, GroundTruthFlags truth, Rng rng);

    bool episodic() const override { return true; }
    bool uses_virtual_queues() const override { return !tree_dispatch_; }
    EpisodeSnapshot episode_begin(int episode, const EpisodeObservations& obs,
                                  DispatchState& state) override;
    ArrivalDecision on_arrival(const WaitingCustomer& customer, const DispatchState& state) override;
    ServerDecision on_server_free(int server, const DispatchState& state) override;

    const PolicySpec& spec() const { return spec_; }
    const UcbState& ucb() const { return ucb_; }
    const std::vector<HoltState>& holt() const { return holt_; }
    const ServiceRateState& service() const { return service_; }
    const RoutingPlan& current_plan() const { return plan_; }
    const std::vector<double>& current_probs() const { return probs_; }
    const std::optional<SpanningForest>& current_forest() const { return forest_; }

private:
    std::vector<double> dispatch_theta() const;

    const SystemConfig* config_;
    PolicySpec spec_;
    GroundTruthFlags truth_;
    Rng rng_;
    Compatibility compat_;
    bool tree_dispatch_;
    UcbState ucb_;
    std::vector<HoltState> holt_;
    ServiceRateState service_;
    std::vector<double> true_mu_;
    RoutingPlan plan_;
    std::vector<double> probs_;
    std::vector<double> theta_for_dispatch_;
    std::optional<SpanningForest> forest_;
    bool forest_fallback_ = false;
};

/// Oracle and the partial-knowledge variants (ORACLE, UCBQR_MU, UCBQR_LAMBDA).
std::unique_ptr<PolicyRuntime> make_oracle(const SystemConfig& config, const PolicySpec& spec,
                                           Rng rng);

class StaticPolicy : public RoutingPolicy {
public:
    StaticPolicy(const SystemConfig& config, PolicyKind kind, Rng rng);

    bool episodic() const override { return false; }
    bool uses_virtual_queues() const override { return false; }
    EpisodeSnapshot episode_begin(int episode, const EpisodeObservations& obs,
                                  DispatchState& state) override;
    ArrivalDecision on_arrival(const WaitingCustomer& customer, const DispatchState& state) override;
    ServerDecision on_server_free(int server, const DispatchState& state) override;

private:
    PolicyKind kind_;
    Rng rng_;
    Compatibility compat_;
    std::vector<double> theta_;
    std::vector<double> mu_;
};

/// The config must outlive the returned policy.
std::unique_ptr<RoutingPolicy> make_policy(const SystemConfig& config, const PolicySpec& spec,
                                           Rng rng);

}  // namespace ucbqr
