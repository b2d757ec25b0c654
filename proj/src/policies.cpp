#include "ucbqr/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ucbqr {

namespace {

std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)), n - 1);
}

bool earlier(const WaitingCustomer& a, const WaitingCustomer& b) {
    if (a.arrival_time != b.arrival_time) return a.arrival_time < b.arrival_time;
    return a.id < b.id;
}

// Categorical draw over the type's lines; uniform over compatible servers
// when the type has no routed mass.
int draw_server(const Compatibility& compat, std::span<const double> probs, int type,
                const DispatchState& state, Rng& rng) {
    const auto& lines = compat.lines_of_type[type];
    double total = 0.0;
    for (int l : lines) total += probs[l];
    if (total > 0.0) {
        const double u = uniform01(rng) * total;
        double acc = 0.0;
        int last_positive = -1;
        for (int l : lines) {
            if (probs[l] <= 0.0) continue;
            acc += probs[l];
            last_positive = l;
            if (u < acc) return compat.lines[l].server;
        }
        return compat.lines[last_positive].server;
    }
    std::vector<int> candidates;
    for (int l : lines) {
        const int j = compat.lines[l].server;
        if (state.servers[j].agents > 0) candidates.push_back(j);
    }
    if (candidates.empty()) {
        for (int l : lines) candidates.push_back(compat.lines[l].server);
    }
    return candidates[uniform_index(rng, candidates.size())];
}

std::optional<int> earliest_head(const Compatibility& compat, int server,
                                 const DispatchState& state, const std::vector<bool>* only_types) {
    std::optional<int> best;
    for (int l : compat.lines_of_server[server]) {
        const int i = compat.lines[l].type;
        if (only_types && !(*only_types)[i]) continue;
        if (state.type_queues[i].empty()) continue;
        if (!best || earlier(state.type_queues[i].front(), state.type_queues[*best].front()))
            best = i;
    }
    return best;
}

}  // namespace

std::vector<double> true_arrival_rates(const SystemConfig& config, double t0, double t1) {
    if (!(t1 > t0)) throw std::invalid_argument("empty rate window");
    std::vector<double> rates(config.num_types, 0.0);
    for (int i = 0; i < config.num_types; ++i) {
        if (static_cast<std::size_t>(i) >= config.arrivals.size())
            throw MissingGroundTruth("no arrival source for type " + std::to_string(i));
        const ArrivalSource& src = config.arrivals[i];
        const auto lo = std::lower_bound(src.timestamps.begin(), src.timestamps.end(), t0);
        const auto hi = std::lower_bound(src.timestamps.begin(), src.timestamps.end(), t1);
        double mass = static_cast<double>(hi - lo);
        const auto& prof = src.poisson_profile;
        for (std::size_t s = 0; s < prof.size(); ++s) {
            const double a = std::max(prof[s].start, t0);
            const double b = std::min(s + 1 < prof.size() ? prof[s + 1].start : t1, t1);
            if (b > a) mass += prof[s].rate * (b - a);
        }
        rates[i] = mass / (t1 - t0);
    }
    return rates;
}

std::vector<double> true_service_rates(const SystemConfig& config) {
    std::vector<double> mu(config.lines.size());
    for (std::size_t l = 0; l < config.lines.size(); ++l) {
        if (l >= config.service.size())
            throw MissingGroundTruth("no service source for line " + std::to_string(l));
        const auto mean = mean_duration(config.service[l]);
        if (!mean || !(*mean > 0.0))
            throw MissingGroundTruth("line " + std::to_string(l) + " has no usable mean duration");
        mu[l] = 1.0 / *mean;
    }
    return mu;
}

std::vector<double> routing_probabilities(const SystemConfig& config, std::span<const double> rates) {
    std::vector<double> total(config.num_types, 0.0);
    for (std::size_t l = 0; l < config.lines.size(); ++l) total[config.lines[l].type] += rates[l];
    std::vector<double> probs(config.lines.size(), 0.0);
    for (std::size_t l = 0; l < config.lines.size(); ++l) {
        const double t = total[config.lines[l].type];
        if (t > 0.0) probs[l] = rates[l] / t;
    }
    return probs;
}

ArrivalDecision dispatch_fcfs_rr_arrival(const Compatibility& compat, std::span<const double> probs,
                                         const WaitingCustomer& customer,
                                         const DispatchState& state, Rng& rng) {
    const int j = draw_server(compat, probs, customer.type, state, rng);
    if (state.servers[j].available() && state.virtual_queues[j].empty())
        return ArrivalDecision::start(j);
    return ArrivalDecision::join_virtual(j);
}

ServerDecision dispatch_fcfs_rr_free(int server, const DispatchState& state) {
    if (!state.virtual_queues[server].empty()) return ServerDecision::from_virtual();
    return ServerDecision::idle();
}

void reshuffle_virtual_queues(DispatchState& state, const Compatibility& compat,
                              std::span<const double> probs, Rng& rng) {
    std::vector<WaitingCustomer> waiting;
    for (auto& q : state.virtual_queues) {
        waiting.insert(waiting.end(), q.begin(), q.end());
        q.clear();
    }
    std::sort(waiting.begin(), waiting.end(), earlier);
    for (const WaitingCustomer& c : waiting) {
        const int j = draw_server(compat, probs, c.type, state, rng);
        state.virtual_queues[j].push_back(c);
    }
}

ArrivalDecision dispatch_tree_arrival(const SpanningForest& forest, const Compatibility& compat,
                                      std::span<const double> theta,
                                      const WaitingCustomer& customer, const DispatchState& state) {
    const int i = customer.type;
    if (!forest.contains_type(i)) {
        Rng unused;
        return dispatch_static_arrival(PolicyKind::kFcfsAlis, compat, theta, {}, customer, state,
                                       unused);
    }
    int best = -1;
    for (int j : forest.children_of_queue[i]) {
        if (!state.servers[j].available()) continue;
        if (best < 0 || theta[compat.line(i, j)] > theta[compat.line(i, best)]) best = j;
    }
    if (best >= 0) return ArrivalDecision::start(best);
    if (const auto parent = forest.parent_of_queue[i]; parent && state.servers[*parent].available())
        return ArrivalDecision::start(*parent);
    return ArrivalDecision::join_queue();
}

ServerDecision dispatch_tree_free(const SpanningForest& forest, const Compatibility& compat,
                                  std::span<const double> theta, int server,
                                  const DispatchState& state) {
    int best = -1;
    for (int i : forest.children_of_server[server]) {
        if (state.type_queues[i].empty()) continue;
        if (best < 0 || theta[compat.line(i, server)] > theta[compat.line(best, server)]) best = i;
    }
    if (best >= 0) return ServerDecision::from_type(best);
    if (const auto parent = forest.parent_of_server[server];
        parent && !state.type_queues[*parent].empty())
        return ServerDecision::from_type(*parent);
    // Customers of types outside the forest are served first-come first-served.
    std::vector<bool> absent(forest.type_in_forest.size());
    for (std::size_t i = 0; i < absent.size(); ++i) absent[i] = !forest.type_in_forest[i];
    if (const auto i = earliest_head(compat, server, state, &absent))
        return ServerDecision::from_type(*i);
    return ServerDecision::idle();
}

ArrivalDecision dispatch_static_arrival(PolicyKind kind, const Compatibility& compat,
                                        std::span<const double> theta,
                                        std::span<const double> mu_per_agent,
                                        const WaitingCustomer& customer,
                                        const DispatchState& state, Rng& rng) {
    std::vector<int> candidates;  // lines with an available server
    for (int l : compat.lines_of_type[customer.type]) {
        if (state.servers[compat.lines[l].server].available()) candidates.push_back(l);
    }
    if (candidates.empty()) return ArrivalDecision::join_queue();
    int chosen = candidates.front();
    switch (kind) {
        case PolicyKind::kFcfsAlis:
            for (int l : candidates) {
                const auto& a = state.servers[compat.lines[l].server];
                const auto& b = state.servers[compat.lines[chosen].server];
                if (a.idle_since < b.idle_since ||
                    (a.idle_since == b.idle_since &&
                     compat.lines[l].server < compat.lines[chosen].server))
                    chosen = l;
            }
            break;
        case PolicyKind::kGreedy:
            for (int l : candidates)
                if (theta[l] > theta[chosen]) chosen = l;
            break;
        case PolicyKind::kThetaMu: {
            auto index = [&](int l) {
                return theta[l] * mu_per_agent[l] * state.servers[compat.lines[l].server].agents;
            };
            for (int l : candidates)
                if (index(l) > index(chosen)) chosen = l;
            break;
        }
        case PolicyKind::kRandom: chosen = candidates[uniform_index(rng, candidates.size())]; break;
        default: throw std::invalid_argument("not a static policy: " + to_string(kind));
    }
    return ArrivalDecision::start(compat.lines[chosen].server);
}

ServerDecision dispatch_static_free(PolicyKind kind, const Compatibility& compat,
                                    std::span<const double> theta,
                                    std::span<const double> mu_per_agent, int server,
                                    const DispatchState& state, Rng& rng) {
    if (kind == PolicyKind::kFcfsAlis) {
        if (const auto i = earliest_head(compat, server, state, nullptr))
            return ServerDecision::from_type(*i);
        return ServerDecision::idle();
    }
    std::vector<int> candidates;  // lines whose type has someone waiting
    for (int l : compat.lines_of_server[server]) {
        if (!state.type_queues[compat.lines[l].type].empty()) candidates.push_back(l);
    }
    if (candidates.empty()) return ServerDecision::idle();
    int chosen = candidates.front();
    switch (kind) {
        case PolicyKind::kGreedy:
            for (int l : candidates)
                if (theta[l] > theta[chosen]) chosen = l;
            break;
        case PolicyKind::kThetaMu:
            // The agent count is common to all candidates here.
            for (int l : candidates)
                if (theta[l] * mu_per_agent[l] > theta[chosen] * mu_per_agent[chosen]) chosen = l;
            break;
        case PolicyKind::kRandom: chosen = candidates[uniform_index(rng, candidates.size())]; break;
        default: throw std::invalid_argument("not a static policy: " + to_string(kind));
    }
    return ServerDecision::from_type(compat.lines[chosen].type);
}

GroundTruthFlags ground_truth_flags(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::kOracle: return {true, true, true};
        case PolicyKind::kUcbQrMu: return {false, false, true};
        case PolicyKind::kUcbQrLambda: return {false, true, false};
        default: return {};
    }
}

PolicyRuntime::PolicyRuntime(const SystemConfig& config, PolicySpec spec, GroundTruthFlags truth,
                             Rng rng)
    : config_(&config),
      spec_(std::move(spec)),
      truth_(truth),
      rng_(rng),
      compat_(config),
      tree_dispatch_(spec_.kind == PolicyKind::kUcbQrTree),
      ucb_(config.lines.size()),
      holt_(static_cast<std::size_t>(config.num_types)),
      service_(config.lines.size(), spec_.mu_init) {
    if (truth_.mu || spec_.pinned_rates) true_mu_ = true_service_rates(config);
    if (truth_.theta && config.payoff.size() != config.lines.size())
        throw MissingGroundTruth("payoff means missing");
    probs_.assign(config.lines.size(), 0.0);
    theta_for_dispatch_.assign(config.lines.size(), std::numeric_limits<double>::infinity());
}

std::vector<double> PolicyRuntime::dispatch_theta() const {
    if (truth_.theta || spec_.pinned_rates) return config_->payoff;
    return ucb_.ucb;
}

EpisodeSnapshot PolicyRuntime::episode_begin(int episode, const EpisodeObservations& obs,
                                             DispatchState& state) {
    const SystemConfig& config = *config_;
    const double h = spec_.episode_length_h;
    const double now = state.now;

    if (obs.finished_episode >= 1) {
        ucb_update(ucb_, obs.finished_episode, obs.payoffs);
        for (int i = 0; i < config.num_types; ++i)
            holt_update_and_forecast(holt_[i], obs.arrivals[i], spec_.holt_alpha, spec_.holt_beta);
        service_rate_update(service_, obs.durations);
    }

    const bool pinned = spec_.pinned_rates.has_value();
    const std::vector<double> theta = dispatch_theta();
    std::vector<double> lambda(config.num_types, 0.0);
    if (truth_.lambda || pinned) {
        lambda = true_arrival_rates(config, now, now + h);
    } else {
        for (int i = 0; i < config.num_types; ++i)
            lambda[i] = forecast_to_rate(holt_[i].last_forecast, h);
    }
    const std::vector<double>& mu_agent = (truth_.mu || pinned) ? true_mu_ : service_.estimate;

    // Lines to servers without agents have no capacity and stay out of the problem.
    LpProblem problem;
    problem.num_types = config.num_types;
    problem.num_servers = config.num_servers;
    problem.lambda_hat = lambda;
    problem.epsilon = spec_.epsilon;
    problem.penalty_p = spec_.penalty_p;
    problem.gamma = spec_.gamma;
    problem.objective_kind =
        spec_.gamma > 0.0 ? ObjectiveKind::kFairnessQuadratic : ObjectiveKind::kLinear;
    std::vector<int> config_line;
    std::vector<double> mu_used(config.lines.size(), 0.0);
    for (std::size_t l = 0; l < config.lines.size(); ++l) {
        const int agents = state.servers[config.lines[l].server].agents;
        if (agents <= 0) continue;
        config_line.push_back(static_cast<int>(l));
        problem.lines.push_back(config.lines[l]);
        problem.mu_hat.push_back(mu_agent[l] * agents);
        problem.theta_hat.push_back(theta[l]);
        mu_used[l] = mu_agent[l] * agents;
    }

    RoutingPlan sub;
    if (pinned) {
        sub.is_vertex = true;
        for (int l : config_line) sub.rates.push_back((*spec_.pinned_rates)[l]);
        sub.objective_value = linear_payoff(problem, sub.rates);
    } else {
        sub = solve_routing(problem);
    }

    plan_ = RoutingPlan{};
    plan_.rates.assign(config.lines.size(), 0.0);
    for (std::size_t k = 0; k < config_line.size(); ++k) plan_.rates[config_line[k]] = sub.rates[k];
    plan_.rejection_rates = sub.rejection_rates;
    plan_.objective_value = sub.objective_value;
    plan_.is_vertex = sub.is_vertex;
    probs_ = routing_probabilities(config, plan_.rates);
    theta_for_dispatch_ = theta;

    forest_.reset();
    forest_fallback_ = false;
    if (tree_dispatch_) {
        try {
            forest_ = extract_spanning_forest(sub, problem);
        } catch (const CyclicSupport&) {
            forest_fallback_ = true;
        }
    } else {
        reshuffle_virtual_queues(state, compat_, probs_, rng_);
    }

    EpisodeSnapshot snap;
    snap.episode = episode;
    snap.time = now;
    snap.lambda_hat = lambda;
    snap.mu_hat = mu_used;
    snap.theta_hat = theta;
    snap.rates = plan_.rates;
    snap.rejection_rates = plan_.rejection_rates;
    snap.probs = probs_;
    if (forest_) snap.forest_edges = forest_->edges;
    snap.used_fallback = !plan_.rejection_rates.empty();
    snap.forest_fallback = forest_fallback_;
    snap.objective_value = plan_.objective_value;
    return snap;
}

ArrivalDecision PolicyRuntime::on_arrival(const WaitingCustomer& customer,
                                          const DispatchState& state) {
    if (!tree_dispatch_) return dispatch_fcfs_rr_arrival(compat_, probs_, customer, state, rng_);
    if (!forest_)
        return dispatch_static_arrival(PolicyKind::kFcfsAlis, compat_, theta_for_dispatch_, {},
                                       customer, state, rng_);
    return dispatch_tree_arrival(*forest_, compat_, theta_for_dispatch_, customer, state);
}

ServerDecision PolicyRuntime::on_server_free(int server, const DispatchState& state) {
    if (!tree_dispatch_) return dispatch_fcfs_rr_free(server, state);
    if (!forest_)
        return dispatch_static_free(PolicyKind::kFcfsAlis, compat_, theta_for_dispatch_, {}, server,
                                    state, rng_);
    return dispatch_tree_free(*forest_, compat_, theta_for_dispatch_, server, state);
}

std::unique_ptr<PolicyRuntime> make_oracle(const SystemConfig& config, const PolicySpec& spec,
                                           Rng rng) {
    const GroundTruthFlags flags = ground_truth_flags(spec.kind);
    if (!flags.theta && !flags.lambda && !flags.mu)
        throw std::invalid_argument(to_string(spec.kind) + " is not an oracle variant");
    return std::make_unique<PolicyRuntime>(config, spec, flags, rng);
}

StaticPolicy::StaticPolicy(const SystemConfig& config, PolicyKind kind, Rng rng)
    : kind_(kind), rng_(rng), compat_(config), theta_(config.payoff) {
    if (kind == PolicyKind::kThetaMu) mu_ = true_service_rates(config);
    if ((kind == PolicyKind::kGreedy || kind == PolicyKind::kThetaMu) &&
        theta_.size() != config.lines.size())
        throw MissingGroundTruth("payoff means missing");
}

EpisodeSnapshot StaticPolicy::episode_begin(int episode, const EpisodeObservations&,
                                            DispatchState& state) {
    EpisodeSnapshot snap;
    snap.episode = episode;
    snap.time = state.now;
    return snap;
}

ArrivalDecision StaticPolicy::on_arrival(const WaitingCustomer& customer,
                                         const DispatchState& state) {
    return dispatch_static_arrival(kind_, compat_, theta_, mu_, customer, state, rng_);
}

ServerDecision StaticPolicy::on_server_free(int server, const DispatchState& state) {
    return dispatch_static_free(kind_, compat_, theta_, mu_, server, state, rng_);
}

std::unique_ptr<RoutingPolicy> make_policy(const SystemConfig& config, const PolicySpec& spec,
                                           Rng rng) {
    switch (spec.kind) {
        case PolicyKind::kUcbQr:
        case PolicyKind::kUcbQrTree:
            return std::make_unique<PolicyRuntime>(config, spec, GroundTruthFlags{}, rng);
        case PolicyKind::kOracle:
        case PolicyKind::kUcbQrLambda:
        case PolicyKind::kUcbQrMu: return make_oracle(config, spec, rng);
        case PolicyKind::kFcfsAlis:
        case PolicyKind::kGreedy:
        case PolicyKind::kRandom:
        case PolicyKind::kThetaMu: return std::make_unique<StaticPolicy>(config, spec.kind, rng);
    }
    throw std::invalid_argument("unknown policy kind");
}

}  // namespace ucbqr
