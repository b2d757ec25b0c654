#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucbqr/model.hpp"
#include "ucbqr/simplex.hpp"

namespace ucbqr {

/// Substitute for an infinite UCB estimate. Any value above the largest
/// possible payoff (1) makes unexplored lines preferred when capacity allows.
inline constexpr double kThetaCap = 2.0;

inline constexpr double kFrankWolfeRelativeGap = 1e-6;
inline constexpr int kFrankWolfeMaxIterations = 500;

/// Relative threshold (times max lambda) below which a rate counts as zero
/// when building the spanning forest.
inline constexpr double kEdgeThresholdFactor = 1e-9;

class InfeasibleRegion : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotAVertex : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CyclicSupport : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ObjectiveKind { kLinear, kFairnessQuadratic, kPluggablePenalty };

struct LpProblem;

/// Convex penalty subtracted (times gamma) from the payoff objective.
struct ConvexPenalty {
    std::string name;
    std::function<double(const LpProblem&, std::span<const double> rates)> value;
    std::function<std::vector<double>(const LpProblem&, std::span<const double> rates)> gradient;
};

/// Routing-rate optimization problem over a set of lines. Type and server
/// indices are global; types with zero arrival rate drop out.
struct LpProblem {
    int num_types = 0;
    int num_servers = 0;
    std::vector<Line> lines;
    std::vector<double> lambda_hat;  // per type
    std::vector<double> mu_hat;      // per line, > 0
    std::vector<double> theta_hat;   // per line, may be +inf
    double epsilon = 1e-6;
    double penalty_p = 1e3;
    double gamma = 0.0;
    ObjectiveKind objective_kind = ObjectiveKind::kLinear;
    std::optional<ConvexPenalty> penalty;  // used with kPluggablePenalty
};

/// Per-server load sum_i x_ij / mu_ij.
std::vector<double> server_loads(const LpProblem& problem, std::span<const double> rates);

/// Sum_j (rho_j - mean rho)^2.
double load_variance(const LpProblem& problem, std::span<const double> rates);

/// Sum over lines of theta x, with infinite estimates capped.
double linear_payoff(const LpProblem& problem, std::span<const double> rates);

double capped_theta(double theta);

/// Maximizes payoff subject to full routing and the (1 - eps) capacity
/// bound. Returns nullopt when the polytope is empty.
std::optional<RoutingPlan> solve_primary(const LpProblem& problem);

/// Same problem with a penalized rejection server; always feasible.
RoutingPlan solve_fallback(const LpProblem& problem);

/// Payoff minus gamma times the load variance (or a pluggable penalty),
/// solved by pairwise Frank-Wolfe with the simplex as linear oracle. Throws
/// InfeasibleRegion when the primary polytope is empty.
RoutingPlan solve_fairness(const LpProblem& problem);

/// solve_fairness over the rejection-augmented polytope.
RoutingPlan solve_fairness_fallback(const LpProblem& problem);

/// Primary, then fallback when infeasible; dispatches on objective_kind.
RoutingPlan solve_routing(const LpProblem& problem);

SpanningForest extract_spanning_forest(const RoutingPlan& plan, const LpProblem& problem);

ConvexPenalty critical_load_penalty();
ConvexPenalty waiting_time_penalty();
ConvexPenalty deviation_penalty(std::vector<double> reference_rates);
ConvexPenalty spare_routing_penalty();

}  // namespace ucbqr
