#include "ucbqr/lp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <numeric>

namespace ucbqr {

namespace {

void check_problem(const LpProblem& problem) {
    const std::size_t num_lines = problem.lines.size();
    if (problem.lambda_hat.size() != static_cast<std::size_t>(problem.num_types))
        throw std::invalid_argument("lambda_hat needs one entry per type");
    if (problem.mu_hat.size() != num_lines || problem.theta_hat.size() != num_lines)
        throw std::invalid_argument("mu_hat and theta_hat need one entry per line");
    if (!(problem.epsilon > 0.0 && problem.epsilon < 1.0))
        throw std::invalid_argument("epsilon must lie in (0,1)");
    for (std::size_t l = 0; l < num_lines; ++l) {
        const Line& line = problem.lines[l];
        if (line.type < 0 || line.type >= problem.num_types || line.server < 0 ||
            line.server >= problem.num_servers)
            throw std::invalid_argument("line index out of range");
        if (!(problem.mu_hat[l] > 0.0) || !std::isfinite(problem.mu_hat[l]))
            throw std::invalid_argument("mu_hat must be positive and finite on every line");
        if (std::isnan(problem.theta_hat[l])) throw std::invalid_argument("theta_hat is NaN");
    }
    for (double lambda : problem.lambda_hat) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw std::invalid_argument("lambda_hat must be finite and nonnegative");
    }
}

bool type_active(const LpProblem& problem, int type) { return problem.lambda_hat[type] > 0.0; }

// Points in the optimization space: one coordinate per line, followed by one
// rejection coordinate per type when the rejection server is present.
struct Layout {
    std::size_t num_lines;
    bool with_rejection;
    int num_types;

    std::size_t size() const { return num_lines + (with_rejection ? num_types : 0); }
};

struct StandardForm {
    LinearProgram lp;
    std::vector<int> var_of_point;  // point coordinate -> LP variable, -1 when excluded
};

StandardForm build_standard_form(const LpProblem& problem, std::span<const double> point_objective,
                                 const Layout& layout) {
    StandardForm form;
    form.var_of_point.assign(layout.size(), -1);
    std::vector<std::vector<std::pair<int, double>>> type_rows(problem.num_types);
    std::vector<std::vector<std::pair<int, double>>> server_rows(problem.num_servers);

    int var = 0;
    for (std::size_t l = 0; l < problem.lines.size(); ++l) {
        const Line& line = problem.lines[l];
        if (!type_active(problem, line.type)) continue;
        form.var_of_point[l] = var;
        form.lp.objective.push_back(point_objective[l]);
        type_rows[line.type].emplace_back(var, 1.0);
        server_rows[line.server].emplace_back(var, 1.0 / problem.mu_hat[l]);
        ++var;
    }
    if (layout.with_rejection) {
        for (int i = 0; i < problem.num_types; ++i) {
            if (!type_active(problem, i)) continue;
            form.var_of_point[layout.num_lines + i] = var;
            form.lp.objective.push_back(point_objective[layout.num_lines + i]);
            type_rows[i].emplace_back(var, 1.0);
            ++var;
        }
    }
    form.lp.num_vars = var;

    for (int i = 0; i < problem.num_types; ++i) {
        if (!type_active(problem, i)) continue;
        form.lp.rows.push_back({std::move(type_rows[i]), RowSense::kEqual, problem.lambda_hat[i]});
    }
    for (int j = 0; j < problem.num_servers; ++j) {
        if (server_rows[j].empty()) continue;
        form.lp.rows.push_back(
            {std::move(server_rows[j]), RowSense::kLessEqual, 1.0 - problem.epsilon});
    }
    return form;
}

// Solves the LP for an arbitrary linear objective over the point space.
// Returns nullopt when infeasible.
std::optional<std::vector<double>> linear_oracle(const LpProblem& problem,
                                                 std::span<const double> point_objective,
                                                 const Layout& layout) {
    StandardForm form = build_standard_form(problem, point_objective, layout);
    SimplexResult res = solve_simplex(form.lp);
    if (res.status == SimplexStatus::kInfeasible) return std::nullopt;
    if (res.status == SimplexStatus::kUnbounded)
        throw NumericalFailure("routing LP reported unbounded on a bounded polytope");
    std::vector<double> point(layout.size(), 0.0);
    for (std::size_t p = 0; p < point.size(); ++p) {
        if (form.var_of_point[p] >= 0) point[p] = res.x[form.var_of_point[p]];
    }
    return point;
}

std::vector<double> linear_point_objective(const LpProblem& problem, const Layout& layout) {
    std::vector<double> obj(layout.size(), 0.0);
    for (std::size_t l = 0; l < layout.num_lines; ++l) obj[l] = capped_theta(problem.theta_hat[l]);
    if (layout.with_rejection) {
        for (int i = 0; i < problem.num_types; ++i) obj[layout.num_lines + i] = -problem.penalty_p;
    }
    return obj;
}

RoutingPlan plan_from_point(const LpProblem& problem, const Layout& layout,
                            std::vector<double> point, double objective, bool is_vertex) {
    RoutingPlan plan;
    plan.rates.assign(point.begin(), point.begin() + static_cast<std::ptrdiff_t>(layout.num_lines));
    if (layout.with_rejection) {
        plan.rejection_rates.assign(point.begin() + static_cast<std::ptrdiff_t>(layout.num_lines),
                                    point.end());
    }
    plan.objective_value = objective;
    plan.is_vertex = is_vertex;
    (void)problem;
    return plan;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Servers carrying at least one line; the fairness mean runs over these.
std::vector<bool> servers_in_problem(const LpProblem& problem) {
    std::vector<bool> present(problem.num_servers, false);
    for (const Line& line : problem.lines) present[line.server] = true;
    return present;
}

class FrankWolfe {
public:
    FrankWolfe(const LpProblem& problem, bool with_rejection)
        : problem_(problem),
          layout_{problem.lines.size(), with_rejection, problem.num_types},
          linear_(linear_point_objective(problem, layout_)),
          present_(servers_in_problem(problem)) {
        num_present_ = static_cast<int>(std::count(present_.begin(), present_.end(), true));
    }

    RoutingPlan solve() {
        const std::size_t dim = layout_.size();
        std::vector<double> x(dim, 0.0);
        auto first = linear_oracle(problem_, gradient(x), layout_);
        if (!first) throw InfeasibleRegion("routing polytope is empty");
        x = *first;
        active_.push_back({x, 1.0});

        for (int it = 0; it < kFrankWolfeMaxIterations; ++it) {
            const std::vector<double> g = gradient(x);
            auto s = linear_oracle(problem_, g, layout_);
            if (!s) throw NumericalFailure("linear oracle lost feasibility");
            std::vector<double> to_s(dim);
            for (std::size_t k = 0; k < dim; ++k) to_s[k] = (*s)[k] - x[k];
            const double gap = dot(g, to_s);
            const double fx = value(x);
            if (gap <= kFrankWolfeRelativeGap * std::max(1.0, std::abs(fx)))
                return plan_from_point(problem_, layout_, std::move(x), fx, false);

            std::size_t away = 0;
            double away_score = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < active_.size(); ++a) {
                const double score = dot(g, active_[a].vertex);
                if (score < away_score) {
                    away_score = score;
                    away = a;
                }
            }
            std::vector<double> d(dim);
            for (std::size_t k = 0; k < dim; ++k) d[k] = (*s)[k] - active_[away].vertex[k];
            const double t_max = active_[away].weight;
            const double t = line_search(x, d, g, t_max);
            if (!(t > 0.0)) {
                // No progress possible along the pairwise direction: take a
                // plain Frank-Wolfe step instead.
                const double t_fw = line_search(x, to_s, g, 1.0);
                for (auto& a : active_) a.weight *= (1.0 - t_fw);
                for (std::size_t k = 0; k < dim; ++k) x[k] += t_fw * to_s[k];
                add_weight(*s, t_fw);
                continue;
            }
            for (std::size_t k = 0; k < dim; ++k) x[k] = std::max(x[k] + t * d[k], 0.0);
            active_[away].weight -= t;
            add_weight(*s, t);
            std::erase_if(active_, [](const Atom& a) { return a.weight <= 1e-14; });
            if (problem_.gamma > 0.0 && problem_.objective_kind != ObjectiveKind::kPluggablePenalty)
                x = reoptimize_weights(0.1 * kFrankWolfeRelativeGap * std::max(1.0, std::abs(fx)));
        }
        throw NumericalFailure("Frank-Wolfe did not reach the duality-gap tolerance in " +
                               std::to_string(kFrankWolfeMaxIterations) + " iterations");
    }

private:
    struct Atom {
        std::vector<double> vertex;
        double weight;
    };

    std::span<const double> line_part(const std::vector<double>& x) const {
        return std::span<const double>(x.data(), layout_.num_lines);
    }

    double penalty_value(const std::vector<double>& x) const {
        if (problem_.objective_kind == ObjectiveKind::kPluggablePenalty)
            return problem_.penalty->value(problem_, line_part(x));
        return load_variance(problem_, line_part(x));
    }

    double value(const std::vector<double>& x) const {
        return dot(linear_, x) - problem_.gamma * penalty_value(x);
    }

    std::vector<double> gradient(const std::vector<double>& x) const {
        std::vector<double> g = linear_;
        if (problem_.gamma == 0.0) return g;
        if (problem_.objective_kind == ObjectiveKind::kPluggablePenalty) {
            const std::vector<double> pg = problem_.penalty->gradient(problem_, line_part(x));
            for (std::size_t l = 0; l < layout_.num_lines; ++l) g[l] -= problem_.gamma * pg[l];
            return g;
        }
        const std::vector<double> rho = server_loads(problem_, line_part(x));
        const double mean = mean_load(rho);
        for (std::size_t l = 0; l < layout_.num_lines; ++l) {
            const int j = problem_.lines[l].server;
            g[l] -= problem_.gamma * 2.0 * (rho[j] - mean) / problem_.mu_hat[l];
        }
        return g;
    }

    double mean_load(const std::vector<double>& rho) const {
        double sum = 0.0;
        for (int j = 0; j < problem_.num_servers; ++j)
            if (present_[j]) sum += rho[j];
        return num_present_ > 0 ? sum / num_present_ : 0.0;
    }

    // Maximizes phi(t) = f(x + t d) over [0, t_max]; phi is concave.
    double line_search(const std::vector<double>& x, const std::vector<double>& d,
                       const std::vector<double>& g, double t_max) const {
        if (!(t_max > 0.0)) return 0.0;
        const double slope = dot(g, d);
        if (slope <= 0.0) return 0.0;
        if (problem_.gamma == 0.0) return t_max;
        if (problem_.objective_kind != ObjectiveKind::kPluggablePenalty) {
            const std::vector<double> drho = server_loads(problem_, line_part(d));
            const double dmean = mean_load(drho);
            double curvature = 0.0;
            for (int j = 0; j < problem_.num_servers; ++j) {
                if (!present_[j]) continue;
                curvature += (drho[j] - dmean) * (drho[j] - dmean);
            }
            if (curvature <= 0.0) return t_max;
            return std::min(t_max, slope / (2.0 * problem_.gamma * curvature));
        }
        auto phi = [&](double t) {
            std::vector<double> y(x.size());
            for (std::size_t k = 0; k < x.size(); ++k) y[k] = std::max(x[k] + t * d[k], 0.0);
            return value(y);
        };
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double lo = 0.0;
        double hi = t_max;
        double a = hi - inv_phi * (hi - lo);
        double b = lo + inv_phi * (hi - lo);
        double fa = phi(a);
        double fb = phi(b);
        for (int k = 0; k < 80; ++k) {
            if (fa < fb) {
                lo = a;
                a = b;
                fa = fb;
                b = lo + inv_phi * (hi - lo);
                fb = phi(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - inv_phi * (hi - lo);
                fa = phi(a);
            }
        }
        const double t = 0.5 * (lo + hi);
        if (phi(t_max) >= phi(t)) return t_max;
        return t;
    }

    // Pairwise steps alone zigzag badly when the optimum sits inside a face,
    // so after every oracle call the weights on the active vertices are
    // re-optimized (accelerated projected gradient on the weight simplex).
    // Only the quadratic load-variance objective takes this path.
    std::vector<double> reoptimize_weights(double tol) {
        const std::size_t m = active_.size();
        const std::size_t dim = layout_.size();
        std::vector<double> c(m);
        std::vector<std::vector<double>> load(m);
        double lip = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            c[a] = dot(linear_, active_[a].vertex);
            std::vector<double> rho = server_loads(problem_, line_part(active_[a].vertex));
            const double mean = mean_load(rho);
            for (int j = 0; j < problem_.num_servers; ++j) {
                rho[j] = present_[j] ? rho[j] - mean : 0.0;
                lip += rho[j] * rho[j];
            }
            load[a] = std::move(rho);
        }
        lip *= 2.0 * problem_.gamma;
        auto combine = [&](const std::vector<double>& w) {
            std::vector<double> r(problem_.num_servers, 0.0);
            for (std::size_t a = 0; a < m; ++a)
                for (int j = 0; j < problem_.num_servers; ++j) r[j] += w[a] * load[a][j];
            return r;
        };
        auto grad = [&](const std::vector<double>& w) {
            const std::vector<double> r = combine(w);
            std::vector<double> g(m);
            for (std::size_t a = 0; a < m; ++a) g[a] = c[a] - 2.0 * problem_.gamma * dot(load[a], r);
            return g;
        };
        auto objective = [&](const std::vector<double>& w) {
            const std::vector<double> r = combine(w);
            return dot(c, w) - problem_.gamma * dot(r, r);
        };

        std::vector<double> w(m);
        for (std::size_t a = 0; a < m; ++a) w[a] = active_[a].weight;
        if (m > 1 && lip > 0.0) {
            std::vector<double> y = w;
            double momentum = 1.0;
            double fw = objective(w);
            for (int it = 0; it < 20000; ++it) {
                const std::vector<double> gw = grad(w);
                double hi = -std::numeric_limits<double>::infinity();
                double lo = std::numeric_limits<double>::infinity();
                for (std::size_t a = 0; a < m; ++a) {
                    hi = std::max(hi, gw[a]);
                    if (w[a] > 0.0) lo = std::min(lo, gw[a]);
                }
                if (hi - lo <= tol) break;
                const std::vector<double> gy = grad(y);
                std::vector<double> next(m);
                for (std::size_t a = 0; a < m; ++a) next[a] = y[a] + gy[a] / lip;
                project_to_simplex(next);
                const double fnext = objective(next);
                if (fnext < fw) {
                    // Restart momentum when the accelerated step overshoots.
                    y = w;
                    momentum = 1.0;
                    continue;
                }
                const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
                for (std::size_t a = 0; a < m; ++a)
                    y[a] = next[a] + (momentum - 1.0) / m_next * (next[a] - w[a]);
                momentum = m_next;
                w = std::move(next);
                fw = fnext;
            }
        }
        std::vector<double> x(dim, 0.0);
        for (std::size_t a = 0; a < m; ++a) {
            active_[a].weight = w[a];
            for (std::size_t k = 0; k < dim; ++k) x[k] += w[a] * active_[a].vertex[k];
        }
        std::erase_if(active_, [](const Atom& a) { return a.weight <= 1e-14; });
        return x;
    }

    static void project_to_simplex(std::vector<double>& v) {
        std::vector<double> u = v;
        std::sort(u.begin(), u.end(), std::greater<>());
        double cumulative = 0.0;
        double shift = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            cumulative += u[k];
            const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
            if (u[k] - candidate > 0.0) shift = candidate;
        }
        for (double& e : v) e = std::max(e - shift, 0.0);
    }

    void add_weight(const std::vector<double>& vertex, double w) {
        for (auto& a : active_) {
            double diff = 0.0;
            double scale = 1.0;
            for (std::size_t k = 0; k < vertex.size(); ++k) {
                diff = std::max(diff, std::abs(a.vertex[k] - vertex[k]));
                scale = std::max(scale, std::abs(vertex[k]));
            }
            if (diff <= 1e-12 * scale) {
                a.weight += w;
                return;
            }
        }
        active_.push_back({vertex, w});
    }

    const LpProblem& problem_;
    Layout layout_;
    std::vector<double> linear_;
    std::vector<bool> present_;
    int num_present_ = 0;
    std::vector<Atom> active_;
};

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

}  // namespace

double capped_theta(double theta) { return std::isinf(theta) ? kThetaCap : std::min(theta, kThetaCap); }

std::vector<double> server_loads(const LpProblem& problem, std::span<const double> rates) {
    std::vector<double> rho(problem.num_servers, 0.0);
    for (std::size_t l = 0; l < problem.lines.size(); ++l)
        rho[problem.lines[l].server] += rates[l] / problem.mu_hat[l];
    return rho;
}

double load_variance(const LpProblem& problem, std::span<const double> rates) {
    const std::vector<double> rho = server_loads(problem, rates);
    const std::vector<bool> present = servers_in_problem(problem);
    double sum = 0.0;
    int count = 0;
    for (int j = 0; j < problem.num_servers; ++j) {
        if (!present[j]) continue;
        sum += rho[j];
        ++count;
    }
    if (count == 0) return 0.0;
    const double mean = sum / count;
    double var = 0.0;
    for (int j = 0; j < problem.num_servers; ++j)
        if (present[j]) var += (rho[j] - mean) * (rho[j] - mean);
    return var;
}

double linear_payoff(const LpProblem& problem, std::span<const double> rates) {
    double total = 0.0;
    for (std::size_t l = 0; l < problem.lines.size(); ++l)
        total += capped_theta(problem.theta_hat[l]) * rates[l];
    return total;
}

std::optional<RoutingPlan> solve_primary(const LpProblem& problem) {
    check_problem(problem);
    if (problem.objective_kind != ObjectiveKind::kLinear)
        throw std::invalid_argument("solve_primary requires a linear objective");
    const Layout layout{problem.lines.size(), false, problem.num_types};
    const std::vector<double> obj = linear_point_objective(problem, layout);
    auto point = linear_oracle(problem, obj, layout);
    if (!point) return std::nullopt;
    const double value = dot(obj, *point);
    return plan_from_point(problem, layout, std::move(*point), value, true);
}

RoutingPlan solve_fallback(const LpProblem& problem) {
    check_problem(problem);
    if (problem.objective_kind != ObjectiveKind::kLinear)
        throw std::invalid_argument("solve_fallback requires a linear objective");
    if (!(problem.penalty_p > 0.0)) throw std::invalid_argument("penalty_p must be positive");
    const Layout layout{problem.lines.size(), true, problem.num_types};
    const std::vector<double> obj = linear_point_objective(problem, layout);
    auto point = linear_oracle(problem, obj, layout);
    if (!point) throw NumericalFailure("rejection-augmented LP reported infeasible");
    const double value = dot(obj, *point);
    return plan_from_point(problem, layout, std::move(*point), value, true);
}

RoutingPlan solve_fairness(const LpProblem& problem) {
    check_problem(problem);
    if (problem.objective_kind == ObjectiveKind::kLinear)
        throw std::invalid_argument("solve_fairness requires a nonlinear objective kind");
    if (problem.objective_kind == ObjectiveKind::kPluggablePenalty && !problem.penalty)
        throw std::invalid_argument("pluggable objective without a penalty");
    if (!(problem.gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
    return FrankWolfe(problem, false).solve();
}

RoutingPlan solve_fairness_fallback(const LpProblem& problem) {
    check_problem(problem);
    if (problem.objective_kind == ObjectiveKind::kLinear)
        throw std::invalid_argument("solve_fairness_fallback requires a nonlinear objective kind");
    if (problem.objective_kind == ObjectiveKind::kPluggablePenalty && !problem.penalty)
        throw std::invalid_argument("pluggable objective without a penalty");
    return FrankWolfe(problem, true).solve();
}

RoutingPlan solve_routing(const LpProblem& problem) {
    if (problem.objective_kind == ObjectiveKind::kLinear) {
        if (auto plan = solve_primary(problem)) return *plan;
        return solve_fallback(problem);
    }
    try {
        return solve_fairness(problem);
    } catch (const InfeasibleRegion&) {
        return solve_fairness_fallback(problem);
    }
}

SpanningForest extract_spanning_forest(const RoutingPlan& plan, const LpProblem& problem) {
    if (!plan.is_vertex) throw NotAVertex("spanning forests need a vertex (basic) solution");
    if (plan.rates.size() != problem.lines.size())
        throw std::invalid_argument("plan does not match the problem's lines");

    const int num_types = problem.num_types;
    const int num_servers = problem.num_servers;
    const int reject_node = num_types + num_servers;
    const double max_lambda =
        problem.lambda_hat.empty()
            ? 0.0
            : *std::max_element(problem.lambda_hat.begin(), problem.lambda_hat.end());
    const double threshold = kEdgeThresholdFactor * max_lambda;

    SpanningForest forest;
    forest.parent_of_queue.assign(num_types, std::nullopt);
    forest.children_of_queue.assign(num_types, {});
    forest.parent_of_server.assign(num_servers, std::nullopt);
    forest.children_of_server.assign(num_servers, {});
    forest.type_in_forest.assign(num_types, false);

    // Nodes: types [0, I), servers [I, I+J), rejection server I+J.
    std::vector<std::vector<int>> adj(reject_node + 1);
    UnionFind uf(reject_node + 1);
    auto add_edge = [&](int a, int b) {
        if (!uf.unite(a, b))
            throw CyclicSupport("positive-rate support contains a cycle");
        adj[a].push_back(b);
        adj[b].push_back(a);
    };
    for (std::size_t l = 0; l < problem.lines.size(); ++l) {
        if (!(plan.rates[l] > threshold)) continue;
        const Line& line = problem.lines[l];
        add_edge(line.type, num_types + line.server);
        forest.edges.push_back(line);
        forest.type_in_forest[line.type] = true;
    }
    for (std::size_t i = 0; i < plan.rejection_rates.size(); ++i) {
        if (!(plan.rejection_rates[i] > threshold)) continue;
        add_edge(static_cast<int>(i), reject_node);
        forest.type_in_forest[i] = true;
    }
    std::sort(forest.edges.begin(), forest.edges.end());
    for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());

    const std::vector<double> rho = server_loads(problem, plan.rates);
    auto slack = [&](int server) { return (1.0 - problem.epsilon) - rho[server]; };

    std::vector<bool> visited(reject_node + 1, false);
    auto orient = [&](int root) {
        std::deque<int> frontier{root};
        visited[root] = true;
        while (!frontier.empty()) {
            const int node = frontier.front();
            frontier.pop_front();
            for (int nb : adj[node]) {
                if (visited[nb]) continue;
                visited[nb] = true;
                frontier.push_back(nb);
                if (node == reject_node) {
                    forest.root_queues.push_back(nb);
                } else if (node < num_types) {
                    // queue -> child server
                    forest.children_of_queue[node].push_back(nb - num_types);
                    forest.parent_of_server[nb - num_types] = node;
                } else {
                    // server -> child queue
                    forest.children_of_server[node - num_types].push_back(nb);
                    forest.parent_of_queue[nb] = node - num_types;
                }
            }
        }
    };

    if (!adj[reject_node].empty()) orient(reject_node);

    // Remaining components: root at the server with the largest slack.
    std::vector<int> component;
    for (int start = num_types; start < reject_node; ++start) {
        if (visited[start]) continue;
        component.clear();
        std::deque<int> frontier{start};
        std::vector<bool> seen(reject_node + 1, false);
        seen[start] = true;
        while (!frontier.empty()) {
            const int node = frontier.front();
            frontier.pop_front();
            component.push_back(node);
            for (int nb : adj[node]) {
                if (!seen[nb]) {
                    seen[nb] = true;
                    frontier.push_back(nb);
                }
            }
        }
        int root = -1;
        for (int node : component) {
            if (node < num_types) continue;
            const int server = node - num_types;
            if (root < 0 || slack(server) > slack(root) ||
                (slack(server) == slack(root) && server < root))
                root = server;
        }
        forest.roots.push_back(root);
        orient(num_types + root);
    }
    std::sort(forest.roots.begin(), forest.roots.end());
    std::sort(forest.root_queues.begin(), forest.root_queues.end());
    for (auto& c : forest.children_of_queue) std::sort(c.begin(), c.end());
    for (auto& c : forest.children_of_server) std::sort(c.begin(), c.end());
    return forest;
}

ConvexPenalty critical_load_penalty() {
    ConvexPenalty p;
    p.name = "critical_load";
    p.value = [](const LpProblem& problem, std::span<const double> x) {
        const std::vector<double> rho = server_loads(problem, x);
        const std::vector<bool> present = servers_in_problem(problem);
        double total = 0.0;
        for (int j = 0; j < problem.num_servers; ++j)
            if (present[j]) total += 1.0 / (1.0 - rho[j]);
        return total;
    };
    p.gradient = [](const LpProblem& problem, std::span<const double> x) {
        const std::vector<double> rho = server_loads(problem, x);
        std::vector<double> g(problem.lines.size());
        for (std::size_t l = 0; l < g.size(); ++l) {
            const double slack = 1.0 - rho[problem.lines[l].server];
            g[l] = 1.0 / (slack * slack * problem.mu_hat[l]);
        }
        return g;
    };
    return p;
}

ConvexPenalty waiting_time_penalty() {
    ConvexPenalty p = critical_load_penalty();
    p.name = "waiting_time";
    p.value = [](const LpProblem& problem, std::span<const double> x) {
        const std::vector<double> rho = server_loads(problem, x);
        const std::vector<bool> present = servers_in_problem(problem);
        double total = 0.0;
        for (int j = 0; j < problem.num_servers; ++j)
            if (present[j]) total += rho[j] / (1.0 - rho[j]);
        return total;
    };
    // d/drho [rho / (1 - rho)] equals d/drho [1 / (1 - rho)], so the gradient is shared.
    return p;
}

ConvexPenalty deviation_penalty(std::vector<double> reference_rates) {
    ConvexPenalty p;
    p.name = "deviation";
    auto ref = std::make_shared<const std::vector<double>>(std::move(reference_rates));
    p.value = [ref](const LpProblem&, std::span<const double> x) {
        double total = 0.0;
        for (std::size_t l = 0; l < x.size(); ++l) total += (x[l] - (*ref)[l]) * (x[l] - (*ref)[l]);
        return total;
    };
    p.gradient = [ref](const LpProblem&, std::span<const double> x) {
        std::vector<double> g(x.size());
        for (std::size_t l = 0; l < x.size(); ++l) g[l] = 2.0 * (x[l] - (*ref)[l]);
        return g;
    };
    return p;
}

ConvexPenalty spare_routing_penalty() {
    ConvexPenalty p;
    p.name = "spare_routing";
    // Rewarding sum log(1 + x) is the same as penalizing its negative.
    p.value = [](const LpProblem&, std::span<const double> x) {
        double total = 0.0;
        for (double v : x) total -= std::log1p(v);
        return total;
    };
    p.gradient = [](const LpProblem&, std::span<const double> x) {
        std::vector<double> g(x.size());
        for (std::size_t l = 0; l < x.size(); ++l) g[l] = -1.0 / (1.0 + x[l]);
        return g;
    };
    return p;
}

}  // namespace ucbqr
