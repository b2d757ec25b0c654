#include "ucbqr/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ucbqr {

namespace {

constexpr double kReducedCostTol = 1e-9;
constexpr double kPivotTol = 1e-10;
constexpr double kZeroTol = 1e-13;

class Tableau {
public:
    Tableau(int rows, int cols) : m_(rows), n_(cols), cells_((rows + 1) * (cols + 1), 0.0) {}

    double& at(int r, int c) { return cells_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
    double at(int r, int c) const { return cells_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
    double& rhs(int r) { return at(r, n_); }
    double rhs(int r) const { return at(r, n_); }
    // Row m_ holds reduced costs; its rhs cell holds minus the objective.
    double& cost(int c) { return at(m_, c); }

    int rows() const { return m_; }
    int cols() const { return n_; }

    void pivot(int pr, int pc) {
        const double piv = at(pr, pc);
        for (int c = 0; c <= n_; ++c) at(pr, c) /= piv;
        at(pr, pc) = 1.0;
        for (int r = 0; r <= m_; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (int c = 0; c <= n_; ++c) {
                double v = at(r, c) - f * at(pr, c);
                if (std::abs(v) < kZeroTol) v = 0.0;
                at(r, c) = v;
            }
            at(r, pc) = 0.0;
        }
    }

private:
    int m_;
    int n_;
    std::vector<double> cells_;
};

struct Phase {
    Tableau& tab;
    std::vector<int>& basis;
    const std::vector<bool>& barred;
    int& iterations;
    int cap;

    // Returns false when unbounded.
    bool run() {
        const int m = tab.rows();
        const int n = tab.cols();
        for (;;) {
            int enter = -1;
            for (int c = 0; c < n; ++c) {
                if (!barred[c] && tab.cost(c) > kReducedCostTol) {
                    enter = c;
                    break;
                }
            }
            if (enter < 0) return true;

            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m; ++r) {
                const double a = tab.at(r, enter);
                if (a <= kPivotTol) continue;
                const double ratio = std::max(tab.rhs(r), 0.0) / a;
                if (leave < 0) {
                    leave = r;
                    best_ratio = ratio;
                    continue;
                }
                const double slack = 1e-12 * std::max(1.0, best_ratio);
                if (ratio < best_ratio - slack) {
                    leave = r;
                    best_ratio = ratio;
                } else if (ratio <= best_ratio + slack && basis[r] < basis[leave]) {
                    // Bland: ties go to the lowest-indexed basic variable.
                    leave = r;
                    best_ratio = std::min(best_ratio, ratio);
                }
            }
            if (leave < 0) return false;

            if (++iterations > cap)
                throw NumericalFailure("simplex exceeded iteration cap of " + std::to_string(cap));
            tab.pivot(leave, enter);
            basis[leave] = enter;
        }
    }
};

void load_costs(Tableau& tab, const std::vector<double>& costs, const std::vector<int>& basis) {
    const int m = tab.rows();
    const int n = tab.cols();
    for (int c = 0; c <= n; ++c) tab.cost(c) = c < n ? costs[c] : 0.0;
    for (int r = 0; r < m; ++r) {
        const double cb = costs[basis[r]];
        if (cb == 0.0) continue;
        for (int c = 0; c <= n; ++c) tab.cost(c) -= cb * tab.at(r, c);
    }
}

}  // namespace

SimplexResult solve_simplex(const LinearProgram& lp) {
    const int n = lp.num_vars;
    const int m = static_cast<int>(lp.rows.size());
    if (static_cast<int>(lp.objective.size()) != n)
        throw std::invalid_argument("objective size does not match num_vars");

    int num_slack = 0;
    int num_art = 0;
    for (const auto& row : lp.rows) {
        if (row.rhs < 0.0 || !std::isfinite(row.rhs))
            throw std::invalid_argument("simplex rows need finite nonnegative right-hand sides");
        (row.sense == RowSense::kLessEqual ? num_slack : num_art) += 1;
    }

    const int cols = n + num_slack + num_art;
    Tableau tab(m, cols);
    std::vector<int> basis(static_cast<std::size_t>(m));
    std::vector<bool> artificial(static_cast<std::size_t>(cols), false);
    int next_slack = n;
    int next_art = n + num_slack;
    double max_rhs = 0.0;
    for (int r = 0; r < m; ++r) {
        const auto& row = lp.rows[r];
        double scale = 0.0;
        for (auto [c, v] : row.coeffs) {
            if (c < 0 || c >= n) throw std::invalid_argument("coefficient column out of range");
            tab.at(r, c) += v;
        }
        for (int c = 0; c < n; ++c) scale = std::max(scale, std::abs(tab.at(r, c)));
        if (scale == 0.0) scale = 1.0;
        for (int c = 0; c < n; ++c) tab.at(r, c) /= scale;
        tab.rhs(r) = row.rhs / scale;
        max_rhs = std::max(max_rhs, tab.rhs(r));
        if (row.sense == RowSense::kLessEqual) {
            tab.at(r, next_slack) = 1.0;
            basis[r] = next_slack++;
        } else {
            tab.at(r, next_art) = 1.0;
            artificial[next_art] = true;
            basis[r] = next_art++;
        }
    }

    SimplexResult result;
    const int cap = 50 * (n + m);
    std::vector<bool> barred(static_cast<std::size_t>(cols), false);

    if (num_art > 0) {
        std::vector<double> phase1(static_cast<std::size_t>(cols), 0.0);
        for (int c = 0; c < cols; ++c)
            if (artificial[c]) phase1[c] = -1.0;
        load_costs(tab, phase1, basis);
        Phase{tab, basis, barred, result.iterations, cap}.run();

        double infeasibility = 0.0;
        for (int r = 0; r < m; ++r)
            if (artificial[basis[r]]) infeasibility += std::max(tab.rhs(r), 0.0);
        if (infeasibility > 1e-9 * std::max(1.0, max_rhs)) {
            result.status = SimplexStatus::kInfeasible;
            return result;
        }

        // Drive zero-level artificials out of the basis; rows with no
        // eligible pivot are redundant and stay inert.
        for (int r = 0; r < m; ++r) {
            if (!artificial[basis[r]]) continue;
            int best = -1;
            double best_abs = 1e-9;
            for (int c = 0; c < n + num_slack; ++c) {
                if (std::abs(tab.at(r, c)) > best_abs) {
                    best = c;
                    best_abs = std::abs(tab.at(r, c));
                }
            }
            if (best < 0) continue;
            tab.rhs(r) = 0.0;
            tab.pivot(r, best);
            basis[r] = best;
        }
        for (int c = 0; c < cols; ++c) barred[c] = artificial[c];
    }

    std::vector<double> phase2(static_cast<std::size_t>(cols), 0.0);
    for (int c = 0; c < n; ++c) phase2[c] = lp.objective[c];
    load_costs(tab, phase2, basis);
    if (!Phase{tab, basis, barred, result.iterations, cap}.run()) {
        result.status = SimplexStatus::kUnbounded;
        return result;
    }

    result.status = SimplexStatus::kOptimal;
    result.x.assign(static_cast<std::size_t>(n), 0.0);
    for (int r = 0; r < m; ++r) {
        if (basis[r] < n) result.x[basis[r]] = std::max(tab.rhs(r), 0.0);
    }
    for (int c = 0; c < n; ++c) result.objective += lp.objective[c] * result.x[c];
    return result;
}

}  // namespace ucbqr
