#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

namespace ucbqr {

/// Raised when a solver exceeds its iteration cap or loses numerical footing.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RowSense { kLessEqual, kEqual };

/// maximize c'x  subject to  rows (<= or =) with nonnegative right-hand
/// sides, x >= 0.
struct LinearProgram {
    struct Row {
        std::vector<std::pair<int, double>> coeffs;
        RowSense sense = RowSense::kLessEqual;
        double rhs = 0.0;
    };

    int num_vars = 0;
    std::vector<double> objective;
    std::vector<Row> rows;
};

enum class SimplexStatus { kOptimal, kInfeasible, kUnbounded };

struct SimplexResult {
    SimplexStatus status = SimplexStatus::kInfeasible;
    std::vector<double> x;
    double objective = 0.0;
    int iterations = 0;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule. The
/// optimum returned is a basic feasible solution. Throws NumericalFailure
/// after 50 * (variables + constraints) pivots.
SimplexResult solve_simplex(const LinearProgram& lp);

}  // namespace ucbqr
