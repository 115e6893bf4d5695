#pragma once

#include <limits>
#include <utility>
#include <vector>

namespace delayguard {

enum class Sense { le, ge, eq };

struct LpRow {
    std::vector<std::pair<int, double>> coeffs;  // (variable index, coefficient)
    Sense sense = Sense::le;
    double rhs = 0.0;
};

/// min c'x subject to rows and lower <= x <= upper. Lower bounds must be
/// finite; upper bounds may be +infinity.
struct LinearProgram {
    std::vector<double> cost;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<LpRow> rows;

    int num_vars() const { return static_cast<int>(cost.size()); }
    int add_var(double lo, double hi, double c = 0.0) {
        cost.push_back(c);
        lower.push_back(lo);
        upper.push_back(hi);
        return num_vars() - 1;
    }
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double objective = std::numeric_limits<double>::infinity();
    std::vector<double> x;
    int pivots = 0;
};

/// Dense two-phase tableau simplex with Bland's rule.
LpSolution solve_lp(const LinearProgram& lp, double tol = 1e-9);

}  // namespace delayguard
