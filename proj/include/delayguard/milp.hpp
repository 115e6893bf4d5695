#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "delayguard/overlap.hpp"
#include "delayguard/simplex.hpp"

namespace delayguard {

enum class VarKind { continuous, binary };

struct MilpVar {
    std::string name;
    VarKind kind = VarKind::continuous;
    double lower = 0.0;
    double upper = 0.0;
};

struct MilpRow {
    std::string name;
    LpRow row;
};

/// Variables and rows generated for one (victim job k, untrusted task j,
/// untrusted job m) combination.
struct MilpTriple {
    std::int64_t k = 0;
    std::size_t j = 0;  // index into OverlapProblem::untrusted
    std::int64_t m = 0;
    int a = -1, b = -1, z = -1, ya = -1, yb = -1, o = -1;
    std::vector<int> rows;
};

/// Big-M model of the overlap objective:
///   a = max(r_ik + C_i + d_k, r_jm)          via y^a
///   b = min(r_ik + d_k + R_i + Omega, r_jm + R_j)  via y^b
///   z = max(0, b - a)                         via o
/// plus 0 <= d_k <= max_delay; objective sum z.
struct MilpInstance {
    OverlapProblem problem;
    double big_m = 0.0;
    std::vector<MilpVar> vars;
    std::vector<MilpRow> rows;
    std::vector<double> objective;
    std::vector<int> delay_vars;  // d_k at index k-1
    std::vector<MilpTriple> triples;
    std::vector<int> bound_rows;  // the 0 <= d_k <= max rows

    int num_continuous() const;
    int num_binaries() const;
    int num_linearization_rows() const { return static_cast<int>(rows.size() - bound_rows.size()); }
};

/// H + max_j R_j + R_i + Omega.
double required_big_m(const OverlapProblem& problem);

/// `big_m` overrides the default constant (used to probe underestimation).
MilpInstance build_milp(const OverlapProblem& problem, std::optional<double> big_m = std::nullopt);

/// True iff, for these integer delays, every triple admits a binary and
/// auxiliary completion satisfying its rows with z equal to the direct
/// overlap value. Each of the 8 binary patterns is checked by an LP.
bool verify_linearization(const MilpInstance& instance, const std::vector<Millis>& delays);

struct MilpResult {
    bool optimal = false;
    double objective = 0.0;
    std::vector<double> delays;
    long nodes = 0;
    long lp_solves = 0;
};

/// Exact solve of the instance: independent variable blocks are found from
/// the row structure, each searched depth-first over its binaries with
/// activity-based bound propagation and pruning; leaves with every binary
/// fixed are closed by the simplex.
MilpResult branch_and_bound(const MilpInstance& instance, long node_limit = 5'000'000);

/// CPLEX LP text format.
void write_lp_format(const MilpInstance& instance, std::ostream& out);

}  // namespace delayguard
