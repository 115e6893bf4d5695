#include "delayguard/simplex.hpp"

#include <cmath>
#include <stdexcept>

namespace delayguard {

namespace {

struct Tableau {
    int m = 0, cols = 0;  // cols excludes the rhs column
    std::vector<std::vector<double>> a;
    std::vector<double> obj;  // reduced costs; obj[cols] = -objective
    std::vector<int> basis;
    int pivots = 0;

    void pivot(int r, int c) {
        ++pivots;
        auto& pr = a[r];
        const double p = pr[c];
        for (auto& v : pr) v /= p;
        auto eliminate = [&](std::vector<double>& row) {
            const double f = row[c];
            if (f == 0.0) return;
            for (int j = 0; j <= cols; ++j) row[j] -= f * pr[j];
            row[c] = 0.0;
        };
        for (int i = 0; i < m; ++i)
            if (i != r) eliminate(a[i]);
        eliminate(obj);
        basis[r] = c;
    }

    // Bland's rule; columns at or beyond `limit` may not enter.
    LpStatus run(int limit, double tol) {
        for (;;) {
            int enter = -1;
            for (int j = 0; j < limit; ++j)
                if (obj[j] < -tol) {
                    enter = j;
                    break;
                }
            if (enter < 0) return LpStatus::optimal;
            int leave = -1;
            double best = 0.0;
            for (int i = 0; i < m; ++i) {
                const double v = a[i][enter];
                if (v <= tol) continue;
                const double ratio = a[i][cols] / v;
                if (leave < 0 || ratio < best - tol ||
                    (ratio <= best + tol && basis[i] < basis[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave < 0) return LpStatus::unbounded;
            pivot(leave, enter);
        }
    }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, double tol) {
    const int n = lp.num_vars();
    if (static_cast<int>(lp.lower.size()) != n || static_cast<int>(lp.upper.size()) != n)
        throw std::invalid_argument("LP bound vectors do not match the variable count");
    for (int j = 0; j < n; ++j)
        if (!std::isfinite(lp.lower[j]))
            throw std::invalid_argument("LP lower bounds must be finite");

    // shift x = lower + y so y >= 0; finite upper bounds become rows
    struct DenseRow {
        std::vector<double> a;
        Sense sense;
        double rhs;
    };
    std::vector<DenseRow> rows;
    for (const auto& r : lp.rows) {
        DenseRow d{std::vector<double>(n, 0.0), r.sense, r.rhs};
        for (const auto& [j, v] : r.coeffs) {
            d.a[j] += v;
            d.rhs -= v * lp.lower[j];
        }
        rows.push_back(std::move(d));
    }
    for (int j = 0; j < n; ++j) {
        const double u = lp.upper[j];
        if (!std::isfinite(u)) continue;
        const double span = u - lp.lower[j];
        if (span < -tol) return {};
        DenseRow d{std::vector<double>(n, 0.0), Sense::le, std::max(0.0, span)};
        d.a[j] = 1.0;
        rows.push_back(std::move(d));
    }
    for (auto& r : rows)
        if (r.rhs < 0.0) {
            for (auto& v : r.a) v = -v;
            r.rhs = -r.rhs;
            if (r.sense == Sense::le)
                r.sense = Sense::ge;
            else if (r.sense == Sense::ge)
                r.sense = Sense::le;
        }

    const int m = static_cast<int>(rows.size());
    int slacks = 0, artificials = 0;
    for (const auto& r : rows) {
        if (r.sense != Sense::eq) ++slacks;
        if (r.sense != Sense::le) ++artificials;
    }
    Tableau t;
    t.m = m;
    t.cols = n + slacks + artificials;
    const int first_art = n + slacks;
    t.a.assign(m, std::vector<double>(t.cols + 1, 0.0));
    t.basis.assign(m, -1);
    int s = n, art = first_art;
    for (int i = 0; i < m; ++i) {
        auto& row = t.a[i];
        const auto& r = rows[i];
        for (int j = 0; j < n; ++j) row[j] = r.a[j];
        row[t.cols] = r.rhs;
        if (r.sense == Sense::le) {
            row[s] = 1.0;
            t.basis[i] = s++;
        } else {
            if (r.sense == Sense::ge) row[s++] = -1.0;
            row[art] = 1.0;
            t.basis[i] = art++;
        }
    }

    // phase 1: minimize the sum of artificials
    t.obj.assign(t.cols + 1, 0.0);
    for (int j = first_art; j < t.cols; ++j) t.obj[j] = 1.0;
    for (int i = 0; i < m; ++i)
        if (t.basis[i] >= first_art)
            for (int j = 0; j <= t.cols; ++j) t.obj[j] -= t.a[i][j];
    t.run(t.cols, tol);
    LpSolution out;
    double scale = 1.0;
    for (const auto& r : rows) scale = std::max(scale, std::abs(r.rhs));
    if (-t.obj[t.cols] > 1e-7 * scale) {
        out.pivots = t.pivots;
        return out;
    }
    // drive zero-level artificials out of the basis; drop redundant rows
    for (int i = 0; i < t.m; ++i) {
        if (t.basis[i] < first_art) continue;
        int c = -1;
        for (int j = 0; j < first_art; ++j)
            if (std::abs(t.a[i][j]) > tol) {
                c = j;
                break;
            }
        if (c >= 0) {
            t.pivot(i, c);
        } else {
            t.a.erase(t.a.begin() + i);
            t.basis.erase(t.basis.begin() + i);
            --t.m;
            --i;
        }
    }

    // phase 2 with the true costs
    t.obj.assign(t.cols + 1, 0.0);
    for (int j = 0; j < n; ++j) t.obj[j] = lp.cost[j];
    for (int i = 0; i < t.m; ++i) {
        const int b = t.basis[i];
        const double cb = b < n ? lp.cost[b] : 0.0;
        if (cb == 0.0) continue;
        for (int j = 0; j <= t.cols; ++j) t.obj[j] -= cb * t.a[i][j];
    }
    const auto status = t.run(first_art, tol);
    out.pivots = t.pivots;
    if (status == LpStatus::unbounded) {
        out.status = LpStatus::unbounded;
        out.objective = -std::numeric_limits<double>::infinity();
        return out;
    }
    out.status = LpStatus::optimal;
    out.x = lp.lower;
    for (int i = 0; i < t.m; ++i) {
        const int b = t.basis[i];
        if (b < n) out.x[b] += t.a[i][t.cols];
    }
    out.objective = 0.0;
    for (int j = 0; j < n; ++j) out.objective += lp.cost[j] * out.x[j];
    return out;
}

}  // namespace delayguard
