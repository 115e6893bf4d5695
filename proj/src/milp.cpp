#include "delayguard/milp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace delayguard {

int MilpInstance::num_continuous() const {
    return static_cast<int>(std::count_if(vars.begin(), vars.end(),
                                          [](const MilpVar& v) { return v.kind == VarKind::continuous; }));
}

int MilpInstance::num_binaries() const { return static_cast<int>(vars.size()) - num_continuous(); }

double required_big_m(const OverlapProblem& p) {
    Millis rj = 0;
    for (const auto& u : p.untrusted) rj = std::max(rj, u.response);
    return static_cast<double>(p.hyperperiod + rj + p.victim_response + p.aew);
}

MilpInstance build_milp(const OverlapProblem& p, std::optional<double> big_m) {
    MilpInstance inst;
    inst.problem = p;
    inst.big_m = big_m.value_or(required_big_m(p));
    const double M = inst.big_m;

    // every auxiliary lies below this, independent of M
    Millis rj_max = 0;
    for (const auto& u : p.untrusted) rj_max = std::max(rj_max, u.response);
    const double span = static_cast<double>(p.hyperperiod + p.max_delay + p.victim_response + p.aew + rj_max);

    auto add_var = [&](std::string name, VarKind kind, double lo, double hi, double cost) {
        inst.vars.push_back({std::move(name), kind, lo, hi});
        inst.objective.push_back(cost);
        return static_cast<int>(inst.vars.size()) - 1;
    };
    auto add_row = [&](std::string name, std::vector<std::pair<int, double>> coeffs, Sense sense, double rhs) {
        inst.rows.push_back({std::move(name), LpRow{std::move(coeffs), sense, rhs}});
        return static_cast<int>(inst.rows.size()) - 1;
    };

    for (std::int64_t k = 1; k <= p.victim_jobs(); ++k) {
        const auto ks = std::to_string(k);
        const int d = add_var("d_" + ks, VarKind::continuous, 0.0, static_cast<double>(p.max_delay), 0.0);
        inst.delay_vars.push_back(d);
        inst.bound_rows.push_back(add_row("dlo_" + ks, {{d, 1.0}}, Sense::ge, 0.0));
        inst.bound_rows.push_back(add_row("dhi_" + ks, {{d, 1.0}}, Sense::le, static_cast<double>(p.max_delay)));
    }

    for (std::int64_t k = 1; k <= p.victim_jobs(); ++k) {
        const int d = inst.delay_vars[k - 1];
        const double ri = static_cast<double>(p.victim_release(k));
        const double start_i = ri + static_cast<double>(p.victim_wcet);
        const double end_i = ri + static_cast<double>(p.victim_response + p.aew);
        for (std::size_t j = 0; j < p.untrusted.size(); ++j) {
            for (std::int64_t m = 1; m <= p.jobs_of(j); ++m) {
                MilpTriple t;
                t.k = k;
                t.j = j;
                t.m = m;
                const double rj = static_cast<double>(p.untrusted_release(j, m));
                const double end_j = rj + static_cast<double>(p.untrusted[j].response);
                const auto tag = "_" + std::to_string(k) + "_" + std::to_string(p.untrusted[j].id) + "_" +
                                 std::to_string(m);
                t.a = add_var("a" + tag, VarKind::continuous, 0.0, span, 0.0);
                t.b = add_var("b" + tag, VarKind::continuous, 0.0, span, 0.0);
                t.z = add_var("z" + tag, VarKind::continuous, 0.0, span, 1.0);
                t.ya = add_var("ya" + tag, VarKind::binary, 0.0, 1.0, 0.0);
                t.yb = add_var("yb" + tag, VarKind::binary, 0.0, 1.0, 0.0);
                t.o = add_var("o" + tag, VarKind::binary, 0.0, 1.0, 0.0);

                // a = max(start_i + d, rj)
                t.rows.push_back(add_row("a1" + tag, {{t.a, 1}, {d, -1}}, Sense::ge, start_i));
                t.rows.push_back(add_row("a2" + tag, {{t.a, 1}}, Sense::ge, rj));
                t.rows.push_back(add_row("a3" + tag, {{t.a, 1}, {d, -1}, {t.ya, -M}}, Sense::le, start_i));
                t.rows.push_back(add_row("a4" + tag, {{t.a, 1}, {t.ya, M}}, Sense::le, rj + M));
                // b = min(end_i + d, end_j)
                t.rows.push_back(add_row("b1" + tag, {{t.b, 1}, {d, -1}}, Sense::le, end_i));
                t.rows.push_back(add_row("b2" + tag, {{t.b, 1}}, Sense::le, end_j));
                t.rows.push_back(add_row("b3" + tag, {{t.b, 1}, {d, -1}, {t.yb, M}}, Sense::ge, end_i));
                t.rows.push_back(add_row("b4" + tag, {{t.b, 1}, {t.yb, -M}}, Sense::ge, end_j - M));
                // z = max(0, b - a)
                t.rows.push_back(add_row("z1" + tag, {{t.z, 1}, {t.b, -1}, {t.a, 1}}, Sense::ge, 0.0));
                t.rows.push_back(add_row("z2" + tag, {{t.z, 1}}, Sense::ge, 0.0));
                t.rows.push_back(add_row("z3" + tag, {{t.z, 1}, {t.b, -1}, {t.a, 1}, {t.o, M}}, Sense::le, M));
                t.rows.push_back(add_row("z4" + tag, {{t.z, 1}, {t.o, -M}}, Sense::le, 0.0));
                inst.triples.push_back(std::move(t));
            }
        }
    }
    return inst;
}

namespace {

constexpr double kFixTol = 1e-9;
constexpr double kFeasTol = 1e-6;

struct SubLp {
    LinearProgram lp;
    std::vector<int> global;  // local -> global variable index
    bool infeasible = false;
};

// LP over `row_ids` with variables whose bounds collapse treated as constants.
SubLp restrict_rows(const MilpInstance& inst, const std::vector<int>& row_ids, const std::vector<double>& lo,
                    const std::vector<double>& hi, const std::vector<double>& cost) {
    SubLp out;
    std::vector<int> local(inst.vars.size(), -1);
    auto local_of = [&](int g) {
        if (local[g] < 0) {
            local[g] = out.lp.add_var(lo[g], hi[g], cost[g]);
            out.global.push_back(g);
        }
        return local[g];
    };
    for (const int r : row_ids) {
        const auto& row = inst.rows[r].row;
        LpRow lr;
        lr.sense = row.sense;
        lr.rhs = row.rhs;
        for (const auto& [g, c] : row.coeffs) {
            if (hi[g] - lo[g] <= kFixTol)
                lr.rhs -= c * lo[g];
            else
                lr.coeffs.emplace_back(local_of(g), c);
        }
        if (lr.coeffs.empty()) {
            const bool ok = (row.sense != Sense::le || lr.rhs >= -kFeasTol) &&
                            (row.sense != Sense::ge || lr.rhs <= kFeasTol) &&
                            (row.sense != Sense::eq || std::abs(lr.rhs) <= kFeasTol);
            if (!ok) out.infeasible = true;
            continue;
        }
        out.lp.rows.push_back(std::move(lr));
    }
    return out;
}

}  // namespace

bool verify_linearization(const MilpInstance& inst, const std::vector<Millis>& delays) {
    const auto& p = inst.problem;
    if (static_cast<std::int64_t>(delays.size()) != p.victim_jobs()) return false;
    std::vector<double> lo(inst.vars.size()), hi(inst.vars.size()), cost(inst.vars.size(), 0.0);
    for (std::size_t i = 0; i < inst.vars.size(); ++i) {
        lo[i] = inst.vars[i].lower;
        hi[i] = inst.vars[i].upper;
    }
    for (std::size_t k = 0; k < delays.size(); ++k) {
        if (delays[k] < 0 || delays[k] > p.max_delay) return false;
        lo[inst.delay_vars[k]] = hi[inst.delay_vars[k]] = static_cast<double>(delays[k]);
    }
    for (const auto& t : inst.triples) {
        const double expected = static_cast<double>(overlap_term(p, t.k, delays[t.k - 1], t.j, t.m));
        cost[t.z] = 1.0;
        // the smallest z any completion allows must equal the direct value
        double best = std::numeric_limits<double>::infinity();
        for (int pattern = 0; pattern < 8; ++pattern) {
            auto l = lo, h = hi;
            l[t.ya] = h[t.ya] = pattern & 1;
            l[t.yb] = h[t.yb] = (pattern >> 1) & 1;
            l[t.o] = h[t.o] = (pattern >> 2) & 1;
            auto sub = restrict_rows(inst, t.rows, l, h, cost);
            if (sub.infeasible) continue;
            const auto sol = solve_lp(sub.lp);
            if (sol.status == LpStatus::optimal) best = std::min(best, sol.objective);
        }
        cost[t.z] = 0.0;
        if (!(std::abs(best - expected) <= kFeasTol)) return false;
    }
    return true;
}

namespace {

// One connected group of variables, searched independently.
class BlockSearch {
public:
    BlockSearch(const MilpInstance& inst, std::vector<int> vars, std::vector<int> rows, long node_limit)
        : inst_(inst), vars_(std::move(vars)), rows_(std::move(rows)), node_limit_(node_limit) {
        std::vector<int> local(inst.vars.size(), -1);
        for (std::size_t i = 0; i < vars_.size(); ++i) local[vars_[i]] = static_cast<int>(i);
        // every row in <= form over local indices
        for (const int r : rows_) {
            const auto& row = inst.rows[r].row;
            Leq le;
            for (const auto& [g, c] : row.coeffs) le.coeffs.emplace_back(local[g], c);
            le.rhs = row.rhs;
            if (row.sense != Sense::ge) leq_.push_back(le);
            if (row.sense != Sense::le) {
                for (auto& [i, c] : le.coeffs) c = -c;
                le.rhs = -le.rhs;
                leq_.push_back(le);
            }
        }
    }

    // Returns false if the node limit was hit.
    bool run() {
        std::vector<double> lo(vars_.size()), hi(vars_.size());
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            lo[i] = inst_.vars[vars_[i]].lower;
            hi[i] = inst_.vars[vars_[i]].upper;
        }
        dfs(lo, hi);
        return !aborted_;
    }

    bool found() const { return std::isfinite(incumbent_); }
    double objective() const { return incumbent_; }
    const std::vector<double>& solution() const { return best_; }
    const std::vector<int>& vars() const { return vars_; }
    long nodes() const { return nodes_; }
    long lp_solves() const { return lp_solves_; }

private:
    struct Leq {
        std::vector<std::pair<int, double>> coeffs;
        double rhs = 0.0;
    };

    bool is_binary(int i) const { return inst_.vars[vars_[i]].kind == VarKind::binary; }

    bool propagate(std::vector<double>& lo, std::vector<double>& hi) const {
        for (int round = 0; round < 50; ++round) {
            bool changed = false;
            for (const auto& row : leq_) {
                double minact = 0.0;
                for (const auto& [i, c] : row.coeffs) minact += c > 0 ? c * lo[i] : c * hi[i];
                const double slack = row.rhs - minact;
                if (slack < -kFeasTol) return false;
                for (const auto& [i, c] : row.coeffs) {
                    if (c > 0) {
                        double u = lo[i] + slack / c;
                        if (is_binary(i)) u = std::floor(u + kFeasTol);
                        if (u < hi[i] - kFeasTol) {
                            hi[i] = u;
                            changed = true;
                        }
                    } else {
                        double l = hi[i] + slack / c;
                        if (is_binary(i)) l = std::ceil(l - kFeasTol);
                        if (l > lo[i] + kFeasTol) {
                            lo[i] = l;
                            changed = true;
                        }
                    }
                    if (lo[i] > hi[i] + kFeasTol) return false;
                    if (lo[i] > hi[i]) hi[i] = lo[i];
                }
            }
            if (!changed) break;
        }
        return true;
    }

    void dfs(std::vector<double> lo, std::vector<double> hi) {
        if (aborted_) return;
        if (++nodes_ > node_limit_) {
            aborted_ = true;
            return;
        }
        if (!propagate(lo, hi)) return;
        double bound = 0.0;
        for (std::size_t i = 0; i < vars_.size(); ++i) bound += inst_.objective[vars_[i]] * lo[i];
        if (bound >= incumbent_ - kFeasTol) return;

        int branch = -1;
        for (std::size_t i = 0; i < vars_.size(); ++i)
            if (is_binary(static_cast<int>(i)) && hi[i] - lo[i] > 0.5) {
                branch = static_cast<int>(i);
                break;
            }
        if (branch < 0) {
            leaf(lo, hi);
            return;
        }
        auto down = hi;
        down[branch] = 0.0;
        dfs(lo, down);
        auto up = lo;
        up[branch] = 1.0;
        dfs(up, hi);
    }

    void leaf(const std::vector<double>& lo, const std::vector<double>& hi) {
        std::vector<double> glo(inst_.vars.size(), 0.0), ghi(inst_.vars.size(), 0.0);
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            glo[vars_[i]] = lo[i];
            ghi[vars_[i]] = hi[i];
        }
        auto sub = restrict_rows(inst_, rows_, glo, ghi, inst_.objective);
        if (sub.infeasible) return;
        ++lp_solves_;
        const auto sol = solve_lp(sub.lp);
        if (sol.status != LpStatus::optimal) return;
        std::vector<double> x(lo);
        std::vector<int> local(inst_.vars.size(), -1);
        for (std::size_t i = 0; i < vars_.size(); ++i) local[vars_[i]] = static_cast<int>(i);
        for (std::size_t i = 0; i < sub.global.size(); ++i) x[local[sub.global[i]]] = sol.x[i];
        double obj = 0.0;
        for (std::size_t i = 0; i < vars_.size(); ++i) obj += inst_.objective[vars_[i]] * x[i];
        if (obj < incumbent_ - kFeasTol) {
            incumbent_ = obj;
            best_ = std::move(x);
        }
    }

    const MilpInstance& inst_;
    std::vector<int> vars_;
    std::vector<int> rows_;
    std::vector<Leq> leq_;
    long node_limit_;
    long nodes_ = 0;
    long lp_solves_ = 0;
    bool aborted_ = false;
    double incumbent_ = std::numeric_limits<double>::infinity();
    std::vector<double> best_;
};

}  // namespace

MilpResult branch_and_bound(const MilpInstance& inst, long node_limit) {
    const int n = static_cast<int>(inst.vars.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& r : inst.rows)
        for (std::size_t i = 1; i < r.row.coeffs.size(); ++i)
            parent[find(r.row.coeffs[i].first)] = find(r.row.coeffs[0].first);

    std::vector<std::vector<int>> block_vars(n), block_rows(n);
    for (int v = 0; v < n; ++v) block_vars[find(v)].push_back(v);
    for (int r = 0; r < static_cast<int>(inst.rows.size()); ++r) {
        const auto& c = inst.rows[r].row.coeffs;
        if (!c.empty()) block_rows[find(c.front().first)].push_back(r);
    }

    MilpResult out;
    out.optimal = true;
    std::vector<double> x(n, 0.0);
    for (int root = 0; root < n; ++root) {
        if (block_vars[root].empty()) continue;
        BlockSearch search(inst, block_vars[root], block_rows[root], node_limit - out.nodes);
        const bool complete = search.run();
        out.nodes += search.nodes();
        out.lp_solves += search.lp_solves();
        if (!search.found()) {
            out.optimal = false;
            out.objective = std::numeric_limits<double>::infinity();
            return out;
        }
        if (!complete) out.optimal = false;
        out.objective += search.objective();
        for (std::size_t i = 0; i < search.vars().size(); ++i) x[search.vars()[i]] = search.solution()[i];
    }
    for (const int d : inst.delay_vars) out.delays.push_back(x[d]);
    return out;
}

namespace {

void write_term(std::ostream& out, double c, const std::string& name, bool first) {
    if (c < 0)
        out << (first ? "-" : " - ");
    else if (!first)
        out << " + ";
    const double a = std::abs(c);
    if (a != 1.0) out << a << ' ';
    out << name;
}

}  // namespace

void write_lp_format(const MilpInstance& inst, std::ostream& out) {
    const auto prev = out.precision(17);
    out << "\\ attack-window overlap, victim " << inst.problem.victim_id << ", big M " << inst.big_m << "\n";
    out << "Minimize\n obj:";
    int on_line = 0;
    bool first = true;
    for (std::size_t i = 0; i < inst.vars.size(); ++i) {
        if (inst.objective[i] == 0.0) continue;
        out << ' ';
        write_term(out, inst.objective[i], inst.vars[i].name, first);
        first = false;
        if (++on_line == 8) {
            out << "\n     ";
            on_line = 0;
        }
    }
    if (first) out << " 0 " << inst.vars.front().name;
    out << "\nSubject To\n";
    for (const auto& r : inst.rows) {
        out << ' ' << r.name << ": ";
        bool f = true;
        for (const auto& [g, c] : r.row.coeffs) {
            write_term(out, c, inst.vars[g].name, f);
            f = false;
        }
        out << (r.row.sense == Sense::le ? " <= " : r.row.sense == Sense::ge ? " >= " : " = ") << r.row.rhs << "\n";
    }
    out << "Bounds\n";
    for (const auto& v : inst.vars)
        if (v.kind == VarKind::continuous) out << ' ' << v.lower << " <= " << v.name << " <= " << v.upper << "\n";
    out << "Binaries\n";
    for (const auto& v : inst.vars)
        if (v.kind == VarKind::binary) out << ' ' << v.name << "\n";
    out << "End\n";
    out.precision(prev);
}

}  // namespace delayguard
