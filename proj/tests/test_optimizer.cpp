#include <doctest.h>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "delayguard/milp.hpp"
#include "delayguard/overlap.hpp"
#include "delayguard/simplex.hpp"
#include "fixtures.hpp"

using namespace delayguard;

namespace {

// Vertex enumeration for min c'x over {x in R^2 : A x <= b, x >= 0}.
std::optional<double> brute_lp_2d(const std::vector<std::array<double, 3>>& rows, double c0, double c1) {
    std::vector<std::array<double, 3>> all = rows;
    all.push_back({-1, 0, 0});
    all.push_back({0, -1, 0});
    std::optional<double> best;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            Eigen::Matrix2d m;
            m << all[i][0], all[i][1], all[j][0], all[j][1];
            if (std::abs(m.determinant()) < 1e-12) continue;
            const Eigen::Vector2d x = m.fullPivLu().solve(Eigen::Vector2d(all[i][2], all[j][2]));
            bool ok = true;
            for (const auto& r : all) ok = ok && r[0] * x[0] + r[1] * x[1] <= r[2] + 1e-9;
            if (!ok) continue;
            const double v = c0 * x[0] + c1 * x[1];
            if (!best || v < *best) best = v;
        }
    return best;
}

OverlapProblem single_pair(Millis wcet, Millis ri_resp, Millis aew, Millis period, Millis uj_period, Millis uj_resp,
                           Millis max_delay) {
    OverlapProblem p;
    p.victim_id = 1;
    p.victim_period = period;
    p.victim_wcet = wcet;
    p.victim_response = ri_resp;
    p.aew = aew;
    p.max_delay = max_delay;
    p.hyperperiod = std::lcm(period, uj_period);
    p.untrusted.push_back({2, uj_period, 1, uj_resp});
    return p;
}

OverlapProblem random_problem(std::mt19937_64& rng) {
    std::uniform_int_distribution<Millis> pick(1, 4);
    OverlapProblem p;
    p.victim_id = 1;
    p.victim_period = 5 * pick(rng);
    p.victim_wcet = pick(rng);
    p.victim_response = p.victim_wcet + pick(rng) - 1;
    p.aew = pick(rng) + 1;
    p.max_delay = std::min<Millis>(pick(rng), p.victim_period - p.victim_wcet);
    p.hyperperiod = p.victim_period;
    const int n = static_cast<int>(pick(rng) % 2) + 1;
    for (int j = 0; j < n; ++j) {
        const Millis t = 5 * pick(rng);
        const Millis c = pick(rng);
        p.untrusted.push_back({static_cast<TaskId>(10 + j), t, c, c + pick(rng)});
        p.hyperperiod = std::lcm(p.hyperperiod, t);
    }
    while (p.victim_jobs() > 4) p.hyperperiod /= 2;  // keep joint enumeration small
    p.hyperperiod = std::lcm(p.hyperperiod, p.victim_period);
    return p;
}

// Joint minimization over every sequence in {0..max}^N.
Millis joint_minimum(const OverlapProblem& p) {
    const auto n = p.victim_jobs();
    DelaySequence seq{p.victim_id, std::vector<Millis>(static_cast<std::size_t>(n), 0)};
    Millis best = total_overlap(p, seq);
    for (;;) {
        std::size_t i = 0;
        while (i < seq.delays.size() && seq.delays[i] == p.max_delay) seq.delays[i++] = 0;
        if (i == seq.delays.size()) break;
        ++seq.delays[i];
        best = std::min(best, total_overlap(p, seq));
    }
    return best;
}

OverlapProblem automotive_victim3() { return make_overlap_problem(fixtures::automotive(), 3, 8); }

}  // namespace

TEST_SUITE("simplex") {
    TEST_CASE("textbook maximization") {
        LinearProgram lp;
        const int x = lp.add_var(0, INFINITY, -1);
        const int y = lp.add_var(0, INFINITY, -1);
        lp.rows.push_back({{{x, 1}, {y, 2}}, Sense::le, 4});
        lp.rows.push_back({{{x, 3}, {y, 1}}, Sense::le, 6});
        const auto s = solve_lp(lp);
        REQUIRE(s.status == LpStatus::optimal);
        CHECK(s.objective == doctest::Approx(-2.8));
        CHECK(s.x[0] == doctest::Approx(1.6));
        CHECK(s.x[1] == doctest::Approx(1.2));
    }

    TEST_CASE("equality, ge rows and shifted bounds") {
        LinearProgram lp;
        const int x = lp.add_var(1, 5, 2);
        const int y = lp.add_var(-3, 4, 1);
        lp.rows.push_back({{{x, 1}, {y, 1}}, Sense::eq, 3});
        lp.rows.push_back({{{x, 1}, {y, -1}}, Sense::ge, -1});
        const auto s = solve_lp(lp);
        REQUIRE(s.status == LpStatus::optimal);
        // x + y = 3, x >= y - 1, x >= 1: cheapest is x = 1, y = 2
        CHECK(s.objective == doctest::Approx(4.0));
    }

    TEST_CASE("infeasible and unbounded") {
        LinearProgram a;
        const int x = a.add_var(0, 2, 1);
        a.rows.push_back({{{x, 1}}, Sense::ge, 3});
        CHECK(solve_lp(a).status == LpStatus::infeasible);

        LinearProgram b;
        const int y = b.add_var(0, INFINITY, -1);
        const int z = b.add_var(0, INFINITY, 0);
        b.rows.push_back({{{y, 1}, {z, -1}}, Sense::le, 1});
        CHECK(solve_lp(b).status == LpStatus::unbounded);
    }

    TEST_CASE("redundant equalities") {
        LinearProgram lp;
        const int x = lp.add_var(0, INFINITY, 1);
        const int y = lp.add_var(0, INFINITY, 1);
        lp.rows.push_back({{{x, 1}, {y, 1}}, Sense::eq, 2});
        lp.rows.push_back({{{x, 2}, {y, 2}}, Sense::eq, 4});
        const auto s = solve_lp(lp);
        REQUIRE(s.status == LpStatus::optimal);
        CHECK(s.objective == doctest::Approx(2.0));
    }

    TEST_CASE("random 2-D programs against vertex enumeration") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> coef(-3, 3), rhs(0.5, 6);
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<std::array<double, 3>> rows;
            LinearProgram lp;
            lp.add_var(0, INFINITY, coef(rng));
            lp.add_var(0, INFINITY, coef(rng));
            rows.push_back({1, 1, 8});  // keep the region bounded
            for (int r = 0; r < 3; ++r) rows.push_back({coef(rng), coef(rng), rhs(rng)});
            for (const auto& r : rows) lp.rows.push_back({{{0, r[0]}, {1, r[1]}}, Sense::le, r[2]});
            const auto expect = brute_lp_2d(rows, lp.cost[0], lp.cost[1]);
            const auto got = solve_lp(lp);
            REQUIRE(expect.has_value());
            REQUIRE(got.status == LpStatus::optimal);
            CHECK(got.objective == doctest::Approx(*expect).epsilon(1e-7));
        }
    }
}

TEST_SUITE("overlap") {
    TEST_CASE("worked terms") {
        // victim released at 0, C=2, R=2, Omega=5; untrusted job at 4 with R=3
        const auto p = single_pair(2, 2, 5, 10, 4, 3, 3);
        // second untrusted job of period 4 is released at 4
        CHECK(overlap_term(p, 1, 0, 0, 2) == 3);
        // the first untrusted job ends (at 3) inside [2, 7)
        CHECK(overlap_term(p, 1, 0, 0, 1) == 1);
        // window shifted past the job
        CHECK(overlap_term(p, 1, 3, 0, 1) == 0);
    }

    TEST_CASE("empty window yields no overlap") {
        auto p = single_pair(2, 2, 0, 10, 5, 5, 3);
        for (Millis d = 0; d <= 3; ++d)
            for (std::int64_t m = 1; m <= p.jobs_of(0); ++m) CHECK(overlap_term(p, 1, d, 0, m) == 0);
    }

    TEST_CASE("each term is bounded by both intervals") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const auto p = random_problem(rng);
            for (std::int64_t k = 1; k <= p.victim_jobs(); ++k)
                for (Millis d = 0; d <= p.max_delay; ++d)
                    for (std::size_t j = 0; j < p.untrusted.size(); ++j)
                        for (std::int64_t m = 1; m <= p.jobs_of(j); ++m) {
                            const auto v = overlap_term(p, k, d, j, m);
                            CHECK(v >= 0);
                            CHECK(v <= p.victim_response + p.aew - p.victim_wcet);
                            CHECK(v <= p.untrusted[j].response);
                        }
        }
    }

    TEST_CASE("per-job solver equals joint enumeration") {
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 150; ++trial) {
            const auto p = random_problem(rng);
            const auto sol = solve_delays(p);
            CHECK(sol.objective == joint_minimum(p));
            CHECK(total_overlap(p, sol.delays) == sol.objective);
            CHECK(sol.objective <= sol.baseline);
        }
    }

    TEST_CASE("random sequences never beat the solver") {
        const auto p = automotive_victim3();
        const auto sol = solve_delays(p);
        std::mt19937_64 rng(99);
        std::uniform_int_distribution<Millis> d(0, p.max_delay);
        for (int trial = 0; trial < 2000; ++trial) {
            DelaySequence s{3, {}};
            for (std::int64_t k = 0; k < p.victim_jobs(); ++k) s.delays.push_back(d(rng));
            CHECK(total_overlap(p, s) >= sol.objective);
        }
    }

    TEST_CASE("automotive trajectory-tracking victim") {
        const auto p = automotive_victim3();
        CHECK(p.hyperperiod == 200);
        CHECK(p.victim_jobs() == 10);
        CHECK(p.untrusted.size() == 3);
        const auto sol = solve_delays(p);
        CHECK(sol.baseline == 90);
        CHECK(sol.objective == 74);
        const DelaySequence alt{3, {8, 0, 5, 0, 5, 8, 5, 0, 5, 0}};
        CHECK(total_overlap(p, alt) == 74);
        CHECK(sol.delays.max() <= 8);
    }

    TEST_CASE("length mismatch is rejected") {
        const auto p = automotive_victim3();
        CHECK_THROWS_AS(total_overlap(p, DelaySequence{3, {0, 1}}), OverlapError);
    }
}

TEST_SUITE("milp") {
    TEST_CASE("model size for the automotive victim") {
        const auto inst = build_milp(automotive_victim3());
        CHECK(inst.triples.size() == 90);
        CHECK(inst.num_continuous() == 280);
        CHECK(inst.num_binaries() == 270);
        CHECK(inst.num_linearization_rows() == 1080);
        CHECK(inst.bound_rows.size() == 20);
        CHECK(inst.big_m == doctest::Approx(required_big_m(inst.problem)));
    }

    TEST_CASE("linearization reproduces every term") {
        const auto inst = build_milp(automotive_victim3());
        std::mt19937_64 rng(3);
        std::uniform_int_distribution<Millis> d(0, inst.problem.max_delay);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<Millis> delays;
            for (int k = 0; k < 10; ++k) delays.push_back(d(rng));
            CHECK(verify_linearization(inst, delays));
        }
        CHECK(verify_linearization(inst, std::vector<Millis>(10, 0)));
        CHECK_FALSE(verify_linearization(inst, std::vector<Millis>(9, 0)));
        CHECK_FALSE(verify_linearization(inst, std::vector<Millis>(10, 9)));
    }

    TEST_CASE("undersized big-M breaks the model") {
        const auto inst = build_milp(automotive_victim3(), 1.0);
        CHECK_FALSE(verify_linearization(inst, std::vector<Millis>(10, 0)));
    }

    TEST_CASE("branch and bound matches the per-job solver") {
        const auto p = automotive_victim3();
        const auto res = branch_and_bound(build_milp(p));
        REQUIRE(res.optimal);
        CHECK(res.objective == doctest::Approx(74.0));
        DelaySequence rounded{3, {}};
        for (double d : res.delays) rounded.delays.push_back(std::llround(d));
        CHECK(total_overlap(p, rounded) == 74);

        std::mt19937_64 rng(41);
        for (int trial = 0; trial < 40; ++trial) {
            const auto q = random_problem(rng);
            const auto r = branch_and_bound(build_milp(q));
            REQUIRE(r.optimal);
            CHECK(r.objective == doctest::Approx(static_cast<double>(solve_delays(q).objective)));
        }
    }

    TEST_CASE("LP text export") {
        const auto inst = build_milp(automotive_victim3());
        std::ostringstream os;
        write_lp_format(inst, os);
        const auto text = os.str();
        CHECK(text.find("Minimize") != std::string::npos);
        CHECK(text.find("Subject To") != std::string::npos);
        CHECK(text.find(" ya_1_4_1\n") != std::string::npos);
        CHECK(text.rfind("End\n") == text.size() - 4);
        std::size_t rows = 0, pos = text.find("Subject To"), end = text.find("Bounds");
        while ((pos = text.find(": ", pos + 1)) < end) ++rows;
        CHECK(rows == inst.rows.size());
    }
}
