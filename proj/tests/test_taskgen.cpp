#include <doctest.h>

#include <cmath>
#include <numeric>

#include "delayguard/io.hpp"
#include "delayguard/rng.hpp"
#include "delayguard/taskgen.hpp"

using namespace delayguard;

TEST_CASE("rand_fixed_sum basics") {
    auto rng = make_stream(1, "taskgen-test");
    const auto one = rand_fixed_sum(1, 0.4, rng);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(0.4));
    for (int n : {2, 3, 5, 10, 20})
        for (double total : {0.05, 0.5 * n, n - 0.05}) {
            const auto x = rand_fixed_sum(n, total, rng);
            CHECK(std::abs(std::accumulate(x.begin(), x.end(), 0.0) - total) < 1e-12);
            for (double v : x) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    CHECK_THROWS_AS(rand_fixed_sum(0, 0.5, rng), GenerationError);
    CHECK_THROWS_AS(rand_fixed_sum(3, 0.0, rng), GenerationError);
    CHECK_THROWS_AS(rand_fixed_sum(3, 3.0, rng), GenerationError);
}

TEST_CASE("rand_fixed_sum is uniform on the slice") {
    auto rng = make_stream(2, "taskgen-test");
    // n = 2, total 0.5: the first coordinate is U(0, 0.5)
    const int draws = 10000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double v = rand_fixed_sum(2, 0.5, rng)[0];
        sum += v;
        sq += v * v;
    }
    const double mean = sum / draws, var = sq / draws - mean * mean;
    CHECK(mean == doctest::Approx(0.25).epsilon(0.02));
    CHECK(var == doctest::Approx(0.25 / 12.0).epsilon(0.05));

    // by symmetry every coordinate has mean total / n
    std::vector<double> acc(4, 0.0);
    for (int i = 0; i < draws; ++i) {
        const auto x = rand_fixed_sum(4, 1.2, rng);
        for (int c = 0; c < 4; ++c) acc[static_cast<std::size_t>(c)] += x[static_cast<std::size_t>(c)];
    }
    for (double a : acc) CHECK(a / draws == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("priority groups") {
    CHECK(group_ranks(10, PriorityGroup::hp) == std::vector<int>{1, 2, 3});
    CHECK(group_ranks(10, PriorityGroup::mp) == std::vector<int>{4, 5, 6});
    CHECK(group_ranks(10, PriorityGroup::lp) == std::vector<int>{7, 8, 9, 10});
    CHECK(group_ranks(5, PriorityGroup::lp) == std::vector<int>{3, 4, 5});
    CHECK(to_string(PriorityGroup::mp) == "MP");
}

TEST_CASE("generated task sets are valid and near the target") {
    GeneratorSpec gen;
    for (int n : {5, 10, 20}) {
        gen.n_tasks = n;
        for (double target : {0.1, 0.45, 0.9}) {
            auto rng = make_stream(3, "taskgen-test", static_cast<std::uint64_t>(n));
            const auto ts = generate_taskset(gen, target, rng);
            CHECK(ts.size() == static_cast<std::size_t>(n));
            CHECK(validate(ts).ok());
            CHECK(std::abs(ts.utilization() - target) <= gen.tolerance + 1e-12);
            for (const auto& t : ts.tasks()) {
                CHECK(std::find(gen.period_menu.begin(), gen.period_menu.end(), t.period) != gen.period_menu.end());
                CHECK(t.wcet >= 1);
                CHECK(t.wcet <= gen.wcet_max);
                CHECK(t.deadline == t.period);
            }
            // rate-monotonic priorities
            const auto order = ts.by_priority();
            for (std::size_t i = 1; i < order.size(); ++i) CHECK(order[i - 1].period <= order[i].period);
            CHECK(taskset_from_json(taskset_to_json(ts)) == ts);
        }
    }
}

TEST_CASE("sweep is deterministic and thread independent") {
    SweepSpec spec;
    spec.task_counts = {5};
    spec.ranges = 3;
    spec.sets_per_range = 8;
    spec.seeds = {0, 1};
    spec.threads = 1;
    const auto a = schedulability_sweep(spec);
    spec.threads = 4;
    const auto b = schedulability_sweep(spec);
    REQUIRE(a.size() == 2 * 3 * 3);
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].percent == b[i].percent);
        CHECK(a[i].percent >= 0.0);
        CHECK(a[i].percent <= 100.0);
    }
    const auto agg = aggregate_over_seeds(a);
    REQUIRE(agg.size() == 9);
    for (std::size_t i = 0; i < agg.size(); ++i) {
        const auto& r0 = a[i];
        const auto& r1 = a[i + 9];
        CHECK(agg[i].percent == doctest::Approx((r0.percent + r1.percent) / 2.0));
        CHECK(agg[i].sets == 16);
    }
}
