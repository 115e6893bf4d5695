#include <doctest.h>

#include <algorithm>
#include <random>

#include "delayguard/io.hpp"
#include "delayguard/task_model.hpp"
#include "fixtures.hpp"

using namespace delayguard;
using fixtures::task;

namespace {

bool has_rule(const ValidationReport& r, const std::string& rule) {
    return std::any_of(r.violations.begin(), r.violations.end(), [&](const Violation& v) { return v.rule == rule; });
}

}  // namespace

TEST_CASE("hyperperiod examples") {
    CHECK(hyperperiod(fixtures::small_example().tasks()) == 20);
    CHECK(fixtures::small_example().hyperperiod() == 20);
    std::vector<TaskSpec> one{task(1, 1, 7, 1)};
    CHECK(hyperperiod(one) == 7);
    CHECK(fixtures::automotive().hyperperiod() == 200);
}

TEST_CASE("hyperperiod errors") {
    std::vector<TaskSpec> none;
    CHECK_THROWS_AS(hyperperiod(none), TaskSetError);
    std::vector<TaskSpec> bad{task(1, 1, 0, 1)};
    CHECK_THROWS_AS(hyperperiod(bad), TaskSetError);
    // pairwise coprime large primes overflow 63 bits
    std::vector<TaskSpec> huge;
    const Millis primes[] = {1000000007, 1000000009, 998244353};
    for (int i = 0; i < 3; ++i) huge.push_back(task(i + 1, 1, primes[i], i + 1));
    CHECK_THROWS_AS(hyperperiod(huge), TaskSetError);
    TaskSet ts(huge);
    CHECK(ts.hyperperiod() == 0);
    CHECK(has_rule(validate(ts), "hyperperiod representable"));
}

TEST_CASE("hyperperiod divisible by every period") {
    std::mt19937 rng(7);
    const Millis menu[] = {5, 10, 20, 50, 100, 200, 1000, 3, 7};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<TaskSpec> ts;
        const int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) ts.push_back(task(i + 1, 1, menu[rng() % 9], i + 1));
        const Millis h = hyperperiod(ts);
        for (const auto& t : ts) CHECK(h % t.period == 0);
    }
}

TEST_CASE("rate-monotonic priorities") {
    auto ts = assign_rm_priorities(fixtures::small_example());
    CHECK(ts.at(1).priority == 1);
    CHECK(ts.at(2).priority == 2);
    CHECK(ts.at(3).priority == 3);
    CHECK(ts.at(4).priority == 4);

    TaskSet equal({task(3, 1, 10, 9), task(1, 1, 10, 8), task(2, 1, 10, 7)});
    auto eq = assign_rm_priorities(equal);
    CHECK(eq.at(1).priority == 1);
    CHECK(eq.at(2).priority == 2);
    CHECK(eq.at(3).priority == 3);

    TaskSet two({task(1, 1, 100, 1), task(2, 1, 5, 2)});
    CHECK(assign_rm_priorities(two).at(2).priority == 1);
}

TEST_CASE("rate-monotonic assignment is idempotent and permutation stable") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<TaskSpec> v;
        for (int i = 0; i < 6; ++i) v.push_back(task(i + 1, 1, 5 * (1 + static_cast<Millis>(rng() % 4)), 0));
        auto once = assign_rm_priorities(TaskSet(v));
        auto twice = assign_rm_priorities(once);
        CHECK(once == twice);
        auto shuffled = v;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto other = assign_rm_priorities(TaskSet(shuffled));
        for (const auto& t : once.tasks()) CHECK(other.at(t.id).priority == t.priority);
    }
}

TEST_CASE("validation") {
    CHECK(validate(fixtures::small_example()).ok());
    CHECK(validate(fixtures::automotive()).ok());

    TaskSet c_gt_d({task(1, 5, 10, 1, 4)});
    CHECK(has_rule(validate(c_gt_d), "C <= D"));

    TaskSet dup({task(1, 1, 10, 1), task(2, 1, 10, 1)});
    CHECK(has_rule(validate(dup), "unique priorities"));

    auto base = fixtures::automotive().tasks();
    struct Mutation {
        const char* rule;
        void (*apply)(TaskSpec&);
    };
    const Mutation mutations[] = {
        {"0 < C", [](TaskSpec& t) { t.wcet = 0; }},
        {"D <= T", [](TaskSpec& t) { t.deadline = t.period + 1; }},
        {"AEW >= 0", [](TaskSpec& t) { t.aew = -1; }},
        {"untrusted tasks are non-control", [](TaskSpec& t) { t.trust = Trust::untrusted; }},
    };
    for (const auto& m : mutations) {
        auto v = base;
        m.apply(v[0]);
        CAPTURE(m.rule);
        CHECK(has_rule(validate(TaskSet(v)), m.rule));
    }
    auto v = base;
    v[3].aew = 4;
    CHECK(has_rule(validate(TaskSet(v)), "AEW only on control tasks"));
    v = base;
    v[1].id = v[0].id;
    CHECK(has_rule(validate(TaskSet(v)), "unique ids"));
}

TEST_CASE("delay sequences") {
    auto ts = fixtures::automotive();
    DelaySequence seq{3, {8, 0, 5, 0, 5, 8, 5, 0, 5, 0}};
    CHECK(validate(seq, ts).ok());
    CHECK(seq.min() == 0);
    CHECK(seq.max() == 8);
    CHECK(seq.for_job(1) == 8);
    CHECK(seq.for_job(10) == 0);
    CHECK(seq.for_job(11) == 8);
    CHECK(seq.for_job(16) == 8);

    DelaySequence short_seq{3, {1, 2}};
    CHECK(has_rule(validate(short_seq, ts), "length equals H/T_v"));
    DelaySequence at_bound{3, std::vector<Millis>(10, 18)};
    CHECK(has_rule(validate(at_bound, ts), "0 <= delta < D - C"));
    DelaySequence below{3, std::vector<Millis>(10, 17)};
    CHECK(validate(below, ts).ok());
}

TEST_CASE("integer division helpers") {
    CHECK(floor_div(-1, 5) == -1);
    CHECK(floor_div(-5, 5) == -1);
    CHECK(floor_div(4, 5) == 0);
    CHECK(ceil_div(-4, 5) == 0);
    CHECK(ceil_div(1, 5) == 1);
    CHECK(ceil_div(10, 5) == 2);
}

TEST_CASE("task-set file round trip and strictness") {
    auto ts = fixtures::automotive();
    auto back = taskset_from_json(taskset_to_json(ts));
    CHECK(back == ts);

    auto doc = taskset_to_json(ts);
    doc["tasks"][0]["colour"] = "red";
    CHECK_THROWS_AS(taskset_from_json(doc), FormatError);

    auto partial = taskset_to_json(ts);
    partial["tasks"][0].erase("priority");
    CHECK_THROWS_AS(taskset_from_json(partial), FormatError);

    auto missing = taskset_to_json(ts);
    missing["tasks"][1].erase("wcet_ms");
    CHECK_THROWS_AS(taskset_from_json(missing), FormatError);
}

TEST_CASE("delay-store round trip") {
    DelayStore store;
    store[3] = DelaySequence{3, {8, 0, 5, 0, 5, 8, 5, 0, 5, 0}};
    store[1] = DelaySequence{1, std::vector<Millis>(20, 1)};
    CHECK(delay_store_from_json(delay_store_to_json(store)) == store);
    auto single = delay_store_from_json(nlohmann::json{{"victim_id", 2}, {"delays_ms", {1, 2, 3, 4, 5}}});
    CHECK(single.at(2).delays.size() == 5);
}
