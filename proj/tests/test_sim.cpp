#include <doctest.h>

#include <set>
#include <sstream>

#include "delayguard/rng.hpp"
#include "delayguard/sim.hpp"
#include "delayguard/taskgen.hpp"
#include "fixtures.hpp"

using namespace delayguard;

namespace {

SimConfig horizon(Millis t) {
    SimConfig cfg;
    cfg.reset_time = t;
    return cfg;
}

const JobRecord& job(const ScheduleTrace& tr, TaskId task, std::int64_t k) {
    for (const auto* j : tr.jobs_of(task))
        if (j->job == k) return *j;
    FAIL("job not found");
    return tr.jobs.front();
}

// Checks from the timeline alone: never idle while work is ready, and the
// running job always has the best priority among ready jobs.
void check_schedule_invariants(const TaskSet& ts, const ScheduleTrace& tr) {
    for (Millis t = 0; t < tr.horizon; ++t) {
        const int run = tr.timeline[static_cast<std::size_t>(t)];
        int best_prio = 1 << 30;
        bool ready = false;
        for (const auto& j : tr.jobs) {
            const bool active = j.release() <= t && (j.finish < 0 || j.finish > t);
            if (!active) continue;
            ready = true;
            best_prio = std::min(best_prio, ts.at(j.task).priority);
        }
        REQUIRE(ready == (run >= 0));
        if (run >= 0) REQUIRE(ts.at(tr.jobs[static_cast<std::size_t>(run)].task).priority == best_prio);
    }
    std::vector<Millis> executed(tr.jobs.size(), 0);
    for (const int r : tr.timeline)
        if (r >= 0) ++executed[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < tr.jobs.size(); ++i) {
        const auto& j = tr.jobs[i];
        if (j.finish < 0) continue;
        REQUIRE(executed[i] == ts.at(j.task).wcet);
        REQUIRE(j.start >= j.release());
    }
}

}  // namespace

TEST_CASE("plain schedule of the four-task example") {
    const auto ts = fixtures::small_example();
    const auto tr = simulate_pfp(ts, horizon(20));
    CHECK(job(tr, 1, 1).finish == 1);
    CHECK(job(tr, 2, 1).start == 1);
    CHECK(job(tr, 2, 1).finish == 4);
    CHECK(job(tr, 3, 1).finish == 8);
    CHECK(job(tr, 4, 1).finish == 10);
    CHECK(tr.deadline_misses == 0);
    check_schedule_invariants(ts, tr);
}

TEST_CASE("a lone task runs back to back") {
    const TaskSet ts({fixtures::task(1, 3, 5, 1)});
    const auto tr = simulate_pfp(ts, horizon(15));
    const std::vector<int> busy{0, 0, 0, -1, -1, 1, 1, 1, -1, -1, 2, 2, 2, -1, -1};
    CHECK(tr.timeline == busy);
    CHECK(tr.jobs.size() == 3);
}

TEST_CASE("fixed delays shift the victim's jobs") {
    const auto ts = fixtures::small_example();
    auto cfg = horizon(20);
    cfg.fixed_delays[2] = DelaySequence{2, {6, 6}};
    const auto tr = simulate_pfp(ts, cfg);
    for (const std::int64_t k : {1, 2}) {
        const auto& j = job(tr, 2, k);
        CHECK(j.delay == 6);
        CHECK(j.start >= (k - 1) * 10 + 6);
        CHECK(j.finish <= k * 10);
    }
    CHECK(tr.count(EventKind::job_defer) == 2);
    CHECK(tr.deadline_misses == 0);
    check_schedule_invariants(ts, tr);

    cfg.fixed_delays[2] = DelaySequence{2, {8, 8}};
    const auto late = simulate_pfp(ts, cfg);
    CHECK(late.deadline_misses >= 1);
    CHECK(job(late, 2, 1).missed);
}

TEST_CASE("scheduler invariants on generated task sets") {
    GeneratorSpec gen;
    gen.n_tasks = 6;
    gen.period_menu = {5, 10, 20, 50, 100};
    for (std::uint64_t s = 0; s < 15; ++s) {
        auto rng = make_stream(11, "sim-test", s);
        const auto ts = generate_taskset(gen, 0.3 + 0.04 * static_cast<double>(s), rng);
        const auto tr = simulate_pfp(ts, horizon(std::min<Millis>(ts.hyperperiod(), 400)));
        check_schedule_invariants(ts, tr);
    }
}

TEST_CASE("mitigation without an alarm is plain scheduling") {
    const auto ts = fixtures::automotive();
    SimConfig cfg = horizon(600);
    cfg.mode = SimMode::pfp_d;
    const DelayStore store{{3, DelaySequence{3, {8, 0, 5, 0, 5, 8, 5, 0, 5, 0}}}};
    const auto a = run_schedule(ts, cfg, store);
    cfg.mode = SimMode::pfp;
    const auto b = simulate_pfp(ts, cfg);
    CHECK(a.timeline == b.timeline);
    CHECK(!a.mode_switch);
}

TEST_CASE("scripted alarm starts the sequence at k mod N and wraps at the hyperperiod") {
    const auto ts = fixtures::automotive();
    SimConfig cfg = horizon(600);
    cfg.mode = SimMode::pfp_d;
    cfg.scripted_alarms = {{3, 3}};
    const std::vector<Millis> seq{1, 2, 3, 4, 5, 6, 7, 1, 2, 3};
    const auto tr = run_pfp_d(ts, cfg, {{3, DelaySequence{3, seq}}});
    REQUIRE(tr.mode_switch);
    CHECK(*tr.mode_switch == 60);
    for (const auto* j : tr.jobs_of(3)) {
        if (j->job <= 3)
            CHECK(j->delay == 0);
        else
            CHECK(j->delay == seq[static_cast<std::size_t>((j->job - 1) % 10)]);
    }
    // other tasks are never deferred
    for (const auto& j : tr.jobs)
        if (j.task != 3) CHECK(j.delay == 0);
    check_schedule_invariants(ts, tr);
}

TEST_CASE("alarm without a stored sequence is an error") {
    const auto ts = fixtures::automotive();
    SimConfig cfg = horizon(200);
    cfg.scripted_alarms = {{2, 1}};
    CHECK_THROWS_AS(run_pfp_d(ts, cfg, {{3, DelaySequence{3, std::vector<Millis>(10, 0)}}}), SimulationError);
    cfg.attack = AttackConfig{1, 3, 0, Eigen::VectorXd::Ones(1)};
    CHECK_THROWS_AS(simulate_pfp(ts, horizon(0)), SimulationError);
    CHECK_THROWS_AS(simulate_pfp(ts, cfg), SimulationError);
}

TEST_CASE("random-delay mode stays inside the cap") {
    const auto ts = fixtures::automotive();
    SimConfig cfg = horizon(3000);
    cfg.mode = SimMode::random_delay;
    cfg.random_delays[3] = {4.0, 2.0, 8};
    cfg.scripted_alarms = {{3, 0}};
    cfg.seed = 5;
    const auto tr = run_schedule(ts, cfg, {});
    std::set<Millis> seen;
    for (const auto* j : tr.jobs_of(3)) {
        CHECK(j->delay >= 0);
        CHECK(j->delay <= 8);
        seen.insert(j->delay);
    }
    CHECK(seen.size() > 3);
    const auto again = run_schedule(ts, cfg, {});
    CHECK(again.timeline == tr.timeline);
}

TEST_CASE("attacker hits match an offline window check") {
    const auto ts = fixtures::automotive();
    for (const TaskId attacker : {4, 5, 6}) {
        SimConfig cfg = horizon(1000);
        cfg.attack = AttackConfig{attacker, 3, 100, Eigen::VectorXd::Ones(1)};
        const auto tr = simulate_pfp(ts, cfg);
        const Millis aew = ts.at(3).aew;

        std::map<std::int64_t, bool> hit, tried;
        for (Millis t = 100; t < tr.horizon; ++t) {
            const int r = tr.timeline[static_cast<std::size_t>(t)];
            if (r < 0 || tr.jobs[static_cast<std::size_t>(r)].task != attacker) continue;
            const auto k = tr.jobs[static_cast<std::size_t>(r)].job;
            tried[k] = true;
            Millis latest = -1;
            for (const auto* v : tr.jobs_of(3))
                if (v->finish >= 0 && v->finish <= t) latest = std::max(latest, v->finish);
            if (latest >= 0 && t < latest + aew) hit[k] = true;
        }
        CHECK(tr.fdi_attempts == static_cast<int>(tried.size()));
        CHECK(tr.fdi_hits == static_cast<int>(hit.size()));
    }
}

TEST_CASE("window boundary: last tick inside the window hits, first tick outside does not") {
    // victim finishes at 2 with a 3 ms window [2, 5); a filler delays the attacker's only tick
    for (const auto& [filler_wcet, hits] : std::vector<std::pair<Millis, int>>{{2, 1}, {3, 0}}) {
        auto victim = fixtures::task(1, 2, 20, 1);
        victim.kind = TaskKind::control;
        victim.aew = 3;
        const auto filler = fixtures::task(2, filler_wcet, 20, 2);
        auto attacker = fixtures::task(3, 1, 20, 3);
        attacker.trust = Trust::untrusted;
        const TaskSet ts({victim, filler, attacker});
        SimConfig cfg = horizon(20);
        cfg.attack = AttackConfig{3, 1, 0, Eigen::VectorXd::Ones(1)};
        const auto tr = simulate_pfp(ts, cfg);
        REQUIRE(job(tr, 1, 1).finish == 2);
        REQUIRE(job(tr, 3, 1).start == 2 + filler_wcet);
        CHECK(tr.fdi_attempts == 1);
        CHECK(tr.fdi_hits == hits);
        CHECK(job(tr, 1, 1).hit == (hits == 1));
    }
}

TEST_CASE("trace CSV") {
    const auto tr = simulate_pfp(fixtures::small_example(), horizon(10));
    std::ostringstream out;
    write_trace_csv(tr, out);
    const auto text = out.str();
    CHECK(text.rfind("time,event,task,job,detail\n", 0) == 0);
    CHECK(text.find("job_finish") != std::string::npos);
    CHECK(tr.count(EventKind::job_release) == 5);
}
