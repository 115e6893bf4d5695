#include <doctest.h>

#include <sstream>

#include "delayguard/case_study.hpp"
#include "delayguard/overlap.hpp"
#include "fixtures.hpp"

using namespace delayguard;

TEST_CASE("scenario loads and the plan respects the peak delays") {
    const auto s = load_scenario(fixtures::asset("scenarios/automotive.json"));
    CHECK(s.victim == 3);
    CHECK(s.attacker == 4);
    CHECK(s.plants.size() == 3);
    const auto plan = plan_mitigation(s);
    CHECK(plan.peak.at(1) == 8);
    CHECK(plan.peak.at(2) == 35);
    CHECK(plan.peak.at(3) == 13);
    for (const auto& [id, seq] : plan.sequences) {
        CHECK(validate(seq, s.taskset).ok());
        CHECK(seq.max() <= s.max_delay.at(id));
    }
    const auto problem = make_overlap_problem(s.taskset, 3, 8);
    CHECK(total_overlap(problem, plan.sequences.at(3)) == plan.solutions.at(3).objective);

    // the shipped sequences are this plan's output
    const auto shipped = load_delay_store(fixtures::asset("delays/automotive.json"));
    for (const auto& [id, seq] : shipped)
        CHECK(total_overlap(make_overlap_problem(s.taskset, id, s.max_delay.at(id)), seq) ==
              plan.solutions.at(id).objective);
}

TEST_CASE("case parsing") {
    CHECK(parse_case("iv") == CaseId::secure_attack);
    CHECK(parse_case("2") == CaseId::pfp_attack);
    CHECK(to_string(CaseId::random_attack) == "iii");
    CHECK_THROWS_AS(parse_case("v"), std::invalid_argument);
}

TEST_CASE("four cases on the automotive scenario") {
    const auto s = load_scenario(fixtures::asset("scenarios/automotive.json"));
    const auto plan = plan_mitigation(s);
    std::map<CaseId, CaseResult> r;
    for (const auto c : {CaseId::pfp_clean, CaseId::pfp_attack, CaseId::random_attack, CaseId::secure_attack})
        r.emplace(c, run_case(s, plan, c, 7));

    CHECK(r.at(CaseId::pfp_clean).report.fdi_hits == 0);
    CHECK(r.at(CaseId::pfp_clean).report.fdi_attempts == 0);
    for (const auto& [c, res] : r) CHECK(res.report.deadline_misses == 0);
    CHECK(r.at(CaseId::secure_attack).report.fdi_hits < r.at(CaseId::pfp_attack).report.fdi_hits);
    CHECK(r.at(CaseId::pfp_attack).report.cost.at(3) > r.at(CaseId::pfp_attack).cost_threshold);
    CHECK(r.at(CaseId::secure_attack).report.cost.at(3) <= r.at(CaseId::secure_attack).cost_threshold);
    // plain PFP never switches
    CHECK(!r.at(CaseId::pfp_attack).report.trace.mode_switch);
    CHECK(r.at(CaseId::secure_attack).report.trace.mode_switch);

    // reruns with the same seed are identical
    const auto again = run_case(s, plan, CaseId::secure_attack, 7);
    CHECK(again.report.cost.at(3) == r.at(CaseId::secure_attack).report.cost.at(3));
    CHECK(again.report.trace.timeline == r.at(CaseId::secure_attack).report.trace.timeline);

    std::ostringstream out;
    write_samples_csv(r.at(CaseId::secure_attack).report, 3, out);
    CHECK(out.str().rfind("t,x1,", 0) == 0);
}
