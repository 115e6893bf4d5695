#include "delayguard/overlap.hpp"

#include <algorithm>

#include "delayguard/rta.hpp"

namespace delayguard {

OverlapProblem make_overlap_problem(const TaskSet& taskset, TaskId victim_id, Millis max_delay) {
    const auto& victim = taskset.at(victim_id);
    if (max_delay < 0) throw OverlapError("maximum delay must be non-negative");
    OverlapProblem p;
    p.victim_id = victim_id;
    p.hyperperiod = hyperperiod(taskset.tasks());
    p.victim_period = victim.period;
    p.victim_wcet = victim.wcet;
    p.aew = victim.aew;
    p.max_delay = max_delay;
    const auto ri = victim_wcrt_uniform(victim, taskset, max_delay);
    if (!ri) throw OverlapError("victim " + std::to_string(victim_id) + " is unschedulable at delay " +
                                std::to_string(max_delay));
    p.victim_response = *ri;
    for (const auto& t : taskset.untrusted_tasks()) {
        if (t.id == victim_id) continue;
        const auto rj = t.priority > victim.priority ? lp_task_wcrt_uniform(t, victim, max_delay, taskset)
                                                     : wcrt_classic(t, taskset);
        if (!rj) throw OverlapError("untrusted task " + std::to_string(t.id) + " is unschedulable");
        p.untrusted.push_back({t.id, t.period, t.wcet, *rj});
    }
    return p;
}

Millis overlap_term(const OverlapProblem& p, std::int64_t k, Millis delay, std::size_t j, std::int64_t m) {
    const Millis ri = p.victim_release(k);
    const Millis rj = p.untrusted_release(j, m);
    const Millis end = std::min(ri + delay + p.victim_response + p.aew, rj + p.untrusted[j].response);
    const Millis start = std::max(ri + p.victim_wcet + delay, rj);
    return std::max<Millis>(0, end - start);
}

Millis job_overlap(const OverlapProblem& p, std::int64_t k, Millis delay) {
    Millis sum = 0;
    for (std::size_t j = 0; j < p.untrusted.size(); ++j)
        for (std::int64_t m = 1; m <= p.jobs_of(j); ++m) sum += overlap_term(p, k, delay, j, m);
    return sum;
}

Millis total_overlap(const OverlapProblem& p, const DelaySequence& delays) {
    if (static_cast<std::int64_t>(delays.size()) != p.victim_jobs())
        throw OverlapError("delay sequence has " + std::to_string(delays.size()) + " entries, expected " +
                           std::to_string(p.victim_jobs()));
    Millis sum = 0;
    for (std::int64_t k = 1; k <= p.victim_jobs(); ++k) sum += job_overlap(p, k, delays.for_job(k));
    return sum;
}

DelaySolution solve_delays(const OverlapProblem& p) {
    DelaySolution out;
    out.delays.victim_id = p.victim_id;
    for (std::int64_t k = 1; k <= p.victim_jobs(); ++k) {
        Millis best_delay = 0;
        Millis best = job_overlap(p, k, 0);
        out.baseline += best;
        for (Millis d = 1; d <= p.max_delay; ++d) {
            const Millis v = job_overlap(p, k, d);
            if (v < best) {
                best = v;
                best_delay = d;
            }
        }
        out.delays.delays.push_back(best_delay);
        out.objective += best;
    }
    return out;
}

}  // namespace delayguard
