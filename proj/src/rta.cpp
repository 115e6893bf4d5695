#include "delayguard/rta.hpp"

#include <algorithm>
#include <stdexcept>

namespace delayguard {

namespace {

Millis cap_for(const TaskSet& ts) {
    const Millis h = ts.hyperperiod() > 0 ? ts.hyperperiod() : 1;
    return 10 * h;
}

// Iterates R <- f(R) from R0 until a fixed point, R > bound, or the cap.
template <typename F>
FixedPoint iterate(Millis start, Millis bound, Millis cap, F&& step) {
    FixedPoint out;
    Millis r = start;
    if (r > bound) return out;
    for (Millis it = 0; it < cap; ++it) {
        ++out.iterations;
        const Millis next = step(r);
        if (next > bound) return out;
        if (next == r) {
            out.response = r;
            return out;
        }
        r = next;
    }
    out.hit_iteration_cap = true;
    return out;
}

Millis hp_demand(const std::vector<TaskSpec>& hp, Millis r) {
    Millis sum = 0;
    for (const auto& j : hp) sum += ceil_div(r, j.period) * j.wcet;
    return sum;
}

}  // namespace

FixedPoint wcrt_classic_fp(const TaskSpec& task, const TaskSet& taskset) {
    const auto hp = taskset.higher_priority(task);
    return iterate(task.wcet, task.deadline, cap_for(taskset), [&](Millis r) { return task.wcet + hp_demand(hp, r); });
}

std::optional<Millis> wcrt_classic(const TaskSpec& task, const TaskSet& taskset) {
    return wcrt_classic_fp(task, taskset).response;
}

Millis carry_in_interference(const TaskSpec& victim, const TaskSet& taskset, Millis release) {
    if (release < 0) throw std::invalid_argument("carry-in: release must be non-negative");
    Millis total = 0;
    for (const auto& j : taskset.higher_priority(victim)) {
        const Millis count = ceil_div(release, j.period) - floor_div(release - j.wcet, j.period) - 1;
        total += std::max<Millis>(0, count) * j.wcet;
    }
    return total;
}

FixedPoint victim_job_wcrt_fp(const TaskSpec& victim, const TaskSet& taskset, std::int64_t k, Millis delay) {
    if (delay < 0) throw std::invalid_argument("victim delay must be non-negative");
    if (k < 1) throw std::invalid_argument("job index is 1-based");
    const auto hp = taskset.higher_priority(victim);
    const Millis release = nominal_release(victim, k) + delay;
    const Millis carry = carry_in_interference(victim, taskset, release);
    const Millis effective_deadline = victim.deadline - delay;
    return iterate(victim.wcet, effective_deadline, cap_for(taskset),
                   [&](Millis r) { return victim.wcet + carry + hp_demand(hp, r); });
}

std::optional<Millis> victim_job_wcrt(const TaskSpec& victim, const TaskSet& taskset, std::int64_t k, Millis delay) {
    return victim_job_wcrt_fp(victim, taskset, k, delay).response;
}

FixedPoint lp_task_wcrt_fp(const TaskSpec& task, const TaskSpec& victim, Millis min_delay, const TaskSet& taskset) {
    if (task.priority <= victim.priority || task.id == victim.id)
        throw std::invalid_argument("task " + std::to_string(task.id) + " is not lower priority than victim " +
                                    std::to_string(victim.id));
    std::vector<TaskSpec> others;
    for (const auto& j : taskset.higher_priority(task))
        if (j.id != victim.id) others.push_back(j);
    return iterate(task.wcet, task.deadline, cap_for(taskset), [&](Millis r) {
        const Millis victim_jobs = std::max<Millis>(0, ceil_div(r - min_delay, victim.period));
        return task.wcet + hp_demand(others, r) + victim_jobs * victim.wcet;
    });
}

std::optional<Millis> lp_task_wcrt_under_delay(const TaskSpec& task, const TaskSpec& victim,
                                               const DelaySequence& delays, const TaskSet& taskset) {
    return lp_task_wcrt_fp(task, victim, delays.min(), taskset).response;
}

std::optional<Millis> lp_task_wcrt_uniform(const TaskSpec& task, const TaskSpec& victim, Millis delay,
                                           const TaskSet& taskset) {
    return lp_task_wcrt_fp(task, victim, delay, taskset).response;
}

RtaResult analyze_victim(const TaskSpec& victim, const TaskSet& taskset, const DelaySequence& delays) {
    RtaResult result;
    result.task_id = victim.id;
    result.feasible = true;
    const auto n = jobs_per_hyperperiod(victim, taskset);
    for (std::int64_t k = 1; k <= n; ++k) {
        const Millis d = delays.for_job(k);
        const auto fp = victim_job_wcrt_fp(victim, taskset, k, d);
        result.iterations += fp.iterations;
        JobResponse job{k, d, fp.response.value_or(0), victim.deadline - d, fp.feasible()};
        result.feasible = result.feasible && job.feasible;
        result.per_job_wcrt.push_back(job);
    }
    return result;
}

RtaResult analyze_victim_uniform(const TaskSpec& victim, const TaskSet& taskset, Millis delay) {
    DelaySequence seq{victim.id, std::vector<Millis>(static_cast<std::size_t>(jobs_per_hyperperiod(victim, taskset)), delay)};
    return analyze_victim(victim, taskset, seq);
}

std::optional<Millis> victim_wcrt_uniform(const TaskSpec& victim, const TaskSet& taskset, Millis delay) {
    const auto res = analyze_victim_uniform(victim, taskset, delay);
    if (!res.feasible) return std::nullopt;
    Millis worst = 0;
    for (const auto& j : res.per_job_wcrt) worst = std::max(worst, j.response);
    return worst;
}

bool delay_admissible(const TaskSpec& victim, const TaskSet& taskset, Millis delay) {
    const auto n = jobs_per_hyperperiod(victim, taskset);
    for (std::int64_t k = 1; k <= n; ++k)
        if (!victim_job_wcrt_fp(victim, taskset, k, delay).feasible()) return false;
    for (const auto& t : taskset.lower_priority(victim))
        if (!lp_task_wcrt_fp(t, victim, delay, taskset).feasible()) return false;
    return true;
}

std::optional<Millis> peak_delay(const TaskSpec& victim, const TaskSet& taskset) {
    const Millis upper = victim.period - victim.wcet;
    for (Millis d = upper; d >= 0; --d)
        if (delay_admissible(victim, taskset, d)) return d;
    return std::nullopt;
}

bool sequence_certified(const TaskSpec& victim, const TaskSet& taskset, const DelaySequence& delays) {
    for (const auto& t : taskset.higher_priority(victim))
        if (!wcrt_classic(t, taskset)) return false;
    if (!analyze_victim(victim, taskset, delays).feasible) return false;
    for (const auto& t : taskset.lower_priority(victim))
        if (!lp_task_wcrt_under_delay(t, victim, delays, taskset)) return false;
    return true;
}

}  // namespace delayguard
