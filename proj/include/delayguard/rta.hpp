#pragma once

#include <optional>
#include <vector>

#include "delayguard/task_model.hpp"

namespace delayguard {

/// Outcome of one fixed-point iteration. `response` is empty when the
/// iterate exceeded the deadline or the iteration cap (10 * H) was hit.
struct FixedPoint {
    std::optional<Millis> response;
    int iterations = 0;
    bool hit_iteration_cap = false;

    bool feasible() const { return response.has_value(); }
};

struct JobResponse {
    std::int64_t job = 0;        // 1-based job index k
    Millis delay = 0;            // delta_k
    Millis response = 0;         // R_{v,k}, valid when feasible
    Millis effective_deadline = 0;
    bool feasible = false;
};

struct RtaResult {
    TaskId task_id = 0;
    std::vector<JobResponse> per_job_wcrt;
    bool feasible = false;
    int iterations = 0;
};

/// Classic fixed-priority response time: R = C + sum_hp ceil(R/T_j) C_j.
FixedPoint wcrt_classic_fp(const TaskSpec& task, const TaskSet& taskset);
std::optional<Millis> wcrt_classic(const TaskSpec& task, const TaskSet& taskset);

/// Carry-in interference at a (delayed) victim release r':
/// sum over hp of max(0, ceil(r'/T_j) - floor((r' - C_j)/T_j) - 1) * C_j.
Millis carry_in_interference(const TaskSpec& victim, const TaskSet& taskset, Millis release);

/// Response-time bound of the k-th victim job under delay delta_k:
/// R = C_v + I(k) + sum_hp ceil(R/T_j) C_j, feasible iff R <= D_v - delta_k.
/// Stored sequences keep delta_k < D_v - C_v; the peak scan may probe up to
/// T_v - C_v and relies on the deadline test alone.
FixedPoint victim_job_wcrt_fp(const TaskSpec& victim, const TaskSet& taskset, std::int64_t k, Millis delay);
std::optional<Millis> victim_job_wcrt(const TaskSpec& victim, const TaskSet& taskset, std::int64_t k,
                                      Millis delay);

/// Lower-priority task bound under victim release delays, using the minimum
/// delay of the sequence:
/// R = C_i + sum_{hp(i)\v} ceil(R/T_j) C_j + max(0, ceil((R - delta)/T_v)) C_v.
/// Throws std::invalid_argument if `task` is not in lp(victim).
FixedPoint lp_task_wcrt_fp(const TaskSpec& task, const TaskSpec& victim, Millis min_delay, const TaskSet& taskset);
std::optional<Millis> lp_task_wcrt_under_delay(const TaskSpec& task, const TaskSpec& victim,
                                               const DelaySequence& delays, const TaskSet& taskset);
std::optional<Millis> lp_task_wcrt_uniform(const TaskSpec& task, const TaskSpec& victim, Millis delay,
                                           const TaskSet& taskset);

/// Per-job analysis of the victim under a delay sequence (one hyperperiod).
RtaResult analyze_victim(const TaskSpec& victim, const TaskSet& taskset, const DelaySequence& delays);

/// Per-job analysis under the same delay on every job.
RtaResult analyze_victim_uniform(const TaskSpec& victim, const TaskSet& taskset, Millis delay);

/// Worst job response of the victim under a uniform delay (R_v(delta)).
std::optional<Millis> victim_wcrt_uniform(const TaskSpec& victim, const TaskSet& taskset, Millis delay);

/// True when the victim's jobs and every lp(victim) task pass their tests
/// for this uniform delay.
bool delay_admissible(const TaskSpec& victim, const TaskSet& taskset, Millis delay);

/// Largest delay in [0, T_v - C_v] that passes
/// delay_admissible; empty when none does. Descending linear scan.
std::optional<Millis> peak_delay(const TaskSpec& victim, const TaskSet& taskset);

/// Whether a whole sequence is certified: hp tasks by the classic test,
/// every victim job by its own delay, lp tasks with the sequence minimum.
bool sequence_certified(const TaskSpec& victim, const TaskSet& taskset, const DelaySequence& delays);

}  // namespace delayguard
