#pragma once

#include <stdexcept>
#include <vector>

#include "delayguard/task_model.hpp"

namespace delayguard {

/// Attack-window overlap between one victim and the untrusted tasks over one
/// hyperperiod, with all response-time bounds frozen at the maximum delay.
struct OverlapProblem {
    struct Untrusted {
        TaskId id = 0;
        Millis period = 0;
        Millis wcet = 0;
        Millis response = 0;  // R_j at the victim's maximum delay
    };

    TaskId victim_id = 0;
    Millis hyperperiod = 0;
    Millis victim_period = 0;
    Millis victim_wcet = 0;
    Millis victim_response = 0;  // R_i at the maximum delay
    Millis aew = 0;
    Millis max_delay = 0;
    std::vector<Untrusted> untrusted;

    std::int64_t victim_jobs() const { return hyperperiod / victim_period; }
    std::int64_t jobs_of(std::size_t j) const { return hyperperiod / untrusted[j].period; }
    Millis victim_release(std::int64_t k) const { return (k - 1) * victim_period; }
    Millis untrusted_release(std::size_t j, std::int64_t m) const { return (m - 1) * untrusted[j].period; }
};

class OverlapError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Builds the problem for `victim_id`. The victim bound is the worst job
/// response under the uniform maximum delay. Untrusted tasks below the victim
/// use the lower-priority bound with that delay; those above it use the
/// classic bound. Throws OverlapError if any bound is infeasible.
OverlapProblem make_overlap_problem(const TaskSet& taskset, TaskId victim_id, Millis max_delay);

/// Pessimistic overlap of the k-th victim job's attack window with the m-th
/// job of untrusted task j (0-based j, 1-based k and m):
/// max(0, min(r_ik + d + R_i + Omega, r_jm + R_j) - max(r_ik + C_i + d, r_jm)).
Millis overlap_term(const OverlapProblem& problem, std::int64_t k, Millis delay, std::size_t j, std::int64_t m);

/// Sum over j and m of overlap_term for one victim job.
Millis job_overlap(const OverlapProblem& problem, std::int64_t k, Millis delay);

Millis total_overlap(const OverlapProblem& problem, const DelaySequence& delays);

struct DelaySolution {
    DelaySequence delays;
    Millis objective = 0;
    Millis baseline = 0;  // overlap with no delay
};

/// Exact minimizer. Each victim job's contribution depends only on its own
/// delay, so every job is minimized independently over {0, ..., max_delay};
/// ties go to the smallest delay.
DelaySolution solve_delays(const OverlapProblem& problem);

}  // namespace delayguard
