#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace delayguard {

// All scheduling time is integer milliseconds on a 1 ms grid.
using Millis = std::int64_t;
using TaskId = int;

enum class Trust { trusted, untrusted };
enum class TaskKind { control, non_control };

struct TaskSpec {
    TaskId id = 0;
    Millis period = 0;
    Millis wcet = 0;
    Millis deadline = 0;
    int priority = 0;  // lower number = higher priority
    Trust trust = Trust::trusted;
    TaskKind kind = TaskKind::non_control;
    Millis aew = 0;  // attack effective window width, control tasks only

    bool is_control() const { return kind == TaskKind::control; }
    bool is_untrusted() const { return trust == Trust::untrusted; }
    double utilization() const { return static_cast<double>(wcet) / static_cast<double>(period); }

    bool operator==(const TaskSpec&) const = default;
};

class TaskSetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Least common multiple of all periods. Throws TaskSetError on an empty
/// set, a non-positive period, or when the result overflows Millis.
Millis hyperperiod(std::span<const TaskSpec> tasks);

/// An ordered collection of tasks with the hyperperiod cached at
/// construction. Tasks are stored in the order given; priority queries use
/// the `priority` field.
class TaskSet {
public:
    TaskSet() = default;
    explicit TaskSet(std::vector<TaskSpec> tasks);

    const std::vector<TaskSpec>& tasks() const { return tasks_; }
    std::size_t size() const { return tasks_.size(); }
    bool empty() const { return tasks_.empty(); }

    /// Cached hyperperiod; 0 when it could not be computed (empty set or
    /// invalid periods). Use delayguard::hyperperiod() for the checked form.
    Millis hyperperiod() const { return hyperperiod_; }

    const TaskSpec& at(TaskId id) const;
    const TaskSpec* find(TaskId id) const;
    bool contains(TaskId id) const { return find(id) != nullptr; }

    /// Tasks with strictly higher priority than `task`.
    std::vector<TaskSpec> higher_priority(const TaskSpec& task) const;
    /// Tasks with strictly lower priority than `task`.
    std::vector<TaskSpec> lower_priority(const TaskSpec& task) const;

    std::vector<TaskSpec> control_tasks() const;
    std::vector<TaskSpec> untrusted_tasks() const;

    /// Tasks sorted by ascending priority number (highest priority first).
    std::vector<TaskSpec> by_priority() const;

    double utilization() const;

    bool operator==(const TaskSet& other) const { return tasks_ == other.tasks_; }

private:
    std::vector<TaskSpec> tasks_;
    Millis hyperperiod_ = 0;
};

/// Rate-monotonic priorities: shorter period wins, ties broken by ascending
/// id. Priorities are 1..n. Task order in the returned set matches the input.
TaskSet assign_rm_priorities(const TaskSet& taskset);

struct Violation {
    std::optional<TaskId> task;  // empty for set-level violations
    std::string rule;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

/// Checks every TaskSpec and TaskSet invariant and reports all violations.
ValidationReport validate(const TaskSet& taskset);

/// Per-job release offsets for one victim task over one hyperperiod.
/// delays[k-1] is the offset of the k-th job (1-based job index k).
struct DelaySequence {
    TaskId victim_id = 0;
    std::vector<Millis> delays;

    std::size_t size() const { return delays.size(); }
    Millis min() const;
    Millis max() const;
    /// Delay applied to the job with 1-based index k, wrapping cyclically.
    Millis for_job(std::int64_t k) const;

    bool operator==(const DelaySequence&) const = default;
};

/// Checks length (H / T_v) and the strict bound 0 <= delta < D_v - C_v.
ValidationReport validate(const DelaySequence& seq, const TaskSet& taskset);

/// Nominal (synchronous) release of the k-th job, 1-based.
inline Millis nominal_release(const TaskSpec& task, std::int64_t k) { return (k - 1) * task.period; }

/// Number of jobs of `task` in one hyperperiod.
std::int64_t jobs_per_hyperperiod(const TaskSpec& task, const TaskSet& taskset);

// Integer helpers with floor/ceil semantics for possibly negative numerators.
constexpr Millis floor_div(Millis a, Millis b) {
    Millis q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}
constexpr Millis ceil_div(Millis a, Millis b) { return -floor_div(-a, b); }

std::string to_string(Trust t);
std::string to_string(TaskKind k);

}  // namespace delayguard
