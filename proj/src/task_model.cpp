#include "delayguard/task_model.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace delayguard {

Millis hyperperiod(std::span<const TaskSpec> tasks) {
    if (tasks.empty()) throw TaskSetError("hyperperiod of an empty task set");
    Millis h = 1;
    for (const auto& t : tasks) {
        if (t.period <= 0) throw TaskSetError("task " + std::to_string(t.id) + " has a non-positive period");
        const Millis g = std::gcd(h, t.period);
        const Millis step = t.period / g;
        Millis next = 0;
        if (__builtin_mul_overflow(h, step, &next))
            throw TaskSetError("hyperperiod exceeds the representable time range");
        h = next;
    }
    return h;
}

TaskSet::TaskSet(std::vector<TaskSpec> tasks) : tasks_(std::move(tasks)) {
    try {
        hyperperiod_ = delayguard::hyperperiod(tasks_);
    } catch (const TaskSetError&) {
        hyperperiod_ = 0;
    }
}

const TaskSpec* TaskSet::find(TaskId id) const {
    auto it = std::find_if(tasks_.begin(), tasks_.end(), [id](const TaskSpec& t) { return t.id == id; });
    return it == tasks_.end() ? nullptr : &*it;
}

const TaskSpec& TaskSet::at(TaskId id) const {
    if (const auto* t = find(id)) return *t;
    throw TaskSetError("no task with id " + std::to_string(id));
}

std::vector<TaskSpec> TaskSet::higher_priority(const TaskSpec& task) const {
    std::vector<TaskSpec> out;
    for (const auto& t : tasks_)
        if (t.id != task.id && t.priority < task.priority) out.push_back(t);
    return out;
}

std::vector<TaskSpec> TaskSet::lower_priority(const TaskSpec& task) const {
    std::vector<TaskSpec> out;
    for (const auto& t : tasks_)
        if (t.id != task.id && t.priority > task.priority) out.push_back(t);
    return out;
}

std::vector<TaskSpec> TaskSet::control_tasks() const {
    std::vector<TaskSpec> out;
    std::copy_if(tasks_.begin(), tasks_.end(), std::back_inserter(out), [](const TaskSpec& t) { return t.is_control(); });
    return out;
}

std::vector<TaskSpec> TaskSet::untrusted_tasks() const {
    std::vector<TaskSpec> out;
    std::copy_if(tasks_.begin(), tasks_.end(), std::back_inserter(out),
                 [](const TaskSpec& t) { return t.is_untrusted(); });
    return out;
}

std::vector<TaskSpec> TaskSet::by_priority() const {
    auto out = tasks_;
    std::stable_sort(out.begin(), out.end(), [](const TaskSpec& a, const TaskSpec& b) { return a.priority < b.priority; });
    return out;
}

double TaskSet::utilization() const {
    double u = 0.0;
    for (const auto& t : tasks_) u += t.utilization();
    return u;
}

TaskSet assign_rm_priorities(const TaskSet& taskset) {
    std::vector<std::size_t> order(taskset.size());
    std::iota(order.begin(), order.end(), 0);
    const auto& tasks = taskset.tasks();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (tasks[a].period != tasks[b].period) return tasks[a].period < tasks[b].period;
        return tasks[a].id < tasks[b].id;
    });
    auto out = tasks;
    for (std::size_t rank = 0; rank < order.size(); ++rank) out[order[rank]].priority = static_cast<int>(rank) + 1;
    return TaskSet(std::move(out));
}

std::string ValidationReport::to_string() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (const auto& v : violations) {
        if (v.task) os << "task " << *v.task << ": ";
        os << v.rule;
        if (!v.detail.empty()) os << " (" << v.detail << ")";
        os << '\n';
    }
    return os.str();
}

ValidationReport validate(const TaskSet& taskset) {
    ValidationReport report;
    auto add = [&](std::optional<TaskId> id, std::string rule, std::string detail = {}) {
        report.violations.push_back({id, std::move(rule), std::move(detail)});
    };
    if (taskset.empty()) {
        add(std::nullopt, "non-empty task set");
        return report;
    }
    std::set<TaskId> ids;
    std::set<int> priorities;
    for (const auto& t : taskset.tasks()) {
        if (!ids.insert(t.id).second) add(t.id, "unique ids");
        if (!priorities.insert(t.priority).second) add(t.id, "unique priorities", "priority " + std::to_string(t.priority));
        if (t.wcet <= 0) add(t.id, "0 < C", "C=" + std::to_string(t.wcet));
        if (t.wcet > t.deadline)
            add(t.id, "C <= D", "C=" + std::to_string(t.wcet) + ", D=" + std::to_string(t.deadline));
        if (t.deadline > t.period)
            add(t.id, "D <= T", "D=" + std::to_string(t.deadline) + ", T=" + std::to_string(t.period));
        if (t.period <= 0) add(t.id, "0 < T");
        if (t.aew < 0) add(t.id, "AEW >= 0");
        if (t.aew > 0 && !t.is_control()) add(t.id, "AEW only on control tasks");
        if (t.is_control() && t.is_untrusted()) add(t.id, "untrusted tasks are non-control");
    }
    if (taskset.hyperperiod() == 0 && report.ok()) add(std::nullopt, "hyperperiod representable");
    return report;
}

Millis DelaySequence::min() const {
    return delays.empty() ? 0 : *std::min_element(delays.begin(), delays.end());
}

Millis DelaySequence::max() const {
    return delays.empty() ? 0 : *std::max_element(delays.begin(), delays.end());
}

Millis DelaySequence::for_job(std::int64_t k) const {
    if (delays.empty()) return 0;
    const auto n = static_cast<std::int64_t>(delays.size());
    return delays[static_cast<std::size_t>(((k - 1) % n + n) % n)];
}

std::int64_t jobs_per_hyperperiod(const TaskSpec& task, const TaskSet& taskset) {
    const Millis h = taskset.hyperperiod() > 0 ? taskset.hyperperiod() : hyperperiod(taskset.tasks());
    return h / task.period;
}

ValidationReport validate(const DelaySequence& seq, const TaskSet& taskset) {
    ValidationReport report;
    const auto* victim = taskset.find(seq.victim_id);
    if (!victim) {
        report.violations.push_back({seq.victim_id, "victim in task set", {}});
        return report;
    }
    const auto expected = jobs_per_hyperperiod(*victim, taskset);
    if (static_cast<std::int64_t>(seq.size()) != expected)
        report.violations.push_back({seq.victim_id, "length equals H/T_v",
                                     "got " + std::to_string(seq.size()) + ", want " + std::to_string(expected)});
    const Millis bound = victim->deadline - victim->wcet;
    for (std::size_t k = 0; k < seq.size(); ++k) {
        const Millis d = seq.delays[k];
        if (d < 0 || d >= bound)
            report.violations.push_back({seq.victim_id, "0 <= delta < D - C",
                                         "job " + std::to_string(k + 1) + ": delta=" + std::to_string(d)});
    }
    return report;
}

std::string to_string(Trust t) { return t == Trust::trusted ? "trusted" : "untrusted"; }
std::string to_string(TaskKind k) { return k == TaskKind::control ? "control" : "non_control"; }

}  // namespace delayguard
