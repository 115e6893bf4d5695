#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "delayguard/io.hpp"
#include "delayguard/task_model.hpp"

namespace delayguard {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SimMode { pfp, pfp_d, random_delay };

enum class EventKind {
    job_release,
    job_defer,
    job_start,
    job_preempt,
    job_finish,
    deadline_miss,
    aew_open,
    aew_close,
    fdi_attempt,
    fdi_hit,
    detector_alarm,
    mode_switch,
};

std::string to_string(EventKind kind);
std::string to_string(SimMode mode);
SimMode parse_sim_mode(const std::string& text);

struct AttackConfig {
    TaskId attacker = 0;  // must be untrusted
    TaskId victim = 0;    // control task whose output is targeted
    Millis start = 0;
    Eigen::VectorXd fdi_bias;  // added to the victim's buffered input on a hit
};

/// Laplace(location, scale) delays, rounded and clipped to [0, cap].
struct RandomDelayConfig {
    double location = 0.0;
    double scale = 1.0;
    Millis cap = 0;
};

/// A detector alarm injected by sample index, for schedule-only runs.
struct ScriptedAlarm {
    TaskId task = 0;
    std::int64_t sample = 0;  // 0-based; sample k is taken at k * T
};

struct SimConfig {
    SimMode mode = SimMode::pfp;
    Millis tick = 1;
    Millis reset_time = 3000;  // T_RES; the run covers [0, reset_time)
    std::optional<AttackConfig> attack;
    DelayStore fixed_delays;  // applied cyclically from t = 0 in every mode
    std::map<TaskId, RandomDelayConfig> random_delays;
    std::vector<ScriptedAlarm> scripted_alarms;
    std::map<TaskId, double> thresholds;  // detector threshold overrides
    std::uint64_t seed = 0;
};

struct TraceEvent {
    Millis time = 0;
    EventKind kind = EventKind::job_release;
    TaskId task = 0;
    std::int64_t job = 0;  // 1-based per-task job number, 0 when not job-related
    std::string detail;
};

struct JobRecord {
    TaskId task = 0;
    std::int64_t job = 0;  // 1-based per-task job number
    Millis nominal_release = 0;
    Millis delay = 0;
    Millis start = -1;
    Millis finish = -1;
    bool missed = false;
    bool hit = false;  // output corrupted inside its attack window

    Millis release() const { return nominal_release + delay; }
    /// finish - (release + applied delay); -1 while unfinished.
    Millis response() const { return finish < 0 ? -1 : finish - release(); }
};

struct ScheduleTrace {
    Millis horizon = 0;
    std::vector<TraceEvent> events;
    std::vector<JobRecord> jobs;
    std::vector<int> timeline;  // job index executing in [t, t+1), -1 when idle
    std::map<TaskId, Millis> aew_overlap;  // untrusted execution ticks inside each control task's windows
    int deadline_misses = 0;
    int fdi_attempts = 0;
    int fdi_hits = 0;
    std::optional<Millis> first_alarm;
    std::optional<Millis> mode_switch;

    std::vector<const JobRecord*> jobs_of(TaskId task) const;
    std::size_t count(EventKind kind) const;
};

/// Hooks for closed-loop coupling. on_sample runs at each sampling instant of
/// a control task (multiples of its period), before that tick's releases, and
/// reports whether the task's detector alarmed.
class SampleObserver {
public:
    virtual ~SampleObserver() = default;
    virtual bool on_sample(TaskId task, std::int64_t sample, Millis t) = 0;
    virtual void on_finish(const JobRecord& /*job*/) {}
    virtual void on_hit(const JobRecord& /*victim_job*/) {}
    /// The mitigation now defers `task`'s releases.
    virtual void on_protect(TaskId /*task*/) {}
};

/// Tick-driven PFP simulation with release-deferral mitigation. Starts in plain PFP;
/// on an alarm for control task i (pfp_d or random_delay mode) task i becomes
/// the protected victim and its subsequent releases are deferred, pfp_d by the
/// stored sequence starting at index k mod N, random_delay by Laplace draws.
/// A later alarm for another task retargets the mitigation. Jobs released
/// before the switch are never deferred.
ScheduleTrace run_schedule(const TaskSet& taskset, const SimConfig& config, const DelayStore& sequences,
                           SampleObserver* observer = nullptr);

/// Plain PFP (mode forced to pfp; fixed_delays still apply).
ScheduleTrace simulate_pfp(const TaskSet& taskset, const SimConfig& config);

/// PFP-d driven by config.scripted_alarms. Throws SimulationError when an
/// alarm names a task with no stored sequence.
ScheduleTrace run_pfp_d(const TaskSet& taskset, const SimConfig& config, const DelayStore& sequences);

/// One line per event: time, event, task, job, detail (CSV).
void write_trace_csv(const ScheduleTrace& trace, std::ostream& out);

}  // namespace delayguard
