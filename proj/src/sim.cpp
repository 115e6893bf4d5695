#include "delayguard/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

#include "delayguard/rng.hpp"

namespace delayguard {

std::string to_string(EventKind kind) {
    switch (kind) {
        case EventKind::job_release: return "job_release";
        case EventKind::job_defer: return "job_defer";
        case EventKind::job_start: return "job_start";
        case EventKind::job_preempt: return "job_preempt";
        case EventKind::job_finish: return "job_finish";
        case EventKind::deadline_miss: return "deadline_miss";
        case EventKind::aew_open: return "aew_open";
        case EventKind::aew_close: return "aew_close";
        case EventKind::fdi_attempt: return "fdi_attempt";
        case EventKind::fdi_hit: return "fdi_hit";
        case EventKind::detector_alarm: return "detector_alarm";
        case EventKind::mode_switch: return "mode_switch";
    }
    return "unknown";
}

std::string to_string(SimMode mode) {
    switch (mode) {
        case SimMode::pfp: return "pfp";
        case SimMode::pfp_d: return "pfp_d";
        case SimMode::random_delay: return "random_delay";
    }
    return "unknown";
}

SimMode parse_sim_mode(const std::string& text) {
    if (text == "pfp") return SimMode::pfp;
    if (text == "pfp_d") return SimMode::pfp_d;
    if (text == "random_delay") return SimMode::random_delay;
    throw SimulationError("unknown simulation mode '" + text + "'");
}

std::vector<const JobRecord*> ScheduleTrace::jobs_of(TaskId task) const {
    std::vector<const JobRecord*> out;
    for (const auto& j : jobs)
        if (j.task == task) out.push_back(&j);
    return out;
}

std::size_t ScheduleTrace::count(EventKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [&](const TraceEvent& e) { return e.kind == kind; }));
}

namespace {

class Engine {
public:
    Engine(const TaskSet& ts, const SimConfig& cfg, const DelayStore& seqs, SampleObserver* obs)
        : ts_(ts), cfg_(cfg), seqs_(seqs), obs_(obs) {
        if (cfg.tick != 1) throw SimulationError("only a 1 ms tick is supported");
        if (cfg.reset_time <= 0) throw SimulationError("reset time must be positive");
        if (ts.empty()) throw SimulationError("empty task set");
        H_ = hyperperiod(ts.tasks());
        if (cfg.attack) {
            const auto* a = ts.find(cfg.attack->attacker);
            const auto* v = ts.find(cfg.attack->victim);
            if (!a || !a->is_untrusted())
                throw SimulationError("attacker task " + std::to_string(cfg.attack->attacker) + " is not untrusted");
            if (!v || !v->is_control())
                throw SimulationError("attack victim " + std::to_string(cfg.attack->victim) + " is not a control task");
        }
        for (const auto& [id, seq] : cfg.fixed_delays)
            if (!ts.contains(id) || seq.delays.empty())
                throw SimulationError("fixed delays for unknown task or empty sequence: " + std::to_string(id));
        last_window_.assign(ts.size(), {-1, -1});
        last_finished_.assign(ts.size(), -1);
        trace_.horizon = cfg.reset_time;
        trace_.timeline.assign(static_cast<std::size_t>(cfg.reset_time), -1);
        for (const auto& t : ts.tasks())
            if (t.is_control()) trace_.aew_overlap[t.id] = 0;
    }

    ScheduleTrace run() {
        for (Millis t = 0; t < cfg_.reset_time; ++t) step(t);
        flush_closes(cfg_.reset_time);
        for (const int j : pending_) check_deadline(j, cfg_.reset_time);
        return std::move(trace_);
    }

private:
    void log(Millis t, EventKind kind, TaskId task, std::int64_t job, std::string detail = {}) {
        trace_.events.push_back({t, kind, task, job, std::move(detail)});
    }

    const TaskSpec& spec_of(int j) const { return ts_.tasks()[task_index_[static_cast<std::size_t>(j)]]; }

    void flush_closes(Millis t) {
        while (!closes_.empty() && closes_.begin()->first <= t) {
            const auto [time, key] = *closes_.begin();
            log(time, EventKind::aew_close, key.first, key.second);
            closes_.erase(closes_.begin());
        }
    }

    void check_deadline(int j, Millis t) {
        auto& job = trace_.jobs[static_cast<std::size_t>(j)];
        if (job.finish >= 0 || job.missed) return;
        if (job.nominal_release + spec_of(j).deadline <= t) {
            job.missed = true;
            ++trace_.deadline_misses;
            log(t, EventKind::deadline_miss, job.task, job.job);
        }
    }

    void handle_alarm(const TaskSpec& task, std::int64_t k, Millis t) {
        log(t, EventKind::detector_alarm, task.id, k + 1);
        if (!trace_.first_alarm) trace_.first_alarm = t;
        if (cfg_.mode == SimMode::pfp || protected_ == task.id) return;
        std::string detail;
        if (cfg_.mode == SimMode::pfp_d) {
            const auto it = seqs_.find(task.id);
            if (it == seqs_.end() || it->second.delays.empty())
                throw SimulationError("alarm for task " + std::to_string(task.id) + " with no stored delay sequence");
            const auto n = static_cast<std::int64_t>(it->second.delays.size());
            job_idx_ = static_cast<std::size_t>(k % n);
            detail = "pfp_d jobidx=" + std::to_string(job_idx_);
        } else {
            if (!cfg_.random_delays.contains(task.id))
                throw SimulationError("alarm for task " + std::to_string(task.id) + " with no random delay setting");
            rng_ = make_stream(cfg_.seed, "delay", static_cast<std::uint64_t>(task.id));
            detail = "random_delay";
        }
        protected_ = task.id;
        if (obs_) obs_->on_protect(task.id);
        if (!trace_.mode_switch) trace_.mode_switch = t;
        log(t, EventKind::mode_switch, task.id, k + 1, std::move(detail));
    }

    Millis mitigation_delay(const TaskSpec& task) {
        if (protected_ != task.id) return 0;
        if (cfg_.mode == SimMode::pfp_d) {
            const auto& d = seqs_.at(task.id).delays;
            const Millis v = d[job_idx_];
            job_idx_ = (job_idx_ + 1) % d.size();
            return v;
        }
        const auto& rc = cfg_.random_delays.at(task.id);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        const double s = u(rng_);
        const double x = rc.location - rc.scale * std::copysign(1.0, s) * std::log(1.0 - 2.0 * std::abs(s));
        return std::clamp<Millis>(std::llround(x), 0, rc.cap);
    }

    void release(const TaskSpec& task, std::size_t index, Millis t) {
        JobRecord job;
        job.task = task.id;
        job.job = t / task.period + 1;
        job.nominal_release = t;
        if (const auto it = cfg_.fixed_delays.find(task.id); it != cfg_.fixed_delays.end())
            job.delay += it->second.for_job(job.job);
        job.delay += mitigation_delay(task);
        const int j = static_cast<int>(trace_.jobs.size());
        trace_.jobs.push_back(job);
        task_index_.push_back(index);
        remaining_.push_back(task.wcet);
        pending_.push_back(j);
        log(t, EventKind::job_release, task.id, job.job, job.delay > 0 ? "delay=" + std::to_string(job.delay) : "");
        if (job.delay > 0) log(t, EventKind::job_defer, task.id, job.job, "until=" + std::to_string(job.release()));
    }

    void step(Millis t) {
        flush_closes(t);
        if (t % H_ == 0) job_idx_ = 0;

        for (const auto& task : ts_.tasks()) {
            if (!task.is_control() || t % task.period != 0) continue;
            const std::int64_t k = t / task.period;
            bool alarm = obs_ ? obs_->on_sample(task.id, k, t) : false;
            for (const auto& s : cfg_.scripted_alarms) alarm = alarm || (s.task == task.id && s.sample == k);
            if (alarm) handle_alarm(task, k, t);
        }
        for (const int j : pending_) check_deadline(j, t);
        for (std::size_t i = 0; i < ts_.size(); ++i)
            if (t % ts_.tasks()[i].period == 0) release(ts_.tasks()[i], i, t);

        // highest priority among released jobs; FIFO within a task
        int best = -1;
        for (const int j : pending_) {
            const auto& job = trace_.jobs[static_cast<std::size_t>(j)];
            if (job.release() > t) continue;
            if (best < 0) {
                best = j;
                continue;
            }
            const auto& b = trace_.jobs[static_cast<std::size_t>(best)];
            const int pj = spec_of(j).priority, pb = spec_of(best).priority;
            if (pj < pb || (pj == pb && job.job < b.job)) best = j;
        }
        if (running_ >= 0 && running_ != best && remaining_[static_cast<std::size_t>(running_)] > 0) {
            const auto& r = trace_.jobs[static_cast<std::size_t>(running_)];
            log(t, EventKind::job_preempt, r.task, r.job);
        }
        if (best < 0) {
            running_ = -1;
            return;
        }
        auto& job = trace_.jobs[static_cast<std::size_t>(best)];
        if (job.start < 0) {
            job.start = t;
            log(t, EventKind::job_start, job.task, job.job);
        } else if (running_ != best) {
            log(t, EventKind::job_start, job.task, job.job, "resume");
        }
        running_ = best;
        trace_.timeline[static_cast<std::size_t>(t)] = best;
        const auto& spec = spec_of(best);
        const std::size_t ti = task_index_[static_cast<std::size_t>(best)];

        if (spec.is_untrusted())
            for (std::size_t c = 0; c < ts_.size(); ++c) {
                const auto [f, end] = last_window_[c];
                if (f >= 0 && f <= t && t < end) ++trace_.aew_overlap[ts_.tasks()[c].id];
            }
        if (cfg_.attack && spec.id == cfg_.attack->attacker && t >= cfg_.attack->start) attack_tick(job, t);

        if (--remaining_[static_cast<std::size_t>(best)] == 0) finish(best, ti, t + 1);
    }

    void attack_tick(const JobRecord& job, Millis t) {
        auto& state = attacker_job_state_[job.job];
        if (!state.attempted) {
            state.attempted = true;
            ++trace_.fdi_attempts;
            log(t, EventKind::fdi_attempt, job.task, job.job);
        }
        if (state.hit) return;
        const auto* victim = ts_.find(cfg_.attack->victim);
        const auto vi = static_cast<std::size_t>(victim - ts_.tasks().data());
        const auto [f, end] = last_window_[vi];
        if (f < 0 || t < f || t >= end) return;
        state.hit = true;
        ++trace_.fdi_hits;
        auto& vjob = trace_.jobs[static_cast<std::size_t>(last_finished_[vi])];
        log(t, EventKind::fdi_hit, job.task, job.job, "victim_job=" + std::to_string(vjob.job));
        if (!vjob.hit) {
            vjob.hit = true;
            if (obs_) obs_->on_hit(vjob);
        }
    }

    void finish(int j, std::size_t ti, Millis t) {
        auto& job = trace_.jobs[static_cast<std::size_t>(j)];
        job.finish = t;
        log(t, EventKind::job_finish, job.task, job.job, "response=" + std::to_string(job.response()));
        if (!job.missed && job.finish > job.nominal_release + spec_of(j).deadline) {
            job.missed = true;
            ++trace_.deadline_misses;
            log(t, EventKind::deadline_miss, job.task, job.job);
        }
        pending_.erase(std::find(pending_.begin(), pending_.end(), j));
        const auto& spec = ts_.tasks()[ti];
        if (spec.is_control()) {
            last_finished_[ti] = j;
            last_window_[ti] = {t, t + spec.aew};
            if (spec.aew > 0) {
                log(t, EventKind::aew_open, spec.id, job.job);
                closes_.insert({t + spec.aew, {spec.id, job.job}});
            }
        }
        if (obs_) obs_->on_finish(job);
        if (running_ == j) running_ = -1;
    }

    struct AttackerJob {
        bool attempted = false;
        bool hit = false;
    };

    const TaskSet& ts_;
    const SimConfig& cfg_;
    const DelayStore& seqs_;
    SampleObserver* obs_;
    Millis H_ = 0;
    ScheduleTrace trace_;
    std::vector<std::size_t> task_index_;
    std::vector<Millis> remaining_;
    std::vector<int> pending_;
    int running_ = -1;
    std::optional<TaskId> protected_;
    std::size_t job_idx_ = 0;
    std::mt19937_64 rng_;
    std::vector<std::pair<Millis, Millis>> last_window_;  // [finish, finish + aew) per task index
    std::vector<int> last_finished_;
    std::map<std::int64_t, AttackerJob> attacker_job_state_;
    std::set<std::pair<Millis, std::pair<TaskId, std::int64_t>>> closes_;
};

}  // namespace

ScheduleTrace run_schedule(const TaskSet& taskset, const SimConfig& config, const DelayStore& sequences,
                           SampleObserver* observer) {
    Engine engine(taskset, config, sequences, observer);
    return engine.run();
}

ScheduleTrace simulate_pfp(const TaskSet& taskset, const SimConfig& config) {
    SimConfig cfg = config;
    cfg.mode = SimMode::pfp;
    return run_schedule(taskset, cfg, {});
}

ScheduleTrace run_pfp_d(const TaskSet& taskset, const SimConfig& config, const DelayStore& sequences) {
    SimConfig cfg = config;
    cfg.mode = SimMode::pfp_d;
    return run_schedule(taskset, cfg, sequences);
}

void write_trace_csv(const ScheduleTrace& trace, std::ostream& out) {
    out << "time,event,task,job,detail\n";
    for (const auto& e : trace.events)
        out << e.time << ',' << to_string(e.kind) << ',' << e.task << ',' << e.job << ',' << e.detail << '\n';
}

}  // namespace delayguard
