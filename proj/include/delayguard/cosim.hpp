#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "delayguard/control.hpp"
#include "delayguard/detector.hpp"
#include "delayguard/sim.hpp"

namespace delayguard {

/// One control sample: taken at t = k * T before the k-th job runs.
struct ControlSample {
    Millis t = 0;
    TaskId task = 0;
    std::int64_t sample = 0;
    VectorXd state;
    VectorXd estimate;
    VectorXd u;
    double cost_cumulative = 0.0;
    double g = 0.0;
    double threshold = 0.0;
    bool alarm = false;
    Millis actuation_delay = 0;  // of the job that closed the previous period
};

struct RunReport {
    ScheduleTrace trace;
    std::map<TaskId, double> cost;
    std::map<TaskId, std::vector<DetectorStep>> detector;
    std::map<TaskId, double> thresholds;
    std::vector<ControlSample> samples;
    int fdi_attempts = 0;
    int fdi_hits = 0;
    int deadline_misses = 0;
    std::optional<Millis> first_alarm;
};

/// Couples the schedule with each control task's plant. The plant is sampled
/// at k*T; the job's input is applied at its finish (hold model with the
/// actual actuation delay) and corrupted by the attack bias when the
/// attacker hit the job's window. The estimator predicts with the actual
/// delay; gains are designed for the worst actuation delay of the current
/// mode. Detectors step once per sample and drive the mode switch.
RunReport cosimulate(const TaskSet& taskset, const std::map<TaskId, PlantModel>& plants, const SimConfig& config,
                     const DelayStore& sequences = {});

/// Plot columns for one task: t, state, estimate, u, J_cumulative, g, Th.
void write_samples_csv(const RunReport& report, TaskId task, std::ostream& out);

}  // namespace delayguard
