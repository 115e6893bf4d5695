#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "delayguard/control.hpp"
#include "delayguard/cosim.hpp"
#include "delayguard/overlap.hpp"

namespace delayguard {

/// Everything one end-to-end run needs; loaded from a scenario document whose
/// file references are relative to the document.
struct Scenario {
    std::string name;
    TaskSet taskset;
    std::map<TaskId, PlantModel> plants;
    std::map<TaskId, Millis> max_delay;  // per control task
    TaskId victim = 0;
    TaskId attacker = 0;
    Millis attack_start = 0;
    VectorXd fdi_bias;
    Millis reset_time = 3000;
    double run_cost_ratio = 3.0;  // run cost threshold, relative to the attack-free run
    double random_location = 0.5;  // Laplace location, fraction of the peak delay
    double random_scale = 0.25;    // Laplace scale, fraction of the peak delay
};

Scenario load_scenario(const std::filesystem::path& path);

enum class CaseId { pfp_clean, pfp_attack, random_attack, secure_attack };

/// Accepts "i".."iv" or "1".."4".
CaseId parse_case(const std::string& text);
std::string to_string(CaseId which);

/// Peak delays, optimized sequences and predicted overlaps for every control
/// task of the scenario.
struct MitigationPlan {
    std::map<TaskId, Millis> peak;
    std::map<TaskId, DelaySolution> solutions;
    DelayStore sequences;
};

/// Runs the analysis and optimizer stages. Throws OverlapError when a
/// configured maximum delay exceeds the peak or is otherwise infeasible.
MitigationPlan plan_mitigation(const Scenario& scenario);

SimConfig case_config(const Scenario& scenario, const MitigationPlan& plan, CaseId which, std::uint64_t seed);

struct CaseResult {
    CaseId which = CaseId::pfp_clean;
    RunReport report;
    double reference_cost = 0.0;  // victim cost of the attack-free run, same seed
    double cost_threshold = 0.0;  // run_cost_ratio * reference_cost
    Millis hyperperiod = 0;
};

CaseResult run_case(const Scenario& scenario, const MitigationPlan& plan, CaseId which, std::uint64_t seed);

}  // namespace delayguard
