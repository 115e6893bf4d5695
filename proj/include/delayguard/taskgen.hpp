#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "delayguard/task_model.hpp"

namespace delayguard {

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// n values in (0, 1) summing to total, uniform over that slice of the unit
/// cube (Stafford's RandFixedSum). Throws GenerationError unless 0 < total < n.
std::vector<double> rand_fixed_sum(int n, double total, std::mt19937_64& rng);

enum class PriorityGroup { hp, mp, lp };

std::string to_string(PriorityGroup group);

/// Priority ranks (1-based) belonging to a group: the first floor(n/3) ranks
/// are HP, the next floor(n/3) MP, and the rest LP.
std::vector<int> group_ranks(int n, PriorityGroup group);

struct GeneratorSpec {
    int n_tasks = 5;
    std::vector<Millis> period_menu{5, 10, 20, 50, 100, 200, 1000};
    Millis wcet_max = 50;
    double tolerance = 0.05;  // accepted |achieved - target| utilization
    int max_attempts = 1000;
};

/// Draws utilizations with rand_fixed_sum and, per task, a period uniformly
/// from the menu entries where round(u T) needs no clamping (the full menu
/// when there are none). C = clamp(round(u T), 1, min(wcet_max, T - 1));
/// resamples until the achieved utilization is within tolerance of
/// `target`. Priorities are rate-monotonic. Throws GenerationError after max_attempts.
TaskSet generate_taskset(const GeneratorSpec& spec, double target, std::mt19937_64& rng);

struct SweepSpec {
    std::vector<int> task_counts{5, 10, 20};
    int ranges = 10;  // range i is [0.02 + 0.1 i, 0.18 + 0.1 i]
    int sets_per_range = 100;
    std::vector<std::uint64_t> seeds{0};
    GeneratorSpec generator;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepRow {
    int n_tasks = 0;
    int range = 0;
    double u_low = 0.0, u_high = 0.0;
    PriorityGroup group = PriorityGroup::hp;
    std::uint64_t seed = 0;
    int sets = 0;
    double percent = 0.0;  // share of (set, group member) victims with a positive peak delay
};

/// Every member of the victim group is tried as the victim; a set scores
/// the fraction of members whose peak delay is positive. Work fans out over
/// threads; rows are ordered by (n, seed, range, group) regardless.
std::vector<SweepRow> schedulability_sweep(const SweepSpec& spec);

/// Rows averaged over seeds, same order without the seed dimension.
std::vector<SweepRow> aggregate_over_seeds(const std::vector<SweepRow>& rows);

}  // namespace delayguard
