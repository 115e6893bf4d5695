#pragma once

#include <string>

#include "delayguard/io.hpp"
#include "delayguard/task_model.hpp"

namespace fixtures {

inline std::string asset(const std::string& rel) { return std::string(DELAYGUARD_ASSET_DIR) + "/" + rel; }

inline delayguard::TaskSpec task(int id, delayguard::Millis c, delayguard::Millis t, int prio,
                                 delayguard::Millis d = 0) {
    delayguard::TaskSpec s;
    s.id = id;
    s.wcet = c;
    s.period = t;
    s.deadline = d == 0 ? t : d;
    s.priority = prio;
    return s;
}

// Four-task example: victim 2 (C=3, T=10), task 3 untrusted.
inline delayguard::TaskSet small_example() { return delayguard::load_taskset(asset("tasksets/example_small.json")); }

inline delayguard::TaskSet automotive() { return delayguard::load_taskset(asset("tasksets/automotive.json")); }

}  // namespace fixtures
