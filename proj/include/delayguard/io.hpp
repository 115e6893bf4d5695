#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "delayguard/task_model.hpp"

namespace delayguard {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Task-set documents:
//   { "tasks": [ { "id", "period_ms", "wcet_ms", "deadline_ms", "priority"?,
//                  "trust", "kind", "aew_ms"? }, ... ] }
// Unknown fields are rejected. Priorities are either given on every task or
// on none; in the latter case they are derived rate-monotonically.
TaskSet taskset_from_json(const nlohmann::json& doc);
nlohmann::json taskset_to_json(const TaskSet& taskset);
TaskSet load_taskset(const std::filesystem::path& path);
void save_taskset(const TaskSet& taskset, const std::filesystem::path& path);

// Delay-sequence documents hold one or more sequences keyed by victim:
//   { "sequences": [ { "victim_id": 3, "delays_ms": [8, 0, ...] } ] }
// A bare { "victim_id", "delays_ms" } object is also accepted.
using DelayStore = std::map<TaskId, DelaySequence>;
DelayStore delay_store_from_json(const nlohmann::json& doc);
nlohmann::json delay_store_to_json(const DelayStore& store);
DelayStore load_delay_store(const std::filesystem::path& path);
void save_delay_store(const DelayStore& store, const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

/// Throws FormatError naming the first key of `obj` not in `allowed`.
void reject_unknown_fields(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                           const std::string& where);

}  // namespace delayguard
