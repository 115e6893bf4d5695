#include "delayguard/io.hpp"

#include <algorithm>
#include <fstream>

namespace delayguard {

using nlohmann::json;

void reject_unknown_fields(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw FormatError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
        if (!known) throw FormatError(where + ": unknown field '" + key + "'");
    }
}

namespace {

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw FormatError(where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(where + ": field '" + key + "': " + e.what());
    }
}

Trust parse_trust(const std::string& s, const std::string& where) {
    if (s == "trusted") return Trust::trusted;
    if (s == "untrusted") return Trust::untrusted;
    throw FormatError(where + ": trust must be 'trusted' or 'untrusted'");
}

TaskKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "control") return TaskKind::control;
    if (s == "non_control") return TaskKind::non_control;
    throw FormatError(where + ": kind must be 'control' or 'non_control'");
}

}  // namespace

TaskSet taskset_from_json(const json& doc) {
    reject_unknown_fields(doc, {"tasks", "name", "description"}, "task set");
    if (!doc.contains("tasks") || !doc["tasks"].is_array()) throw FormatError("task set: 'tasks' must be an array");
    std::vector<TaskSpec> tasks;
    std::size_t with_priority = 0;
    for (std::size_t i = 0; i < doc["tasks"].size(); ++i) {
        const auto& o = doc["tasks"][i];
        const std::string where = "tasks[" + std::to_string(i) + "]";
        reject_unknown_fields(o, {"id", "period_ms", "wcet_ms", "deadline_ms", "priority", "trust", "kind", "aew_ms"},
                              where);
        TaskSpec t;
        t.id = required<int>(o, "id", where);
        t.period = required<Millis>(o, "period_ms", where);
        t.wcet = required<Millis>(o, "wcet_ms", where);
        t.deadline = required<Millis>(o, "deadline_ms", where);
        t.trust = parse_trust(required<std::string>(o, "trust", where), where);
        t.kind = parse_kind(required<std::string>(o, "kind", where), where);
        if (o.contains("aew_ms")) t.aew = required<Millis>(o, "aew_ms", where);
        if (o.contains("priority")) {
            t.priority = required<int>(o, "priority", where);
            ++with_priority;
        }
        tasks.push_back(t);
    }
    if (with_priority != 0 && with_priority != tasks.size())
        throw FormatError("task set: 'priority' must be given on all tasks or on none");
    TaskSet ts(std::move(tasks));
    if (with_priority == 0) ts = assign_rm_priorities(ts);
    return ts;
}

json taskset_to_json(const TaskSet& taskset) {
    json arr = json::array();
    for (const auto& t : taskset.tasks()) {
        json o = {{"id", t.id},
                  {"period_ms", t.period},
                  {"wcet_ms", t.wcet},
                  {"deadline_ms", t.deadline},
                  {"priority", t.priority},
                  {"trust", to_string(t.trust)},
                  {"kind", to_string(t.kind)}};
        if (t.aew != 0) o["aew_ms"] = t.aew;
        arr.push_back(std::move(o));
    }
    return json{{"tasks", std::move(arr)}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

TaskSet load_taskset(const std::filesystem::path& path) { return taskset_from_json(read_json_file(path)); }

void save_taskset(const TaskSet& taskset, const std::filesystem::path& path) {
    write_json_file(taskset_to_json(taskset), path);
}

namespace {

DelaySequence sequence_from_json(const json& o, const std::string& where) {
    reject_unknown_fields(o, {"victim_id", "delays_ms"}, where);
    DelaySequence seq;
    seq.victim_id = required<int>(o, "victim_id", where);
    seq.delays = required<std::vector<Millis>>(o, "delays_ms", where);
    return seq;
}

}  // namespace

DelayStore delay_store_from_json(const json& doc) {
    DelayStore store;
    if (doc.contains("sequences")) {
        reject_unknown_fields(doc, {"sequences"}, "delay store");
        for (std::size_t i = 0; i < doc["sequences"].size(); ++i) {
            auto seq = sequence_from_json(doc["sequences"][i], "sequences[" + std::to_string(i) + "]");
            if (store.contains(seq.victim_id))
                throw FormatError("delay store: duplicate victim " + std::to_string(seq.victim_id));
            store[seq.victim_id] = std::move(seq);
        }
    } else {
        auto seq = sequence_from_json(doc, "delay sequence");
        store[seq.victim_id] = std::move(seq);
    }
    return store;
}

json delay_store_to_json(const DelayStore& store) {
    json arr = json::array();
    for (const auto& [id, seq] : store) arr.push_back({{"victim_id", id}, {"delays_ms", seq.delays}});
    return json{{"sequences", std::move(arr)}};
}

DelayStore load_delay_store(const std::filesystem::path& path) { return delay_store_from_json(read_json_file(path)); }

void save_delay_store(const DelayStore& store, const std::filesystem::path& path) {
    write_json_file(delay_store_to_json(store), path);
}

}  // namespace delayguard
