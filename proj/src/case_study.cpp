#include "delayguard/case_study.hpp"

#include "delayguard/io.hpp"
#include "delayguard/rta.hpp"

namespace delayguard {

Scenario load_scenario(const std::filesystem::path& path) {
    const auto doc = read_json_file(path);
    const auto dir = path.parent_path();
    try {
        reject_unknown_fields(doc,
                              {"name", "description", "taskset", "plants", "max_delay_ms", "victim_id", "attacker_id",
                               "attack_start_ms", "fdi_bias", "reset_time_ms", "run_cost_ratio", "random_delay"},
                              "scenario");
        Scenario s;
        s.name = doc.value("name", path.stem().string());
        s.taskset = load_taskset(dir / doc.at("taskset").get<std::string>());
        for (const auto& [key, file] : doc.at("plants").items())
            s.plants.emplace(std::stoi(key), load_plant(dir / file.get<std::string>()));
        for (const auto& [key, d] : doc.at("max_delay_ms").items()) s.max_delay[std::stoi(key)] = d.get<Millis>();
        s.victim = doc.at("victim_id").get<TaskId>();
        s.attacker = doc.at("attacker_id").get<TaskId>();
        s.attack_start = doc.at("attack_start_ms").get<Millis>();
        const auto bias = doc.at("fdi_bias").get<std::vector<double>>();
        s.fdi_bias = Eigen::Map<const VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
        s.reset_time = doc.value("reset_time_ms", Millis{3000});
        s.run_cost_ratio = doc.value("run_cost_ratio", 3.0);
        if (doc.contains("random_delay")) {
            const auto& r = doc.at("random_delay");
            reject_unknown_fields(r, {"location_fraction", "scale_fraction"}, "scenario.random_delay");
            s.random_location = r.value("location_fraction", 0.5);
            s.random_scale = r.value("scale_fraction", 0.25);
        }
        for (const auto& t : s.taskset.control_tasks()) {
            if (!s.plants.contains(t.id)) throw FormatError("scenario has no plant for control task " + std::to_string(t.id));
            if (!s.max_delay.contains(t.id))
                throw FormatError("scenario has no maximum delay for control task " + std::to_string(t.id));
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(path.string() + ": bad task key: " + e.what());
    }
}

CaseId parse_case(const std::string& text) {
    if (text == "i" || text == "1") return CaseId::pfp_clean;
    if (text == "ii" || text == "2") return CaseId::pfp_attack;
    if (text == "iii" || text == "3") return CaseId::random_attack;
    if (text == "iv" || text == "4") return CaseId::secure_attack;
    throw std::invalid_argument("unknown case '" + text + "' (expected i, ii, iii or iv)");
}

std::string to_string(CaseId which) {
    switch (which) {
        case CaseId::pfp_clean: return "i";
        case CaseId::pfp_attack: return "ii";
        case CaseId::random_attack: return "iii";
        case CaseId::secure_attack: return "iv";
    }
    return "?";
}

MitigationPlan plan_mitigation(const Scenario& s) {
    MitigationPlan plan;
    for (const auto& task : s.taskset.control_tasks()) {
        const auto peak = peak_delay(task, s.taskset);
        if (!peak) throw OverlapError("control task " + std::to_string(task.id) + " has no admissible delay");
        plan.peak[task.id] = *peak;
        const Millis dmax = s.max_delay.at(task.id);
        if (dmax > *peak)
            throw OverlapError("maximum delay " + std::to_string(dmax) + " of task " + std::to_string(task.id) +
                               " exceeds its peak delay " + std::to_string(*peak));
        auto sol = solve_delays(make_overlap_problem(s.taskset, task.id, dmax));
        plan.sequences[task.id] = sol.delays;
        plan.solutions[task.id] = std::move(sol);
    }
    return plan;
}

SimConfig case_config(const Scenario& s, const MitigationPlan& plan, CaseId which, std::uint64_t seed) {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.reset_time = s.reset_time;
    cfg.mode = which == CaseId::random_attack   ? SimMode::random_delay
               : which == CaseId::secure_attack ? SimMode::pfp_d
                                                : SimMode::pfp;
    for (const auto& [id, peak] : plan.peak)
        cfg.random_delays[id] = {s.random_location * static_cast<double>(peak),
                                 s.random_scale * static_cast<double>(peak), peak};
    if (which != CaseId::pfp_clean) cfg.attack = AttackConfig{s.attacker, s.victim, s.attack_start, s.fdi_bias};
    return cfg;
}

CaseResult run_case(const Scenario& s, const MitigationPlan& plan, CaseId which, std::uint64_t seed) {
    CaseResult out;
    out.which = which;
    out.hyperperiod = s.taskset.hyperperiod();
    out.report = cosimulate(s.taskset, s.plants, case_config(s, plan, which, seed), plan.sequences);
    const auto clean = which == CaseId::pfp_clean
                           ? out.report.cost.at(s.victim)
                           : cosimulate(s.taskset, s.plants, case_config(s, plan, CaseId::pfp_clean, seed), plan.sequences)
                                 .cost.at(s.victim);
    out.reference_cost = clean;
    out.cost_threshold = s.run_cost_ratio * clean;
    return out;
}

}  // namespace delayguard
