// delayguard command-line front end.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "delayguard/case_study.hpp"
#include "delayguard/io.hpp"
#include "delayguard/milp.hpp"
#include "delayguard/overlap.hpp"
#include "delayguard/rta.hpp"
#include "delayguard/taskgen.hpp"

using namespace delayguard;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kInfeasible = 3;

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string format = "table";
};

struct Table {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    void add(std::vector<json> row) { rows.push_back(std::move(row)); }
};

std::string cell(const json& v) {
    if (v.is_null()) return "-";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream os;
        os << std::setprecision(6) << v.get<double>();
        return os.str();
    }
    return v.dump();
}

void emit(const Table& t, const Globals& g, std::ostream& out = std::cout) {
    if (g.format == "records") {
        for (const auto& row : t.rows) {
            json rec;
            if (!t.title.empty()) rec["table"] = t.title;
            for (std::size_t i = 0; i < t.columns.size(); ++i) rec[t.columns[i]] = row[i];
            out << rec.dump() << '\n';
        }
        return;
    }
    if (g.format == "csv") {
        if (!t.title.empty()) out << "# " << t.title << '\n';
        for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
        out << '\n';
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell(row[i]);
            out << '\n';
        }
        return;
    }
    std::vector<std::size_t> width(t.columns.size());
    for (std::size_t i = 0; i < t.columns.size(); ++i) width[i] = t.columns[i].size();
    for (const auto& row : t.rows)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], cell(row[i]).size());
    if (!t.title.empty()) out << t.title << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "  " : "") << std::setw(int(width[i])) << t.columns[i];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "  " : "") << std::setw(int(width[i])) << cell(row[i]);
        out << '\n';
    }
    out << '\n';
}

json opt(const std::optional<Millis>& v) { return v ? json(*v) : json(nullptr); }

TaskSet load_checked(const std::string& path) {
    auto ts = load_taskset(path);
    const auto report = validate(ts);
    if (!report.ok()) throw FormatError(path + ": " + report.to_string());
    return ts;
}

const TaskSpec& victim_of(const TaskSet& ts, TaskId id) {
    const auto* v = ts.find(id);
    if (!v) throw FormatError("no task with id " + std::to_string(id));
    return *v;
}

fs::path out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

// ---- rta ----------------------------------------------------------------

struct RtaArgs {
    std::string taskset, delays;
    std::optional<TaskId> victim;
    std::optional<Millis> delay;
};

int cmd_rta(const RtaArgs& a, const Globals& g) {
    const auto ts = load_checked(a.taskset);
    bool feasible = true;
    if (!a.victim) {
        Table t{"response times", {"task", "priority", "wcet", "period", "deadline", "wcrt"}, {}};
        for (const auto& task : ts.by_priority()) {
            const auto r = wcrt_classic(task, ts);
            feasible = feasible && r.has_value();
            t.add({task.id, task.priority, task.wcet, task.period, task.deadline, opt(r)});
        }
        emit(t, g);
        return feasible ? kOk : kInfeasible;
    }
    const auto& victim = victim_of(ts, *a.victim);
    DelaySequence seq;
    if (!a.delays.empty()) {
        const auto store = load_delay_store(a.delays);
        const auto it = store.find(victim.id);
        if (it == store.end()) throw FormatError(a.delays + ": no sequence for task " + std::to_string(victim.id));
        seq = it->second;
    } else {
        seq.victim_id = victim.id;
        seq.delays.assign(static_cast<std::size_t>(ts.hyperperiod() / victim.period), a.delay.value_or(0));
    }
    const auto res = analyze_victim(victim, ts, seq);
    Table jobs{"victim " + std::to_string(victim.id) + " jobs", {"job", "delay", "response", "effective_deadline", "feasible"}, {}};
    for (const auto& j : res.per_job_wcrt)
        jobs.add({j.job, j.delay, j.feasible ? json(j.response) : json(nullptr), j.effective_deadline, j.feasible});
    emit(jobs, g);
    feasible = res.feasible;
    Table others{"other tasks", {"task", "relation", "wcrt"}, {}};
    for (const auto& task : ts.by_priority()) {
        if (task.id == victim.id) continue;
        const bool lower = task.priority > victim.priority;
        const auto r = lower ? lp_task_wcrt_under_delay(task, victim, seq, ts) : wcrt_classic(task, ts);
        feasible = feasible && r.has_value();
        others.add({task.id, lower ? "lower" : "higher", opt(r)});
    }
    emit(others, g);
    return feasible ? kOk : kInfeasible;
}

// ---- peak-delay ---------------------------------------------------------

int cmd_peak(const std::string& path, std::optional<TaskId> victim, const Globals& g) {
    const auto ts = load_checked(path);
    std::vector<TaskSpec> victims;
    if (victim)
        victims.push_back(victim_of(ts, *victim));
    else
        victims = ts.control_tasks();
    Table t{"peak delays", {"task", "wcet", "period", "deadline", "peak_delay"}, {}};
    bool all = true;
    for (const auto& v : victims) {
        const auto p = peak_delay(v, ts);
        all = all && p.has_value();
        t.add({v.id, v.wcet, v.period, v.deadline, opt(p)});
    }
    emit(t, g);
    return all ? kOk : kInfeasible;
}

// ---- max-delay ----------------------------------------------------------

int cmd_max_delay(const std::string& path, const std::string& plant_path, TaskId victim, int rollouts,
                  bool deterministic, const Globals& g) {
    const auto ts = load_checked(path);
    const auto plant = load_plant(plant_path);
    const auto res = max_admissible_delay(plant, victim_of(ts, victim), ts, g.seed, {rollouts, deterministic});
    Table t{"delay scan", {"delay", "response", "actuation_delay", "cost", "admissible"}, {}};
    for (const auto& r : res.rows) t.add({r.delay, r.response, r.actuation_delay, r.cost, r.admissible});
    emit(t, g);
    Table s{"summary", {"task", "peak_delay", "max_delay", "nominal_cost", "threshold"}, {}};
    s.add({victim, opt(res.peak), opt(res.max_delay), res.nominal_cost, res.threshold});
    emit(s, g);
    return res.max_delay ? kOk : kInfeasible;
}

// ---- optimize -----------------------------------------------------------

struct OptimizeArgs {
    std::string taskset, plant, dump_milp, solver = "enumeration";
    TaskId victim = 0;
    std::optional<Millis> max_delay;
    bool verify = false;
};

int cmd_optimize(const OptimizeArgs& a, const Globals& g) {
    const auto ts = load_checked(a.taskset);
    const auto& victim = victim_of(ts, a.victim);
    Millis dmax = 0;
    if (a.max_delay) {
        dmax = *a.max_delay;
    } else {
        if (a.plant.empty()) throw FormatError("optimize needs --max-delay or --plant");
        const auto res = max_admissible_delay(load_plant(a.plant), victim, ts, g.seed);
        if (!res.max_delay) throw InfeasibleError("no admissible delay for task " + std::to_string(victim.id));
        dmax = *res.max_delay;
    }
    const auto peak = peak_delay(victim, ts);
    if (!peak || dmax > *peak)
        throw InfeasibleError("maximum delay " + std::to_string(dmax) + " exceeds the peak delay " +
                              (peak ? std::to_string(*peak) : std::string("(none)")));
    const auto problem = make_overlap_problem(ts, victim.id, dmax);
    auto sol = solve_delays(problem);

    std::optional<MilpInstance> inst;
    if (!a.dump_milp.empty() || a.solver == "milp" || a.verify) inst = build_milp(problem);
    if (a.solver == "milp") {
        const auto res = branch_and_bound(*inst);
        if (!res.optimal) throw InfeasibleError("branch and bound did not prove optimality");
        DelaySequence seq{victim.id, {}};
        for (const double d : res.delays) seq.delays.push_back(std::llround(d));
        sol.delays = seq;
        sol.objective = total_overlap(problem, seq);
    }
    if (!a.dump_milp.empty()) {
        const fs::path dump(a.dump_milp);
        if (dump.has_parent_path()) fs::create_directories(dump.parent_path());
        std::ofstream out(dump);
        if (!out) throw std::runtime_error("cannot write " + a.dump_milp);
        write_lp_format(*inst, out);
    }

    Table jobs{"sequence", {"job", "delay", "overlap"}, {}};
    for (std::int64_t k = 1; k <= problem.victim_jobs(); ++k)
        jobs.add({k, sol.delays.for_job(k), job_overlap(problem, k, sol.delays.for_job(k))});
    emit(jobs, g);
    Table s{"summary",
            {"task", "max_delay", "victim_response", "baseline_overlap", "optimized_overlap", "solver", "binaries",
             "continuous", "rows", "linearization_ok"},
            {}};
    json verified = nullptr;
    if (a.verify) verified = verify_linearization(*inst, sol.delays.delays);
    s.add({victim.id, dmax, problem.victim_response, sol.baseline, sol.objective, a.solver,
           inst ? json(inst->num_binaries()) : json(nullptr), inst ? json(inst->num_continuous()) : json(nullptr),
           inst ? json(inst->rows.size()) : json(nullptr), verified});
    emit(s, g);
    if (!g.out_dir.empty()) save_delay_store({{victim.id, sol.delays}}, out_path(g, "delays_" + std::to_string(victim.id) + ".json"));
    return kOk;
}

// ---- simulate / case-study ----------------------------------------------

json report_record(const Scenario& s, const MitigationPlan& plan, const CaseResult& r) {
    const auto& tr = r.report.trace;
    const double periods = static_cast<double>(tr.horizon) / static_cast<double>(r.hyperperiod);
    return {{"case", to_string(r.which)},
            {"fdi_attempts", r.report.fdi_attempts},
            {"fdi_hits", r.report.fdi_hits},
            {"deadline_misses", r.report.deadline_misses},
            {"first_alarm_ms", opt(r.report.first_alarm)},
            {"mode_switch_ms", opt(tr.mode_switch)},
            {"victim_cost", r.report.cost.at(s.victim)},
            {"cost_threshold", r.cost_threshold},
            {"measured_overlap_per_hyperperiod", static_cast<double>(tr.aew_overlap.at(s.victim)) / periods},
            {"predicted_overlap", plan.solutions.at(s.victim).objective}};
}

void write_case_files(const Globals& g, const Scenario& s, const CaseResult& r) {
    if (g.out_dir.empty()) return;
    const auto tag = "case_" + to_string(r.which);
    std::ofstream trace(out_path(g, tag + "_trace.csv"));
    write_trace_csv(r.report.trace, trace);
    for (const auto& [id, plant] : s.plants) {
        std::ofstream plot(out_path(g, tag + "_task" + std::to_string(id) + ".csv"));
        write_samples_csv(r.report, id, plot);
    }
}

int run_cases(const std::string& scenario_path, const std::vector<CaseId>& cases, const std::string& delays,
              const Globals& g) {
    const auto s = load_scenario(scenario_path);
    auto plan = plan_mitigation(s);
    if (!delays.empty()) {
        for (const auto& [id, seq] : load_delay_store(delays)) {
            if (!sequence_certified(victim_of(s.taskset, id), s.taskset, seq))
                throw InfeasibleError("delay sequence for task " + std::to_string(id) + " is not certified");
            plan.sequences[id] = seq;
        }
    }
    Table t{"cases",
            {"case", "fdi_attempts", "fdi_hits", "deadline_misses", "first_alarm_ms", "mode_switch_ms", "victim_cost",
             "cost_threshold", "measured_overlap_per_hyperperiod", "predicted_overlap"},
            {}};
    for (const auto which : cases) {
        const auto r = run_case(s, plan, which, g.seed);
        const auto rec = report_record(s, plan, r);
        std::vector<json> row;
        for (const auto& c : t.columns) row.push_back(rec.at(c));
        t.add(std::move(row));
        write_case_files(g, s, r);
    }
    emit(t, g);
    if (!g.out_dir.empty()) save_delay_store(plan.sequences, out_path(g, "delays.json"));
    return kOk;
}

// ---- sweep --------------------------------------------------------------

int cmd_sweep(std::vector<int> counts, int seeds, int sets, unsigned threads, bool aggregate, const Globals& g) {
    SweepSpec spec;
    spec.task_counts = std::move(counts);
    spec.sets_per_range = sets;
    spec.threads = threads;
    spec.seeds.clear();
    for (int i = 0; i < seeds; ++i) spec.seeds.push_back(g.seed + static_cast<std::uint64_t>(i));
    auto rows = schedulability_sweep(spec);
    if (aggregate) rows = aggregate_over_seeds(rows);
    Table t{"groups: HP = first floor(n/3) priority ranks, MP = next floor(n/3), LP = the rest",
            {"n", "range", "u_low", "u_high", "group", "seed", "sets", "percent"},
            {}};
    for (const auto& r : rows)
        t.add({r.n_tasks, r.range, r.u_low, r.u_high, to_string(r.group), aggregate ? json("all") : json(r.seed), r.sets,
               r.percent});
    emit(t, g);
    if (!g.out_dir.empty()) {
        std::ofstream out(out_path(g, "sweep.csv"));
        emit(t, Globals{g.seed, g.out_dir, "csv"}, out);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schedule-attack analysis and mitigation toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Master random seed")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "Directory for output files");
    app.add_option("--format", g.format, "Output format")
        ->check(CLI::IsMember({"table", "csv", "records"}))
        ->capture_default_str();
    app.fallthrough();

    RtaArgs rta;
    auto* c_rta = app.add_subcommand("rta", "Response-time analysis, optionally under victim delays");
    c_rta->add_option("taskset", rta.taskset, "Task-set file")->required()->check(CLI::ExistingFile);
    c_rta->add_option("--victim", rta.victim, "Victim task id");
    auto* o_delay = c_rta->add_option("--delay", rta.delay, "Uniform delay on every victim job (ms)");
    c_rta->add_option("--delays", rta.delays, "Delay-sequence file")->check(CLI::ExistingFile)->excludes(o_delay);

    std::string peak_ts;
    std::optional<TaskId> peak_victim;
    auto* c_peak = app.add_subcommand("peak-delay", "Peak job-level delay of control tasks");
    c_peak->add_option("taskset", peak_ts, "Task-set file")->required()->check(CLI::ExistingFile);
    c_peak->add_option("--victim", peak_victim, "Victim task id (default: every control task)");

    std::string md_ts, md_plant;
    TaskId md_victim = 0;
    int md_rollouts = 20;
    bool md_det = false;
    auto* c_md = app.add_subcommand("max-delay", "Largest delay keeping the control cost under its threshold");
    c_md->add_option("taskset", md_ts, "Task-set file")->required()->check(CLI::ExistingFile);
    c_md->add_option("--plant", md_plant, "Plant file")->required()->check(CLI::ExistingFile);
    c_md->add_option("--victim", md_victim, "Victim task id")->required();
    c_md->add_option("--rollouts", md_rollouts, "Monte Carlo rollouts per delay")->capture_default_str();
    c_md->add_flag("--deterministic", md_det, "Noise-free single rollout");

    OptimizeArgs oa;
    auto* c_opt = app.add_subcommand("optimize", "Delay sequence minimizing attack-window overlap");
    c_opt->add_option("taskset", oa.taskset, "Task-set file")->required()->check(CLI::ExistingFile);
    c_opt->add_option("--victim", oa.victim, "Victim task id")->required();
    auto* o_md = c_opt->add_option("--max-delay", oa.max_delay, "Maximum delay (ms)");
    c_opt->add_option("--plant", oa.plant, "Plant file; derives the maximum delay")
        ->check(CLI::ExistingFile)
        ->excludes(o_md);
    c_opt->add_option("--solver", oa.solver, "Solver")
        ->check(CLI::IsMember({"enumeration", "milp"}))
        ->capture_default_str();
    c_opt->add_option("--dump-milp", oa.dump_milp, "Write the MILP in LP format");
    c_opt->add_flag("--verify", oa.verify, "Check the MILP linearization at the solution");

    std::string sim_scenario, sim_case = "iv", sim_delays;
    auto* c_sim = app.add_subcommand("simulate", "Closed-loop run of one case");
    c_sim->add_option("scenario", sim_scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    c_sim->add_option("--case", sim_case, "Case: i, ii, iii or iv")->capture_default_str();
    c_sim->add_option("--delays", sim_delays, "Delay-sequence file overriding the optimizer")->check(CLI::ExistingFile);

    std::vector<int> sw_counts{5, 10, 20};
    int sw_seeds = 5, sw_sets = 100;
    unsigned sw_threads = 0;
    bool sw_agg = false;
    auto* c_sw = app.add_subcommand("sweep", "Schedulability of random task sets per victim group");
    c_sw->add_option("--tasks", sw_counts, "Task counts")->delimiter(',')->capture_default_str();
    c_sw->add_option("--seeds", sw_seeds, "Number of seeds, starting at --seed")->capture_default_str();
    c_sw->add_option("--sets", sw_sets, "Task sets per utilization range")->capture_default_str();
    c_sw->add_option("--threads", sw_threads, "Worker threads (0: all cores)");
    c_sw->add_flag("--aggregate", sw_agg, "Average over seeds");

    std::string cs_scenario, cs_case = "all";
    auto* c_cs = app.add_subcommand("case-study", "All four cases of a scenario");
    c_cs->add_option("scenario", cs_scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    c_cs->add_option("--case", cs_case, "Case: i, ii, iii, iv or all")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInvalid;
    }

    try {
        if (*c_rta) return cmd_rta(rta, g);
        if (*c_peak) return cmd_peak(peak_ts, peak_victim, g);
        if (*c_md) return cmd_max_delay(md_ts, md_plant, md_victim, md_rollouts, md_det, g);
        if (*c_opt) return cmd_optimize(oa, g);
        if (*c_sim) return run_cases(sim_scenario, {parse_case(sim_case)}, sim_delays, g);
        if (*c_sw) return cmd_sweep(sw_counts, sw_seeds, sw_sets, sw_threads, sw_agg, g);
        if (*c_cs) {
            std::vector<CaseId> cases;
            if (cs_case == "all")
                cases = {CaseId::pfp_clean, CaseId::pfp_attack, CaseId::random_attack, CaseId::secure_attack};
            else
                cases = {parse_case(cs_case)};
            return run_cases(cs_scenario, cases, {}, g);
        }
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const OverlapError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const SynthesisError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const FormatError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const TaskSetError& e) {
        std::cerr << "invalid task set: " << e.what() << '\n';
        return kInvalid;
    } catch (const SimulationError& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
