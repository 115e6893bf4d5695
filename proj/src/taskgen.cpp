#include "delayguard/taskgen.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <cmath>
#include <limits>
#include <map>
#include <thread>
#include <tuple>

#include "delayguard/rng.hpp"
#include "delayguard/rta.hpp"

namespace delayguard {

std::vector<double> rand_fixed_sum(int n, double total, std::mt19937_64& rng) {
    if (n < 1) throw GenerationError("rand_fixed_sum needs at least one value");
    if (!(total > 0.0) || !(total < n))
        throw GenerationError("rand_fixed_sum total must lie in (0, " + std::to_string(n) + ")");
    const int k = std::clamp(static_cast<int>(std::floor(total)), 0, n - 1);
    double s = std::clamp(total, static_cast<double>(k), static_cast<double>(k + 1));

    std::vector<double> s1(n), s2(n);
    for (int i = 0; i < n; ++i) {
        s1[i] = s - (k - i);
        s2[i] = (k + n - i) - s;
    }
    // w[i][c]: scaled simplex volumes; t[i][c]: branch probabilities
    const double huge = std::numeric_limits<double>::max();
    const double tiny = std::numeric_limits<double>::denorm_min();
    std::vector<std::vector<double>> w(n, std::vector<double>(n + 1, 0.0));
    std::vector<std::vector<double>> t(std::max(n - 1, 0), std::vector<double>(n, 0.0));
    w[0][1] = huge;
    for (int i = 2; i <= n; ++i) {
        const int r = i - 1;
        for (int c = 0; c < i; ++c) {
            const double a = w[r - 1][c + 1] * s1[c] / i;
            const double b = w[r - 1][c] * s2[n - i + c] / i;
            w[r][c + 1] = a + b;
            const double denom = w[r][c + 1] + tiny;
            t[r - 1][c] = s2[n - i + c] > s1[c] ? b / denom : 1.0 - a / denom;
        }
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(n, 0.0);
    double sm = 0.0, pr = 1.0;
    int j = k;
    for (int i = n - 1; i >= 1; --i) {
        const bool e = unit(rng) <= t[i - 1][j];
        const double sx = std::pow(unit(rng), 1.0 / i);
        sm += (1.0 - sx) * pr * s / (i + 1);
        pr *= sx;
        x[n - i - 1] = sm + pr * (e ? 1.0 : 0.0);
        if (e) {
            s -= 1.0;
            --j;
        }
    }
    x[n - 1] = sm + pr * s;
    std::shuffle(x.begin(), x.end(), rng);
    return x;
}

std::string to_string(PriorityGroup group) {
    switch (group) {
        case PriorityGroup::hp: return "HP";
        case PriorityGroup::mp: return "MP";
        case PriorityGroup::lp: return "LP";
    }
    return "?";
}

std::vector<int> group_ranks(int n, PriorityGroup group) {
    const int third = n / 3;
    int lo = 1, hi = third;
    if (group == PriorityGroup::mp) {
        lo = third + 1;
        hi = 2 * third;
    } else if (group == PriorityGroup::lp) {
        lo = 2 * third + 1;
        hi = n;
    }
    std::vector<int> out;
    for (int r = lo; r <= hi; ++r) out.push_back(r);
    return out;
}

TaskSet generate_taskset(const GeneratorSpec& spec, double target, std::mt19937_64& rng) {
    if (spec.n_tasks < 1 || spec.period_menu.empty()) throw GenerationError("empty generator specification");
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
        const auto u = rand_fixed_sum(spec.n_tasks, target, rng);
        std::vector<TaskSpec> tasks;
        double achieved = 0.0;
        bool ok = true;
        for (int i = 0; i < spec.n_tasks; ++i) {
            TaskSpec t;
            t.id = i + 1;
            const double ui = u[static_cast<std::size_t>(i)];
            // periods whose rounded WCET needs no clamping; the whole menu if none
            std::vector<Millis> fit;
            for (const Millis T : spec.period_menu) {
                const Millis c = std::llround(ui * static_cast<double>(T));
                if (c >= 1 && c <= std::min(spec.wcet_max, T - 1)) fit.push_back(T);
            }
            const auto& menu = fit.empty() ? spec.period_menu : fit;
            t.period = menu[std::uniform_int_distribution<std::size_t>(0, menu.size() - 1)(rng)];
            t.deadline = t.period;
            const Millis cap = std::min(spec.wcet_max, t.period - 1);
            if (cap < 1) {
                ok = false;
                break;
            }
            t.wcet = std::clamp<Millis>(std::llround(ui * static_cast<double>(t.period)), 1, cap);
            achieved += t.utilization();
            tasks.push_back(t);
        }
        if (!ok || std::abs(achieved - target) > spec.tolerance) continue;
        auto ts = assign_rm_priorities(TaskSet(std::move(tasks)));
        if (validate(ts).ok()) return ts;
    }
    throw GenerationError("no task set within tolerance of utilization " + std::to_string(target));
}

namespace {

struct Unit {
    int n = 0;
    int range = 0;
    std::uint64_t seed = 0;
};

// Percent per group for one (n, range, seed) cell.
std::array<double, 3> run_unit(const SweepSpec& spec, const Unit& unit) {
    GeneratorSpec gen = spec.generator;
    gen.n_tasks = unit.n;
    const double lo = 0.02 + 0.1 * unit.range, hi = 0.18 + 0.1 * unit.range;
    std::array<double, 3> score{0, 0, 0};
    for (int s = 0; s < spec.sets_per_range; ++s) {
        const std::uint64_t index = static_cast<std::uint64_t>(unit.n) * 1'000'000 +
                                    static_cast<std::uint64_t>(unit.range) * 10'000 + static_cast<std::uint64_t>(s);
        auto rng = make_stream(unit.seed, "generation", index);
        const double target = std::uniform_real_distribution<double>(lo, hi)(rng);
        const auto ts = generate_taskset(gen, target, rng);
        const auto order = ts.by_priority();
        for (int g = 0; g < 3; ++g) {
            const auto ranks = group_ranks(unit.n, static_cast<PriorityGroup>(g));
            if (ranks.empty()) continue;
            int positive = 0;
            for (const int r : ranks) {
                const auto peak = peak_delay(order[static_cast<std::size_t>(r - 1)], ts);
                positive += peak && *peak > 0;
            }
            score[static_cast<std::size_t>(g)] += static_cast<double>(positive) / static_cast<double>(ranks.size());
        }
    }
    for (auto& v : score) v = 100.0 * v / spec.sets_per_range;
    return score;
}

}  // namespace

std::vector<SweepRow> schedulability_sweep(const SweepSpec& spec) {
    std::vector<Unit> units;
    for (const int n : spec.task_counts)
        for (const auto seed : spec.seeds)
            for (int r = 0; r < spec.ranges; ++r) units.push_back({n, r, seed});
    std::vector<std::array<double, 3>> results(units.size());

    unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(units.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    auto worker = [&](unsigned id) {
        try {
            for (std::size_t i; (i = next.fetch_add(1)) < units.size();) results[i] = run_unit(spec, units[i]);
        } catch (...) {
            errors[id] = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < units.size(); ++i)
        for (int g = 0; g < 3; ++g) {
            SweepRow row;
            row.n_tasks = units[i].n;
            row.range = units[i].range;
            row.u_low = 0.02 + 0.1 * units[i].range;
            row.u_high = 0.18 + 0.1 * units[i].range;
            row.group = static_cast<PriorityGroup>(g);
            row.seed = units[i].seed;
            row.sets = spec.sets_per_range;
            row.percent = results[i][static_cast<std::size_t>(g)];
            rows.push_back(row);
        }
    return rows;
}

std::vector<SweepRow> aggregate_over_seeds(const std::vector<SweepRow>& rows) {
    std::map<std::tuple<int, int, int>, std::pair<SweepRow, int>> acc;
    std::vector<std::tuple<int, int, int>> order;
    for (const auto& r : rows) {
        const auto key = std::make_tuple(r.n_tasks, r.range, static_cast<int>(r.group));
        auto [it, fresh] = acc.try_emplace(key, r, 0);
        if (fresh) {
            order.push_back(key);
            it->second.first.percent = 0.0;
            it->second.first.sets = 0;
            it->second.first.seed = 0;
        }
        it->second.first.percent += r.percent;
        it->second.first.sets += r.sets;
        ++it->second.second;
    }
    std::sort(order.begin(), order.end());
    std::vector<SweepRow> out;
    for (const auto& key : order) {
        auto [row, count] = acc.at(key);
        row.percent /= count;
        out.push_back(row);
    }
    return out;
}

}  // namespace delayguard
