#include "delayguard/cosim.hpp"

#include <algorithm>
#include <ostream>
#include <random>

#include "delayguard/rng.hpp"
#include "delayguard/rta.hpp"

namespace delayguard {

namespace {

MatrixXd psd_root(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

class PlantLoop {
public:
    PlantLoop(const TaskSpec& task, const PlantModel& plant, Millis nominal_delay, Millis mitigated_delay,
              std::optional<double> threshold, std::uint64_t seed)
        : task_(task), plant_(plant), nominal_delay_(nominal_delay), mitigated_delay_(mitigated_delay),
          rng_(make_stream(seed, "noise", static_cast<std::uint64_t>(task.id))),
          w_root_(psd_root(plant.process_noise)), v_root_(psd_root(plant.measurement_noise)) {
        design(nominal_delay_);
        const double th = threshold.value_or(threshold_for_far(plant.m(), plant.detector.window, plant.detector.far));
        detector_.emplace(gains_.residue_cov, plant.detector.window, th);
        x_ = plant.x0;
        zhat_ = VectorXd::Zero(plant.n() + plant.p());
        zhat_.head(plant.n()) = plant.x0;
        applied_prev_ = VectorXd::Zero(plant.p());
    }

    void protect() { design(mitigated_delay_); }
    void finished(const JobRecord& job) { finish_[job.job] = job.finish; }
    void hit(const JobRecord& job) { hits_[job.job] = true; }

    bool sample(std::int64_t k, Millis t, RunReport& report, const Eigen::VectorXd* bias) {
        Millis act = 0;
        if (k > 0) {
            // close period k-1, served by job number k
            const auto it = finish_.find(k);
            act = it == finish_.end() ? task_.period : std::min(task_.period, it->second - (t - task_.period));
            const auto& sys = system(act);
            VectorXd applied = u_;
            if (bias && hits_.contains(k)) applied += *bias;
            x_ = sys.Phi * x_ + sys.Gamma0 * applied + sys.Gamma1 * applied_prev_ + w_root_ * draw(plant_.n());
            applied_prev_ = applied;
            zhat_ = sys.Phi_aug * zhat_ + sys.Gamma_aug * u_ + gains_.L_aug * res_;
        }
        const VectorXd y = plant_.C * x_ + v_root_ * draw(plant_.m());
        res_ = y - plant_.C * zhat_.head(plant_.n());
        const auto step = detector_->step(res_);
        u_ = -gains_.K_aug * zhat_;
        VectorXd z(plant_.n() + plant_.p());
        z << x_, applied_prev_;
        cost_ += z.dot(plant_.Q * z) + u_.dot(plant_.R * u_);

        report.detector[task_.id].push_back(step);
        report.samples.push_back({t, task_.id, k, x_, zhat_.head(plant_.n()), u_, cost_, step.g,
                                  detector_->threshold(), step.alarm, act});
        return step.alarm;
    }

    double cost() const { return cost_; }
    double threshold() const { return detector_->threshold(); }

private:
    VectorXd draw(int n) {
        VectorXd e(n);
        for (int i = 0; i < n; ++i) e(i) = normal_(rng_);
        return e;
    }

    const AugmentedSystem& system(Millis act) {
        auto it = systems_.find(act);
        if (it == systems_.end()) it = systems_.emplace(act, discretize_with_delay_ms(plant_, task_.period, act)).first;
        return it->second;
    }

    void design(Millis act) { gains_ = synthesize_gains(system(act), plant_); }

    const TaskSpec& task_;
    const PlantModel& plant_;
    Millis nominal_delay_, mitigated_delay_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    MatrixXd w_root_, v_root_;
    std::map<Millis, AugmentedSystem> systems_;
    ControllerGains gains_;
    std::optional<DetectorState> detector_;
    VectorXd x_, zhat_, u_, res_, applied_prev_;
    double cost_ = 0.0;
    std::map<std::int64_t, Millis> finish_;
    std::map<std::int64_t, bool> hits_;
};

class Coupling : public SampleObserver {
public:
    Coupling(const SimConfig& cfg, RunReport& report) : cfg_(cfg), report_(report) {}

    std::map<TaskId, PlantLoop> loops;

    bool on_sample(TaskId task, std::int64_t k, Millis t) override {
        const auto it = loops.find(task);
        if (it == loops.end()) return false;
        const Eigen::VectorXd* bias = cfg_.attack && cfg_.attack->victim == task ? &cfg_.attack->fdi_bias : nullptr;
        return it->second.sample(k, t, report_, bias);
    }
    void on_finish(const JobRecord& job) override {
        if (const auto it = loops.find(job.task); it != loops.end()) it->second.finished(job);
    }
    void on_hit(const JobRecord& job) override {
        if (const auto it = loops.find(job.task); it != loops.end()) it->second.hit(job);
    }
    void on_protect(TaskId task) override {
        if (const auto it = loops.find(task); it != loops.end()) it->second.protect();
    }

private:
    const SimConfig& cfg_;
    RunReport& report_;
};

Millis actuation_bound(const TaskSpec& task, const TaskSet& ts, Millis delay) {
    const auto r = victim_wcrt_uniform(task, ts, delay);
    return r ? std::min(task.period, delay + *r) : task.period;
}

}  // namespace

RunReport cosimulate(const TaskSet& taskset, const std::map<TaskId, PlantModel>& plants, const SimConfig& config,
                     const DelayStore& sequences) {
    RunReport report;
    Coupling coupling(config, report);
    for (const auto& task : taskset.control_tasks()) {
        const auto pit = plants.find(task.id);
        if (pit == plants.end()) throw SimulationError("no plant for control task " + std::to_string(task.id));
        check_plant(pit->second);
        Millis worst = 0;
        if (config.mode == SimMode::pfp_d) {
            if (const auto s = sequences.find(task.id); s != sequences.end() && !s->second.delays.empty())
                worst = s->second.max();
        } else if (config.mode == SimMode::random_delay) {
            if (const auto r = config.random_delays.find(task.id); r != config.random_delays.end()) worst = r->second.cap;
        }
        const auto& spec = taskset.at(task.id);
        std::optional<double> th;
        if (const auto t = config.thresholds.find(task.id); t != config.thresholds.end()) th = t->second;
        coupling.loops.emplace(std::piecewise_construct, std::forward_as_tuple(task.id),
                               std::forward_as_tuple(spec, pit->second, actuation_bound(spec, taskset, 0),
                                                     actuation_bound(spec, taskset, worst), th, config.seed));
    }
    if (config.attack && config.attack->fdi_bias.size() != plants.at(config.attack->victim).p())
        throw SimulationError("attack bias size does not match the victim's input dimension");

    report.trace = run_schedule(taskset, config, sequences, &coupling);
    for (const auto& [id, loop] : coupling.loops) {
        report.cost[id] = loop.cost();
        report.thresholds[id] = loop.threshold();
    }
    report.fdi_attempts = report.trace.fdi_attempts;
    report.fdi_hits = report.trace.fdi_hits;
    report.deadline_misses = report.trace.deadline_misses;
    report.first_alarm = report.trace.first_alarm;
    return report;
}

void write_samples_csv(const RunReport& report, TaskId task, std::ostream& out) {
    const ControlSample* first = nullptr;
    for (const auto& s : report.samples)
        if (s.task == task) {
            first = &s;
            break;
        }
    out << "t";
    if (first) {
        for (Eigen::Index i = 0; i < first->state.size(); ++i) out << ",x" << i + 1;
        for (Eigen::Index i = 0; i < first->estimate.size(); ++i) out << ",xhat" << i + 1;
        for (Eigen::Index i = 0; i < first->u.size(); ++i) out << ",u" << i + 1;
    }
    out << ",J_cumulative,g,Th\n";
    for (const auto& s : report.samples) {
        if (s.task != task) continue;
        out << static_cast<double>(s.t) / 1000.0;
        for (Eigen::Index i = 0; i < s.state.size(); ++i) out << ',' << s.state(i);
        for (Eigen::Index i = 0; i < s.estimate.size(); ++i) out << ',' << s.estimate(i);
        for (Eigen::Index i = 0; i < s.u.size(); ++i) out << ',' << s.u(i);
        out << ',' << s.cost_cumulative << ',' << s.g << ',' << s.threshold << '\n';
    }
}

}  // namespace delayguard
