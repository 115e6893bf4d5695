#include "delayguard/control.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "delayguard/io.hpp"
#include "delayguard/rta.hpp"

namespace delayguard {

using nlohmann::json;

namespace {

std::string dims(const MatrixXd& M) { return std::to_string(M.rows()) + "x" + std::to_string(M.cols()); }

double min_eigenvalue(const MatrixXd& S) {
    if (S.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_psd(const MatrixXd& S, double tol = 1e-9) {
    if (!S.isApprox(S.transpose(), 1e-9) && (S - S.transpose()).norm() > 1e-12) return false;
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    return min_eigenvalue(S) >= -tol * scale;
}

// Symmetric square root of a PSD matrix, used to colour Gaussian noise.
MatrixXd psd_sqrt(const MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

MatrixXd matrix_from_json(const json& j, const std::string& where) {
    if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty()) throw FormatError(where + ": expected a non-empty array of rows");
    const bool nested = j[0].is_array();
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = nested ? static_cast<Eigen::Index>(j[0].size()) : 1;
    MatrixXd M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (nested) {
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
                throw FormatError(where + ": ragged matrix rows");
            for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        } else {
            M(r, 0) = row.get<double>();
        }
    }
    return M;
}

json matrix_to_json(const MatrixXd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void check_plant(const PlantModel& p) {
    const auto n = p.A.rows();
    auto fail = [&](const std::string& what) { throw SynthesisError("plant '" + p.name + "': " + what); };
    if (n == 0 || p.A.cols() != n) fail("A must be square, got " + dims(p.A));
    if (p.B.rows() != n || p.B.cols() == 0) fail("B must have n rows, got " + dims(p.B));
    if (p.C.cols() != n || p.C.rows() == 0) fail("C must have n columns, got " + dims(p.C));
    const auto np = n + p.B.cols();
    if (p.process_noise.rows() != n || p.process_noise.cols() != n) fail("process noise must be n x n");
    if (p.measurement_noise.rows() != p.C.rows() || p.measurement_noise.cols() != p.C.rows())
        fail("measurement noise must be m x m");
    if (p.Q.rows() != np || p.Q.cols() != np) fail("Q must be (n+p) x (n+p), got " + dims(p.Q));
    if (p.R.rows() != p.B.cols() || p.R.cols() != p.B.cols()) fail("R must be p x p");
    if (p.x0.size() != n) fail("x0 must have n entries");
    if (p.horizon < 1) fail("horizon must be at least 1");
    if (!is_psd(p.Q)) fail("Q must be symmetric positive semidefinite");
    if (!is_psd(p.process_noise) || !is_psd(p.measurement_noise)) fail("noise covariances must be PSD");
    if (!p.R.isApprox(p.R.transpose()) || min_eigenvalue(p.R) <= 0.0) fail("R must be symmetric positive definite");
    if (p.detector.window < 1) fail("detector window must be at least 1");
    if (!(p.detector.far > 0.0 && p.detector.far < 1.0)) fail("detector false-alarm rate must lie in (0, 1)");
}

PlantModel plant_from_json(const json& doc) {
    reject_unknown_fields(doc,
                          {"name", "description", "A", "B", "C", "process_noise", "measurement_noise", "Q", "R",
                           "horizon", "x0", "cost_threshold", "detector"},
                          "plant");
    auto need = [&](const char* key) -> const json& {
        if (!doc.contains(key)) throw FormatError(std::string("plant: missing field '") + key + "'");
        return doc.at(key);
    };
    PlantModel p;
    p.name = doc.value("name", "");
    p.A = matrix_from_json(need("A"), "A");
    p.B = matrix_from_json(need("B"), "B");
    p.C = matrix_from_json(need("C"), "C");
    p.process_noise = matrix_from_json(need("process_noise"), "process_noise");
    p.measurement_noise = matrix_from_json(need("measurement_noise"), "measurement_noise");
    p.Q = matrix_from_json(need("Q"), "Q");
    p.R = matrix_from_json(need("R"), "R");
    p.horizon = doc.value("horizon", 30);
    p.x0 = matrix_from_json(need("x0"), "x0").col(0);
    if (doc.contains("cost_threshold")) p.cost_threshold = doc["cost_threshold"].get<double>();
    if (doc.contains("detector")) {
        const auto& d = doc["detector"];
        reject_unknown_fields(d, {"window", "far"}, "plant.detector");
        p.detector.window = d.value("window", 5);
        p.detector.far = d.value("far", 0.05);
    }
    try {
        check_plant(p);
    } catch (const SynthesisError& e) {
        throw FormatError(e.what());
    }
    return p;
}

json plant_to_json(const PlantModel& p) {
    json x0 = json::array();
    for (Eigen::Index i = 0; i < p.x0.size(); ++i) x0.push_back(p.x0(i));
    json doc = {{"name", p.name},
                {"A", matrix_to_json(p.A)},
                {"B", matrix_to_json(p.B)},
                {"C", matrix_to_json(p.C)},
                {"process_noise", matrix_to_json(p.process_noise)},
                {"measurement_noise", matrix_to_json(p.measurement_noise)},
                {"Q", matrix_to_json(p.Q)},
                {"R", matrix_to_json(p.R)},
                {"horizon", p.horizon},
                {"x0", x0},
                {"detector", {{"window", p.detector.window}, {"far", p.detector.far}}}};
    if (p.cost_threshold) doc["cost_threshold"] = *p.cost_threshold;
    return doc;
}

PlantModel load_plant(const std::filesystem::path& path) {
    auto p = plant_from_json(read_json_file(path));
    if (p.name.empty()) p.name = path.stem().string();
    return p;
}

AugmentedSystem discretize_with_delay(const PlantModel& plant, double period, double delay, Discretization mode) {
    if (!(period > 0.0)) throw std::invalid_argument("discretization period must be positive");
    if (delay < 0.0 || delay > period)
        throw std::invalid_argument("actuation delay " + std::to_string(delay) + " outside [0, " +
                                    std::to_string(period) + "]");
    const auto n = plant.A.rows();
    const auto p = plant.B.cols();
    const auto m = plant.C.rows();
    AugmentedSystem s;
    s.period = period;
    s.delay = delay;
    s.mode = mode;
    if (mode == Discretization::first_order) {
        s.Phi = MatrixXd::Identity(n, n) + plant.A * period;
        s.Gamma0 = (period - delay) * plant.B;
        s.Gamma1 = delay * plant.B;
    } else {
        // expm([[A, B], [0, 0]] t) = [[e^{At}, int_0^t e^{As} ds B], [0, I]]
        MatrixXd M = MatrixXd::Zero(n + p, n + p);
        M.topLeftCorner(n, n) = plant.A;
        M.topRightCorner(n, p) = plant.B;
        auto integral = [&](double t) -> MatrixXd {
            MatrixXd E = (M * t).exp();
            return E.topRightCorner(n, p);
        };
        s.Phi = (plant.A * period).exp();
        const MatrixXd full = integral(period);
        s.Gamma0 = integral(period - delay);
        s.Gamma1 = full - s.Gamma0;
    }
    s.Phi_aug = MatrixXd::Zero(n + p, n + p);
    s.Phi_aug.topLeftCorner(n, n) = s.Phi;
    s.Phi_aug.topRightCorner(n, p) = s.Gamma1;
    s.Gamma_aug = MatrixXd::Zero(n + p, p);
    s.Gamma_aug.topRows(n) = s.Gamma0;
    s.Gamma_aug.bottomRows(p) = MatrixXd::Identity(p, p);
    s.C_aug = MatrixXd::Zero(m, n + p);
    s.C_aug.leftCols(n) = plant.C;
    return s;
}

AugmentedSystem discretize_with_delay_ms(const PlantModel& plant, Millis period, Millis delay, Discretization mode) {
    if (delay < 0 || delay > period)
        throw std::invalid_argument("actuation delay " + std::to_string(delay) + " ms outside [0, " +
                                    std::to_string(period) + "] ms");
    return discretize_with_delay(plant, static_cast<double>(period) / 1000.0, static_cast<double>(delay) / 1000.0,
                                 mode);
}

LqrResult finite_horizon_lqr(const MatrixXd& Phi, const MatrixXd& Gamma, const MatrixXd& Q, const MatrixXd& R,
                             int horizon) {
    if (horizon < 1) throw SynthesisError("LQR horizon must be at least 1");
    MatrixXd P = Q;
    MatrixXd K = MatrixXd::Zero(Gamma.cols(), Phi.rows());
    for (int step = 0; step < horizon; ++step) {
        const MatrixXd S = R + Gamma.transpose() * P * Gamma;
        K = S.ldlt().solve(Gamma.transpose() * P * Phi);
        MatrixXd next = Q + Phi.transpose() * P * (Phi - Gamma * K);
        next = 0.5 * (next + next.transpose());
        if (!next.allFinite())
            throw SynthesisError("Riccati recursion diverged at backward step " + std::to_string(step + 1));
        if (!is_psd(next, 1e-8))
            throw SynthesisError("Riccati cost-to-go lost positive semidefiniteness at step " + std::to_string(step + 1));
        P = std::move(next);
    }
    return {K, P};
}

KalmanResult steady_state_kalman(const MatrixXd& Phi, const MatrixXd& C, const MatrixXd& W, const MatrixXd& V) {
    const auto n = Phi.rows();
    const auto m = C.rows();
    KalmanResult out;
    out.P = W;
    out.L = MatrixXd::Zero(n, m);
    if (W.isZero(0.0)) {
        out.residue_cov = V;
        return out;
    }
    constexpr int max_iterations = 100000;
    for (int it = 1; it <= max_iterations; ++it) {
        const MatrixXd S = C * out.P * C.transpose() + V;
        const MatrixXd gain = Phi * out.P * C.transpose() * S.inverse();
        MatrixXd next = Phi * out.P * Phi.transpose() + W - gain * C * out.P * Phi.transpose();
        next = 0.5 * (next + next.transpose());
        if (!next.allFinite()) throw SynthesisError("filter Riccati iteration diverged");
        const double change = (next - out.P).norm();
        out.P = std::move(next);
        out.iterations = it;
        if (change <= 1e-13 * std::max(1.0, out.P.norm())) break;
        if (it == max_iterations) throw SynthesisError("filter Riccati iteration did not converge");
    }
    out.residue_cov = C * out.P * C.transpose() + V;
    out.L = Phi * out.P * C.transpose() * out.residue_cov.inverse();
    return out;
}

ControllerGains synthesize_gains(const AugmentedSystem& sys, const PlantModel& plant) {
    const auto n = sys.Phi.rows();
    const auto p = sys.Gamma0.cols();
    const auto m = sys.C_aug.rows();
    ControllerGains g;
    g.K_aug = finite_horizon_lqr(sys.Phi_aug, sys.Gamma_aug, plant.Q, plant.R, plant.horizon).K;
    g.riccati_steps = plant.horizon;
    const auto kf = steady_state_kalman(sys.Phi, sys.C_aug.leftCols(n), plant.process_noise, plant.measurement_noise);
    g.L_aug = MatrixXd::Zero(n + p, m);
    g.L_aug.topRows(n) = kf.L;
    g.residue_cov = kf.residue_cov;
    g.kalman_iterations = kf.iterations;
    return g;
}

double spectral_radius(const MatrixXd& M) {
    Eigen::EigenSolver<MatrixXd> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double closed_loop_spectral_radius(const AugmentedSystem& sys, const ControllerGains& gains) {
    return spectral_radius(sys.Phi_aug - sys.Gamma_aug * gains.K_aug);
}

double closed_loop_cost(const AugmentedSystem& truth, const AugmentedSystem& model, const ControllerGains& gains,
                        const PlantModel& plant, std::uint64_t seed, const CostOptions& opts) {
    const auto n = truth.Phi.rows();
    const auto p = truth.Gamma0.cols();
    const auto m = truth.C_aug.rows();
    const MatrixXd w_root = psd_sqrt(plant.process_noise);
    const MatrixXd v_root = psd_sqrt(plant.measurement_noise);
    const int rollouts = opts.deterministic ? 1 : std::max(1, opts.rollouts);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Eigen::Index k) {
        VectorXd e(k);
        for (Eigen::Index i = 0; i < k; ++i) e(i) = normal(rng);
        return e;
    };

    double total = 0.0;
    for (int r = 0; r < rollouts; ++r) {
        VectorXd z = VectorXd::Zero(n + p);
        z.head(n) = plant.x0;
        VectorXd zhat = z;
        double J = 0.0;
        for (int k = 0; k <= plant.horizon; ++k) {
            const VectorXd u = -gains.K_aug * zhat;
            J += z.dot(plant.Q * z) + u.dot(plant.R * u);
            VectorXd y = truth.C_aug * z;
            VectorXd w = VectorXd::Zero(n + p);
            if (!opts.deterministic) {
                y += v_root * draw(m);
                w.head(n) = w_root * draw(n);
            }
            const VectorXd res = y - model.C_aug * zhat;
            z = truth.Phi_aug * z + truth.Gamma_aug * u + w;
            zhat = model.Phi_aug * zhat + model.Gamma_aug * u + gains.L_aug * res;
        }
        total += J;
    }
    return total / rollouts;
}

double closed_loop_cost(const AugmentedSystem& sys, const ControllerGains& gains, const PlantModel& plant,
                        std::uint64_t seed, const CostOptions& opts) {
    return closed_loop_cost(sys, sys, gains, plant, seed, opts);
}

MaxDelayResult max_admissible_delay(const PlantModel& plant, const TaskSpec& victim, const TaskSet& taskset,
                                    std::uint64_t seed, const CostOptions& opts) {
    MaxDelayResult out;
    out.peak = peak_delay(victim, taskset);
    if (!out.peak) return out;
    for (Millis d = 0; d <= *out.peak; ++d) {
        DelayCostRow row;
        row.delay = d;
        const auto r = victim_wcrt_uniform(victim, taskset, d);
        if (!r) {
            row.cost = std::numeric_limits<double>::infinity();
            out.rows.push_back(row);
            continue;
        }
        row.response = *r;
        row.actuation_delay = d + *r;
        const auto sys = discretize_with_delay_ms(plant, victim.period, row.actuation_delay);
        const auto gains = synthesize_gains(sys, plant);
        row.cost = closed_loop_cost(sys, gains, plant, seed, opts);
        out.rows.push_back(row);
    }
    out.nominal_cost = out.rows.front().cost;
    out.threshold = plant.cost_threshold.value_or(1.05 * out.nominal_cost);
    for (auto& row : out.rows) {
        row.admissible = row.cost <= out.threshold;
        if (row.admissible) out.max_delay = row.delay;
    }
    return out;
}

}  // namespace delayguard
