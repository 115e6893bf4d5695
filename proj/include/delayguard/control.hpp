#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "delayguard/task_model.hpp"

namespace delayguard {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DetectorConfig {
    int window = 5;
    double far = 0.05;
};

/// Continuous LTI plant x' = A x + B u, y = C x + v. Time is in seconds.
/// Q weights the augmented state [x; u_prev] and is (n+p) x (n+p).
struct PlantModel {
    std::string name;
    MatrixXd A, B, C;
    MatrixXd process_noise;      // n x n, per-sample covariance of w
    MatrixXd measurement_noise;  // m x m
    MatrixXd Q, R;
    int horizon = 30;
    VectorXd x0;
    std::optional<double> cost_threshold;
    DetectorConfig detector;

    int n() const { return static_cast<int>(A.rows()); }
    int p() const { return static_cast<int>(B.cols()); }
    int m() const { return static_cast<int>(C.rows()); }
};

/// Throws SynthesisError describing the first dimensional or definiteness
/// problem found.
void check_plant(const PlantModel& plant);

PlantModel plant_from_json(const nlohmann::json& doc);
nlohmann::json plant_to_json(const PlantModel& plant);
PlantModel load_plant(const std::filesystem::path& path);

enum class Discretization { first_order, exact };

struct AugmentedSystem {
    double period = 0.0;  // seconds
    double delay = 0.0;   // actuation delay in seconds
    Discretization mode = Discretization::first_order;
    MatrixXd Phi, Gamma0, Gamma1;
    MatrixXd Phi_aug, Gamma_aug, C_aug;
};

/// First-order rule: Phi = I + A T, Gamma0 = (T - delay) B, Gamma1 = delay B.
/// Exact mode integrates e^{As} B through an augmented matrix exponential.
/// Accepts 0 <= delay <= T; throws std::invalid_argument otherwise.
AugmentedSystem discretize_with_delay(const PlantModel& plant, double period, double delay,
                                      Discretization mode = Discretization::first_order);
AugmentedSystem discretize_with_delay_ms(const PlantModel& plant, Millis period, Millis delay,
                                         Discretization mode = Discretization::first_order);

struct ControllerGains {
    MatrixXd K_aug;          // p x (n+p)
    MatrixXd L_aug;          // (n+p) x m, [L; 0]
    MatrixXd residue_cov;    // m x m, C P C' + V at the filter's steady state
    int riccati_steps = 0;
    int kalman_iterations = 0;
};

struct LqrResult {
    MatrixXd K;  // first-step gain
    MatrixXd P;  // cost-to-go at step 0
};

/// Backward finite-horizon Riccati recursion with terminal weight Q. The
/// cost-to-go is symmetrized each step and checked for PSD; loss of
/// definiteness or non-finite values throw SynthesisError.
LqrResult finite_horizon_lqr(const MatrixXd& Phi, const MatrixXd& Gamma, const MatrixXd& Q, const MatrixXd& R,
                             int horizon);

struct KalmanResult {
    MatrixXd L;           // predictor gain, n x m
    MatrixXd P;           // steady-state prior covariance
    MatrixXd residue_cov; // C P C' + V
    int iterations = 0;
};

/// Steady-state one-step predictor gain for x+ = Phi x + w, y = C x + v.
KalmanResult steady_state_kalman(const MatrixXd& Phi, const MatrixXd& C, const MatrixXd& W, const MatrixXd& V);

ControllerGains synthesize_gains(const AugmentedSystem& sys, const PlantModel& plant);

double spectral_radius(const MatrixXd& M);
double closed_loop_spectral_radius(const AugmentedSystem& sys, const ControllerGains& gains);

struct CostOptions {
    int rollouts = 20;
    bool deterministic = false;  // noise off, single rollout
};

/// J = sum_{k=0}^{N} z'Q z + u'R u for the estimator/controller loop of the
/// augmented model, averaged over seeded Gaussian rollouts. `truth` drives
/// the plant; `model` is what the controller's estimator assumes.
double closed_loop_cost(const AugmentedSystem& truth, const AugmentedSystem& model, const ControllerGains& gains,
                        const PlantModel& plant, std::uint64_t seed, const CostOptions& opts = {});
double closed_loop_cost(const AugmentedSystem& sys, const ControllerGains& gains, const PlantModel& plant,
                        std::uint64_t seed, const CostOptions& opts = {});

struct DelayCostRow {
    Millis delay = 0;
    Millis response = 0;         // R_v(delta)
    Millis actuation_delay = 0;  // delta + R_v(delta)
    double cost = 0.0;
    bool admissible = false;
};

struct MaxDelayResult {
    std::optional<Millis> peak;
    std::optional<Millis> max_delay;
    double nominal_cost = 0.0;
    double threshold = 0.0;
    std::vector<DelayCostRow> rows;
};

/// Scans delta in [0, peak]; at each point the controller is synthesized for
/// the actuation delay delta + R_v(delta) and its cost compared with the
/// plant's threshold (default 1.05 x the cost at delta = 0).
MaxDelayResult max_admissible_delay(const PlantModel& plant, const TaskSpec& victim, const TaskSet& taskset,
                                    std::uint64_t seed, const CostOptions& opts = {});

}  // namespace delayguard
