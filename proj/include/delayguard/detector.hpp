#pragma once

#include <deque>
#include <stdexcept>

#include <Eigen/Dense>

namespace delayguard {

class DetectorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// w = res' Sigma^{-1} res. Throws DetectorError when Sigma is singular.
double chi_square_statistic(const Eigen::VectorXd& res, const Eigen::MatrixXd& sigma);

/// CDF of the chi-square distribution, integrated numerically from the density.
double chi_square_cdf(double x, double dof);

/// Upper quantile: the x with P(chi2(dof) > x) = tail, by bisection on the CDF.
double chi_square_upper_quantile(double dof, double tail);

/// Threshold on g (the window mean of w) for a target false-alarm rate.
/// N_w * g ~ chi2(N_w * m) under nominal residues, so Th = q_{1-far} / N_w.
double threshold_for_far(int m, int window, double far);

struct DetectorStep {
    double w = 0.0;
    double g = 0.0;
    bool alarm = false;
};

/// Windowed chi-square detector. Before the window fills, g averages over the
/// samples seen so far and no alarm is raised.
class DetectorState {
public:
    DetectorState(const Eigen::MatrixXd& residue_cov, int window, double threshold);

    DetectorStep step(const Eigen::VectorXd& res);
    void reset() { buffer_.clear(); }

    int dof() const { return static_cast<int>(sigma_.rows()); }
    int window() const { return window_; }
    double threshold() const { return threshold_; }
    std::size_t buffered() const { return buffer_.size(); }

private:
    Eigen::MatrixXd sigma_;
    Eigen::LDLT<Eigen::MatrixXd> factor_;
    int window_;
    double threshold_;
    std::deque<double> buffer_;
};

}  // namespace delayguard
