#include "delayguard/detector.hpp"

#include <cmath>
#include <numeric>

namespace delayguard {

namespace {

Eigen::LDLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& sigma) {
    if (sigma.rows() == 0 || sigma.rows() != sigma.cols()) throw DetectorError("residue covariance must be square");
    Eigen::LDLT<Eigen::MatrixXd> f(sigma);
    const auto d = f.vectorD();
    const double scale = std::max(1e-300, sigma.cwiseAbs().maxCoeff());
    if (f.info() != Eigen::Success || (d.array() <= 1e-12 * scale).any())
        throw DetectorError("residue covariance is singular or not positive definite");
    return f;
}

double log_density(double x, double k) {
    return (k / 2.0 - 1.0) * std::log(x) - x / 2.0 - (k / 2.0) * std::log(2.0) - std::lgamma(k / 2.0);
}

double density(double x, double k) {
    if (x <= 0.0) return (k == 2.0) ? 0.5 : 0.0;
    return std::exp(log_density(x, k));
}

double simpson(double a, double b, double k) {
    return (b - a) / 6.0 * (density(a, k) + 4.0 * density(0.5 * (a + b), k) + density(b, k));
}

double adaptive(double a, double b, double k, double whole, double tol, int depth) {
    const double mid = 0.5 * (a + b);
    const double left = simpson(a, mid, k), right = simpson(mid, b, k);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return adaptive(a, mid, k, left, tol / 2.0, depth - 1) + adaptive(mid, b, k, right, tol / 2.0, depth - 1);
}

}  // namespace

double chi_square_statistic(const Eigen::VectorXd& res, const Eigen::MatrixXd& sigma) {
    if (res.size() != sigma.rows()) throw DetectorError("residue and covariance dimensions differ");
    const auto f = factorize(sigma);
    return std::max(0.0, res.dot(f.solve(res)));
}

double chi_square_cdf(double x, double dof) {
    if (x <= 0.0) return 0.0;
    if (dof < 2.0) {
        // the density is unbounded at 0 for one degree of freedom; substitute
        // x = s^2 so the integrand 2 s f(s^2) is smooth
        const double root = std::sqrt(x);
        auto g = [dof](double s) { return s <= 0.0 ? (dof == 1.0 ? std::sqrt(2.0 / M_PI) : 0.0) : 2.0 * s * density(s * s, dof); };
        const int panels = 4000;
        const double h = root / panels;
        double acc = g(0.0) + g(root);
        for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * g(i * h);
        return std::min(1.0, acc * h / 3.0);
    }
    // integrate in unit slabs so the adaptive rule sees the peak
    double total = 0.0;
    for (double a = 0.0; a < x; a += 1.0) {
        const double b = std::min(x, a + 1.0);
        total += adaptive(a, b, dof, simpson(a, b, dof), 1e-13, 40);
    }
    return std::min(1.0, total);
}

double chi_square_upper_quantile(double dof, double tail) {
    if (!(tail > 0.0 && tail < 1.0)) throw DetectorError("tail probability must lie in (0, 1)");
    // Wilson-Hilferty start, then widen until the root is bracketed
    auto normal_quantile = [](double p) {
        double lo = -10.0, hi = 10.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    const double zq = normal_quantile(1.0 - tail);
    const double c = 2.0 / (9.0 * dof);
    const double guess = std::max(1e-6, dof * std::pow(1.0 - c + zq * std::sqrt(c), 3.0));
    double lo = guess / 2.0, hi = guess * 2.0;
    while (1.0 - chi_square_cdf(lo, dof) < tail && lo > 1e-12) lo /= 2.0;
    while (1.0 - chi_square_cdf(hi, dof) > tail) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (1.0 - chi_square_cdf(mid, dof) > tail ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double threshold_for_far(int m, int window, double far) {
    if (m < 1 || window < 1) throw DetectorError("dof and window must be positive");
    if (!(far > 0.0 && far < 1.0)) throw DetectorError("false-alarm rate must lie in (0, 1)");
    return chi_square_upper_quantile(static_cast<double>(m) * window, far) / window;
}

DetectorState::DetectorState(const Eigen::MatrixXd& residue_cov, int window, double threshold)
    : sigma_(residue_cov), factor_(factorize(residue_cov)), window_(window), threshold_(threshold) {
    if (window < 1) throw DetectorError("detector window must be at least 1");
    if (!(threshold > 0.0)) throw DetectorError("detector threshold must be positive");
}

DetectorStep DetectorState::step(const Eigen::VectorXd& res) {
    if (res.size() != sigma_.rows()) throw DetectorError("residue dimension mismatch");
    DetectorStep out;
    out.w = std::max(0.0, res.dot(factor_.solve(res)));
    buffer_.push_back(out.w);
    if (static_cast<int>(buffer_.size()) > window_) buffer_.pop_front();
    // recomputed each step so round-off cannot drift
    out.g = std::accumulate(buffer_.begin(), buffer_.end(), 0.0) / static_cast<double>(buffer_.size());
    // the threshold is calibrated for a full window
    out.alarm = static_cast<int>(buffer_.size()) == window_ && out.g > threshold_;
    return out;
}

}  // namespace delayguard
