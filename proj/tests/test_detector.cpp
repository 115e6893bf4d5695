#include <doctest.h>

#include <cmath>
#include <random>

#include "delayguard/detector.hpp"

using namespace delayguard;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("chi-square statistic") {
    CHECK(chi_square_statistic(VectorXd::Zero(2), MatrixXd::Identity(2, 2)) == 0.0);
    CHECK(chi_square_statistic(VectorXd::Constant(1, 3.0), MatrixXd::Constant(1, 1, 4.0)) == doctest::Approx(9.0 / 4.0));
    VectorXd r(2);
    r << 3.0, 4.0;
    CHECK(chi_square_statistic(r, MatrixXd::Identity(2, 2)) == doctest::Approx(25.0));
    CHECK_THROWS_AS(chi_square_statistic(r, MatrixXd::Zero(2, 2)), DetectorError);
    MatrixXd singular(2, 2);
    singular << 1.0, 1.0, 1.0, 1.0;
    CHECK_THROWS_AS(chi_square_statistic(r, singular), DetectorError);
}

TEST_CASE("chi-square CDF against closed forms") {
    // dof 2: 1 - e^{-x/2}; dof 1: erf(sqrt(x/2))
    for (double x : {0.1, 1.0, 3.0, 7.5, 20.0}) {
        CHECK(chi_square_cdf(x, 2.0) == doctest::Approx(1.0 - std::exp(-x / 2.0)).epsilon(1e-9));
        CHECK(chi_square_cdf(x, 1.0) == doctest::Approx(std::erf(std::sqrt(x / 2.0))).epsilon(1e-7));
    }
    // dof 4: 1 - e^{-x/2}(1 + x/2)
    for (double x : {0.5, 4.0, 12.0})
        CHECK(chi_square_cdf(x, 4.0) == doctest::Approx(1.0 - std::exp(-x / 2.0) * (1.0 + x / 2.0)).epsilon(1e-9));
}

TEST_CASE("thresholds") {
    CHECK(threshold_for_far(1, 1, 0.05) == doctest::Approx(3.841459).epsilon(1e-6));
    const double q10 = chi_square_upper_quantile(10.0, 0.05);
    CHECK(q10 == doctest::Approx(18.307038).epsilon(1e-6));
    CHECK(threshold_for_far(2, 5, 0.05) == doctest::Approx(q10 / 5.0));
    CHECK(q10 / 10.0 == doctest::Approx(1.8307).epsilon(1e-4));
    // far -> 1 drives the threshold to 0
    double prev = threshold_for_far(2, 5, 0.9);
    for (double gap : {1e-2, 1e-4, 1e-8, 1e-12}) {
        const double th = threshold_for_far(2, 5, 1.0 - gap);
        CHECK(th < prev);
        prev = th;
    }
    CHECK(prev < 0.01);
    CHECK(threshold_for_far(2, 5, 0.5) > threshold_for_far(2, 5, 0.9));
    CHECK_THROWS_AS(threshold_for_far(2, 5, 0.0), DetectorError);
    CHECK_THROWS_AS(threshold_for_far(2, 5, 1.0), DetectorError);
}

TEST_CASE("threshold matches Monte Carlo of nominal windows") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n01;
    const double th = threshold_for_far(2, 5, 0.05);
    const int trials = 200000;
    int above = 0;
    for (int t = 0; t < trials; ++t) {
        double sum = 0.0;
        for (int i = 0; i < 10; ++i) {
            const double e = n01(rng);
            sum += e * e;
        }
        above += (sum / 5.0 > th);
    }
    CHECK(static_cast<double>(above) / trials == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("detector stepping") {
    const double th = threshold_for_far(2, 5, 0.05);
    DetectorState d(MatrixXd::Identity(2, 2), 5, th);
    for (int k = 0; k < 20; ++k) {
        auto s = d.step(VectorXd::Zero(2));
        CHECK(s.g == 0.0);
        CHECK_FALSE(s.alarm);
    }

    DetectorState edge(MatrixXd::Identity(1, 1), 3, 4.0);
    for (int k = 0; k < 5; ++k) CHECK_FALSE(edge.step(VectorXd::Constant(1, 2.0)).alarm);  // w == Th exactly

    DetectorState single(MatrixXd::Identity(1, 1), 1, 2.0);
    CHECK(single.step(VectorXd::Constant(1, 2.0)).alarm);  // w = 4 = 2 Th

    DetectorState warmup(MatrixXd::Identity(1, 1), 3, 1.0);
    CHECK_FALSE(warmup.step(VectorXd::Constant(1, 5.0)).alarm);
    CHECK_FALSE(warmup.step(VectorXd::Constant(1, 5.0)).alarm);
    CHECK(warmup.step(VectorXd::Constant(1, 5.0)).alarm);

    DetectorState partial(MatrixXd::Identity(1, 1), 4, 100.0);
    CHECK(partial.step(VectorXd::Constant(1, 2.0)).g == doctest::Approx(4.0));
    CHECK(partial.step(VectorXd::Zero(1)).g == doctest::Approx(2.0));
    CHECK(partial.buffered() == 2);
    for (int k = 0; k < 6; ++k) partial.step(VectorXd::Zero(1));
    CHECK(partial.buffered() == 4);
}

TEST_CASE("empirical false-alarm rate under nominal residues") {
    MatrixXd sigma(2, 2);
    sigma << 2.0, 0.6, 0.6, 1.0;
    Eigen::LLT<MatrixXd> chol(sigma);
    const MatrixXd L = chol.matrixL();
    DetectorState d(sigma, 5, threshold_for_far(2, 5, 0.05));
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n01;
    int alarms = 0;
    const int steps = 100000;
    for (int k = 0; k < steps; ++k) {
        VectorXd e(2);
        e << n01(rng), n01(rng);
        alarms += d.step(L * e).alarm;
    }
    const double rate = static_cast<double>(alarms) / steps;
    CHECK(rate > 0.03);
    CHECK(rate < 0.07);
}

TEST_CASE("statistic is invariant under orthogonal changes of coordinates") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 100; ++trial) {
        MatrixXd A = MatrixXd::NullaryExpr(3, 3, [&]() { return n01(rng); });
        MatrixXd sigma = A * A.transpose() + MatrixXd::Identity(3, 3);
        Eigen::HouseholderQR<MatrixXd> qr(MatrixXd::NullaryExpr(3, 3, [&]() { return n01(rng); }));
        MatrixXd U = qr.householderQ();
        VectorXd r = VectorXd::NullaryExpr(3, [&]() { return n01(rng); });
        CHECK(chi_square_statistic(U * r, U * sigma * U.transpose()) ==
              doctest::Approx(chi_square_statistic(r, sigma)).epsilon(1e-10));
    }
}
