#pragma once

// Shared test utilities: independent oracles and small data builders.
// Everything here is deliberately written from the defining formulas rather
// than through the library's recursions, so it can stand as a cross-check.

#include "ssmimpute/dataset.hpp"
#include "ssmimpute/dlm.hpp"

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace testsupport {

// Conjugate Bayesian linear regression posterior for y_t = x_t' theta + e,
// e ~ N(0, v_t), prior theta ~ N(m0, C0), evaluated by direct normal
// equations: precision = C0^{-1} + sum x x' / v, mean = precision^{-1}
// (C0^{-1} m0 + sum x y / v). Rows where observed[t] == 0 are excluded.
struct ConjugatePosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

inline ConjugatePosterior conjugate_regression_posterior(const Eigen::MatrixXd& X,
                                                         const Eigen::VectorXd& y,
                                                         const std::vector<char>& observed,
                                                         double v, const Eigen::VectorXd& m0,
                                                         const Eigen::MatrixXd& C0) {
    const int d = static_cast<int>(X.cols());
    Eigen::MatrixXd precision = C0.inverse();
    Eigen::VectorXd rhs = precision * m0;
    for (int t = 0; t < X.rows(); ++t) {
        if (!observed[static_cast<std::size_t>(t)]) continue;
        const Eigen::VectorXd x = X.row(t);
        precision += x * x.transpose() / v;
        rhs += x * y[t] / v;
    }
    ConjugatePosterior out;
    out.cov = precision.inverse();
    out.mean = out.cov * rhs;
    (void)d;
    return out;
}

// d=1 convenience builders for hand-checked filter examples.
inline ssmimpute::StateSpace scalar_system(double g, double w, double f, double v, double m0,
                                           double c0, int T) {
    Eigen::MatrixXd G(1, 1), W(1, 1), C0(1, 1);
    G << g;
    W << w;
    C0 << c0;
    Eigen::MatrixXd F = Eigen::MatrixXd::Constant(T, 1, f);
    Eigen::VectorXd m(1);
    m << m0;
    return ssmimpute::make_constant_system(G, W, F, v, m, C0);
}

inline ssmimpute::ObservationSeries series_of(std::initializer_list<double> values,
                                              std::initializer_list<int> missing = {}) {
    Eigen::VectorXd y(static_cast<int>(values.size()));
    int i = 0;
    for (double v : values) y[i++] = v;
    ssmimpute::ObservationSeries s = ssmimpute::fully_observed(y);
    for (int t : missing) s.observed[static_cast<std::size_t>(t)] = 0;
    return s;
}

// Small synthetic regression dataset with AR(1) exposures, used across the
// imputer and simulation tests.
inline ssmimpute::TimeSeriesDataset synthetic_dataset(int T, std::uint64_t seed,
                                                      double rho = 0.5, double b0 = 2.0,
                                                      double b1 = -1.5, double b2 = -0.5,
                                                      double bc = -1.0, double v = 0.1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> stdn(0.0, 1.0);
    Eigen::VectorXd a(T + 1), c(T + 1);
    a[0] = stdn(rng);
    c[0] = stdn(rng);
    const double s = std::sqrt(1.0 - 0.3 * 0.3);
    for (int i = 1; i <= T; ++i) {
        a[i] = 0.3 * a[i - 1] + s * stdn(rng);
        c[i] = 0.3 * c[i - 1] + s * stdn(rng);
    }
    Eigen::VectorXd y(T + 1);
    y[0] = b0 / (1.0 - rho);
    const double sd = std::sqrt(v);
    for (int i = 1; i <= T; ++i)
        y[i] = b0 + rho * y[i - 1] + b1 * a[i] + b2 * a[i - 1] + bc * c[i] + sd * stdn(rng);

    ssmimpute::TimeSeriesDataset ds;
    ds.y = y.tail(T);
    ds.y_missing.assign(static_cast<std::size_t>(T), 0);
    ds.exposures.push_back({"a", a.tail(T)});
    ds.covariates.push_back({"c", c.tail(T)});
    return ds;
}

}  // namespace testsupport
