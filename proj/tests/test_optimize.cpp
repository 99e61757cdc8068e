#include <doctest.h>

#include "ssmimpute/errors.hpp"
#include "ssmimpute/optimize.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace ssmimpute;

TEST_CASE("nelder_mead minimizes a shifted quadratic") {
    auto f = [](const Eigen::VectorXd& x) {
        return (x[0] - 1.5) * (x[0] - 1.5) + 2.0 * (x[1] + 0.5) * (x[1] + 0.5);
    };
    auto r = nelder_mead(f, Eigen::VectorXd::Zero(2), 0.5, 1e-9, 2000);
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.5).epsilon(1e-5));
    CHECK(r.x[1] == doctest::Approx(-0.5).epsilon(1e-5));
}

namespace {

// theta constant, observed through unit regressors: y_t = theta + e, e ~ N(0, v)
ObservationSeries constant_signal(int T, double theta, double v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> stdn(0.0, 1.0);
    Eigen::VectorXd y(T);
    for (int t = 0; t < T; ++t) y[t] = theta + std::sqrt(v) * stdn(rng);
    return fully_observed(y);
}

}  // namespace

TEST_CASE("MLE of the observation variance is consistent at T=2000") {
    const int T = 2000;
    auto y = constant_signal(T, 0.7, 1.0, 2024);
    auto build = [T](const StructuralParams& p) {
        return testsupport::scalar_system(1.0, 0.0, 1.0, p.value("obs_var"), 0.0, 100.0, T);
    };
    auto report = fit_structural_params(build, make_params({"obs_var"}, {0.3}), y);
    CHECK(report.converged);
    CHECK(report.params.value("obs_var") == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("restarts from spread log values agree") {
    const int T = 400;
    auto y = constant_signal(T, 0.0, 1.0, 77);
    auto build = [T](const StructuralParams& p) {
        return testsupport::scalar_system(1.0, 0.0, 1.0, p.value("obs_var"), 0.0, 100.0, T);
    };
    auto lo = fit_structural_params(build, make_params({"obs_var"}, {std::exp(-2.0)}), y);
    auto hi = fit_structural_params(build, make_params({"obs_var"}, {std::exp(2.0)}), y);
    CHECK(std::abs(lo.params.value(0) - hi.params.value(0)) <
          1e-3 * std::abs(hi.params.value(0)));
}

TEST_CASE("loglik is a local maximum at the fitted variance") {
    const int T = 600;
    auto y = constant_signal(T, 0.0, 0.5, 5);
    auto build = [T](const StructuralParams& p) {
        return testsupport::scalar_system(1.0, 0.0, 1.0, p.value("obs_var"), 0.0, 100.0, T);
    };
    auto report = fit_structural_params(build, make_params({"obs_var"}, {1.0}), y);
    const double vhat = report.params.value(0);
    auto ll = [&](double v) {
        return log_likelihood(testsupport::scalar_system(1.0, 0.0, 1.0, v, 0.0, 100.0, T), y);
    };
    CHECK(ll(vhat * 1.05) < report.loglik);
    CHECK(ll(vhat * 0.95) < report.loglik);
}

TEST_CASE("a fixed model (no free parameters) is evaluated once") {
    const int T = 50;
    auto y = constant_signal(T, 0.0, 1.0, 8);
    auto build = [T](const StructuralParams&) {
        return testsupport::scalar_system(1.0, 0.0, 1.0, 1.0, 0.0, 100.0, T);
    };
    auto report = fit_structural_params(build, StructuralParams{}, y);
    CHECK(report.converged);
    CHECK(report.evals == 1);
    CHECK(report.loglik == log_likelihood(build(StructuralParams{}), y));
}

TEST_CASE("contract errors") {
    const int T = 30;
    auto build = [T](const StructuralParams& p) {
        return testsupport::scalar_system(1.0, 0.0, 1.0, p.value("obs_var"), 0.0, 100.0, T);
    };
    auto y = constant_signal(T, 0.0, 1.0, 3);
    for (auto& o : y.observed) o = 0;
    CHECK_THROWS_AS(fit_structural_params(build, make_params({"obs_var"}, {1.0}), y),
                    ContractError);
    for (int t = 0; t < 5; ++t) y.observed[static_cast<std::size_t>(t)] = 1;
    CHECK_THROWS_AS(fit_structural_params(build, make_params({"obs_var"}, {1.0}), y),
                    ContractError);

    CHECK_THROWS_AS(make_params({"a"}, {-1.0}), ContractError);
    CHECK_THROWS_AS(make_params({"a", "b"}, {1.0}), ContractError);
}
