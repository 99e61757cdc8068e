#include <doctest.h>

#include "ssmimpute/design.hpp"
#include "ssmimpute/errors.hpp"
#include "support.hpp"

#include <cmath>
#include <limits>

using namespace ssmimpute;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

TimeSeriesDataset tiny_dataset(int T, std::vector<int> missing_1based = {}) {
    TimeSeriesDataset ds = testsupport::synthetic_dataset(T, 99);
    for (int t1 : missing_1based) {
        ds.y_missing[static_cast<std::size_t>(t1 - 1)] = 1;
        ds.y[t1 - 1] = kNaN;
    }
    return ds;
}

ModelSpec spec_q1p1() {
    ModelSpec spec;
    spec.q = 1;
    spec.p = 1;
    spec.o = 0;
    spec.exposures = {"a"};
    spec.covariates = {"c"};
    return spec;
}

}  // namespace

TEST_CASE("derive_lag_missingness: definition, empty mask, pattern inflation") {
    std::vector<char> mask(10, 0);
    mask[4] = 1;  // t=5 missing (1-based)
    auto miss = derive_lag_missingness(mask, {1, 2});
    CHECK(miss[5] == std::vector<int>{1});  // t=6 misses lag 1
    CHECK(miss[6] == std::vector<int>{2});  // t=7 misses lag 2
    int total = 0;
    for (const auto& m : miss) total += static_cast<int>(m.size());
    CHECK(total == 2);

    auto none = derive_lag_missingness(std::vector<char>(10, 0), {1, 2, 3});
    for (const auto& m : none) CHECK(m.empty());

    // one missing y with lags {1,2,3} makes rows t+1..t+3 incomplete
    std::vector<char> mask2(12, 0);
    mask2[5] = 1;
    auto m3 = derive_lag_missingness(mask2, {1, 2, 3});
    CHECK(m3[6] == std::vector<int>{1});
    CHECK(m3[7] == std::vector<int>{2});
    CHECK(m3[8] == std::vector<int>{3});

    // positions are clipped at the series end
    std::vector<char> tail_mask(6, 0);
    tail_mask[5] = 1;
    auto clipped = derive_lag_missingness(tail_mask, {1, 2, 3});
    int n = 0;
    for (const auto& m : clipped) n += static_cast<int>(m.size());
    CHECK(n == 0);

    CHECK_THROWS_AS(derive_lag_missingness(mask, {}), ContractError);
    CHECK_THROWS_AS(derive_lag_missingness(mask, {0}), ContractError);
}

TEST_CASE("build_design: column order, burn-in, substitution, idempotence") {
    auto ds = tiny_dataset(12);
    auto spec = spec_q1p1();
    auto dm = build_design(ds, spec);

    CHECK(dm.d() == 5);
    CHECK(dm.colnames == std::vector<std::string>{"intercept", "y_lag1", "a_lag0", "a_lag1",
                                                  "c_lag0"});
    // F_t = (1, Y_{t-1}, A_t, A_{t-1}, C_t)
    for (int t = 1; t < 12; ++t) {
        CHECK(dm.X(t, 0) == 1.0);
        CHECK(dm.X(t, 1) == ds.y[t - 1]);
        CHECK(dm.X(t, 2) == ds.exposures[0].values[t]);
        CHECK(dm.X(t, 3) == ds.exposures[0].values[t - 1]);
        CHECK(dm.X(t, 4) == ds.covariates[0].values[t]);
    }
    CHECK(dm.burnin[0] == 1);
    CHECK(dm.burnin[1] == 0);
    for (int t = 0; t < 12; ++t) {
        CHECK(dm.incomplete[t] == 0);
        CHECK(dm.imputed[t] == 0);
    }

    // missing y at t=5 (1-based): row 6 incomplete without a fill-in
    auto ds2 = tiny_dataset(12, {5});
    auto dm2 = build_design(ds2, spec);
    CHECK(dm2.incomplete[5] == 1);
    CHECK(dm2.incomplete[6] == 0);

    Eigen::VectorXd fill = Eigen::VectorXd::Constant(12, kNaN);
    fill[4] = 7.0;
    auto dm3 = build_design(ds2, spec, &fill);
    CHECK(dm3.X(5, 1) == 7.0);
    CHECK(dm3.imputed[5] == 1);
    CHECK(dm3.incomplete[5] == 0);

    auto dm4 = build_design(ds2, spec, &fill);
    CHECK((dm3.X - dm4.X).cwiseAbs().maxCoeff() == 0.0);

    // observed data are never overwritten
    Eigen::VectorXd bad = Eigen::VectorXd::Constant(12, kNaN);
    bad[3] = 1.0;  // t=4 is observed
    CHECK_THROWS_AS(build_design(ds2, spec, &bad), ContractError);
}

TEST_CASE("realize_state_space: invariant, random walk, periodic jumps") {
    auto ds = tiny_dataset(1000);
    auto spec = spec_q1p1();
    auto dm = build_design(ds, spec);
    auto params = make_params({"obs_var"}, {0.5});

    auto sys = realize_state_space(spec, dm, params);
    CHECK(sys.ss.g_identity);
    CHECK(sys.ss.W.size() == 1);
    CHECK(sys.ss.W[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(sys.ss.V_at(0) == 0.5);
    CHECK(sys.ss.d == 5);
    CHECK(sys.ss.m0.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sys.ss.C0(0, 0) == 1e4);

    // random-walk intercept with fixed variance 1
    ModelSpec rw = spec;
    CoefficientDynamics dyn;
    dyn.kind = DynKind::random_walk;
    dyn.sigma2 = 1.0;
    rw.dynamics["intercept"] = dyn;
    auto sys2 = realize_state_space(rw, dm, params);
    CHECK(sys2.ss.W[0](0, 0) == 1.0);
    CHECK(sys2.ss.W[0].sum() == 1.0);

    // periodic-stable jumps land exactly at t=401 and t=701
    ModelSpec per = spec;
    CoefficientDynamics pdyn;
    pdyn.kind = DynKind::periodic_stable;
    pdyn.change_points = {400, 700};
    per.dynamics["a_lag0"] = pdyn;
    RealizeContext ctx;
    ctx.outcome_marginal_var = 2.0;
    auto sys3 = realize_state_space(per, dm, params, ctx);
    REQUIRE(static_cast<int>(sys3.ss.W.size()) == 1000);
    const int head = sys3.coef_state_index[2];  // a_lag0
    for (int t = 0; t < 1000; ++t) {
        const double expected = (t == 400 || t == 700) ? 1e3 * 2.0 : 0.0;
        CHECK(sys3.ss.W[static_cast<std::size_t>(t)](head, head) == expected);
    }

    // unresolved periodic coefficients cannot be realized
    ModelSpec un = spec;
    CoefficientDynamics udyn;
    udyn.kind = DynKind::periodic_stable;
    un.dynamics["a_lag0"] = udyn;
    CHECK_THROWS_AS(realize_state_space(un, dm, params), ContractError);
}

TEST_CASE("realize_state_space: AR dynamics expand into a companion block") {
    auto ds = tiny_dataset(50);
    auto spec = spec_q1p1();
    auto dm = build_design(ds, spec);
    CoefficientDynamics ar;
    ar.kind = DynKind::ar;
    ar.ar_phi = {0.4, 0.2};
    ar.sigma2 = 0.3;
    spec.dynamics["c_lag0"] = ar;

    auto sys = realize_state_space(spec, dm, make_params({"obs_var"}, {1.0}));
    CHECK(sys.ss.d == 6);
    const int head = sys.coef_state_index[4];
    CHECK(sys.ss.G[0](head, head) == 0.4);
    CHECK(sys.ss.G[0](head, head + 1) == 0.2);
    CHECK(sys.ss.G[0](head + 1, head) == 1.0);
    CHECK(sys.ss.G[0](head + 1, head + 1) == 0.0);
    CHECK(sys.ss.W[0](head, head) == 0.3);
    CHECK(sys.ss.F(10, head) == dm.X(10, 4));
    CHECK(sys.ss.F(10, head + 1) == 0.0);
    CHECK_FALSE(sys.ss.g_identity);

    // non-stationary AR rejected
    ModelSpec bad = spec_q1p1();
    CoefficientDynamics explosive;
    explosive.kind = DynKind::ar;
    explosive.ar_phi = {1.1};
    bad.dynamics["c_lag0"] = explosive;
    CHECK_THROWS_AS(bad.validate(50), ContractError);
}

TEST_CASE("invariant realization + filter reproduces the regression posterior") {
    auto ds = tiny_dataset(200);
    auto spec = spec_q1p1();
    auto dm = build_design(ds, spec);
    const double v = 0.1;
    auto sys = realize_state_space(spec, dm, make_params({"obs_var"}, {v}));

    ObservationSeries obs;
    obs.y = ds.y;
    obs.observed = dm.response_rows(ds.y_missing);
    auto bp = kalman_filter(sys.ss, obs);

    auto post = testsupport::conjugate_regression_posterior(dm.X, ds.y, obs.observed, v,
                                                            sys.ss.m0, sys.ss.C0);
    CHECK((bp.beliefs[199].mean - post.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((bp.beliefs[199].cov - post.cov).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("splice_complete_cases: identity, drop rule, Fig-1 inflation") {
    // no missingness: every row survives in order
    auto ds0 = tiny_dataset(20);
    auto spec = spec_q1p1();
    auto dm0 = build_design(ds0, spec);
    auto s0 = splice_complete_cases(ds0, dm0);
    CHECK(s0.ds.length() == 20);
    for (int i = 0; i < 20; ++i) CHECK(s0.orig_time[i] == i);

    // T=6 is below the survivor floor, so use a longer series with the same
    // shape: missing y at t=3, q=1 drops rows 3 and 4
    auto ds1 = tiny_dataset(30, {3});
    auto dm1 = build_design(ds1, spec);
    auto s1 = splice_complete_cases(ds1, dm1);
    CHECK(s1.ds.length() == 28);
    CHECK(s1.orig_time[0] == 0);
    CHECK(s1.orig_time[1] == 1);
    CHECK(s1.orig_time[2] == 4);  // rows 3 and 4 (1-based) are gone
    CHECK(s1.orig_time[3] == 5);
    CHECK(s1.dm.burnin[0] == 1);  // burn-in row survives, still flagged

    // lags {1,2,3}: one missing outcome removes 4 analysis rows
    ModelSpec deep = spec;
    deep.q = 3;
    auto ds2 = tiny_dataset(40, {10});
    auto dm2 = build_design(ds2, deep);
    auto s2 = splice_complete_cases(ds2, dm2);
    CHECK(s2.ds.length() == 36);

    // insufficient survivors
    auto ds3 = tiny_dataset(12, {2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    auto dm3 = build_design(ds3, spec);
    CHECK_THROWS_AS(splice_complete_cases(ds3, dm3), InsufficientDataError);
}

TEST_CASE("ModelSpec validation") {
    auto spec = spec_q1p1();
    spec.validate(100);

    ModelSpec bad_q = spec;
    bad_q.q = 0;
    CHECK_THROWS_AS(bad_q.validate(100), ContractError);

    ModelSpec unknown = spec;
    unknown.dynamics["nope"] = CoefficientDynamics{};
    CHECK_THROWS_AS(unknown.validate(100), ContractError);

    ModelSpec bad_points = spec;
    CoefficientDynamics dyn;
    dyn.kind = DynKind::periodic_stable;
    dyn.change_points = {50, 50};
    bad_points.dynamics["a_lag0"] = dyn;
    CHECK_THROWS_AS(bad_points.validate(100), ContractError);

    dyn.change_points = {150};
    bad_points.dynamics["a_lag0"] = dyn;
    CHECK_THROWS_AS(bad_points.validate(100), ContractError);

    CHECK(spec.n_coefficients() == 5);
    CHECK(spec.burnin_depth() == 1);
}
