#include "ssmimpute/imputers.hpp"

#include "ssmimpute/errors.hpp"
#include "ssmimpute/linalg.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ssmimpute {

namespace {

constexpr double kZ90 = 1.6448536269514722;  // Phi^{-1}(0.95)
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double observed_variance(const TimeSeriesDataset& ds) {
    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (int t = 0; t < ds.length(); ++t) {
        if (ds.y_missing[t]) continue;
        sum += ds.y[t];
        sum2 += ds.y[t] * ds.y[t];
        ++n;
    }
    if (n < 2) return 1.0;
    const double var = (sum2 - sum * sum / n) / (n - 1);
    return std::max(var, 1e-12);
}

std::vector<int> observed_times(const TimeSeriesDataset& ds) {
    std::vector<int> out;
    for (int t = 0; t < ds.length(); ++t)
        if (!ds.y_missing[t]) out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------
// baseline fills
// ---------------------------------------------------------------------------

Eigen::VectorXd mean_fill(const TimeSeriesDataset& ds) {
    const auto obs = observed_times(ds);
    double m = 0.0;
    for (int t : obs) m += ds.y[t];
    m /= static_cast<double>(obs.size());
    Eigen::VectorXd out = ds.y;
    for (int t = 0; t < ds.length(); ++t)
        if (ds.y_missing[t]) out[t] = m;
    return out;
}

Eigen::VectorXd locf_fill(const TimeSeriesDataset& ds) {
    const auto obs = observed_times(ds);
    Eigen::VectorXd out = ds.y;
    double last = ds.y[obs.front()];  // first gap backfills from the first observation
    for (int t = 0; t < ds.length(); ++t) {
        if (ds.y_missing[t]) out[t] = last;
        else last = ds.y[t];
    }
    return out;
}

Eigen::VectorXd linear_fill(const TimeSeriesDataset& ds) {
    const auto obs = observed_times(ds);
    Eigen::VectorXd out = ds.y;
    for (int t = 0; t < ds.length(); ++t) {
        if (!ds.y_missing[t]) continue;
        const auto next = std::lower_bound(obs.begin(), obs.end(), t);
        if (next == obs.begin()) {
            out[t] = ds.y[obs.front()];  // edge held flat
        } else if (next == obs.end()) {
            out[t] = ds.y[obs.back()];
        } else {
            const int hi = *next, lo = *(next - 1);
            const double w = static_cast<double>(t - lo) / (hi - lo);
            out[t] = (1.0 - w) * ds.y[lo] + w * ds.y[hi];
        }
    }
    return out;
}

Eigen::VectorXd spline_fill(const TimeSeriesDataset& ds) {
    const auto obs = observed_times(ds);
    if (static_cast<int>(obs.size()) < 4) {
        warn("spline imputation: fewer than 4 observed points, falling back to linear");
        return linear_fill(ds);
    }
    static const int gsl_off = [] {
        gsl_set_error_handler_off();
        return 0;
    }();
    (void)gsl_off;

    std::vector<double> xs(obs.size()), ys(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        xs[i] = static_cast<double>(obs[i]);
        ys[i] = ds.y[obs[i]];
    }
    gsl_interp_accel* acc = gsl_interp_accel_alloc();
    gsl_spline* sp = gsl_spline_alloc(gsl_interp_cspline, obs.size());  // natural cubic
    gsl_spline_init(sp, xs.data(), ys.data(), obs.size());

    Eigen::VectorXd out = ds.y;
    for (int t = 0; t < ds.length(); ++t) {
        if (!ds.y_missing[t]) continue;
        if (t < obs.front()) {
            out[t] = ds.y[obs.front()];
        } else if (t > obs.back()) {
            out[t] = ds.y[obs.back()];
        } else {
            double v = 0.0;
            if (gsl_spline_eval_e(sp, static_cast<double>(t), acc, &v) != GSL_SUCCESS)
                v = ds.y[obs.front()];
            out[t] = v;
        }
    }
    gsl_spline_free(sp);
    gsl_interp_accel_free(acc);
    return out;
}

// AR(p) fill: Yule-Walker over pairwise-complete autocovariances, order by
// AIC from the exact innovation likelihood, fill = smoothed conditional mean.
Eigen::VectorXd ar_fill(const TimeSeriesDataset& ds) {
    const int T = ds.length();
    const auto obs = observed_times(ds);
    const int n_obs = static_cast<int>(obs.size());

    double mu = 0.0;
    for (int t : obs) mu += ds.y[t];
    mu /= n_obs;

    const int max_p = 5;
    std::vector<double> gamma(max_p + 1, 0.0);
    for (int k = 0; k <= max_p; ++k) {
        double s = 0.0;
        int n = 0;
        for (int t = 0; t + k < T; ++t) {
            if (ds.y_missing[t] || ds.y_missing[t + k]) continue;
            s += (ds.y[t] - mu) * (ds.y[t + k] - mu);
            ++n;
        }
        gamma[k] = n > 0 ? s / n : 0.0;
    }

    Eigen::VectorXd out = ds.y;
    if (gamma[0] < 1e-12 * (1.0 + mu * mu)) {
        for (int t = 0; t < T; ++t)
            if (ds.y_missing[t]) out[t] = mu;  // degenerate: constant series
        return out;
    }

    ObservationSeries demeaned;
    demeaned.y.resize(T);
    demeaned.observed.assign(static_cast<std::size_t>(T), 0);
    for (int t = 0; t < T; ++t) {
        demeaned.y[t] = ds.y_missing[t] ? 0.0 : ds.y[t] - mu;
        demeaned.observed[t] = ds.y_missing[t] ? 0 : 1;
    }

    auto ar_system = [&](const Eigen::VectorXd& phi, double s2) {
        const int pp = static_cast<int>(phi.size());
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(pp, pp);
        for (int i = 0; i < pp; ++i) G(0, i) = phi[i];
        for (int i = 1; i < pp; ++i) G(i, i - 1) = 1.0;
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(pp, pp);
        W(0, 0) = s2;
        Eigen::MatrixXd F = Eigen::MatrixXd::Zero(T, pp);
        F.col(0).setOnes();
        return make_constant_system(G, W, F, 1e-8 * gamma[0],
                                    Eigen::VectorXd::Zero(pp),
                                    10.0 * gamma[0] * Eigen::MatrixXd::Identity(pp, pp));
    };

    double best_aic = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_phi;
    double best_s2 = 0.0;
    for (int p = 1; p <= max_p; ++p) {
        Eigen::MatrixXd R(p, p);
        Eigen::VectorXd g(p);
        for (int i = 0; i < p; ++i) {
            g[i] = gamma[i + 1];
            for (int j = 0; j < p; ++j) R(i, j) = gamma[std::abs(i - j)];
        }
        Eigen::VectorXd phi = R.ldlt().solve(g);
        const double s2 = gamma[0] - phi.dot(g);
        if (!(s2 > 0.0) || !phi.allFinite()) continue;
        Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(p, p);
        for (int i = 0; i < p; ++i) comp(0, i) = phi[i];
        for (int i = 1; i < p; ++i) comp(i, i - 1) = 1.0;
        if (comp.eigenvalues().cwiseAbs().maxCoeff() >= 1.0 - 1e-6) continue;

        double ll;
        try {
            ll = log_likelihood(ar_system(phi, s2), demeaned);
        } catch (const NumericalError&) {
            continue;
        }
        const double aic = -2.0 * ll + 2.0 * (p + 2);
        if (aic < best_aic) {
            best_aic = aic;
            best_phi = phi;
            best_s2 = s2;
        }
    }

    if (best_phi.size() == 0) {
        warn("ar imputation: no stationary AR order fit the observed series, using mean fill");
        return mean_fill(ds);
    }

    const StateSpace ss = ar_system(best_phi, best_s2);
    const BeliefPath sm = kalman_smoother(ss, kalman_filter(ss, demeaned));
    for (int t = 0; t < T; ++t)
        if (ds.y_missing[t]) out[t] = mu + sm.beliefs[t].mean[0];
    return out;
}

// Chained-equations completions: regress y_t on the intercept, y_{t-1}, and
// current + 1-lagged exposures/covariates; 10 sweeps with proper
// (sigma^2, beta) posterior draws plus residual noise per imputation.
std::vector<Eigen::VectorXd> mice_fill(const TimeSeriesDataset& ds, const ImputationConfig& cfg) {
    const int T = ds.length();
    const auto obs = observed_times(ds);
    const int n_obs = static_cast<int>(obs.size());

    std::vector<const Series*> cols;
    for (const auto& s : ds.exposures) cols.push_back(&s);
    for (const auto& s : ds.covariates) cols.push_back(&s);
    const int k = 2 + 2 * static_cast<int>(cols.size());  // 1, y_lag1, (x_t, x_{t-1})...

    double mu = 0.0, var = observed_variance(ds);
    for (int t : obs) mu += ds.y[t];
    mu /= n_obs;

    auto design_row = [&](int t, const Eigen::VectorXd& yc, Eigen::VectorXd& row) {
        row[0] = 1.0;
        row[1] = yc[t - 1];
        int c = 2;
        for (const Series* s : cols) {
            row[c++] = s->values[t];
            row[c++] = s->values[t - 1];
        }
    };

    std::vector<Eigen::VectorXd> completions;
    completions.reserve(static_cast<std::size_t>(cfg.r));

    for (int j = 0; j < cfg.r; ++j) {
        std::mt19937_64 rng(mix_seed(cfg.seed, 500 + static_cast<std::uint64_t>(j)));
        std::uniform_int_distribution<int> pick(0, n_obs - 1);
        std::normal_distribution<double> stdn(0.0, 1.0);

        Eigen::VectorXd yc = ds.y;
        for (int t = 0; t < T; ++t)
            if (ds.y_missing[t]) yc[t] = ds.y[obs[static_cast<std::size_t>(pick(rng))]];

        Eigen::VectorXd row(k);
        for (int sweep = 0; sweep < 10; ++sweep) {
            Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(k, k);
            Eigen::VectorXd Xty = Eigen::VectorXd::Zero(k);
            int n = 0;
            for (int t = 1; t < T; ++t) {
                if (ds.y_missing[t]) continue;
                design_row(t, yc, row);
                XtX.selfadjointView<Eigen::Lower>().rankUpdate(row);
                Xty += row * ds.y[t];
                ++n;
            }
            XtX = XtX.selfadjointView<Eigen::Lower>();
            XtX.diagonal().array() += 1e-10 * (1.0 + XtX.diagonal().mean());
            Eigen::LDLT<Eigen::MatrixXd> ldlt(XtX);
            Eigen::VectorXd beta = ldlt.solve(Xty);

            double rss = 0.0;
            for (int t = 1; t < T; ++t) {
                if (ds.y_missing[t]) continue;
                design_row(t, yc, row);
                const double e = ds.y[t] - row.dot(beta);
                rss += e * e;
            }
            const int dof = std::max(1, n - k);
            double s2 = rss / dof;
            if (n > k) {
                std::chi_squared_distribution<double> chi2(dof);
                s2 = rss / std::max(1e-12, chi2(rng));
            }
            Eigen::MatrixXd cov = s2 * ldlt.solve(Eigen::MatrixXd::Identity(k, k));
            Eigen::MatrixXd L = sampling_factor(cov);
            Eigen::VectorXd bstar = beta + L * standard_normal(k, rng);

            const double sd = std::sqrt(std::max(0.0, s2));
            for (int t = 0; t < T; ++t) {
                if (!ds.y_missing[t]) continue;
                if (t == 0) {
                    yc[t] = mu + std::sqrt(var) * stdn(rng);
                } else {
                    design_row(t, yc, row);
                    yc[t] = row.dot(bstar) + sd * stdn(rng);
                }
            }
        }
        completions.push_back(yc);
    }
    return completions;
}

}  // namespace

// ---------------------------------------------------------------------------
// config, pooling
// ---------------------------------------------------------------------------

void ImputationConfig::validate() const {
    if (r < 2) throw ContractError("ImputationConfig: r must be >= 2");
    if (!(tol > 0.0)) throw ContractError("ImputationConfig: tol must be > 0");
    if (max_iter < 1) throw ContractError("ImputationConfig: max_iter must be >= 1");
}

PooledEstimate rubin_pool(const std::vector<Eigen::MatrixXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& variances) {
    const int r = static_cast<int>(estimates.size());
    if (r < 2) throw ContractError("rubin_pool: needs r >= 2 estimates");
    if (variances.size() != estimates.size())
        throw ContractError("rubin_pool: estimate/variance count mismatch");

    const auto rows = estimates[0].rows();
    const auto cols = estimates[0].cols();
    for (int j = 0; j < r; ++j) {
        if (estimates[j].rows() != rows || estimates[j].cols() != cols ||
            variances[j].rows() != rows || variances[j].cols() != cols)
            throw ContractError("rubin_pool: inconsistent matrix shapes");
        if (variances[j].minCoeff() < 0.0)
            throw ContractError("rubin_pool: negative within-imputation variance");
    }

    PooledEstimate out;
    out.r = r;
    out.mean = Eigen::MatrixXd::Zero(rows, cols);
    out.within = Eigen::MatrixXd::Zero(rows, cols);
    out.between = Eigen::MatrixXd::Zero(rows, cols);
    for (int j = 0; j < r; ++j) {
        out.mean += estimates[j];
        out.within += variances[j];
    }
    out.mean /= r;
    out.within /= r;
    for (int j = 0; j < r; ++j)
        out.between += (estimates[j] - out.mean).cwiseAbs2();
    out.between /= (r - 1);
    out.total = out.within + (1.0 + 1.0 / r) * out.between;
    const Eigen::MatrixXd half = kZ90 * out.total.cwiseSqrt();
    out.lo90 = out.mean - half;
    out.hi90 = out.mean + half;
    return out;
}

ScalarPool rubin_pool_scalar(const std::vector<double>& estimates,
                             const std::vector<double>& variances) {
    std::vector<Eigen::MatrixXd> e, v;
    for (double x : estimates) e.push_back(Eigen::MatrixXd::Constant(1, 1, x));
    for (double x : variances) v.push_back(Eigen::MatrixXd::Constant(1, 1, x));
    const PooledEstimate p = rubin_pool(e, v);
    return {p.mean(0, 0), p.within(0, 0), p.between(0, 0),
            p.total(0, 0), p.lo90(0, 0), p.hi90(0, 0)};
}

BaselineMethod baseline_from_string(const std::string& s) {
    if (s == "mean") return BaselineMethod::mean;
    if (s == "locf") return BaselineMethod::locf;
    if (s == "linear") return BaselineMethod::linear;
    if (s == "spline") return BaselineMethod::spline;
    if (s == "mice") return BaselineMethod::mice;
    if (s == "ar") return BaselineMethod::ar;
    throw ConfigError("unknown baseline method '" + s + "'");
}

std::vector<Eigen::VectorXd> baseline_impute(const TimeSeriesDataset& ds, BaselineMethod method,
                                             const ImputationConfig& cfg) {
    ds.validate();
    if (ds.n_missing() == ds.length())
        throw InsufficientDataError("baseline_impute: every outcome is missing");

    switch (method) {
        case BaselineMethod::mean: return {mean_fill(ds)};
        case BaselineMethod::locf: return {locf_fill(ds)};
        case BaselineMethod::linear: return {linear_fill(ds)};
        case BaselineMethod::spline: return {spline_fill(ds)};
        case BaselineMethod::ar: return {ar_fill(ds)};
        case BaselineMethod::mice: {
            cfg.validate();
            return mice_fill(ds, cfg);
        }
    }
    throw ContractError("baseline_impute: unreachable");
}

// ---------------------------------------------------------------------------
// state-space fitting machinery
// ---------------------------------------------------------------------------

namespace {

struct SingleFit {
    RealizedSystem sys;
    BeliefPath filtered;
    BeliefPath smoothed;
    Eigen::MatrixXd coef_mean;  // T x n_coef, smoothed
    Eigen::MatrixXd coef_var;
    StructuralParams params;
    double loglik = 0.0;
    double one_step_score = 0.0;
    bool mle_converged = true;
    ModelSpec realized_spec;  // the spec actually realized (rw phase or resolved)
    std::map<std::string, std::vector<int>> learned_points;
};

ModelSpec spec_with_rw_unresolved(const ModelSpec& spec) {
    ModelSpec out = spec;
    for (const auto& name : spec.unresolved_coefficients()) {
        CoefficientDynamics dyn;
        dyn.kind = DynKind::random_walk;  // free innovation variance
        out.dynamics[name] = dyn;
    }
    return out;
}

ModelSpec spec_with_points(const ModelSpec& spec,
                           const std::map<std::string, std::vector<int>>& points) {
    ModelSpec out = spec;
    for (const auto& [name, pts] : points) {
        CoefficientDynamics dyn = spec.dynamics_for(name);
        if (pts.empty()) {
            dyn.kind = DynKind::invariant;  // no jumps found: a flat coefficient
            dyn.change_points.clear();
        } else {
            dyn.change_points = pts;
        }
        out.dynamics[name] = dyn;
    }
    return out;
}

// Residual variance of an ordinary least-squares fit on the response rows;
// seeds the variance parameters so the simplex starts near the answer.
double ols_resid_var(const DesignMatrix& dm, const ObservationSeries& obs, double fallback) {
    const int d = dm.d();
    Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd Xty = Eigen::VectorXd::Zero(d);
    int n = 0;
    for (int t = 0; t < dm.length(); ++t) {
        if (!obs.observed[t]) continue;
        const Eigen::VectorXd row = dm.X.row(t);
        XtX.selfadjointView<Eigen::Lower>().rankUpdate(row);
        Xty += row * obs.y[t];
        ++n;
    }
    if (n < d + 2) return fallback;
    XtX = XtX.selfadjointView<Eigen::Lower>();
    XtX.diagonal().array() += 1e-10 * (1.0 + XtX.diagonal().mean());
    const Eigen::VectorXd beta = XtX.ldlt().solve(Xty);
    double rss = 0.0;
    for (int t = 0; t < dm.length(); ++t) {
        if (!obs.observed[t]) continue;
        const double e = obs.y[t] - dm.X.row(t).dot(beta);
        rss += e * e;
    }
    return std::max(rss / (n - d), 1e-10);
}

SingleFit mle_and_smooth(const ModelSpec& spec, const DesignMatrix& dm,
                         const ObservationSeries& obs, const ImputationConfig& cfg,
                         double marginal_var, const StructuralParams* warm) {
    RealizeContext ctx;
    ctx.outcome_marginal_var = marginal_var;
    ctx.jump_scale = cfg.jump_scale;
    ctx.diffuse_prior_var = cfg.diffuse_prior_var;

    const double rv = ols_resid_var(dm, obs, 0.5 * marginal_var);
    StructuralParams init = structural_template(spec, std::max(rv, 1e-8),
                                                std::max(0.05 * marginal_var, 1e-6));
    if (warm) {
        for (int i = 0; i < init.size(); ++i) {
            const int j = warm->index_of(init.names[i]);
            if (j >= 0) init.log_values[i] = warm->log_values[j];
        }
    }

    auto builder = [&](const StructuralParams& p) {
        return realize_state_space(spec, dm, p, ctx).ss;
    };

    FitOptions opts = cfg.fit;
    if (warm) {
        opts.restarts = 1;  // continue from the previous iteration's optimum
        opts.max_evals = std::max(64, cfg.fit.max_evals / 4);
    }

    SingleFit fit;
    const FitReport report = fit_structural_params(builder, init, obs, opts);
    fit.params = report.params;
    fit.loglik = report.loglik;
    fit.mle_converged = report.converged;
    fit.realized_spec = spec;
    fit.sys = realize_state_space(spec, dm, fit.params, ctx);
    fit.filtered = kalman_filter(fit.sys.ss, obs);
    fit.smoothed = kalman_smoother(fit.sys.ss, fit.filtered);
    fit.coef_mean = fit.sys.coef_means(fit.smoothed);
    fit.coef_var = fit.sys.coef_vars(fit.smoothed);
    fit.one_step_score = 0.0;
    for (int t = 0; t < fit.filtered.length(); ++t) {
        if (!obs.observed[t]) continue;
        const double e = obs.y[t] - fit.filtered.predicted_mean[t];
        fit.one_step_score += e * e;
    }
    return fit;
}

// One declared-model fit. Unresolved periodic_stable coefficients are first
// realized as random walks and their change points detected from the
// smoothed path; with `resolve` the model is refit with the kappa-jump
// realization at those points (the terminal form used for reporting).
SingleFit run_fit(const ModelSpec& declared, const DesignMatrix& dm,
                  const ObservationSeries& obs, const ImputationConfig& cfg,
                  double marginal_var, const StructuralParams* warm, bool resolve) {
    const int n_resp = obs.count_observed();
    if (n_resp < std::max(10, dm.d() + 5))
        throw InsufficientDataError("state-space fit: only " + std::to_string(n_resp) +
                                    " usable response rows");

    const auto unresolved = declared.unresolved_coefficients();
    const ModelSpec phase_spec =
        unresolved.empty() ? declared : spec_with_rw_unresolved(declared);
    SingleFit fit = mle_and_smooth(phase_spec, dm, obs, cfg, marginal_var, warm);
    if (unresolved.empty()) return fit;

    const auto names = declared.coefficient_names();
    for (const auto& coef : unresolved) {
        const int j = static_cast<int>(std::find(names.begin(), names.end(), coef) -
                                       names.begin());
        CoefficientPath path{fit.coef_mean.col(j), fit.coef_var.col(j)};
        fit.learned_points[coef] = detect_change_points(path, cfg.structure.min_seg,
                                                        cfg.structure.split_sd_mult);
    }
    if (!resolve) return fit;

    const ModelSpec resolved = spec_with_points(declared, fit.learned_points);
    SingleFit final_fit = mle_and_smooth(resolved, dm, obs, cfg, marginal_var, &fit.params);
    final_fit.learned_points = fit.learned_points;
    return final_fit;
}

Eigen::VectorXd predictive_mean_of(const SingleFit& fit) {
    const int T = fit.smoothed.length();
    Eigen::VectorXd out(T);
    for (int t = 0; t < T; ++t)
        out[t] = fit.sys.ss.F.row(t).dot(fit.smoothed.beliefs[t].mean);
    return out;
}

Eigen::VectorXd predictive_sd_of(const SingleFit& fit) {
    const int T = fit.smoothed.length();
    Eigen::VectorXd out(T);
    for (int t = 0; t < T; ++t) {
        const Eigen::VectorXd f = fit.sys.ss.F.row(t);
        const double v = f.dot(fit.smoothed.beliefs[t].cov * f) + fit.sys.ss.V_at(t);
        out[t] = std::sqrt(std::max(0.0, v));
    }
    return out;
}

ImputationResult single_fit_result(const std::string& method, const SingleFit& fit) {
    ImputationResult res;
    res.method = method;
    res.coef_names = fit.sys.coef_names;
    res.pooled.mean = fit.coef_mean;
    res.pooled.within = fit.coef_var;
    res.pooled.between = Eigen::MatrixXd::Zero(fit.coef_mean.rows(), fit.coef_mean.cols());
    res.pooled.total = fit.coef_var;
    const Eigen::MatrixXd half = kZ90 * fit.coef_var.cwiseSqrt();
    res.pooled.lo90 = fit.coef_mean - half;
    res.pooled.hi90 = fit.coef_mean + half;
    res.pooled.r = 1;
    res.params = fit.params;
    res.change_points = fit.learned_points;
    res.converged = fit.mle_converged;
    res.loglik = fit.loglik;
    res.one_step_score = fit.one_step_score;
    res.predictive_mean = predictive_mean_of(fit);
    res.predictive_sd = predictive_sd_of(fit);
    res.eval_length = static_cast<int>(fit.coef_mean.rows());
    res.trace.push_back({1, fit.loglik, 0.0, 0.0, false});
    return res;
}

double coef_change(const Eigen::MatrixXd& cur, const Eigen::MatrixXd& prev) {
    double worst = 0.0;
    for (int j = 0; j < cur.cols(); ++j) {
        const double scale = std::max(1.0, std::sqrt(cur.col(j).squaredNorm() / cur.rows()));
        worst = std::max(worst, (cur.col(j) - prev.col(j)).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

double param_change(const StructuralParams& cur, const StructuralParams& prev) {
    double worst = 0.0;
    for (int i = 0; i < cur.size(); ++i) {
        const int j = prev.index_of(cur.names[i]);
        if (j < 0) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, std::abs(cur.value(i) - prev.value(j)) /
                                    (std::abs(prev.value(j)) + 1e-12));
    }
    return worst;
}

// Multiple-imputation pass around a fitted model: draw r coefficient paths
// and observation noises, rebuild the lagged design per draw, refit the
// filter/smoother under the same structural parameters, and Rubin-pool.
struct MiPass {
    PooledEstimate pooled;
    std::vector<Eigen::VectorXd> completed_outcomes;  // r series
    std::vector<Eigen::VectorXd> draw_values;         // imputed y per draw (missing slots)
};

MiPass mi_pass(const TimeSeriesDataset& ds, const ModelSpec& spec_for_refits,
               const SingleFit& fit, const ImputationConfig& cfg, double marginal_var,
               const std::vector<int>& missing, std::uint64_t stream) {
    RealizeContext ctx;
    ctx.outcome_marginal_var = marginal_var;
    ctx.jump_scale = cfg.jump_scale;
    ctx.diffuse_prior_var = cfg.diffuse_prior_var;

    const BeliefPath& source =
        cfg.draw_source == DrawSource::smoothed ? fit.smoothed : fit.filtered;
    const auto draws = draw_states(source, cfg.r, mix_seed(cfg.seed, stream));
    std::mt19937_64 noise_rng(mix_seed(cfg.seed, stream + 1));
    std::normal_distribution<double> stdn(0.0, 1.0);

    const int T = ds.length();
    MiPass out;
    std::vector<Eigen::MatrixXd> means, vars;
    means.reserve(static_cast<std::size_t>(cfg.r));
    vars.reserve(static_cast<std::size_t>(cfg.r));

    for (int j = 0; j < cfg.r; ++j) {
        Eigen::VectorXd imputed = Eigen::VectorXd::Constant(T, kNaN);
        Eigen::VectorXd values(static_cast<int>(missing.size()));
        for (std::size_t i = 0; i < missing.size(); ++i) {
            const int t = missing[i];
            const double sd = std::sqrt(fit.sys.ss.V_at(t));
            const double ytilde =
                fit.sys.ss.F.row(t).dot(draws[j].row(t)) + sd * stdn(noise_rng);
            imputed[t] = ytilde;
            values[static_cast<int>(i)] = ytilde;
        }
        const DesignMatrix dm_j = build_design(ds, spec_for_refits, &imputed);
        ObservationSeries obs_j;
        obs_j.y = ds.y;
        obs_j.observed = dm_j.response_rows(ds.y_missing);
        const RealizedSystem sys_j =
            realize_state_space(spec_for_refits, dm_j, fit.params, ctx);
        const BeliefPath sm_j = kalman_smoother(sys_j.ss, kalman_filter(sys_j.ss, obs_j));
        means.push_back(sys_j.coef_means(sm_j));
        vars.push_back(sys_j.coef_vars(sm_j));

        Eigen::VectorXd completed = ds.y;
        for (int t : missing) completed[t] = imputed[t];
        out.completed_outcomes.push_back(completed);
        out.draw_values.push_back(values);
    }
    out.pooled = rubin_pool(means, vars);
    return out;
}

enum class SsmVariant { mp, impute };

// Shared outer loop of the two algorithms; they differ in how the point
// guesses are refreshed (pooled noisy draws vs deterministic substitution)
// and in whether every iteration carries a multiple-imputation pass.
ImputationResult ssm_core(const TimeSeriesDataset& ds, const ModelSpec& spec,
                          const ImputationConfig& cfg, SsmVariant variant) {
    ds.validate();
    spec.validate(ds.length());
    cfg.validate();
    const std::string method = variant == SsmVariant::mp ? "ssmmp" : "ssmimpute";

    const std::vector<int> missing = ds.missing_times();
    if (missing.empty()) {
        ImputationResult res = plain_fit(ds, spec, cfg);
        res.method = method;
        res.completed = {ds.y};
        return res;
    }

    const int T = ds.length();
    const double marginal_var = observed_variance(ds);

    // Step 1: deterministic gap-aware initial guess
    const Eigen::VectorXd interp = linear_fill(ds);
    Eigen::VectorXd imputed = Eigen::VectorXd::Constant(T, kNaN);
    for (int t : missing) imputed[t] = interp[t];

    ImputationResult res;
    res.method = method;
    res.converged = false;

    SingleFit fit;
    Eigen::MatrixXd prev_track;
    StructuralParams prev_params;
    std::map<std::string, std::vector<int>> prev_points;
    double prev_loglik = 0.0;
    bool have_prev = false;

    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        const DesignMatrix dm = build_design(ds, spec, &imputed);
        ObservationSeries obs;
        obs.y = ds.y;
        obs.observed = dm.response_rows(ds.y_missing);

        fit = run_fit(spec, dm, obs, cfg, marginal_var,
                      have_prev ? &prev_params : nullptr, /*resolve=*/false);

        Eigen::MatrixXd track;
        if (variant == SsmVariant::mp) {
            // Steps 3-4: pooled refits and the mean-of-draws point update
            const MiPass mi = mi_pass(ds, fit.realized_spec, fit, cfg, marginal_var, missing,
                                      100 + 2 * static_cast<std::uint64_t>(iter));
            track = mi.pooled.mean;
            Eigen::VectorXd mean_draw = Eigen::VectorXd::Zero(static_cast<int>(missing.size()));
            for (const auto& v : mi.draw_values) mean_draw += v;
            mean_draw /= cfg.r;
            for (std::size_t i = 0; i < missing.size(); ++i)
                imputed[missing[i]] = mean_draw[static_cast<int>(i)];
        } else {
            // Substitution: y_hat = F_t theta_hat_t, no noise
            track = fit.coef_mean;
            for (int t : missing)
                imputed[t] = fit.sys.ss.F.row(t).dot(fit.smoothed.beliefs[t].mean);
        }

        ConvergenceRecord rec;
        rec.iteration = iter;
        rec.loglik = fit.loglik;
        if (have_prev) {
            rec.max_coef_change = coef_change(track, prev_track);
            rec.max_param_change = param_change(fit.params, prev_params);
            rec.change_points_moved = fit.learned_points != prev_points;
            const double ll_change =
                std::abs(fit.loglik - prev_loglik) / (1.0 + std::abs(prev_loglik));
            if (ll_change < cfg.tol && rec.max_coef_change < cfg.tol &&
                rec.max_param_change < cfg.tol && !rec.change_points_moved) {
                res.trace.push_back(rec);
                res.converged = true;
                break;
            }
        }
        res.trace.push_back(rec);
        prev_track = track;
        prev_params = fit.params;
        prev_points = fit.learned_points;
        prev_loglik = fit.loglik;
        have_prev = true;
    }

    if (!res.converged)
        warn(method + ": not converged after " + std::to_string(cfg.max_iter) + " iterations");

    // Terminal pass under the resolved realization: fit, then the
    // multiple-imputation pass that produces the reported estimates.
    const DesignMatrix dm = build_design(ds, spec, &imputed);
    ObservationSeries obs;
    obs.y = ds.y;
    obs.observed = dm.response_rows(ds.y_missing);
    const SingleFit final_fit =
        run_fit(spec, dm, obs, cfg, marginal_var, &fit.params, /*resolve=*/true);
    const MiPass mi = mi_pass(ds, final_fit.realized_spec, final_fit, cfg, marginal_var,
                              missing, 7770);

    res.pooled = mi.pooled;
    res.coef_names = final_fit.sys.coef_names;
    res.completed = mi.completed_outcomes;
    res.params = final_fit.params;
    res.change_points = final_fit.learned_points;
    res.loglik = final_fit.loglik;
    res.one_step_score = final_fit.one_step_score;
    res.predictive_mean = predictive_mean_of(final_fit);
    res.predictive_sd = predictive_sd_of(final_fit);
    res.eval_length = T;
    return res;
}

}  // namespace

ImputationResult ssm_mp(const TimeSeriesDataset& ds, const ModelSpec& spec,
                        const ImputationConfig& cfg) {
    return ssm_core(ds, spec, cfg, SsmVariant::mp);
}

ImputationResult ssm_impute(const TimeSeriesDataset& ds, const ModelSpec& spec,
                            const ImputationConfig& cfg) {
    return ssm_core(ds, spec, cfg, SsmVariant::impute);
}

ImputationResult plain_fit(const TimeSeriesDataset& ds, const ModelSpec& spec,
                           const ImputationConfig& cfg) {
    ds.validate();
    spec.validate(ds.length());
    const DesignMatrix dm = build_design(ds, spec, nullptr);
    ObservationSeries obs;
    obs.y = ds.y;
    obs.observed = dm.response_rows(ds.y_missing);
    // never read, but keep the vector NaN-free for downstream arithmetic
    for (int t = 0; t < ds.length(); ++t)
        if (!obs.observed[t]) obs.y[t] = 0.0;
    const SingleFit fit = run_fit(spec, dm, obs, cfg, observed_variance(ds), nullptr,
                                  /*resolve=*/true);
    ImputationResult res = single_fit_result("fit", fit);
    return res;
}

ImputationResult complete_case_fit(const TimeSeriesDataset& ds, const ModelSpec& spec,
                                   const ImputationConfig& cfg) {
    ds.validate();
    spec.validate(ds.length());
    const DesignMatrix dm = build_design(ds, spec, nullptr);
    const SplicedData spliced = splice_complete_cases(ds, dm);
    const int n = spliced.ds.length();

    // declared change points live on the original timeline; translate them
    ModelSpec cc_spec = spec;
    for (auto& [name, dyn] : cc_spec.dynamics) {
        if (dyn.kind != DynKind::periodic_stable || dyn.change_points.empty()) continue;
        std::vector<int> translated;
        for (int c : dyn.change_points) {
            int idx = 0;
            while (idx < n && spliced.orig_time[idx] + 1 <= c) ++idx;
            if (idx >= 2 && idx <= n - 1) translated.push_back(idx);
        }
        std::sort(translated.begin(), translated.end());
        translated.erase(std::unique(translated.begin(), translated.end()), translated.end());
        dyn.change_points = translated;
    }

    ObservationSeries obs = fully_observed(spliced.ds.y);
    obs.observed = spliced.dm.response_rows(spliced.ds.y_missing);
    const SingleFit fit = run_fit(cc_spec, spliced.dm, obs, cfg, observed_variance(spliced.ds),
                                  nullptr, /*resolve=*/true);

    ImputationResult res = single_fit_result("cc", fit);
    res.cc_time_map.resize(n);
    for (int i = 0; i < n; ++i) res.cc_time_map[i] = spliced.orig_time[i] + 1;
    // learned points are reported in original time
    for (auto& [name, pts] : res.change_points)
        for (auto& c : pts) c = res.cc_time_map[static_cast<std::size_t>(c - 1)];
    return res;
}

const std::vector<std::string>& method_vocabulary() {
    static const std::vector<std::string> v = {"cc",     "mean", "locf", "linear",   "spline",
                                               "mice",   "ar",   "ssmimpute", "ssmmp"};
    return v;
}

ImputationResult fit_method(const TimeSeriesDataset& ds, const ModelSpec& spec,
                            const ImputationConfig& cfg, const std::string& method) {
    if (method == "cc") return complete_case_fit(ds, spec, cfg);
    if (method == "ssmmp") return ssm_mp(ds, spec, cfg);
    if (method == "ssmimpute") return ssm_impute(ds, spec, cfg);

    const BaselineMethod bm = baseline_from_string(method);
    const auto completions = baseline_impute(ds, bm, cfg);

    if (completions.size() == 1) {
        const TimeSeriesDataset completed = ds.with_completed_outcome(completions[0]);
        ImputationResult res = plain_fit(completed, spec, cfg);
        res.method = method;
        res.completed = completions;
        return res;
    }

    // mice: analyze each completion with the declared model, Rubin-pool
    std::vector<Eigen::MatrixXd> means, vars;
    ImputationResult first;
    StructuralParams warm;
    for (std::size_t j = 0; j < completions.size(); ++j) {
        const TimeSeriesDataset completed = ds.with_completed_outcome(completions[j]);
        const DesignMatrix dm = build_design(completed, spec, nullptr);
        ObservationSeries obs;
        obs.y = completed.y;
        obs.observed = dm.response_rows(completed.y_missing);
        const SingleFit fit = run_fit(spec, dm, obs, cfg, observed_variance(completed),
                                      j == 0 ? nullptr : &warm, /*resolve=*/true);
        means.push_back(fit.coef_mean);
        vars.push_back(fit.coef_var);
        if (j == 0) {
            first = single_fit_result(method, fit);
            warm = fit.params;
        }
    }
    ImputationResult res = first;
    res.pooled = rubin_pool(means, vars);
    const Eigen::MatrixXd half = kZ90 * res.pooled.total.cwiseSqrt();
    res.pooled.lo90 = res.pooled.mean - half;
    res.pooled.hi90 = res.pooled.mean + half;
    res.completed = completions;
    res.method = method;
    return res;
}

}  // namespace ssmimpute
