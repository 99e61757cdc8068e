#include "ssmimpute/design.hpp"

#include "ssmimpute/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ssmimpute {

std::string to_string(DynKind k) {
    switch (k) {
        case DynKind::invariant: return "invariant";
        case DynKind::random_walk: return "random_walk";
        case DynKind::ar: return "ar";
        case DynKind::periodic_stable: return "periodic_stable";
    }
    return "invariant";
}

DynKind dyn_kind_from_string(const std::string& s) {
    if (s == "invariant") return DynKind::invariant;
    if (s == "random_walk") return DynKind::random_walk;
    if (s == "ar") return DynKind::ar;
    if (s == "periodic_stable") return DynKind::periodic_stable;
    throw ConfigError("unknown dynamics kind '" + s + "'");
}

std::vector<std::string> ModelSpec::coefficient_names() const {
    std::vector<std::string> names;
    names.push_back("intercept");
    for (int j = 1; j <= q; ++j) names.push_back("y_lag" + std::to_string(j));
    for (const auto& e : exposures)
        for (int l = 0; l <= p; ++l) names.push_back(e + "_lag" + std::to_string(l));
    for (const auto& c : covariates)
        for (int l = 0; l <= o; ++l) names.push_back(c + "_lag" + std::to_string(l));
    return names;
}

int ModelSpec::n_coefficients() const {
    return 1 + q + (p + 1) * static_cast<int>(exposures.size()) +
           (o + 1) * static_cast<int>(covariates.size());
}

CoefficientDynamics ModelSpec::dynamics_for(const std::string& coef_name) const {
    auto it = dynamics.find(coef_name);
    if (it != dynamics.end()) return it->second;
    return CoefficientDynamics{};
}

void ModelSpec::validate(int T) const {
    if (q < 1) throw ContractError("ModelSpec: q must be >= 1");
    if (p < 0 || o < 0) throw ContractError("ModelSpec: negative lag depth");
    if (fixed_obs_var && !(obs_var > 0.0))
        throw ContractError("ModelSpec: fixed obs_var must be > 0");

    const auto names = coefficient_names();
    for (const auto& [key, dyn] : dynamics) {
        if (std::find(names.begin(), names.end(), key) == names.end())
            throw ContractError("ModelSpec: dynamics declared for unknown coefficient '" +
                                key + "'");
        if (dyn.kind == DynKind::periodic_stable) {
            int prev = 1;
            for (int c : dyn.change_points) {
                if (c <= 1 || c >= T)
                    throw ContractError("ModelSpec: change point " + std::to_string(c) +
                                        " for '" + key + "' not strictly inside (1, T)");
                if (c <= prev)
                    throw ContractError("ModelSpec: change points for '" + key +
                                        "' not strictly increasing");
                prev = c;
            }
        }
        if (dyn.kind == DynKind::ar) {
            if (dyn.ar_phi.empty())
                throw ContractError("ModelSpec: ar dynamics for '" + key + "' needs phi");
            // companion-matrix spectral radius must be < 1
            const int pp = static_cast<int>(dyn.ar_phi.size());
            Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(pp, pp);
            for (int i = 0; i < pp; ++i) comp(0, i) = dyn.ar_phi[i];
            for (int i = 1; i < pp; ++i) comp(i, i - 1) = 1.0;
            if (comp.eigenvalues().cwiseAbs().maxCoeff() >= 1.0 - 1e-12)
                throw ContractError("ModelSpec: ar dynamics for '" + key +
                                    "' is not stationary");
        }
    }
}

std::vector<std::string> ModelSpec::unresolved_coefficients() const {
    std::vector<std::string> out;
    for (const auto& name : coefficient_names()) {
        const auto dyn = dynamics_for(name);
        if (dyn.kind == DynKind::periodic_stable && dyn.change_points.empty())
            out.push_back(name);
    }
    return out;
}

std::vector<char> DesignMatrix::response_rows(const std::vector<char>& y_missing) const {
    const int T = length();
    std::vector<char> rows(static_cast<std::size_t>(T), 0);
    for (int t = 0; t < T; ++t)
        rows[t] = (!y_missing[t] && !incomplete[t] && !burnin[t]) ? 1 : 0;
    return rows;
}

std::vector<std::vector<int>> derive_lag_missingness(const std::vector<char>& mask,
                                                     const std::vector<int>& lags) {
    if (lags.empty()) throw ContractError("derive_lag_missingness: empty lag set");
    for (int j : lags)
        if (j < 1) throw ContractError("derive_lag_missingness: lags must be >= 1");
    const int T = static_cast<int>(mask.size());
    std::vector<std::vector<int>> out(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
        for (int j : lags)
            if (t - j >= 0 && mask[t - j]) out[t].push_back(j);
    return out;
}

DesignMatrix build_design(const TimeSeriesDataset& ds, const ModelSpec& spec,
                          const Eigen::VectorXd* imputed_y) {
    ds.validate();
    const int T = ds.length();
    spec.validate(T);

    if (imputed_y) {
        if (static_cast<int>(imputed_y->size()) != T)
            throw ContractError("build_design: imputed_y length mismatch");
        for (int t = 0; t < T; ++t)
            if (!ds.y_missing[t] && std::isfinite((*imputed_y)[t]))
                throw ContractError("build_design: imputed_y provides a value at observed "
                                    "t=" + std::to_string(t + 1) +
                                    " (observed data are never overwritten)");
    }

    std::vector<const Series*> exo, cov;
    for (const auto& name : spec.exposures) {
        const Series* s = ds.find_series(name);
        if (!s) throw ContractError("build_design: exposure '" + name + "' not in dataset");
        exo.push_back(s);
    }
    for (const auto& name : spec.covariates) {
        const Series* s = ds.find_series(name);
        if (!s) throw ContractError("build_design: covariate '" + name + "' not in dataset");
        cov.push_back(s);
    }

    DesignMatrix dm;
    const int d = spec.n_coefficients();
    dm.X = Eigen::MatrixXd::Zero(T, d);
    dm.colnames = spec.coefficient_names();
    dm.incomplete.assign(static_cast<std::size_t>(T), 0);
    dm.imputed.assign(static_cast<std::size_t>(T), 0);
    dm.burnin.assign(static_cast<std::size_t>(T), 0);
    const int depth = spec.burnin_depth();

    for (int t = 0; t < T; ++t) {
        if (t < depth) dm.burnin[t] = 1;
        int col = 0;
        dm.X(t, col++) = 1.0;
        for (int j = 1; j <= spec.q; ++j, ++col) {
            const int src = t - j;
            if (src < 0) continue;  // pre-sample, covered by the burn-in flag
            if (!ds.y_missing[src]) {
                dm.X(t, col) = ds.y[src];
            } else if (imputed_y && std::isfinite((*imputed_y)[src])) {
                dm.X(t, col) = (*imputed_y)[src];
                dm.imputed[t] = 1;
            } else {
                dm.incomplete[t] = 1;
            }
        }
        for (const Series* s : exo)
            for (int l = 0; l <= spec.p; ++l, ++col)
                if (t - l >= 0) dm.X(t, col) = s->values[t - l];
        for (const Series* s : cov)
            for (int l = 0; l <= spec.o; ++l, ++col)
                if (t - l >= 0) dm.X(t, col) = s->values[t - l];
    }
    return dm;
}

StructuralParams structural_template(const ModelSpec& spec, double init_obs_var, double init_w) {
    std::vector<std::string> names;
    std::vector<double> values;
    if (!spec.fixed_obs_var) {
        names.push_back("obs_var");
        values.push_back(init_obs_var);
    }
    for (const auto& coef : spec.coefficient_names()) {
        const auto dyn = spec.dynamics_for(coef);
        if ((dyn.kind == DynKind::random_walk || dyn.kind == DynKind::ar) && dyn.sigma2_free()) {
            names.push_back("w_" + coef);
            values.push_back(init_w);
        }
    }
    return make_params(names, values);
}

RealizedSystem realize_state_space(const ModelSpec& spec, const DesignMatrix& dm,
                                   const StructuralParams& sp, const RealizeContext& ctx) {
    const int T = dm.length();
    spec.validate(T);
    sp.validate();
    if (dm.d() != spec.n_coefficients())
        throw ContractError("realize_state_space: design width does not match spec");
    if (!spec.unresolved_coefficients().empty())
        throw ContractError("realize_state_space: periodic_stable coefficient '" +
                            spec.unresolved_coefficients().front() +
                            "' has no change points (resolve them first)");

    RealizedSystem sys;
    sys.coef_names = spec.coefficient_names();
    const int n_coef = static_cast<int>(sys.coef_names.size());

    std::vector<CoefficientDynamics> dyn(n_coef);
    int D = 0;
    sys.coef_state_index.resize(n_coef);
    for (int j = 0; j < n_coef; ++j) {
        dyn[j] = spec.dynamics_for(sys.coef_names[j]);
        sys.coef_state_index[j] = D;
        D += (dyn[j].kind == DynKind::ar) ? static_cast<int>(dyn[j].ar_phi.size()) : 1;
    }

    auto sigma2_of = [&](int j) {
        if (dyn[j].sigma2_free()) return sp.value("w_" + sys.coef_names[j]);
        return dyn[j].sigma2;
    };

    Eigen::MatrixXd G = Eigen::MatrixXd::Identity(D, D);
    Eigen::MatrixXd Wbase = Eigen::MatrixXd::Zero(D, D);
    bool time_varying_w = false;
    for (int j = 0; j < n_coef; ++j) {
        const int head = sys.coef_state_index[j];
        switch (dyn[j].kind) {
            case DynKind::invariant:
                break;
            case DynKind::random_walk:
                Wbase(head, head) = sigma2_of(j);
                break;
            case DynKind::ar: {
                const int pp = static_cast<int>(dyn[j].ar_phi.size());
                for (int i = 0; i < pp; ++i) G(head, head + i) = dyn[j].ar_phi[i];
                for (int i = 1; i < pp; ++i) {
                    G(head + i, head + i - 1) = 1.0;
                    G(head + i, head + i) = 0.0;
                }
                Wbase(head, head) = sigma2_of(j);
                break;
            }
            case DynKind::periodic_stable:
                time_varying_w = true;
                break;
        }
    }

    StateSpace& ss = sys.ss;
    ss.d = D;
    ss.T = T;
    ss.G = {G};
    if (time_varying_w) {
        ss.W.assign(static_cast<std::size_t>(T), Wbase);
        const double kappa = ctx.jump_scale * ctx.outcome_marginal_var;
        for (int j = 0; j < n_coef; ++j) {
            if (dyn[j].kind != DynKind::periodic_stable) continue;
            const int head = sys.coef_state_index[j];
            for (int c : dyn[j].change_points)
                if (c >= 1 && c < T) ss.W[c](head, head) = kappa;  // jump into t = c+1
        }
    } else {
        ss.W = {Wbase};
    }

    ss.F = Eigen::MatrixXd::Zero(T, D);
    for (int j = 0; j < n_coef; ++j)
        ss.F.col(sys.coef_state_index[j]) = dm.X.col(j);

    const double v = spec.fixed_obs_var ? spec.obs_var : sp.value("obs_var");
    ss.V = Eigen::VectorXd::Constant(1, v);
    ss.m0 = Eigen::VectorXd::Zero(D);
    ss.C0 = ctx.diffuse_prior_var * Eigen::MatrixXd::Identity(D, D);
    ss.validate();
    return sys;
}

Eigen::MatrixXd RealizedSystem::coef_means(const BeliefPath& bp) const {
    const int T = bp.length();
    const int n = static_cast<int>(coef_state_index.size());
    Eigen::MatrixXd out(T, n);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j) out(t, j) = bp.beliefs[t].mean[coef_state_index[j]];
    return out;
}

Eigen::MatrixXd RealizedSystem::coef_vars(const BeliefPath& bp) const {
    const int T = bp.length();
    const int n = static_cast<int>(coef_state_index.size());
    Eigen::MatrixXd out(T, n);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j) {
            const int k = coef_state_index[j];
            out(t, j) = bp.beliefs[t].cov(k, k);
        }
    return out;
}

SplicedData splice_complete_cases(const TimeSeriesDataset& ds, const DesignMatrix& dm) {
    const int T = ds.length();
    if (dm.length() != T) throw ContractError("splice_complete_cases: length mismatch");

    // burn-in rows survive the splice (nothing is missing in them); they stay
    // flagged and excluded from the likelihood on the new timeline
    std::vector<int> keep;
    for (int t = 0; t < T; ++t)
        if (!ds.y_missing[t] && !dm.incomplete[t]) keep.push_back(t);

    const int n = static_cast<int>(keep.size());
    if (n < dm.d() + 5)
        throw InsufficientDataError("splice_complete_cases: only " + std::to_string(n) +
                                    " complete rows survive, need at least " +
                                    std::to_string(dm.d() + 5));

    SplicedData out;
    out.orig_time = keep;
    out.ds.y.resize(n);
    out.ds.y_missing.assign(static_cast<std::size_t>(n), 0);
    for (const auto& s : ds.exposures) out.ds.exposures.push_back({s.name, Eigen::VectorXd(n)});
    for (const auto& s : ds.covariates) out.ds.covariates.push_back({s.name, Eigen::VectorXd(n)});

    out.dm.X.resize(n, dm.d());
    out.dm.colnames = dm.colnames;
    out.dm.incomplete.assign(static_cast<std::size_t>(n), 0);
    out.dm.imputed.assign(static_cast<std::size_t>(n), 0);
    out.dm.burnin.assign(static_cast<std::size_t>(n), 0);

    for (int i = 0; i < n; ++i) {
        const int t = keep[i];
        out.ds.y[i] = ds.y[t];
        for (std::size_t s = 0; s < ds.exposures.size(); ++s)
            out.ds.exposures[s].values[i] = ds.exposures[s].values[t];
        for (std::size_t s = 0; s < ds.covariates.size(); ++s)
            out.ds.covariates[s].values[i] = ds.covariates[s].values[t];
        out.dm.X.row(i) = dm.X.row(t);
        out.dm.imputed[i] = dm.imputed[t];
        out.dm.burnin[i] = dm.burnin[t];
    }
    return out;
}

}  // namespace ssmimpute
