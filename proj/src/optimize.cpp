#include "ssmimpute/optimize.hpp"

#include "ssmimpute/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssmimpute {

double StructuralParams::value(int i) const { return std::exp(log_values[i]); }

double StructuralParams::value(const std::string& name) const {
    const int i = index_of(name);
    if (i < 0) throw ContractError("StructuralParams: unknown parameter '" + name + "'");
    return value(i);
}

int StructuralParams::index_of(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (names[i] == name) return i;
    return -1;
}

void StructuralParams::set_value(const std::string& name, double positive_value) {
    const int i = index_of(name);
    if (i < 0) throw ContractError("StructuralParams: unknown parameter '" + name + "'");
    if (!(positive_value > 0.0) || !std::isfinite(positive_value))
        throw ContractError("StructuralParams: value for '" + name + "' must be finite and > 0");
    log_values[i] = std::log(positive_value);
}

void StructuralParams::validate() const {
    if (static_cast<int>(names.size()) != log_values.size())
        throw ContractError("StructuralParams: name/value length mismatch");
    for (int i = 0; i < size(); ++i) {
        const double v = value(i);
        if (!std::isfinite(v) || !(v > 0.0))
            throw ContractError("StructuralParams: parameter '" + names[i] +
                                "' is not finite and positive");
    }
}

StructuralParams make_params(const std::vector<std::string>& names,
                             const std::vector<double>& values) {
    if (names.size() != values.size())
        throw ContractError("make_params: name/value length mismatch");
    StructuralParams p;
    p.names = names;
    p.log_values.resize(static_cast<int>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0)) throw ContractError("make_params: values must be > 0");
        p.log_values[static_cast<int>(i)] = std::log(values[i]);
    }
    return p;
}

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                          const Eigen::VectorXd& x0, double init_step, double diam_tol,
                          int max_evals) {
    const int n = static_cast<int>(x0.size());
    SimplexResult res;
    if (n == 0) {
        res.x = x0;
        res.fmin = objective(x0);
        res.converged = true;
        res.evals = 1;
        return res;
    }

    // standard coefficients: reflection, expansion, contraction, shrink
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    std::vector<Eigen::VectorXd> x(n + 1, x0);
    std::vector<double> f(n + 1);
    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& p) {
        ++evals;
        const double v = objective(p);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    };

    for (int i = 1; i <= n; ++i) x[i][i - 1] += init_step;
    for (int i = 0; i <= n; ++i) f[i] = eval(x[i]);

    auto order = [&]() {
        std::vector<int> idx(n + 1);
        for (int i = 0; i <= n; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return f[a] < f[b]; });
        std::vector<Eigen::VectorXd> xs(n + 1);
        std::vector<double> fs(n + 1);
        for (int i = 0; i <= n; ++i) {
            xs[i] = x[idx[i]];
            fs[i] = f[idx[i]];
        }
        x = std::move(xs);
        f = std::move(fs);
    };

    bool converged = false;
    while (evals < max_evals) {
        order();
        double diam = 0.0;
        for (int i = 1; i <= n; ++i) diam = std::max(diam, (x[i] - x[0]).norm());
        if (diam < diam_tol) {
            converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += x[i];
        centroid /= n;

        Eigen::VectorXd xr = centroid + alpha * (centroid - x[n]);
        const double fr = eval(xr);
        if (fr < f[0]) {
            Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
            const double fe = eval(xe);
            if (fe < fr) {
                x[n] = xe;
                f[n] = fe;
            } else {
                x[n] = xr;
                f[n] = fr;
            }
        } else if (fr < f[n - 1]) {
            x[n] = xr;
            f[n] = fr;
        } else {
            const bool outside = fr < f[n];
            Eigen::VectorXd xc = outside ? (centroid + rho * (xr - centroid)).eval()
                                         : (centroid + rho * (x[n] - centroid)).eval();
            const double fc = eval(xc);
            if (fc < (outside ? fr : f[n])) {
                x[n] = xc;
                f[n] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    x[i] = x[0] + sigma * (x[i] - x[0]);
                    f[i] = eval(x[i]);
                }
            }
        }
    }
    order();
    res.x = x[0];
    res.fmin = f[0];
    res.converged = converged;
    res.evals = evals;
    return res;
}

FitReport fit_structural_params(const StateSpaceBuilder& build, const StructuralParams& init,
                                const ObservationSeries& y, const FitOptions& opts) {
    init.validate();
    const int n_obs = y.count_observed();
    if (n_obs == 0) throw ContractError("fit_structural_params: all outcomes missing");
    if (n_obs < 10)
        throw ContractError("fit_structural_params: needs at least 10 observed outcomes, got " +
                            std::to_string(n_obs));

    FitReport report;
    report.params = init;

    if (init.size() == 0) {
        report.loglik = log_likelihood(build(init), y);
        report.converged = true;
        report.evals = 1;
        return report;
    }

    auto objective = [&](const Eigen::VectorXd& logp) -> double {
        StructuralParams p = init;
        p.log_values = logp;
        try {
            return -log_likelihood(build(p), y);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::max();
        }
    };

    const int restarts = std::max(1, opts.restarts);
    const int budget = std::max(16, opts.max_evals / restarts);
    double best = std::numeric_limits<double>::max();
    Eigen::VectorXd best_x = init.log_values;
    bool converged = false;
    int total_evals = 0;

    for (int k = 0; k < restarts; ++k) {
        const double offset = (k == 0) ? 0.0 : (k == 1 ? opts.spread : -opts.spread);
        Eigen::VectorXd x0 = init.log_values.array() + offset;
        SimplexResult r = nelder_mead(objective, x0, opts.init_step, opts.diam_tol, budget);
        total_evals += r.evals;
        if (r.fmin < best) {
            best = r.fmin;
            best_x = r.x;
            converged = r.converged;
        }
    }

    report.params.log_values = best_x;
    report.loglik = -best;
    report.converged = converged;
    report.evals = total_evals;
    return report;
}

}  // namespace ssmimpute
