#include "ssmimpute/missingness.hpp"

#include "ssmimpute/errors.hpp"
#include "ssmimpute/linalg.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace ssmimpute {

std::string to_string(Mechanism m) {
    switch (m) {
        case Mechanism::MCAR: return "MCAR";
        case Mechanism::MAR: return "MAR";
        case Mechanism::MNAR: return "MNAR";
    }
    return "MCAR";
}

Mechanism mechanism_from_string(const std::string& s) {
    if (s == "MCAR" || s == "mcar") return Mechanism::MCAR;
    if (s == "MAR" || s == "mar") return Mechanism::MAR;
    if (s == "MNAR" || s == "mnar") return Mechanism::MNAR;
    throw ConfigError("unknown missingness mechanism '" + s + "'");
}

namespace {

Eigen::VectorXd standardized(const Eigen::VectorXd& v) {
    const double mean = v.mean();
    double sd = std::sqrt((v.array() - mean).square().sum() / std::max<int>(1, v.size() - 1));
    if (!(sd > 0.0)) sd = 1.0;
    return (v.array() - mean) / sd;
}

}  // namespace

TimeSeriesDataset apply_mechanism(const TimeSeriesDataset& ds, const MechanismSpec& ms) {
    ds.validate();
    if (ds.n_missing() != 0)
        throw ContractError("apply_mechanism: outcome must be fully observed");
    if (!(ms.target_rate > 0.0 && ms.target_rate < 1.0))
        throw ContractError("apply_mechanism: target_rate must be in (0, 1)");

    const int T = ds.length();
    TimeSeriesDataset out = ds;
    out.y_truth = ds.y;
    out.y_missing.assign(static_cast<std::size_t>(T), 0);

    std::mt19937_64 rng(ms.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Eigen::VectorXd u(T);
    for (int t = 0; t < T; ++t) u[t] = uni(rng);

    if (ms.kind == Mechanism::MCAR) {
        for (int t = 0; t < T; ++t) out.y_missing[t] = (u[t] < ms.target_rate) ? 1 : 0;
    } else {
        Eigen::VectorXd z;
        if (ms.kind == Mechanism::MNAR) {
            z = standardized(ds.y);
        } else {
            std::string name = ms.driver;
            if (name.empty()) {
                if (ds.covariates.empty())
                    throw ContractError("apply_mechanism: MAR needs a driver series");
                name = ds.covariates.front().name;
            }
            const Series* s = ds.find_series(name);
            if (!s) throw ContractError("apply_mechanism: MAR driver '" + name + "' not found");
            z = standardized(s->values);
        }

        // bisection on the logistic intercept against the realized rate,
        // with the uniform draws frozen so the mask is monotone in alpha
        auto realized = [&](double alpha, std::vector<char>* mask) {
            int n = 0;
            for (int t = 0; t < T; ++t) {
                const double pr = 1.0 / (1.0 + std::exp(-(alpha + z[t])));
                const bool mis = u[t] < pr;
                if (mask) (*mask)[t] = mis ? 1 : 0;
                n += mis;
            }
            return static_cast<double>(n) / T;
        };

        double lo = -30.0, hi = 30.0;
        double alpha = 0.0, rate = realized(alpha, nullptr);
        int steps = 0;
        while (std::abs(rate - ms.target_rate) > 0.01 && steps < 50) {
            if (rate < ms.target_rate) lo = alpha;
            else hi = alpha;
            alpha = 0.5 * (lo + hi);
            rate = realized(alpha, nullptr);
            ++steps;
        }
        if (std::abs(rate - ms.target_rate) > 0.01)
            throw NumericalError("apply_mechanism: rate calibration failed after 50 bisection "
                                 "steps, achieved rate " + std::to_string(rate) + " vs target " +
                                 std::to_string(ms.target_rate));
        realized(alpha, &out.y_missing);
    }

    for (int t = 0; t < T; ++t)
        if (out.y_missing[t]) out.y[t] = std::numeric_limits<double>::quiet_NaN();
    return out;
}

MissingnessReport missingness_report(const TimeSeriesDataset& ds, const ModelSpec& spec) {
    ds.validate();
    const int T = ds.length();
    spec.validate(T);

    MissingnessReport rep;
    rep.total_rows = T;
    rep.outcome_rate = static_cast<double>(ds.n_missing()) / T;

    const int depth = spec.burnin_depth();
    rep.analysis_rows = std::max(0, T - depth);
    rep.lag_rates.assign(static_cast<std::size_t>(spec.q), 0.0);

    if (rep.analysis_rows == 0) return rep;

    for (int t = depth; t < T; ++t) {
        bool complete = !ds.y_missing[t];
        for (int j = 1; j <= spec.q; ++j) {
            if (t - j >= 0 && ds.y_missing[t - j]) {
                rep.lag_rates[static_cast<std::size_t>(j - 1)] += 1.0;
                complete = false;
            }
        }
        rep.complete_rows += complete;
    }
    for (auto& r : rep.lag_rates) r /= rep.analysis_rows;
    rep.complete_row_rate = static_cast<double>(rep.complete_rows) / rep.analysis_rows;
    return rep;
}

}  // namespace ssmimpute
