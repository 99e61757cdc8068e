#include "ssmimpute/simulation.hpp"

#include "ssmimpute/errors.hpp"
#include "ssmimpute/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <random>
#include <thread>

namespace ssmimpute {

std::vector<int> ScenarioSpec::resolved_beta1_points() const {
    if (!beta1_points.empty()) return beta1_points;
    return {static_cast<int>(std::lround(0.4 * T)), static_cast<int>(std::lround(0.7 * T))};
}

void ScenarioSpec::validate() const {
    if (kind != "stationary" && kind != "nonstationary")
        throw ConfigError("ScenarioSpec: kind must be stationary|nonstationary");
    if (T < 100) throw ContractError("ScenarioSpec: T must be >= 100");
    if (!(noise_var > 0.0)) throw ContractError("ScenarioSpec: noise_var must be > 0");
    if (nonstationary()) {
        const auto pts = resolved_beta1_points();
        if (pts.size() + 1 != beta1_values.size())
            throw ContractError("ScenarioSpec: beta1 needs one more value than change points");
        int prev = 1;
        for (int c : pts) {
            if (c <= 1 || c >= T || c <= prev)
                throw ContractError("ScenarioSpec: invalid beta1 change points");
            prev = c;
        }
    }
    if (!(std::abs(exo_ar) < 1.0)) throw ContractError("ScenarioSpec: |exo_ar| must be < 1");
}

const std::vector<std::string>& TruthRecord::coef_names() {
    static const std::vector<std::string> names = {"beta0", "rho", "beta1", "beta2", "beta_c"};
    return names;
}

namespace {

// stationary AR(1) with unit marginal variance
Eigen::VectorXd ar1_series(int n, double phi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> stdn(0.0, 1.0);
    Eigen::VectorXd x(n);
    x[0] = stdn(rng);
    const double innov_sd = std::sqrt(1.0 - phi * phi);
    for (int i = 1; i < n; ++i) x[i] = phi * x[i - 1] + innov_sd * stdn(rng);
    return x;
}

}  // namespace

GeneratedScenario generate_scenario(const ScenarioSpec& sc) {
    sc.validate();
    const int T = sc.T;
    const int burn = std::max(0, sc.burnin_steps);
    const int N = burn + T + 1;  // index 0..N-1; t = i - burn (t=0 is the pre-sample slot)

    const Eigen::VectorXd A = ar1_series(N, sc.exo_ar, mix_seed(sc.seed, 1));
    const Eigen::VectorXd C = ar1_series(N, sc.exo_ar, mix_seed(sc.seed, 2));

    // coefficient paths over t = 1..T
    Eigen::MatrixXd coef(T, 5);
    coef.col(1).setConstant(sc.rho);
    coef.col(3).setConstant(sc.beta2);
    coef.col(4).setConstant(sc.beta_c);
    if (sc.nonstationary()) {
        std::mt19937_64 rng(mix_seed(sc.seed, 3));
        std::normal_distribution<double> stdn(0.0, 1.0);
        const double sd = std::sqrt(sc.beta0_rw_var);
        coef(0, 0) = sc.beta0;  // walk starts at the baseline level
        for (int t = 1; t < T; ++t) coef(t, 0) = coef(t - 1, 0) + sd * stdn(rng);
        const auto pts = sc.resolved_beta1_points();
        for (int t = 0; t < T; ++t) {
            std::size_t period = 0;
            while (period < pts.size() && t + 1 > pts[period]) ++period;
            coef(t, 2) = sc.beta1_values[period];
        }
    } else {
        coef.col(0).setConstant(sc.beta0);
        coef.col(2).setConstant(sc.beta1);
    }

    std::mt19937_64 noise_rng(mix_seed(sc.seed, 4));
    std::normal_distribution<double> stdn(0.0, 1.0);
    const double noise_sd = std::sqrt(sc.noise_var);

    auto coef_at = [&](int i, int col) {
        return i <= burn ? coef(0, col) : coef(i - burn - 1, col);
    };

    Eigen::VectorXd Y(N), noise_kept(T);
    Y[0] = sc.beta0 / (1.0 - sc.rho);  // stationary level implied by the constants
    for (int i = 1; i < N; ++i) {
        const double v = noise_sd * stdn(noise_rng);
        Y[i] = coef_at(i, 0) + coef_at(i, 1) * Y[i - 1] + coef_at(i, 2) * A[i] +
               coef_at(i, 3) * A[i - 1] + coef_at(i, 4) * C[i] + v;
        if (i > burn) noise_kept[i - burn - 1] = v;
    }

    GeneratedScenario out;
    out.truth.coef = coef;
    out.truth.noise = noise_kept;
    out.truth.y0 = Y[burn];
    out.truth.a0 = A[burn];
    out.truth.c0 = C[burn];

    out.ds.y = Y.segment(burn + 1, T);
    out.ds.y_missing.assign(static_cast<std::size_t>(T), 0);
    out.ds.exposures.push_back({"a", A.segment(burn + 1, T)});
    out.ds.covariates.push_back({"c", C.segment(burn + 1, T)});
    out.ds.validate();
    return out;
}

ModelSpec scenario_analysis_model(const ScenarioSpec& sc) {
    ModelSpec m;
    m.q = 1;
    m.p = 1;
    m.o = 0;
    m.exposures = {"a"};
    m.covariates = {"c"};
    if (sc.nonstationary()) {
        CoefficientDynamics rw;
        rw.kind = DynKind::random_walk;
        m.dynamics["intercept"] = rw;
        CoefficientDynamics per;
        per.kind = DynKind::periodic_stable;  // change points learned
        m.dynamics["a_lag0"] = per;
    }
    return m;
}

int coverage_indicator(double truth, double lo, double hi) {
    if (lo > hi) throw ContractError("coverage_indicator: interval lower > upper");
    return (truth >= lo && truth <= hi) ? 1 : 0;
}

namespace {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SSMIMPUTE_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

struct RepOutput {
    std::vector<RawEstimate> raw;
    std::vector<ChangePointRecord> cps;
    std::vector<std::string> failures;
};

struct Cell {
    ScenarioSpec scenario;
    Mechanism mechanism;
    double rate;
    int scenario_index;
    int cell_index;
};

void run_one_rep(const GridSpec& grid, const Cell& cell, int rep, RepOutput& out) {
    const std::uint64_t rep_seed = grid.seed ^ static_cast<std::uint64_t>(rep);

    ScenarioSpec sc = cell.scenario;
    sc.seed = mix_seed(rep_seed, 1000 + static_cast<std::uint64_t>(cell.scenario_index));
    const GeneratedScenario gen = generate_scenario(sc);

    MechanismSpec ms;
    ms.kind = cell.mechanism;
    ms.target_rate = cell.rate;
    ms.seed = mix_seed(rep_seed, 2000 + static_cast<std::uint64_t>(cell.cell_index));
    TimeSeriesDataset masked;
    try {
        masked = apply_mechanism(gen.ds, ms);
    } catch (const std::exception& e) {
        out.failures.push_back(sc.kind + "/" + to_string(cell.mechanism) + "/rep " +
                               std::to_string(rep) + ": mask: " + e.what());
        return;
    }

    const ModelSpec model = scenario_analysis_model(sc);
    const auto coef_names = model.coefficient_names();
    const auto pts = sc.resolved_beta1_points();

    for (std::size_t mi = 0; mi < grid.methods.size(); ++mi) {
        const std::string& method = grid.methods[mi];
        ImputationConfig cfg = grid.impute_cfg;
        cfg.seed = mix_seed(rep_seed, 3000 + mi);
        ImputationResult res;
        try {
            res = fit_method(masked, model, cfg, method);
        } catch (const std::exception& e) {
            out.failures.push_back(sc.kind + "/" + to_string(cell.mechanism) + "/" +
                                   std::to_string(cell.rate) + "/" + method + "/rep " +
                                   std::to_string(rep) + ": " + e.what());
            continue;
        }

        auto row_for_time = [&](int eval_t) {
            if (res.cc_time_map.empty()) return eval_t - 1;
            int row = 0;
            for (int i = 0; i < static_cast<int>(res.cc_time_map.size()); ++i)
                if (res.cc_time_map[i] <= eval_t) row = i;
            return row;
        };

        for (std::size_t j = 0; j < coef_names.size(); ++j) {
            std::vector<int> eval_times = {sc.T};
            if (sc.nonstationary() && coef_names[j] == "a_lag0") {
                eval_times.clear();
                for (int c : pts) eval_times.push_back(c);
                eval_times.push_back(sc.T);
            }
            for (int et : eval_times) {
                const int row = row_for_time(et);
                RawEstimate r;
                r.scenario = sc.kind;
                r.mechanism = to_string(cell.mechanism);
                r.rate = cell.rate;
                r.method = method;
                r.coefficient = coef_names[j];
                r.eval_time = et;
                r.rep = rep;
                r.est = res.pooled.mean(row, static_cast<int>(j));
                r.se = std::sqrt(std::max(0.0, res.pooled.total(row, static_cast<int>(j))));
                r.lo90 = res.pooled.lo90(row, static_cast<int>(j));
                r.hi90 = res.pooled.hi90(row, static_cast<int>(j));
                r.truth = gen.truth.coef(et - 1, static_cast<int>(j));
                r.covered = coverage_indicator(r.truth, r.lo90, r.hi90);
                out.raw.push_back(std::move(r));
            }
        }

        const auto it = res.change_points.find("a_lag0");
        if (it != res.change_points.end()) {
            ChangePointRecord c;
            c.scenario = sc.kind;
            c.mechanism = to_string(cell.mechanism);
            c.rate = cell.rate;
            c.method = method;
            c.rep = rep;
            c.detected = it->second;
            out.cps.push_back(std::move(c));
        }
    }
}

}  // namespace

MetricsTable run_grid(const GridSpec& grid) {
    if (grid.reps < 1) throw ContractError("run_grid: reps must be >= 1");
    for (const auto& m : grid.methods) {
        const auto& vocab = method_vocabulary();
        if (std::find(vocab.begin(), vocab.end(), m) == vocab.end())
            throw ConfigError("run_grid: unknown method '" + m + "'");
    }
    for (const auto& sc : grid.scenarios) sc.validate();

    std::vector<Cell> cells;
    int cell_index = 0;
    for (int si = 0; si < static_cast<int>(grid.scenarios.size()); ++si)
        for (const auto& mech : grid.mechanisms)
            for (double rate : grid.rates)
                cells.push_back({grid.scenarios[si], mech, rate, si, cell_index++});

    MetricsTable table;
    const int n_threads = std::max(1, std::min(resolve_threads(grid.threads), grid.reps));

    for (const auto& cell : cells) {
        std::vector<RepOutput> outputs(static_cast<std::size_t>(grid.reps));
        if (n_threads == 1) {
            for (int rep = 0; rep < grid.reps; ++rep)
                run_one_rep(grid, cell, rep, outputs[static_cast<std::size_t>(rep)]);
        } else {
            std::atomic<int> next{0};
            auto worker = [&]() {
                for (;;) {
                    const int rep = next.fetch_add(1);
                    if (rep >= grid.reps) return;
                    run_one_rep(grid, cell, rep, outputs[static_cast<std::size_t>(rep)]);
                }
            };
            std::vector<std::thread> pool;
            for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        for (auto& o : outputs) {
            table.raw.insert(table.raw.end(), o.raw.begin(), o.raw.end());
            table.change_points.insert(table.change_points.end(), o.cps.begin(), o.cps.end());
            table.failures.insert(table.failures.end(), o.failures.begin(), o.failures.end());
        }
    }

    // aggregate raw estimates into the metrics rows
    std::map<std::string, std::vector<const RawEstimate*>> groups;
    std::vector<std::string> order;
    for (const auto& r : table.raw) {
        const std::string key = r.scenario + "\x1f" + r.mechanism + "\x1f" +
                                std::to_string(r.rate) + "\x1f" + r.method + "\x1f" +
                                r.coefficient + "\x1f" + std::to_string(r.eval_time);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(&r);
    }
    for (const auto& key : order) {
        const auto& g = groups[key];
        MetricsRow row;
        row.scenario = g[0]->scenario;
        row.mechanism = g[0]->mechanism;
        row.rate = g[0]->rate;
        row.method = g[0]->method;
        row.coefficient = g[0]->coefficient;
        row.eval_time = g[0]->eval_time;
        row.reps = static_cast<int>(g.size());
        double sum = 0.0, sum_se = 0.0, sum_cov = 0.0;
        for (const auto* r : g) {
            sum += r->est;
            sum_se += r->se;
            sum_cov += r->covered;
        }
        row.mean_est = sum / row.reps;
        row.mean_se = sum_se / row.reps;
        row.coverage = sum_cov / row.reps;
        if (row.reps >= 2) {
            double ss = 0.0;
            for (const auto* r : g) ss += (r->est - row.mean_est) * (r->est - row.mean_est);
            row.emp_se = std::sqrt(ss / (row.reps - 1));
        } else {
            row.emp_se = std::numeric_limits<double>::quiet_NaN();
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace ssmimpute
