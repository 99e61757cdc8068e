#pragma once

#include "ssmimpute/dataset.hpp"
#include "ssmimpute/design.hpp"
#include "ssmimpute/imputers.hpp"
#include "ssmimpute/missingness.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssmimpute {

/// Benchmark data-generating process:
///   Y_t = b0_t + rho_t Y_{t-1} + b1_t A_t + b2_t A_{t-1} + bc_t C_t + v_t
/// Stationary: all coefficients constant. Non-stationary: the intercept is a
/// driftless random walk started at its constant value and b1 is piecewise
/// constant over three periods.
struct ScenarioSpec {
    std::string kind = "stationary";  ///< "stationary" | "nonstationary"
    int T = 500;
    double noise_var = 0.1;
    double beta0 = 40.0;
    double rho = 0.5;
    double beta1 = -1.5;  ///< stationary value
    double beta2 = -0.5;
    double beta_c = -1.0;
    std::vector<int> beta1_points;               ///< default 0.4T, 0.7T
    std::vector<double> beta1_values = {-1.0, -2.0, -1.0};
    double beta0_rw_var = 1.0;
    double exo_ar = 0.3;  ///< AR(1) autocorrelation of A_t and C_t
    int burnin_steps = 50;
    std::uint64_t seed = 0;

    bool nonstationary() const { return kind == "nonstationary"; }
    std::vector<int> resolved_beta1_points() const;
    void validate() const;
};

/// Ground truth: coefficient paths, noises, and the pre-sample values needed
/// to re-evaluate the generating equation exactly.
struct TruthRecord {
    Eigen::MatrixXd coef;   ///< T x 5: beta0, rho, beta1, beta2, beta_c
    Eigen::VectorXd noise;  ///< v_t
    double y0 = 0.0, a0 = 0.0, c0 = 0.0;

    static const std::vector<std::string>& coef_names();
};

struct GeneratedScenario {
    TimeSeriesDataset ds;  ///< series named y / a / c
    TruthRecord truth;
};

GeneratedScenario generate_scenario(const ScenarioSpec& sc);

/// Analysis model matching the scenario: q=1, p=1, o=0 on exposure "a" and
/// covariate "c"; for the non-stationary scenario the intercept is a random
/// walk and the A_t coefficient is periodic-stable with unknown points.
ModelSpec scenario_analysis_model(const ScenarioSpec& sc);

/// 1 when truth lies in [lo, hi].
int coverage_indicator(double truth, double lo, double hi);

struct GridSpec {
    std::vector<ScenarioSpec> scenarios;
    std::vector<Mechanism> mechanisms;
    std::vector<double> rates;
    std::vector<std::string> methods;
    int reps = 100;
    std::uint64_t seed = 0;
    ImputationConfig impute_cfg;
    int threads = 0;  ///< 0 = SSMIMPUTE_THREADS or hardware
};

struct MetricsRow {
    std::string scenario, mechanism, method, coefficient;
    double rate = 0.0;
    int eval_time = 0;
    double mean_est = 0.0, emp_se = 0.0, mean_se = 0.0, coverage = 0.0;
    int reps = 0;  ///< replications contributing
};

struct RawEstimate {
    std::string scenario, mechanism, method, coefficient;
    double rate = 0.0;
    int eval_time = 0;
    int rep = 0;
    double est = 0.0, se = 0.0, lo90 = 0.0, hi90 = 0.0, truth = 0.0;
    int covered = 0;
};

struct ChangePointRecord {
    std::string scenario, mechanism, method;
    double rate = 0.0;
    int rep = 0;
    std::vector<int> detected;  ///< 1-based original-timeline points
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    std::vector<RawEstimate> raw;
    std::vector<ChangePointRecord> change_points;
    std::vector<std::string> failures;  ///< "<cell>/rep: reason"
};

/// Full scenario x mechanism x rate x method benchmark. Replication k uses
/// seed xor k; every method inside a replication sees the same data and
/// mask. Per-cell failures are recorded, never fatal. Estimates are taken at
/// t = T for every coefficient and additionally at the period ends for the
/// piecewise b1.
MetricsTable run_grid(const GridSpec& grid);

}  // namespace ssmimpute
