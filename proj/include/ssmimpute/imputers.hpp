#pragma once

#include "ssmimpute/dataset.hpp"
#include "ssmimpute/design.hpp"
#include "ssmimpute/dlm.hpp"
#include "ssmimpute/optimize.hpp"
#include "ssmimpute/structure.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ssmimpute {

enum class DrawSource { smoothed, filtered };

struct ImputationConfig {
    int r = 20;            ///< multiple-imputation draws, >= 2
    int max_iter = 50;     ///< outer iteration cap
    double tol = 1e-4;     ///< relative tolerance on loglik, coefficients, parameters
    std::uint64_t seed = 0;
    DrawSource draw_source = DrawSource::smoothed;
    StructureOptions structure;  ///< change-point learning thresholds
    FitOptions fit;              ///< simplex budget for the MLE steps
    double jump_scale = 1e3;     ///< periodic-stable jump = this x Var(observed y)
    double diffuse_prior_var = 1e4;

    void validate() const;
};

/// Rubin-combined per-coefficient, per-time estimates.
struct PooledEstimate {
    Eigen::MatrixXd mean;     ///< T x n_coef
    Eigen::MatrixXd within;   ///< average within-imputation variance
    Eigen::MatrixXd between;  ///< between-imputation variance
    Eigen::MatrixXd total;    ///< within + (1 + 1/r) between
    Eigen::MatrixXd lo90, hi90;
    int r = 1;
};

/// Combine r per-cell estimates and variances. Normal quantiles are used for
/// the 90% bounds. Requires r >= 2.
PooledEstimate rubin_pool(const std::vector<Eigen::MatrixXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& variances);

/// Scalar convenience used in tests and hand checks.
struct ScalarPool {
    double mean, within, between, total, lo90, hi90;
};
ScalarPool rubin_pool_scalar(const std::vector<double>& estimates,
                             const std::vector<double>& variances);

struct ConvergenceRecord {
    int iteration = 0;
    double loglik = 0.0;
    double max_coef_change = 0.0;   ///< scaled by coefficient magnitude
    double max_param_change = 0.0;  ///< relative
    bool change_points_moved = false;
};

struct ImputationResult {
    std::string method;
    PooledEstimate pooled;  ///< single-fit methods carry between = 0, r = 1
    std::vector<std::string> coef_names;
    std::vector<Eigen::VectorXd> completed;  ///< completed outcome series (empty for cc)
    StructuralParams params;
    std::vector<ConvergenceRecord> trace;
    std::map<std::string, std::vector<int>> change_points;  ///< 1-based, original timeline
    bool converged = true;
    double loglik = 0.0;
    double one_step_score = 0.0;      ///< sum of squared one-step prediction errors
    Eigen::VectorXd predictive_mean;  ///< smoothed outcome prediction F_t s_t
    Eigen::VectorXd predictive_sd;    ///< sqrt(F_t S_t F_t' + V)
    std::vector<int> cc_time_map;     ///< cc only: row -> original 1-based t
    int eval_length = 0;              ///< timeline length of the estimate matrices
};

/// The iterative multiple-imputation algorithm: initialize missing outcomes
/// by interpolation, then repeat (MLE fit on observed outcomes with completed
/// lags) -> (r posterior coefficient/noise draws, imputed-outcome refits,
/// Rubin pooling) -> (point update = mean of the r draws) until the
/// likelihood, coefficient paths, structural parameters and any learned
/// change points stabilize. Estimates come from the terminal iteration,
/// which runs under the resolved (periodic-stable) realization.
ImputationResult ssm_mp(const TimeSeriesDataset& ds, const ModelSpec& spec,
                        const ImputationConfig& cfg);

/// The deterministic variant: iterate fit -> substitute y_hat = F theta_hat
/// (no noise) to convergence, then one terminal multiple-imputation pass with
/// r noisy draws and Rubin pooling.
ImputationResult ssm_impute(const TimeSeriesDataset& ds, const ModelSpec& spec,
                            const ImputationConfig& cfg);

enum class BaselineMethod { mean, locf, linear, spline, mice, ar };

BaselineMethod baseline_from_string(const std::string& s);

/// Completed outcome series under a baseline strategy (1 series, or r for
/// mice). Observed values pass through bit-exact.
std::vector<Eigen::VectorXd> baseline_impute(const TimeSeriesDataset& ds, BaselineMethod method,
                                             const ImputationConfig& cfg);

/// Splice out incomplete rows, fit on the compressed timeline, and report
/// estimates there along with the original-time map.
ImputationResult complete_case_fit(const TimeSeriesDataset& ds, const ModelSpec& spec,
                                   const ImputationConfig& cfg);

/// One state-space fit on data whose design is already complete (used for
/// post-imputation analysis and the fit command). Response rows are all
/// non-burn-in rows with an observed outcome.
ImputationResult plain_fit(const TimeSeriesDataset& ds, const ModelSpec& spec,
                           const ImputationConfig& cfg);

/// Stable method vocabulary: cc, mean, locf, linear, spline, mice, ar,
/// ssmimpute, ssmmp.
const std::vector<std::string>& method_vocabulary();

/// Dispatch on a method name: baselines are completed and then analyzed with
/// the declared state space model (mice completions are Rubin-pooled).
ImputationResult fit_method(const TimeSeriesDataset& ds, const ModelSpec& spec,
                            const ImputationConfig& cfg, const std::string& method);

}  // namespace ssmimpute
