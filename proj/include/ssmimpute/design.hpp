#pragma once

#include "ssmimpute/dataset.hpp"
#include "ssmimpute/dlm.hpp"
#include "ssmimpute/optimize.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssmimpute {

enum class DynKind { invariant, random_walk, ar, periodic_stable };

std::string to_string(DynKind k);
DynKind dyn_kind_from_string(const std::string& s);

/// Evolution law of one regression coefficient.
///
/// Change points are 1-based times in the paper's convention: a point c
/// means the coefficient is constant for t <= c and may jump into t = c+1.
/// An empty change-point list on a periodic_stable tag means the points are
/// unknown and must be learned before the system can be realized.
struct CoefficientDynamics {
    DynKind kind = DynKind::invariant;
    double sigma2 = -1.0;             ///< rw/ar innovation variance; <0 = free (MLE)
    std::vector<double> ar_phi;       ///< ar only; companion coefficients
    std::vector<int> change_points;   ///< periodic_stable only

    bool sigma2_free() const { return sigma2 < 0.0; }
};

/// User-level regression declaration: lag depths, named exposure/covariate
/// series, and per-coefficient dynamics.
struct ModelSpec {
    int q = 1;  ///< outcome-lag depth, >= 1
    int p = 0;  ///< exposure-lag depth, >= 0
    int o = 0;  ///< covariate-lag depth, >= 0
    std::vector<std::string> exposures;
    std::vector<std::string> covariates;
    std::map<std::string, CoefficientDynamics> dynamics;  ///< by coefficient name
    bool fixed_obs_var = false;
    double obs_var = 1.0;  ///< used only when fixed_obs_var

    /// Column order is fixed: intercept, y_lag1..y_lagq, then per exposure
    /// name_lag0..name_lagp, then per covariate name_lag0..name_lago.
    std::vector<std::string> coefficient_names() const;
    int n_coefficients() const;
    int burnin_depth() const { return std::max(q, std::max(p, o)); }
    CoefficientDynamics dynamics_for(const std::string& coef_name) const;
    void validate(int T) const;

    /// Names of periodic_stable coefficients with no change points declared.
    std::vector<std::string> unresolved_coefficients() const;
};

/// Per-time observation rows F_t with completeness bookkeeping.
struct DesignMatrix {
    Eigen::MatrixXd X;  ///< T x d; zero where a needed value was unavailable
    std::vector<std::string> colnames;
    std::vector<char> incomplete;  ///< row needed a missing lagged outcome, none provided
    std::vector<char> imputed;     ///< row contains substituted imputed values
    std::vector<char> burnin;      ///< row references pre-sample indices

    int length() const { return static_cast<int>(X.rows()); }
    int d() const { return static_cast<int>(X.cols()); }

    /// Rows eligible for the likelihood: outcome observed, row complete,
    /// not burn-in.
    std::vector<char> response_rows(const std::vector<char>& y_missing) const;
};

/// For each t (0-based), the outcome lags j with y_{t-j} missing.
/// Positions referencing pre-sample times are not reported.
std::vector<std::vector<int>> derive_lag_missingness(const std::vector<char>& mask,
                                                     const std::vector<int>& lags);

/// Assemble F_t rows. imputed_y, when given, must be T-long with NaN
/// everywhere except at missing-outcome positions; providing a value at an
/// observed position is a contract error (observed data are never
/// overwritten). Without imputed_y, rows needing missing lags are flagged
/// incomplete instead of fabricated.
DesignMatrix build_design(const TimeSeriesDataset& ds, const ModelSpec& spec,
                          const Eigen::VectorXd* imputed_y = nullptr);

/// Prior and variance context for realizing a declared model.
struct RealizeContext {
    double outcome_marginal_var = 1.0;  ///< drives the periodic-stable jump size
    double jump_scale = 1e3;            ///< kappa = jump_scale * outcome_marginal_var
    double diffuse_prior_var = 1e4;     ///< C0 = this * I, m0 = 0
};

/// Realized system plus the state index of each coefficient (AR dynamics
/// expand a coefficient into a companion block; its head carries the value).
struct RealizedSystem {
    StateSpace ss;
    std::vector<int> coef_state_index;
    std::vector<std::string> coef_names;

    /// Extract per-coefficient means/variances (T x n_coef) from a path.
    Eigen::MatrixXd coef_means(const BeliefPath& bp) const;
    Eigen::MatrixXd coef_vars(const BeliefPath& bp) const;
};

/// Names of the free structural parameters of a spec, in a fixed order:
/// "obs_var" first (unless fixed), then "w_<coef>" for each random_walk/ar
/// coefficient with a free innovation variance.
StructuralParams structural_template(const ModelSpec& spec, double init_obs_var = 1.0,
                                     double init_w = 0.1);

/// Turn a declared model into (G, W, F, V, m0, C0). All dynamics must be
/// resolved (periodic_stable with explicit change points).
RealizedSystem realize_state_space(const ModelSpec& spec, const DesignMatrix& dm,
                                   const StructuralParams& sp,
                                   const RealizeContext& ctx = {});

/// Complete-case splice: drop rows with a missing outcome or an incomplete
/// or burn-in design row; survivors are re-indexed consecutively onto a new
/// timeline. orig_time maps new 0-based rows to original 0-based rows.
struct SplicedData {
    TimeSeriesDataset ds;
    DesignMatrix dm;
    std::vector<int> orig_time;
};
SplicedData splice_complete_cases(const TimeSeriesDataset& ds, const DesignMatrix& dm);

}  // namespace ssmimpute
