#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ssmimpute {

struct Series {
    std::string name;
    Eigen::VectorXd values;
};

/// Aligned outcome / exposure / covariate series on t = 1..T with a
/// missingness mask on the outcome only. Exposures and covariates must be
/// fully observed. When a simulated outcome is masked, the pre-mask values
/// are retained in y_truth for evaluation; y itself is NaN at masked t.
struct TimeSeriesDataset {
    Eigen::VectorXd y;
    std::vector<char> y_missing;
    std::vector<Series> exposures;
    std::vector<Series> covariates;
    Eigen::VectorXd y_truth;  ///< empty unless the mask was applied synthetically

    int length() const { return static_cast<int>(y.size()); }
    int n_missing() const;
    std::vector<int> missing_times() const;  ///< 0-based
    const Series* find_series(const std::string& name) const;

    /// Lengths agree, mask consistent with stored values, exposures and
    /// covariates finite everywhere. Throws ContractError.
    void validate() const;

    /// Copy with the outcome replaced by a completed series (no missingness).
    TimeSeriesDataset with_completed_outcome(const Eigen::VectorXd& completed) const;
};

}  // namespace ssmimpute
