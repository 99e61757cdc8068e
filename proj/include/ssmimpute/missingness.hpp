#pragma once

#include "ssmimpute/dataset.hpp"
#include "ssmimpute/design.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssmimpute {

enum class Mechanism { MCAR, MAR, MNAR };

std::string to_string(Mechanism m);
Mechanism mechanism_from_string(const std::string& s);

struct MechanismSpec {
    Mechanism kind = Mechanism::MCAR;
    double target_rate = 0.5;
    std::string driver;  ///< MAR: fully observed series driving missingness
    std::uint64_t seed = 0;
};

/// Mask the outcome of a fully observed dataset.
///
/// MCAR masks each t independently with probability target_rate. MAR/MNAR
/// mask t when u_t < logistic(alpha + z_t) with z the standardized driver
/// (MAR: the named series, default first covariate; MNAR: the outcome
/// itself); alpha is calibrated by bisection until the realized rate is
/// within +-1% of target (50 steps, else error). The pre-mask outcome is
/// retained in y_truth.
TimeSeriesDataset apply_mechanism(const TimeSeriesDataset& ds, const MechanismSpec& ms);

struct MissingnessReport {
    double outcome_rate = 0.0;
    std::vector<double> lag_rates;  ///< induced regressor missing rate, lag 1..q
    double complete_row_rate = 0.0;
    int total_rows = 0;
    int analysis_rows = 0;  ///< rows past burn-in
    int complete_rows = 0;
};

/// Quantifies how outcome missingness inflates into the design: raw rate,
/// per-lag induced rates, and the complete-row rate over the analysis window.
MissingnessReport missingness_report(const TimeSeriesDataset& ds, const ModelSpec& spec);

}  // namespace ssmimpute
