#pragma once

#include "ssmimpute/design.hpp"
#include "ssmimpute/dlm.hpp"

#include <Eigen/Dense>
#include <vector>

namespace ssmimpute {

/// Pointwise smoothed mean and variance of one coefficient over t = 1..T.
struct CoefficientPath {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;

    int length() const { return static_cast<int>(mean.size()); }
};

struct StructureOptions {
    int min_seg = 30;               ///< minimum segment length
    double split_sd_mult = 3.0;     ///< accept a split when the jump exceeds this x pooled SD
    double invariant_sd_mult = 2.0; ///< flat when path range is below this x average SD
};

/// Binary segmentation on a smoothed coefficient path. A returned point c
/// (1-based) separates periods t <= c and t > c. Splits compare means of the
/// flanking min_seg-wide windows, standardized by the pooled local posterior
/// SD; recursion stops when no candidate clears split_sd_mult or a segment
/// cannot hold two min_seg halves. Empty list when nothing is found.
std::vector<int> detect_change_points(const CoefficientPath& path, int min_seg,
                                      double split_sd_mult = 3.0);

struct DynamicsClassification {
    DynKind verdict = DynKind::invariant;
    std::vector<int> change_points;
    double variation_ratio = 0.0;  ///< path range over average posterior SD
};

/// Classify a smoothed trajectory produced under a random-walk realization:
/// invariant when it is flat relative to its posterior SD, periodic_stable
/// when change points split it into flat pieces, random_walk otherwise.
DynamicsClassification classify_dynamics(const CoefficientPath& path,
                                         const StructureOptions& opts = {});

/// Sum of squared one-step prediction errors over observed outcomes; callers
/// exclude burn-in rows through the observed mask. Lower ranks better.
double one_step_prediction_score(const StateSpace& ss, const ObservationSeries& y);

}  // namespace ssmimpute
