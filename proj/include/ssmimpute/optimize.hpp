#pragma once

#include "ssmimpute/dlm.hpp"

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace ssmimpute {

/// Named positive scalars entering W_t / V_t, kept on the log scale so the
/// optimizer works unconstrained.
struct StructuralParams {
    std::vector<std::string> names;
    Eigen::VectorXd log_values;

    int size() const { return static_cast<int>(names.size()); }
    double value(int i) const;
    double value(const std::string& name) const;
    int index_of(const std::string& name) const;  ///< -1 when absent
    void set_value(const std::string& name, double positive_value);
    void validate() const;  ///< exponentiated values finite and > 0
};

StructuralParams make_params(const std::vector<std::string>& names,
                             const std::vector<double>& values);

struct SimplexResult {
    Eigen::VectorXd x;
    double fmin = 0.0;
    bool converged = false;
    int evals = 0;
};

/// Derivative-free Nelder-Mead minimization. Stops when the simplex diameter
/// drops below diam_tol or after max_evals objective evaluations.
SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                          const Eigen::VectorXd& x0, double init_step, double diam_tol,
                          int max_evals);

struct FitOptions {
    int max_evals = 2000;    ///< total objective evaluations across restarts
    double diam_tol = 1e-6;  ///< simplex diameter convergence threshold
    int restarts = 3;        ///< spread initial points (log-space offsets 0, +s, -s)
    double spread = 2.0;     ///< restart offset in log space
    double init_step = 0.5;  ///< initial simplex edge in log space
};

struct FitReport {
    StructuralParams params;
    double loglik = 0.0;
    bool converged = false;
    int evals = 0;
};

/// Maps a structural-parameter vector to a concrete system; the design
/// module provides these for declared models.
using StateSpaceBuilder = std::function<StateSpace(const StructuralParams&)>;

/// Maximum-likelihood estimation of the structural variance parameters by
/// simplex search over log-parameters. Requires >= 10 observed outcomes.
/// When the parameter vector is empty the builder is evaluated once and the
/// report carries the fixed-model likelihood.
FitReport fit_structural_params(const StateSpaceBuilder& build, const StructuralParams& init,
                                const ObservationSeries& y, const FitOptions& opts = {});

}  // namespace ssmimpute
