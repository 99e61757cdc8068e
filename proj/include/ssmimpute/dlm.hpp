#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace ssmimpute {

/// Realized linear Gaussian state space system for a univariate outcome:
///
///   state:       theta_t = G_t theta_{t-1} + w_t,   w_t ~ N(0, W_t)
///   observation: y_t     = F_t theta_t + v_t,       v_t ~ N(0, V_t)
///   prior:       theta_0 ~ N(m0, C0)
///
/// G, W and V may be stored with a single entry (time-invariant, broadcast
/// to every t) or with one entry per time point. F always has one row per t.
struct StateSpace {
    int d = 0;  ///< state dimension
    int T = 0;  ///< number of time points

    std::vector<Eigen::MatrixXd> G;  ///< size 1 or T, each d x d
    std::vector<Eigen::MatrixXd> W;  ///< size 1 or T, each d x d PSD
    Eigen::MatrixXd F;               ///< T x d observation rows
    Eigen::VectorXd V;               ///< size 1 or T, observation variance > 0
    Eigen::VectorXd m0;              ///< prior state mean (d)
    Eigen::MatrixXd C0;              ///< prior state covariance (d x d PSD)

    /// True when every G_t is the identity; lets the filter skip the
    /// transition products. Set by validate().
    bool g_identity = false;

    const Eigen::MatrixXd& G_at(int t) const { return G[G.size() == 1 ? 0 : t]; }
    const Eigen::MatrixXd& W_at(int t) const { return W[W.size() == 1 ? 0 : t]; }
    double V_at(int t) const { return V[V.size() == 1 ? 0 : t]; }

    /// Checks dimensions, symmetry/PSD of W_t and C0, and V_t > 0.
    /// Throws ContractError on violation. Must be called before filtering;
    /// the factory functions in design.hpp call it for you.
    void validate();
};

/// Convenience builder for a time-invariant system.
StateSpace make_constant_system(const Eigen::MatrixXd& G, const Eigen::MatrixXd& W,
                                const Eigen::MatrixXd& F, double v,
                                const Eigen::VectorXd& m0, const Eigen::MatrixXd& C0);

/// Gaussian posterior of the state at one time point.
struct GaussianBelief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Output of a filtering or smoothing pass over t = 1..T.
struct BeliefPath {
    std::vector<GaussianBelief> beliefs;  ///< posterior at each t
    std::vector<Eigen::MatrixXd> R;       ///< one-step state prediction covariance R_t
    Eigen::VectorXd Q;                    ///< one-step outcome prediction variance Q_t
    Eigen::VectorXd predicted_mean;       ///< one-step outcome prediction F_t G_t m_{t-1}
    double loglik = 0.0;                  ///< innovation log-likelihood over observed t

    int length() const { return static_cast<int>(beliefs.size()); }
};

/// Outcome series as the filter consumes it. Values at !observed positions
/// are never read; the update is skipped there (zero-gain contract) and the
/// likelihood accumulates only over observed t. Callers fold burn-in and
/// incomplete-row exclusions into `observed`.
struct ObservationSeries {
    Eigen::VectorXd y;
    std::vector<char> observed;  ///< 1 = run the measurement update at t

    int length() const { return static_cast<int>(y.size()); }
    int count_observed() const;
};

ObservationSeries fully_observed(const Eigen::VectorXd& y);

/// Forward Kalman recursion with missing-outcome skipping.
/// Throws NumericalError naming t when a posterior covariance degenerates
/// (negative diagonal after symmetrization) or Q_t <= 0.
BeliefPath kalman_filter(const StateSpace& ss, const ObservationSeries& y);

/// Backward smoothing recursion; `filtered` must come from kalman_filter on
/// the same system. Singular R_{t+1} is handled by a clipped-eigenvalue
/// pseudo-inverse with a condition warning.
BeliefPath kalman_smoother(const StateSpace& ss, const BeliefPath& filtered);

/// BeliefPath.loglik of a filter pass; deterministic in its inputs.
double log_likelihood(const StateSpace& ss, const ObservationSeries& y);

/// r independent draws theta~_t ~ N(mean_t, cov_t) per time point, as T x d
/// matrices. Non-PSD covariances are clipped at zero with a warning. A seed
/// fully determines the output.
std::vector<Eigen::MatrixXd> draw_states(const BeliefPath& bp, int count, std::uint64_t seed);

}  // namespace ssmimpute
