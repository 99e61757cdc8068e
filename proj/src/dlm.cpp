#include "ssmimpute/dlm.hpp"

#include "ssmimpute/errors.hpp"
#include "ssmimpute/linalg.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ssmimpute {

namespace {

// In-place symmetrization without temporaries; the filter runs this after
// every covariance update.
inline void symmetrize_inplace(Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }
    }
}

// Symmetrize, reject covariances that went indefinite beyond roundoff, and
// zero the harmless negative dust on the diagonal so sqrt(diag) stays real.
inline void finalize_cov(Eigen::MatrixXd& c, int t_one_based, const char* stage) {
    symmetrize_inplace(c);
    const int n = static_cast<int>(c.rows());
    const double scale = 1.0 + std::abs(c.trace());
    for (int i = 0; i < n; ++i) {
        if (c(i, i) < -1e-8 * scale)
            throw NumericalError(std::string(stage) + ": covariance lost positive "
                                 "semidefiniteness at t=" + std::to_string(t_one_based));
        if (c(i, i) < 0.0) c(i, i) = 0.0;
    }
}

bool matrix_is_identity(const Eigen::MatrixXd& g) {
    const int n = static_cast<int>(g.rows());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (g(i, j) != (i == j ? 1.0 : 0.0)) return false;
    return true;
}

// Shared forward recursion. When `out` is null only the log-likelihood is
// accumulated, with no per-step heap traffic; the MLE objective runs this
// path thousands of times.
double run_filter(const StateSpace& ss, const ObservationSeries& y, BeliefPath* out) {
    const int T = ss.T;
    const int d = ss.d;
    if (y.length() != T)
        throw ContractError("kalman_filter: outcome length " + std::to_string(y.length()) +
                            " does not match system length " + std::to_string(T));
    if (static_cast<int>(y.observed.size()) != T)
        throw ContractError("kalman_filter: observed mask length mismatch");

    if (out) {
        out->beliefs.resize(T);
        out->R.resize(T);
        out->Q.resize(T);
        out->predicted_mean.resize(T);
        out->loglik = 0.0;
    }

    Eigen::VectorXd m = ss.m0;
    Eigen::MatrixXd C = ss.C0;
    Eigen::VectorXd a(d), f(d), Rf(d);
    Eigen::MatrixXd Rt(d, d), GC(d, d);

    const double log2pi = std::log(2.0 * std::numbers::pi);
    double loglik = 0.0;

    for (int t = 0; t < T; ++t) {
        // predict: a_t = G_t m_{t-1}, R_t = G_t C_{t-1} G_t' + W_t
        if (ss.g_identity) {
            a = m;
            Rt = C + ss.W_at(t);
        } else {
            const Eigen::MatrixXd& G = ss.G_at(t);
            a.noalias() = G * m;
            GC.noalias() = G * C;
            Rt.noalias() = GC * G.transpose();
            Rt += ss.W_at(t);
        }
        symmetrize_inplace(Rt);

        f = ss.F.row(t);
        Rf.noalias() = Rt * f;
        const double v = ss.V_at(t);
        const double Q = f.dot(Rf) + v;
        const double pred = f.dot(a);

        if (y.observed[t]) {
            if (!(Q > 0.0))
                throw NumericalError("kalman_filter: model degeneracy, predicted outcome "
                                     "variance Q <= 0 at t=" + std::to_string(t + 1));
            const double e = y.y[t] - pred;
            const double invQ = 1.0 / Q;
            m = a + Rf * (e * invQ);
            C.noalias() = Rt - (Rf * Rf.transpose()) * invQ;
            loglik += -0.5 * (log2pi + std::log(Q) + e * e * invQ);
        } else {
            // zero-gain skip: belief carries the pure prediction forward
            m = a;
            C = Rt;
        }
        finalize_cov(C, t + 1, "kalman_filter");

        if (out) {
            out->beliefs[t].mean = m;
            out->beliefs[t].cov = C;
            out->R[t] = Rt;
            out->Q[t] = Q;
            out->predicted_mean[t] = pred;
        }
    }
    if (out) out->loglik = loglik;
    return loglik;
}

}  // namespace

int ObservationSeries::count_observed() const {
    int n = 0;
    for (char o : observed) n += (o != 0);
    return n;
}

ObservationSeries fully_observed(const Eigen::VectorXd& y) {
    ObservationSeries s;
    s.y = y;
    s.observed.assign(static_cast<std::size_t>(y.size()), 1);
    return s;
}

void StateSpace::validate() {
    if (d <= 0 || T <= 0) throw ContractError("StateSpace: empty system");
    if (G.empty() || W.empty() || V.size() == 0)
        throw ContractError("StateSpace: G/W/V unset");
    if (static_cast<int>(G.size()) != 1 && static_cast<int>(G.size()) != T)
        throw ContractError("StateSpace: G must have 1 or T entries");
    if (static_cast<int>(W.size()) != 1 && static_cast<int>(W.size()) != T)
        throw ContractError("StateSpace: W must have 1 or T entries");
    if (V.size() != 1 && static_cast<int>(V.size()) != T)
        throw ContractError("StateSpace: V must have 1 or T entries");
    if (F.rows() != T || F.cols() != d)
        throw ContractError("StateSpace: F must be T x d");
    if (m0.size() != d || C0.rows() != d || C0.cols() != d)
        throw ContractError("StateSpace: prior dimension mismatch");

    g_identity = true;
    for (const auto& g : G) {
        if (g.rows() != d || g.cols() != d)
            throw ContractError("StateSpace: G dimension mismatch");
        if (g_identity && !matrix_is_identity(g)) g_identity = false;
    }
    for (const auto& w : W) {
        if (w.rows() != d || w.cols() != d)
            throw ContractError("StateSpace: W dimension mismatch");
        if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + w.cwiseAbs().maxCoeff()))
            throw ContractError("StateSpace: W not symmetric");
        if (w.diagonal().minCoeff() < 0.0)
            throw ContractError("StateSpace: W has a negative diagonal entry");
    }
    for (int t = 0; t < static_cast<int>(V.size()); ++t)
        if (!(V[t] > 0.0))
            throw ContractError("StateSpace: V must be > 0 (t=" + std::to_string(t + 1) + ")");
    if (!is_psd(C0))
        throw ContractError("StateSpace: C0 not symmetric PSD");
}

StateSpace make_constant_system(const Eigen::MatrixXd& G, const Eigen::MatrixXd& W,
                                const Eigen::MatrixXd& F, double v,
                                const Eigen::VectorXd& m0, const Eigen::MatrixXd& C0) {
    StateSpace ss;
    ss.d = static_cast<int>(F.cols());
    ss.T = static_cast<int>(F.rows());
    ss.G = {G};
    ss.W = {W};
    ss.F = F;
    ss.V = Eigen::VectorXd::Constant(1, v);
    ss.m0 = m0;
    ss.C0 = C0;
    ss.validate();
    if (!is_psd(W)) throw ContractError("make_constant_system: W not PSD");
    return ss;
}

BeliefPath kalman_filter(const StateSpace& ss, const ObservationSeries& y) {
    BeliefPath bp;
    run_filter(ss, y, &bp);
    return bp;
}

double log_likelihood(const StateSpace& ss, const ObservationSeries& y) {
    return run_filter(ss, y, nullptr);
}

BeliefPath kalman_smoother(const StateSpace& ss, const BeliefPath& filtered) {
    const int T = filtered.length();
    const int d = ss.d;
    if (T != ss.T) throw ContractError("kalman_smoother: path/system length mismatch");
    if (T == 0) throw ContractError("kalman_smoother: empty path");
    if (filtered.beliefs[0].mean.size() != d)
        throw ContractError("kalman_smoother: path/system dimension mismatch");

    BeliefPath sp;
    sp.beliefs.resize(T);
    sp.R = filtered.R;
    sp.Q = filtered.Q;
    sp.predicted_mean = filtered.predicted_mean;
    sp.loglik = filtered.loglik;

    sp.beliefs[T - 1] = filtered.beliefs[T - 1];

    Eigen::MatrixXd B(d, d), X(d, d), S(d, d);
    int pinv_steps = 0;
    double worst_rcond = 1.0;

    for (int t = T - 2; t >= 0; --t) {
        const Eigen::MatrixXd& Rn = filtered.R[t + 1];
        const Eigen::MatrixXd& Ct = filtered.beliefs[t].cov;
        const Eigen::VectorXd& mt = filtered.beliefs[t].mean;
        const Eigen::MatrixXd& G = ss.G_at(t + 1);

        if (ss.g_identity) B = Ct;
        else B.noalias() = G * Ct;

        // X = R_{t+1}^{-1} G_{t+1} C_t, so the smoother gain is X'.
        Eigen::LDLT<Eigen::MatrixXd> ldlt(Rn);
        const auto& dvec = ldlt.vectorD();
        const double dmax = dvec.cwiseAbs().maxCoeff();
        const double dmin = dvec.minCoeff();
        if (dmax > 0.0 && dmin > 1e-12 * dmax) {
            X = ldlt.solve(B);
        } else {
            // rank-deficient prediction covariance: clipped-eigenvalue pseudo-inverse
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Rn);
            Eigen::VectorXd ev = es.eigenvalues();
            const double emax = ev.cwiseAbs().maxCoeff();
            Eigen::VectorXd inv = Eigen::VectorXd::Zero(d);
            for (int i = 0; i < d; ++i)
                if (ev[i] > 1e-12 * (emax > 0 ? emax : 1.0)) inv[i] = 1.0 / ev[i];
            X.noalias() = es.eigenvectors() * inv.asDiagonal() *
                          es.eigenvectors().transpose() * B;
            ++pinv_steps;
            worst_rcond = std::min(worst_rcond, emax > 0.0 ? ev.minCoeff() / emax : 0.0);
        }

        const Eigen::VectorXd& sn = sp.beliefs[t + 1].mean;
        const Eigen::MatrixXd& Sn = sp.beliefs[t + 1].cov;

        Eigen::VectorXd resid = ss.g_identity ? (sn - mt).eval() : (sn - G * mt).eval();
        sp.beliefs[t].mean = mt + X.transpose() * resid;
        S.noalias() = Ct - X.transpose() * (Rn - Sn) * X;
        finalize_cov(S, t + 1, "kalman_smoother");
        sp.beliefs[t].cov = S;
    }
    if (pinv_steps > 0)
        warn("kalman_smoother: singular one-step covariance at " + std::to_string(pinv_steps) +
             " step(s), pseudo-inverse used (worst rcond " + std::to_string(worst_rcond) + ")");
    return sp;
}

std::vector<Eigen::MatrixXd> draw_states(const BeliefPath& bp, int count, std::uint64_t seed) {
    if (count < 1) throw ContractError("draw_states: count must be >= 1");
    const int T = bp.length();
    if (T == 0) throw ContractError("draw_states: empty belief path");
    const int d = static_cast<int>(bp.beliefs[0].mean.size());

    std::vector<Eigen::MatrixXd> draws(static_cast<std::size_t>(count), Eigen::MatrixXd(T, d));
    std::mt19937_64 rng(seed);
    int clipped_times = 0;

    for (int t = 0; t < T; ++t) {
        bool clipped = false;
        const Eigen::MatrixXd L = sampling_factor(bp.beliefs[t].cov, &clipped);
        clipped_times += clipped;
        const Eigen::VectorXd& mean = bp.beliefs[t].mean;
        for (int j = 0; j < count; ++j) {
            Eigen::VectorXd z = standard_normal(d, rng);
            draws[j].row(t) = (mean + L * z).transpose();
        }
    }
    if (clipped_times > 0)
        warn("draw_states: clipped negative covariance eigenvalues at " +
             std::to_string(clipped_times) + " time point(s)");
    return draws;
}

}  // namespace ssmimpute
