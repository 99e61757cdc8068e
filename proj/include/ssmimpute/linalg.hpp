#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace ssmimpute {

/// In-place (A + A')/2.
inline void symmetrize(Eigen::MatrixXd& a) {
    a = ((a + a.transpose()) * 0.5).eval();
}

/// Eigenvalue test with a relative floor; used for input validation, not in hot loops.
bool is_psd(const Eigen::MatrixXd& a, double tol = 1e-10);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& a);

/// Project onto the PSD cone by clipping negative eigenvalues at 0.
Eigen::MatrixXd psd_clip(const Eigen::MatrixXd& a);

/// Factor of a PSD matrix for sampling: L with L L' = clip(A). Negative
/// eigenvalues are clipped at 0; *clipped reports whether any were.
Eigen::MatrixXd sampling_factor(const Eigen::MatrixXd& cov, bool* clipped = nullptr);

/// Deterministic stream splitter (splitmix64) for deriving independent
/// sub-seeds from one user seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// One standard normal vector of length n.
Eigen::VectorXd standard_normal(int n, std::mt19937_64& rng);

}  // namespace ssmimpute
