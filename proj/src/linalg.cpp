#include "ssmimpute/linalg.hpp"

#include "ssmimpute/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>

namespace ssmimpute {

void warn(const std::string& msg) {
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    std::cerr << "[ssmimpute] warning: " << msg << "\n";
}

bool is_psd(const Eigen::MatrixXd& a, double tol) {
    if (a.rows() != a.cols()) return false;
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + a.cwiseAbs().maxCoeff()))
        return false;
    return min_eigenvalue(a) >= -tol * (1.0 + a.cwiseAbs().maxCoeff());
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd psd_clip(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd sampling_factor(const Eigen::MatrixXd& cov, bool* clipped) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::VectorXd ev = es.eigenvalues();
    // negative dust from roundoff is zeroed silently; only report real deficits
    if (clipped) *clipped = ev.minCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Eigen::VectorXd standard_normal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

}  // namespace ssmimpute
