#include "ssmimpute/structure.hpp"

#include "ssmimpute/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ssmimpute {

namespace {

struct PrefixSums {
    std::vector<double> mean;  // prefix of means
    std::vector<double> var;   // prefix of variances

    explicit PrefixSums(const CoefficientPath& p) {
        const int n = p.length();
        mean.assign(n + 1, 0.0);
        var.assign(n + 1, 0.0);
        for (int i = 0; i < n; ++i) {
            mean[i + 1] = mean[i] + p.mean[i];
            var[i + 1] = var[i] + p.var[i];
        }
    }
    double mean_of(int a, int b) const { return (mean[b] - mean[a]) / (b - a); }  // [a,b)
    double var_of(int a, int b) const { return (var[b] - var[a]) / (b - a); }
};

// Recursive binary segmentation over [a, b) (0-based). Candidate c0 is the
// last index of the left part; both parts must hold min_seg points. The
// split statistic compares the flanking min_seg-wide window means.
void segment(const PrefixSums& ps, int a, int b, int min_seg, double mult,
             std::vector<int>& out) {
    if (b - a < 2 * min_seg) return;

    int best_c = -1;
    double best_stat = -1.0;
    double best_jump = 0.0, best_sd = 0.0;

    for (int c0 = a + min_seg - 1; c0 <= b - min_seg - 1; ++c0) {
        const int la = std::max(a, c0 - min_seg + 1);
        const int rb = std::min(b, c0 + 1 + min_seg);
        const double ml = ps.mean_of(la, c0 + 1);
        const double mr = ps.mean_of(c0 + 1, rb);
        const double pooled_var = 0.5 * (ps.var_of(la, c0 + 1) + ps.var_of(c0 + 1, rb));
        const double sd = std::sqrt(std::max(0.0, pooled_var));
        const double jump = std::abs(mr - ml);
        const double stat = jump / std::max(sd, 1e-300);
        if (stat > best_stat) {
            best_stat = stat;
            best_c = c0;
            best_jump = jump;
            best_sd = sd;
        }
    }
    if (best_c < 0 || !(best_jump > mult * best_sd)) return;

    segment(ps, a, best_c + 1, min_seg, mult, out);
    out.push_back(best_c + 1);  // 1-based change point: t <= c left, t > c right
    segment(ps, best_c + 1, b, min_seg, mult, out);
}

}  // namespace

std::vector<int> detect_change_points(const CoefficientPath& path, int min_seg,
                                      double split_sd_mult) {
    if (min_seg < 2) throw ContractError("detect_change_points: min_seg must be >= 2");
    if (path.length() != static_cast<int>(path.var.size()))
        throw ContractError("detect_change_points: mean/var length mismatch");
    std::vector<int> out;
    if (path.length() < 2 * min_seg) return out;
    PrefixSums ps(path);
    segment(ps, 0, path.length(), min_seg, split_sd_mult, out);
    return out;
}

DynamicsClassification classify_dynamics(const CoefficientPath& path,
                                         const StructureOptions& opts) {
    DynamicsClassification cls;
    const int n = path.length();
    if (n == 0) return cls;

    cls.change_points = detect_change_points(path, opts.min_seg, opts.split_sd_mult);

    auto range_of = [&](int a, int b) {
        double lo = path.mean[a], hi = path.mean[a];
        for (int i = a; i < b; ++i) {
            lo = std::min(lo, path.mean[i]);
            hi = std::max(hi, path.mean[i]);
        }
        return hi - lo;
    };
    auto avg_sd_of = [&](int a, int b) {
        double s = 0.0;
        for (int i = a; i < b; ++i) s += std::sqrt(std::max(0.0, path.var[i]));
        return s / (b - a);
    };

    const double total_range = range_of(0, n);
    const double avg_sd = avg_sd_of(0, n);
    cls.variation_ratio = total_range / std::max(avg_sd, 1e-300);

    if (cls.change_points.empty()) {
        cls.verdict = (total_range <= opts.invariant_sd_mult * avg_sd) ? DynKind::invariant
                                                                       : DynKind::random_walk;
        return cls;
    }

    // piecewise flat? every segment's range must be small against its own SD
    bool flat_pieces = true;
    int a = 0;
    std::vector<int> bounds = cls.change_points;
    bounds.push_back(n);
    for (int c : bounds) {
        const int b = std::min(c, n);
        if (b > a && range_of(a, b) > opts.invariant_sd_mult * avg_sd_of(a, b))
            flat_pieces = false;
        a = b;
    }
    cls.verdict = flat_pieces ? DynKind::periodic_stable : DynKind::random_walk;
    return cls;
}

double one_step_prediction_score(const StateSpace& ss, const ObservationSeries& y) {
    BeliefPath bp = kalman_filter(ss, y);
    double score = 0.0;
    for (int t = 0; t < bp.length(); ++t) {
        if (!y.observed[t]) continue;
        const double e = y.y[t] - bp.predicted_mean[t];
        score += e * e;
    }
    return score;
}

}  // namespace ssmimpute
