#include "ssmimpute/dataset.hpp"

#include "ssmimpute/errors.hpp"

#include <cmath>

namespace ssmimpute {

int TimeSeriesDataset::n_missing() const {
    int n = 0;
    for (char m : y_missing) n += (m != 0);
    return n;
}

std::vector<int> TimeSeriesDataset::missing_times() const {
    std::vector<int> out;
    for (int t = 0; t < length(); ++t)
        if (y_missing[t]) out.push_back(t);
    return out;
}

const Series* TimeSeriesDataset::find_series(const std::string& name) const {
    for (const auto& s : exposures)
        if (s.name == name) return &s;
    for (const auto& s : covariates)
        if (s.name == name) return &s;
    return nullptr;
}

void TimeSeriesDataset::validate() const {
    const int T = length();
    if (T == 0) throw ContractError("TimeSeriesDataset: empty outcome series");
    if (static_cast<int>(y_missing.size()) != T)
        throw ContractError("TimeSeriesDataset: mask length does not match outcome length");
    for (int t = 0; t < T; ++t)
        if (!y_missing[t] && !std::isfinite(y[t]))
            throw ContractError("TimeSeriesDataset: non-finite observed outcome at t=" +
                                std::to_string(t + 1));
    auto check = [&](const std::vector<Series>& group, const char* what) {
        for (const auto& s : group) {
            if (static_cast<int>(s.values.size()) != T)
                throw ContractError(std::string("TimeSeriesDataset: ") + what + " '" + s.name +
                                    "' length does not match outcome length");
            for (int t = 0; t < T; ++t)
                if (!std::isfinite(s.values[t]))
                    throw ContractError(std::string("TimeSeriesDataset: ") + what + " '" +
                                        s.name + "' has a missing value at t=" +
                                        std::to_string(t + 1) + " (must be fully observed)");
        }
    };
    check(exposures, "exposure");
    check(covariates, "covariate");
    if (y_truth.size() != 0 && static_cast<int>(y_truth.size()) != T)
        throw ContractError("TimeSeriesDataset: y_truth length mismatch");
}

TimeSeriesDataset TimeSeriesDataset::with_completed_outcome(const Eigen::VectorXd& completed) const {
    if (static_cast<int>(completed.size()) != length())
        throw ContractError("with_completed_outcome: length mismatch");
    for (int t = 0; t < length(); ++t) {
        if (!std::isfinite(completed[t]))
            throw ContractError("with_completed_outcome: non-finite value at t=" +
                                std::to_string(t + 1));
        if (!y_missing[t] && completed[t] != y[t])
            throw ContractError("with_completed_outcome: observed outcome altered at t=" +
                                std::to_string(t + 1));
    }
    TimeSeriesDataset out = *this;
    out.y = completed;
    out.y_missing.assign(static_cast<std::size_t>(length()), 0);
    return out;
}

}  // namespace ssmimpute
