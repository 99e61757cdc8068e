#pragma once

#include "ssmimpute/dataset.hpp"
#include "ssmimpute/design.hpp"
#include "ssmimpute/imputers.hpp"
#include "ssmimpute/missingness.hpp"
#include "ssmimpute/simulation.hpp"

#include <string>
#include <vector>

namespace ssmimpute {

/// Parsed configuration document. Unknown keys anywhere are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    ModelSpec model;
    ImputationConfig imputation;
    ScenarioSpec scenario;
    MechanismSpec mechanism;

    std::vector<std::string> eval_scenarios = {"stationary"};
    std::vector<Mechanism> eval_mechanisms = {Mechanism::MCAR};
    std::vector<double> eval_rates = {0.5};
    std::vector<std::string> eval_methods = {"cc", "ssmimpute"};
    int eval_reps = 100;
    int eval_T = 500;

    std::string canonical;  ///< canonical serialization, input to the hash
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);

/// FNV-1a 64 hex digest of the canonical config text.
std::string config_hash_hex(const std::string& canonical);

/// Shortest round-trip decimal formatting; NaN renders as "NA".
std::string fmt_double(double v);

/// Data CSV: header `t,y,<exposures...>,<covariates...>` in the model's
/// declared order; empty y field = missing; t must be consecutive integers.
TimeSeriesDataset read_data_csv(const std::string& path, const ModelSpec& model);
void write_data_csv(const std::string& path, const TimeSeriesDataset& ds);

void write_truth_csv(const std::string& path, const TruthRecord& truth);

/// Per-time coefficient estimates with 90% bounds: coefficient,t,estimate,
/// se,lo90,hi90 (t on the result's own timeline; cc emits its map separately).
void write_estimates_csv(const std::string& path, const ImputationResult& res);

void write_trace_csv(const std::string& path, const std::vector<ConvergenceRecord>& trace);
void write_changepoints_csv(const std::string& path, const ImputationResult& res);
void write_ccmap_csv(const std::string& path, const std::vector<int>& map);

void write_metrics_csv(const std::string& path, const MetricsTable& table);
void write_raw_estimates_csv(const std::string& path, const MetricsTable& table);
void write_grid_changepoints_csv(const std::string& path, const MetricsTable& table);

void write_missingness_json(const std::string& path, const MissingnessReport& rep,
                            double achieved_rate);
void write_fit_json(const std::string& path, const ImputationResult& res);
void write_metadata_json(const std::string& path, const std::string& command,
                         const RunConfig& cfg);

}  // namespace ssmimpute
