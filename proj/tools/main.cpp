#include "ssmimpute/errors.hpp"
#include "ssmimpute/imputers.hpp"
#include "ssmimpute/io.hpp"
#include "ssmimpute/missingness.hpp"
#include "ssmimpute/simulation.hpp"
#include "ssmimpute/svg.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;
using namespace ssmimpute;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string method;
    std::string out_dir = ".";
    long long seed = -1;
    bool full_scale = false;
};

RunConfig load_and_seed(const CommonArgs& args) {
    RunConfig cfg = load_config(args.config_path);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    return cfg;
}

std::string out_file(const CommonArgs& args, const std::string& name) {
    fs::create_directories(args.out_dir);
    return (fs::path(args.out_dir) / name).string();
}

int cmd_simulate(const CommonArgs& args) {
    RunConfig cfg = load_and_seed(args);
    ScenarioSpec sc = cfg.scenario;
    sc.seed = cfg.seed;
    if (args.full_scale) {
        sc.T = 1000;
        sc.beta1_points.clear();  // re-derive 400/700 from the full length
    }
    const GeneratedScenario gen = generate_scenario(sc);
    write_data_csv(out_file(args, "data.csv"), gen.ds);
    write_truth_csv(out_file(args, "truth.csv"), gen.truth);
    write_metadata_json(out_file(args, "metadata.json"), "simulate", cfg);
    return 0;
}

int cmd_mask(const CommonArgs& args) {
    RunConfig cfg = load_and_seed(args);
    const TimeSeriesDataset ds = read_data_csv(args.data_path, cfg.model);
    MechanismSpec ms = cfg.mechanism;
    ms.seed = cfg.seed;
    const TimeSeriesDataset masked = apply_mechanism(ds, ms);
    write_data_csv(out_file(args, "masked.csv"), masked);
    const MissingnessReport rep = missingness_report(masked, cfg.model);
    write_missingness_json(out_file(args, "missingness.json"), rep, rep.outcome_rate);
    write_metadata_json(out_file(args, "metadata.json"), "mask", cfg);
    return 0;
}

int cmd_impute(const CommonArgs& args) {
    RunConfig cfg = load_and_seed(args);
    const auto& vocab = method_vocabulary();
    if (std::find(vocab.begin(), vocab.end(), args.method) == vocab.end())
        throw ConfigError("impute: unknown method '" + args.method + "'");
    const TimeSeriesDataset ds = read_data_csv(args.data_path, cfg.model);
    ImputationConfig icfg = cfg.imputation;
    icfg.seed = cfg.seed;
    const ImputationResult res = fit_method(ds, cfg.model, icfg, args.method);

    write_estimates_csv(out_file(args, "estimates.csv"), res);
    write_trace_csv(out_file(args, "trace.csv"), res.trace);
    write_changepoints_csv(out_file(args, "changepoints.csv"), res);
    if (!res.cc_time_map.empty()) write_ccmap_csv(out_file(args, "ccmap.csv"), res.cc_time_map);
    if (res.completed.size() == 1) {
        write_data_csv(out_file(args, "completed.csv"),
                       ds.with_completed_outcome(res.completed[0]));
    } else {
        for (std::size_t j = 0; j < res.completed.size(); ++j)
            write_data_csv(out_file(args, "completed_" + std::to_string(j + 1) + ".csv"),
                           ds.with_completed_outcome(res.completed[j]));
    }
    write_paths_svg(out_file(args, "paths.svg"), res);
    write_metadata_json(out_file(args, "metadata.json"), "impute " + args.method, cfg);
    if (!res.converged)
        std::cerr << "impute: not converged within max_iter (results still emitted; "
                     "see trace.csv)\n";
    return 0;
}

int cmd_fit(const CommonArgs& args) {
    RunConfig cfg = load_and_seed(args);
    const TimeSeriesDataset ds = read_data_csv(args.data_path, cfg.model);
    ImputationConfig icfg = cfg.imputation;
    icfg.seed = cfg.seed;
    const ImputationResult res = plain_fit(ds, cfg.model, icfg);
    write_estimates_csv(out_file(args, "estimates.csv"), res);
    write_fit_json(out_file(args, "fit.json"), res);
    write_paths_svg(out_file(args, "paths.svg"), res);
    write_metadata_json(out_file(args, "metadata.json"), "fit", cfg);
    return 0;
}

int cmd_evaluate(const CommonArgs& args) {
    RunConfig cfg = load_and_seed(args);
    GridSpec grid;
    for (const auto& kind : cfg.eval_scenarios) {
        ScenarioSpec sc = cfg.scenario;
        sc.kind = kind;
        sc.T = args.full_scale ? 1000 : cfg.eval_T;
        sc.beta1_points.clear();
        grid.scenarios.push_back(sc);
    }
    grid.mechanisms = cfg.eval_mechanisms;
    grid.rates = cfg.eval_rates;
    grid.methods = cfg.eval_methods;
    grid.reps = args.full_scale ? 500 : cfg.eval_reps;
    grid.seed = cfg.seed;
    grid.impute_cfg = cfg.imputation;

    const MetricsTable table = run_grid(grid);
    write_metrics_csv(out_file(args, "metrics.csv"), table);
    write_raw_estimates_csv(out_file(args, "raw_estimates.csv"), table);
    write_grid_changepoints_csv(out_file(args, "changepoints.csv"), table);
    {
        std::ofstream log(out_file(args, "failures.log"), std::ios::binary);
        for (const auto& f : table.failures) log << f << "\n";
    }

    // one boxplot per scenario x mechanism x coefficient x eval time
    std::map<std::string, std::map<std::string, std::vector<double>>> plots;
    std::map<std::string, std::pair<double, int>> truth_sum;
    for (const auto& r : table.raw) {
        const std::string key = r.scenario + "_" + r.mechanism + "_" +
                                std::to_string(static_cast<int>(r.rate * 100)) + "_" +
                                r.coefficient + "_t" + std::to_string(r.eval_time);
        plots[key][r.method].push_back(r.est);
        auto& ts = truth_sum[key];
        ts.first += r.truth;
        ts.second += 1;
    }
    for (const auto& [key, by_method] : plots) {
        std::vector<BoxplotGroup> groups;
        for (const auto& m : grid.methods) {
            const auto it = by_method.find(m);
            if (it != by_method.end()) groups.push_back({m, it->second});
        }
        const double ref = truth_sum[key].first / truth_sum[key].second;
        write_boxplot_svg(out_file(args, "boxplot_" + key + ".svg"), key, groups, &ref);
    }
    write_metadata_json(out_file(args, "metadata.json"), "evaluate", cfg);
    if (!table.failures.empty())
        std::cerr << "evaluate: " << table.failures.size()
                  << " cell failure(s) recorded in failures.log\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear Gaussian state-space engine for N-of-1 series with missing outcomes"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub, bool needs_data, bool needs_method) {
        sub->add_option("--config", args.config_path, "JSON configuration")->required();
        if (needs_data)
            sub->add_option("--data", args.data_path, "input data CSV")->required();
        if (needs_method)
            sub->add_option("--method", args.method, "imputation method name")->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--seed", args.seed, "seed override");
        sub->add_flag("--full-scale", args.full_scale,
                      "run the full-size benchmark (500 reps, T=1000)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "generate a benchmark dataset");
    add_common(simulate, false, false);
    CLI::App* mask = app.add_subcommand("mask", "apply a missingness mechanism to a dataset");
    add_common(mask, true, false);
    CLI::App* impute = app.add_subcommand("impute", "impute missing outcomes and estimate");
    add_common(impute, true, true);
    CLI::App* fit = app.add_subcommand("fit", "fit the declared state space model");
    add_common(fit, true, false);
    CLI::App* evaluate = app.add_subcommand("evaluate", "run the method comparison grid");
    add_common(evaluate, false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(args);
        if (mask->parsed()) return cmd_mask(args);
        if (impute->parsed()) return cmd_impute(args);
        if (fit->parsed()) return cmd_fit(args);
        if (evaluate->parsed()) return cmd_evaluate(args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InsufficientDataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
