#include "ssmimpute/io.hpp"

#include "ssmimpute/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace ssmimpute {

using nlohmann::json;

std::string fmt_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string config_hash_hex(const std::string& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
}

double num_or(const json& obj, const char* key, double dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
    return obj[key].get<double>();
}

int int_or(const json& obj, const char* key, int dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number_integer())
        throw ConfigError(std::string("config: '") + key + "' must be an integer");
    return obj[key].get<int>();
}

std::string str_or(const json& obj, const char* key, const std::string& dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_string()) throw ConfigError(std::string("config: '") + key + "' must be a string");
    return obj[key].get<std::string>();
}

ModelSpec parse_model(const json& m) {
    reject_unknown_keys(m, {"q", "p", "o", "exposures", "covariates", "dynamics", "obs_var"},
                        "model");
    ModelSpec spec;
    spec.q = int_or(m, "q", 1);
    spec.p = int_or(m, "p", 0);
    spec.o = int_or(m, "o", 0);
    if (m.contains("exposures"))
        for (const auto& e : m["exposures"]) spec.exposures.push_back(e.get<std::string>());
    if (m.contains("covariates"))
        for (const auto& c : m["covariates"]) spec.covariates.push_back(c.get<std::string>());
    if (m.contains("obs_var")) {
        spec.fixed_obs_var = true;
        spec.obs_var = m["obs_var"].get<double>();
    }
    if (m.contains("dynamics")) {
        for (auto it = m["dynamics"].begin(); it != m["dynamics"].end(); ++it) {
            const json& d = it.value();
            reject_unknown_keys(d, {"kind", "sigma2", "phi", "change_points"},
                                "model.dynamics." + it.key());
            CoefficientDynamics dyn;
            dyn.kind = dyn_kind_from_string(str_or(d, "kind", "invariant"));
            dyn.sigma2 = num_or(d, "sigma2", -1.0);
            if (d.contains("phi"))
                for (const auto& v : d["phi"]) dyn.ar_phi.push_back(v.get<double>());
            if (d.contains("change_points"))
                for (const auto& v : d["change_points"]) dyn.change_points.push_back(v.get<int>());
            spec.dynamics[it.key()] = dyn;
        }
    }
    return spec;
}

ImputationConfig parse_imputation(const json& m) {
    reject_unknown_keys(m,
                        {"r", "max_iter", "tol", "draw_source", "min_seg", "split_sd_mult",
                         "invariant_sd_mult", "max_evals", "restarts", "jump_scale",
                         "diffuse_prior_var"},
                        "imputation");
    ImputationConfig cfg;
    cfg.r = int_or(m, "r", cfg.r);
    cfg.max_iter = int_or(m, "max_iter", cfg.max_iter);
    cfg.tol = num_or(m, "tol", cfg.tol);
    const std::string src = str_or(m, "draw_source", "smoothed");
    if (src == "smoothed") cfg.draw_source = DrawSource::smoothed;
    else if (src == "filtered") cfg.draw_source = DrawSource::filtered;
    else throw ConfigError("config: draw_source must be smoothed|filtered");
    cfg.structure.min_seg = int_or(m, "min_seg", cfg.structure.min_seg);
    cfg.structure.split_sd_mult = num_or(m, "split_sd_mult", cfg.structure.split_sd_mult);
    cfg.structure.invariant_sd_mult =
        num_or(m, "invariant_sd_mult", cfg.structure.invariant_sd_mult);
    cfg.fit.max_evals = int_or(m, "max_evals", cfg.fit.max_evals);
    cfg.fit.restarts = int_or(m, "restarts", cfg.fit.restarts);
    cfg.jump_scale = num_or(m, "jump_scale", cfg.jump_scale);
    cfg.diffuse_prior_var = num_or(m, "diffuse_prior_var", cfg.diffuse_prior_var);
    return cfg;
}

ScenarioSpec parse_scenario(const json& m) {
    reject_unknown_keys(m,
                        {"kind", "T", "noise_var", "beta0", "rho", "beta1", "beta2", "beta_c",
                         "beta1_points", "beta1_values", "beta0_rw_var", "exo_ar",
                         "burnin_steps"},
                        "scenario");
    ScenarioSpec sc;
    sc.kind = str_or(m, "kind", sc.kind);
    sc.T = int_or(m, "T", sc.T);
    sc.noise_var = num_or(m, "noise_var", sc.noise_var);
    sc.beta0 = num_or(m, "beta0", sc.beta0);
    sc.rho = num_or(m, "rho", sc.rho);
    sc.beta1 = num_or(m, "beta1", sc.beta1);
    sc.beta2 = num_or(m, "beta2", sc.beta2);
    sc.beta_c = num_or(m, "beta_c", sc.beta_c);
    if (m.contains("beta1_points")) {
        sc.beta1_points.clear();
        for (const auto& v : m["beta1_points"]) sc.beta1_points.push_back(v.get<int>());
    }
    if (m.contains("beta1_values")) {
        sc.beta1_values.clear();
        for (const auto& v : m["beta1_values"]) sc.beta1_values.push_back(v.get<double>());
    }
    sc.beta0_rw_var = num_or(m, "beta0_rw_var", sc.beta0_rw_var);
    sc.exo_ar = num_or(m, "exo_ar", sc.exo_ar);
    sc.burnin_steps = int_or(m, "burnin_steps", sc.burnin_steps);
    return sc;
}

MechanismSpec parse_mechanism(const json& m) {
    reject_unknown_keys(m, {"kind", "rate", "driver"}, "mechanism");
    MechanismSpec ms;
    ms.kind = mechanism_from_string(str_or(m, "kind", "MCAR"));
    ms.target_rate = num_or(m, "rate", ms.target_rate);
    ms.driver = str_or(m, "driver", "");
    return ms;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    reject_unknown_keys(root, {"seed", "model", "imputation", "scenario", "mechanism", "evaluate"},
                        "top level");

    RunConfig cfg;
    if (root.contains("seed")) {
        if (!root["seed"].is_number_integer())
            throw ConfigError("config: 'seed' must be an integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    if (root.contains("model")) cfg.model = parse_model(root["model"]);
    if (root.contains("imputation")) cfg.imputation = parse_imputation(root["imputation"]);
    if (root.contains("scenario")) cfg.scenario = parse_scenario(root["scenario"]);
    if (root.contains("mechanism")) cfg.mechanism = parse_mechanism(root["mechanism"]);
    if (root.contains("evaluate")) {
        const json& ev = root["evaluate"];
        reject_unknown_keys(ev, {"scenarios", "mechanisms", "rates", "methods", "reps", "T"},
                            "evaluate");
        if (ev.contains("scenarios")) {
            cfg.eval_scenarios.clear();
            for (const auto& s : ev["scenarios"]) cfg.eval_scenarios.push_back(s.get<std::string>());
        }
        if (ev.contains("mechanisms")) {
            cfg.eval_mechanisms.clear();
            for (const auto& s : ev["mechanisms"])
                cfg.eval_mechanisms.push_back(mechanism_from_string(s.get<std::string>()));
        }
        if (ev.contains("rates")) {
            cfg.eval_rates.clear();
            for (const auto& v : ev["rates"]) cfg.eval_rates.push_back(v.get<double>());
        }
        if (ev.contains("methods")) {
            cfg.eval_methods.clear();
            for (const auto& s : ev["methods"]) cfg.eval_methods.push_back(s.get<std::string>());
        }
        cfg.eval_reps = int_or(ev, "reps", cfg.eval_reps);
        cfg.eval_T = int_or(ev, "T", cfg.eval_T);
    }
    cfg.canonical = root.dump();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_field_double(const std::string& s, int row, const std::string& col) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("data CSV: row " + std::to_string(row) + ", column '" + col +
                          "': cannot parse '" + s + "' as a number");
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    return out;
}

}  // namespace

TimeSeriesDataset read_data_csv(const std::string& path, const ModelSpec& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("data CSV: cannot open '" + path + "'");

    std::vector<std::string> expected = {"t", "y"};
    for (const auto& e : model.exposures) expected.push_back(e);
    for (const auto& c : model.covariates) expected.push_back(c);

    std::string line;
    if (!std::getline(in, line)) throw ConfigError("data CSV: empty file");
    const auto header = split_csv_line(line);
    if (header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        std::string got;
        for (const auto& h : header) got += (got.empty() ? "" : ",") + h;
        throw ConfigError("data CSV: header mismatch; expected '" + want + "', got '" + got + "'");
    }

    TimeSeriesDataset ds;
    std::vector<double> ys;
    std::vector<char> miss;
    std::vector<std::vector<double>> extra(expected.size() - 2);
    int row = 1;
    long prev_t = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expected.size())
            throw ConfigError("data CSV: row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(expected.size()));
        const long t = static_cast<long>(parse_field_double(fields[0], row, "t"));
        if (!first && t != prev_t + 1)
            throw ConfigError("data CSV: row " + std::to_string(row) +
                              ": t must be consecutive integers (got " + std::to_string(t) +
                              " after " + std::to_string(prev_t) + ")");
        prev_t = t;
        first = false;
        if (fields[1].empty()) {
            ys.push_back(std::numeric_limits<double>::quiet_NaN());
            miss.push_back(1);
        } else {
            ys.push_back(parse_field_double(fields[1], row, "y"));
            miss.push_back(0);
        }
        for (std::size_t i = 2; i < expected.size(); ++i) {
            if (fields[i].empty())
                throw ConfigError("data CSV: row " + std::to_string(row) + ", column '" +
                                  expected[i] + "': empty (exposures/covariates must be fully "
                                  "observed)");
            extra[i - 2].push_back(parse_field_double(fields[i], row, expected[i]));
        }
    }
    const int T = static_cast<int>(ys.size());
    if (T == 0) throw ConfigError("data CSV: no data rows");

    ds.y = Eigen::Map<Eigen::VectorXd>(ys.data(), T);
    ds.y_missing = miss;
    std::size_t idx = 0;
    for (const auto& e : model.exposures) {
        Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(extra[idx].data(), T);
        ds.exposures.push_back({e, v});
        ++idx;
    }
    for (const auto& c : model.covariates) {
        Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(extra[idx].data(), T);
        ds.covariates.push_back({c, v});
        ++idx;
    }
    ds.validate();
    return ds;
}

void write_data_csv(const std::string& path, const TimeSeriesDataset& ds) {
    auto out = open_out(path);
    out << "t,y";
    for (const auto& s : ds.exposures) out << "," << s.name;
    for (const auto& s : ds.covariates) out << "," << s.name;
    out << "\n";
    for (int t = 0; t < ds.length(); ++t) {
        out << (t + 1) << ",";
        if (!ds.y_missing[t]) out << fmt_double(ds.y[t]);
        for (const auto& s : ds.exposures) out << "," << fmt_double(s.values[t]);
        for (const auto& s : ds.covariates) out << "," << fmt_double(s.values[t]);
        out << "\n";
    }
}

void write_truth_csv(const std::string& path, const TruthRecord& truth) {
    auto out = open_out(path);
    out << "t";
    for (const auto& n : TruthRecord::coef_names()) out << "," << n;
    out << "\n";
    for (int t = 0; t < truth.coef.rows(); ++t) {
        out << (t + 1);
        for (int j = 0; j < truth.coef.cols(); ++j) out << "," << fmt_double(truth.coef(t, j));
        out << "\n";
    }
}

void write_estimates_csv(const std::string& path, const ImputationResult& res) {
    auto out = open_out(path);
    out << "coefficient,t,estimate,se,lo90,hi90\n";
    for (std::size_t j = 0; j < res.coef_names.size(); ++j) {
        for (int t = 0; t < res.eval_length; ++t) {
            const int jj = static_cast<int>(j);
            out << res.coef_names[j] << "," << (t + 1) << ","
                << fmt_double(res.pooled.mean(t, jj)) << ","
                << fmt_double(std::sqrt(std::max(0.0, res.pooled.total(t, jj)))) << ","
                << fmt_double(res.pooled.lo90(t, jj)) << ","
                << fmt_double(res.pooled.hi90(t, jj)) << "\n";
        }
    }
}

void write_trace_csv(const std::string& path, const std::vector<ConvergenceRecord>& trace) {
    auto out = open_out(path);
    out << "iteration,loglik,max_coef_change,max_param_change,change_points_moved\n";
    for (const auto& r : trace)
        out << r.iteration << "," << fmt_double(r.loglik) << ","
            << fmt_double(r.max_coef_change) << "," << fmt_double(r.max_param_change) << ","
            << (r.change_points_moved ? 1 : 0) << "\n";
}

void write_changepoints_csv(const std::string& path, const ImputationResult& res) {
    auto out = open_out(path);
    out << "coefficient,change_point\n";
    for (const auto& [coef, pts] : res.change_points)
        for (int c : pts) out << coef << "," << c << "\n";
}

void write_ccmap_csv(const std::string& path, const std::vector<int>& map) {
    auto out = open_out(path);
    out << "t_spliced,t_original\n";
    for (std::size_t i = 0; i < map.size(); ++i) out << (i + 1) << "," << map[i] << "\n";
}

void write_metrics_csv(const std::string& path, const MetricsTable& table) {
    auto out = open_out(path);
    out << "scenario,mechanism,rate,method,coefficient,eval_time,mean_est,emp_se,mean_se,"
           "coverage,reps\n";
    for (const auto& r : table.rows)
        out << r.scenario << "," << r.mechanism << "," << fmt_double(r.rate) << "," << r.method
            << "," << r.coefficient << "," << r.eval_time << "," << fmt_double(r.mean_est) << ","
            << fmt_double(r.emp_se) << "," << fmt_double(r.mean_se) << ","
            << fmt_double(r.coverage) << "," << r.reps << "\n";
}

void write_raw_estimates_csv(const std::string& path, const MetricsTable& table) {
    auto out = open_out(path);
    out << "scenario,mechanism,rate,method,coefficient,eval_time,rep,est,se,lo90,hi90,truth,"
           "covered\n";
    for (const auto& r : table.raw)
        out << r.scenario << "," << r.mechanism << "," << fmt_double(r.rate) << "," << r.method
            << "," << r.coefficient << "," << r.eval_time << "," << r.rep << ","
            << fmt_double(r.est) << "," << fmt_double(r.se) << "," << fmt_double(r.lo90) << ","
            << fmt_double(r.hi90) << "," << fmt_double(r.truth) << "," << r.covered << "\n";
}

void write_grid_changepoints_csv(const std::string& path, const MetricsTable& table) {
    auto out = open_out(path);
    out << "scenario,mechanism,rate,method,rep,change_point\n";
    for (const auto& r : table.change_points)
        for (int c : r.detected)
            out << r.scenario << "," << r.mechanism << "," << fmt_double(r.rate) << ","
                << r.method << "," << r.rep << "," << c << "\n";
}

void write_missingness_json(const std::string& path, const MissingnessReport& rep,
                            double achieved_rate) {
    json j;
    j["outcome_missing_rate"] = rep.outcome_rate;
    j["achieved_rate"] = achieved_rate;
    j["lag_missing_rates"] = rep.lag_rates;
    j["complete_row_rate"] = rep.complete_row_rate;
    j["total_rows"] = rep.total_rows;
    j["analysis_rows"] = rep.analysis_rows;
    j["complete_rows"] = rep.complete_rows;
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

void write_fit_json(const std::string& path, const ImputationResult& res) {
    json j;
    j["loglik"] = res.loglik;
    j["one_step_score"] = res.one_step_score;
    j["converged"] = res.converged;
    json params = json::object();
    for (int i = 0; i < res.params.size(); ++i) params[res.params.names[i]] = res.params.value(i);
    j["structural_params"] = params;
    json cps = json::object();
    for (const auto& [coef, pts] : res.change_points) cps[coef] = pts;
    j["change_points"] = cps;
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

void write_metadata_json(const std::string& path, const std::string& command,
                         const RunConfig& cfg) {
    json j;
    j["command"] = command;
    j["seed"] = cfg.seed;
    j["config_hash"] = config_hash_hex(cfg.canonical);
    j["method_vocabulary"] = method_vocabulary();
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

}  // namespace ssmimpute
