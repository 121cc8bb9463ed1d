// Command-line front end: dataset ingestion, method execution, simulation
// sweeps, and result export.
//
// Exit codes: 0 success, 2 parse/config error, 3 dimension or rank error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oatk/oatk.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kExitParse = 2;
constexpr int kExitData = 3;

struct RunManifest {
    std::string command;
    std::string design_path;
    std::string response_path;
    std::string config_path;
    std::string output_path; // empty = stdout
    std::uint64_t seed = 0;
};

struct CommonFlags {
    double alpha = 0.1;
    std::optional<double> lambda_override;
    std::string method = "oatk";
    int offset_c = 0;
    int m_copies = 1;
    double gamma = 0.5;
    double eta = 0.5;
    int threads = 1;
    bool center = false;
    bool clean = false;
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("OATK_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw oatk::ConfigError("OATK_SEED is not an unsigned integer");
        }
    }
    return 0;
}

ordered_json json_number_or_inf(double value) {
    if (std::isfinite(value)) {
        return value;
    }
    return value > 0 ? "inf" : "-inf";
}

ordered_json to_json(const Eigen::VectorXd& v) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        arr.push_back(v[i]);
    }
    return arr;
}

struct Dataset {
    oatk::DesignMatrix design;
    Eigen::VectorXd y;
};

// Genetics-style cleanup: drop rows with missing cells, drop exact duplicate
// (row, response) pairs, then drop columns with fewer than 10 nonzero entries.
void clean_dataset(Eigen::MatrixXd& x, Eigen::VectorXd& y,
                   std::vector<std::string>& names) {
    std::vector<Eigen::Index> keep_rows;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (x.row(i).allFinite() && std::isfinite(y[i])) {
            keep_rows.push_back(i);
        }
    }

    std::vector<Eigen::Index> unique_rows;
    for (Eigen::Index i : keep_rows) {
        bool duplicate = false;
        for (Eigen::Index k : unique_rows) {
            if (y[k] == y[i] && x.row(k) == x.row(i)) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            unique_rows.push_back(i);
        }
    }

    Eigen::MatrixXd xr(static_cast<Eigen::Index>(unique_rows.size()), x.cols());
    Eigen::VectorXd yr(static_cast<Eigen::Index>(unique_rows.size()));
    for (std::size_t i = 0; i < unique_rows.size(); ++i) {
        xr.row(static_cast<Eigen::Index>(i)) = x.row(unique_rows[i]);
        yr[static_cast<Eigen::Index>(i)] = y[unique_rows[i]];
    }

    std::vector<Eigen::Index> keep_cols;
    for (Eigen::Index j = 0; j < xr.cols(); ++j) {
        int nonzero = 0;
        for (Eigen::Index i = 0; i < xr.rows(); ++i) {
            if (xr(i, j) != 0.0) {
                ++nonzero;
            }
        }
        if (nonzero >= 10) {
            keep_cols.push_back(j);
        }
    }
    Eigen::MatrixXd xc(xr.rows(), static_cast<Eigen::Index>(keep_cols.size()));
    std::vector<std::string> kept_names;
    for (std::size_t j = 0; j < keep_cols.size(); ++j) {
        xc.col(static_cast<Eigen::Index>(j)) = xr.col(keep_cols[j]);
        if (!names.empty()) {
            kept_names.push_back(names[static_cast<std::size_t>(keep_cols[j])]);
        }
    }
    x = std::move(xc);
    y = std::move(yr);
    names = std::move(kept_names);
}

Dataset load_dataset(const RunManifest& manifest, const CommonFlags& flags) {
    oatk::CsvTable xt = oatk::read_csv(manifest.design_path);
    oatk::CsvTable yt = oatk::read_csv(manifest.response_path);
    if (yt.values.cols() != 1) {
        throw oatk::ParseError(manifest.response_path + ": expected a single column, got " +
                               std::to_string(yt.values.cols()));
    }
    Eigen::MatrixXd x = xt.values;
    Eigen::VectorXd y = yt.values.col(0);
    std::vector<std::string> names = xt.header;

    if (flags.clean) {
        if (x.rows() != y.size()) {
            throw oatk::DimensionError("design has " + std::to_string(x.rows()) +
                                       " rows but response has " +
                                       std::to_string(y.size()));
        }
        clean_dataset(x, y, names);
    }
    if (x.rows() != y.size()) {
        throw oatk::DimensionError("design has " + std::to_string(x.rows()) +
                                   " rows but response has " +
                                   std::to_string(y.size()));
    }
    if (!y.allFinite()) {
        throw oatk::NonFiniteError("response contains non-finite entries");
    }

    Dataset data;
    oatk::IngestOptions opts;
    opts.center = flags.center;
    data.design = oatk::ingest_design(std::move(x), opts);
    data.design.column_names = std::move(names);
    data.y = std::move(y);
    return data;
}

void emit(const RunManifest& manifest, const ordered_json& doc) {
    const std::string text = doc.dump(2) + "\n";
    if (manifest.output_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(manifest.output_path);
    if (!out) {
        throw oatk::ConfigError("cannot write to " + manifest.output_path);
    }
    out << text;
}

ordered_json base_report(const RunManifest& manifest, const Dataset& data,
                         const CommonFlags& flags) {
    ordered_json doc;
    doc["command"] = manifest.command;
    doc["method"] = flags.method;
    doc["n"] = data.design.n();
    doc["p"] = data.design.p();
    doc["alpha"] = flags.alpha;
    doc["seed"] = manifest.seed;
    if (!data.design.column_names.empty()) {
        doc["column_names"] = data.design.column_names;
    }
    return doc;
}

void finish_selection(ordered_json& doc, const std::vector<int>& rejected,
                      const Dataset& data) {
    doc["rejected"] = rejected;
    if (!data.design.column_names.empty()) {
        ordered_json names = ordered_json::array();
        for (int j : rejected) {
            names.push_back(data.design.column_names[static_cast<std::size_t>(j)]);
        }
        doc["rejected_names"] = names;
    }
}

oatk::OatkOptions make_options(const RunManifest& manifest, const CommonFlags& flags) {
    oatk::OatkOptions opts;
    opts.alpha = flags.alpha;
    opts.offset_c = flags.offset_c;
    opts.lambda_override = flags.lambda_override;
    opts.seed = manifest.seed;
    return opts;
}

int cmd_select(const RunManifest& manifest, const CommonFlags& flags) {
    const Dataset data = load_dataset(manifest, flags);
    ordered_json doc = base_report(manifest, data, flags);

    if (flags.method == "bh") {
        const auto sel = oatk::bh_baseline(data.design, data.y, flags.alpha);
        doc["p_values"] = to_json(oatk::ols_t_pvalues(data.design, data.y));
        doc["threshold"] = sel.threshold;
        finish_selection(doc, sel.rejected, data);
    } else if (flags.method == "gm") {
        const auto sel = oatk::gm_baseline(data.design, data.y, flags.alpha,
                                           manifest.seed);
        doc["threshold"] = json_number_or_inf(sel.threshold);
        finish_selection(doc, sel.rejected, data);
    } else if (flags.method == "oatk" && flags.m_copies > 1) {
        const auto run = oatk::run_oatk_multibit(data.design, data.y,
                                                 make_options(manifest, flags),
                                                 flags.m_copies, flags.gamma);
        doc["lambda"] = run.model.lambda;
        doc["m_copies"] = flags.m_copies;
        doc["gamma"] = flags.gamma;
        doc["p_values"] = to_json(run.pvals.p_vals);
        doc["magnitudes"] = to_json(run.pvals.magnitudes);
        doc["threshold"] = json_number_or_inf(run.selection.threshold);
        doc["sigma_sq"] = to_json(run.model.sigma_sq);
        finish_selection(doc, run.selection.rejected, data);
    } else if (flags.method == "oatk") {
        const auto run = oatk::run_oatk(data.design, data.y,
                                        make_options(manifest, flags));
        doc["lambda"] = run.model.lambda;
        doc["w"] = to_json(run.w.w);
        doc["threshold"] = json_number_or_inf(run.selection.threshold);
        doc["sigma_sq"] = to_json(run.model.sigma_sq);
        finish_selection(doc, run.selection.rejected, data);
    } else {
        throw oatk::ConfigError("unknown method: " + flags.method);
    }

    emit(manifest, doc);
    return 0;
}

int cmd_derandomize(const RunManifest& manifest, const CommonFlags& flags,
                    int m_copies) {
    const Dataset data = load_dataset(manifest, flags);
    const auto result = oatk::run_oatk_derandomized(
        data.design, data.y, make_options(manifest, flags), m_copies, flags.eta);

    CommonFlags reported = flags;
    reported.method = "oatk_derand";
    ordered_json doc = base_report(manifest, data, reported);
    const auto model = oatk::build_oatk_model(data.design, data.y,
                                              make_options(manifest, flags));
    doc["lambda"] = model.lambda;
    doc["m_copies"] = m_copies;
    doc["eta"] = flags.eta;
    doc["pi"] = to_json(result.frequencies);
    doc["sigma_sq"] = to_json(model.sigma_sq);
    finish_selection(doc, result.rejected, data);
    emit(manifest, doc);
    return 0;
}

int cmd_calibrate(const RunManifest& manifest, const CommonFlags& flags,
                  const oatk::CalibrationConfig& cfg) {
    const Dataset data = load_dataset(manifest, flags);
    const auto run = oatk::run_oatk_calibrated(data.design, data.y, flags.alpha,
                                               cfg, manifest.seed);

    CommonFlags reported = flags;
    reported.method = "oatk_calibrated";
    ordered_json doc = base_report(manifest, data, reported);
    doc["beta"] = run.evalues.beta_level;
    doc["offset_c"] = run.evalues.c;
    doc["mc_replicates"] = cfg.mc_replicates;
    doc["candidate_rule"] =
        cfg.candidate_rule == oatk::CalibrationConfig::CandidateRule::fast ? "fast"
                                                                           : "full";
    doc["e_values"] = to_json(run.evalues.e);
    doc["e_sum"] = run.evalues.e.sum();
    doc["threshold"] = run.selection.threshold;
    finish_selection(doc, run.selection.rejected, data);
    emit(manifest, doc);
    return 0;
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw oatk::ConfigError("config key " + key + " is not a boolean: " + value);
}

oatk::SimulationConfig parse_simulation_config(const std::string& path,
                                               bool center_external) {
    const auto kv = oatk::read_flat_config(path);
    oatk::SimulationConfig cfg;
    std::string design_csv;

    for (const auto& [key, value] : kv) {
        try {
            if (key == "design") {
                if (value == "gaussian") cfg.design = oatk::DesignModel::gaussian;
                else if (value == "markov") cfg.design = oatk::DesignModel::markov;
                else if (value == "external") cfg.design = oatk::DesignModel::external;
                else throw oatk::ConfigError("unknown design: " + value);
            } else if (key == "structure") {
                if (value == "power_decay") cfg.structure = oatk::GaussianStructure::power_decay;
                else if (value == "const_pos") cfg.structure = oatk::GaussianStructure::const_pos;
                else if (value == "const_neg") cfg.structure = oatk::GaussianStructure::const_neg;
                else throw oatk::ConfigError("unknown structure: " + value);
            } else if (key == "rho") cfg.rho = std::stod(value);
            else if (key == "n") cfg.n = std::stoi(value);
            else if (key == "p") cfg.p = std::stoi(value);
            else if (key == "p1") cfg.p1 = std::stoi(value);
            else if (key == "amplitude" || key == "A") cfg.amplitude = std::stod(value);
            else if (key == "alpha") cfg.alpha = std::stod(value);
            else if (key == "replicates") cfg.replicates = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "methods") {
                cfg.methods.clear();
                std::stringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    const auto first = item.find_first_not_of(" \t");
                    const auto last = item.find_last_not_of(" \t");
                    if (first != std::string::npos) {
                        cfg.methods.push_back(item.substr(first, last - first + 1));
                    }
                }
            } else if (key == "offset_c") cfg.offset_c = std::stoi(value);
            else if (key == "derandomize_m") cfg.derandomize_m = std::stoi(value);
            else if (key == "eta") cfg.eta = std::stod(value);
            else if (key == "m_copies") cfg.m_copies = std::stoi(value);
            else if (key == "gamma") cfg.gamma = std::stod(value);
            else if (key == "mc_replicates") cfg.calibration.mc_replicates = std::stoi(value);
            else if (key == "beta_level") cfg.calibration.beta_level = std::stod(value);
            else if (key == "calibration_c") cfg.calibration.c = std::stoi(value);
            else if (key == "candidate_rule") {
                if (value == "fast") cfg.calibration.candidate_rule = oatk::CalibrationConfig::CandidateRule::fast;
                else if (value == "full") cfg.calibration.candidate_rule = oatk::CalibrationConfig::CandidateRule::full;
                else throw oatk::ConfigError("unknown candidate_rule: " + value);
            } else if (key == "design_csv") design_csv = value;
            else if (key == "threads") cfg.threads = std::stoi(value);
            else throw oatk::ConfigError("unknown config key: " + key);
        } catch (const oatk::Error&) {
            throw;
        } catch (const std::exception&) {
            throw oatk::ConfigError("config key " + key + " has invalid value: " + value);
        }
    }

    for (const auto& m : cfg.methods) {
        oatk::canonical_method_name(m); // validates, throws with the name echoed
    }

    if (cfg.design == oatk::DesignModel::external) {
        if (design_csv.empty()) {
            throw oatk::ConfigError("design = external requires design_csv");
        }
        const auto table = oatk::read_csv(design_csv);
        oatk::IngestOptions opts;
        opts.center = center_external;
        auto design = std::make_shared<oatk::DesignMatrix>(
            oatk::ingest_design(table.values, opts));
        design->column_names = table.header;
        cfg.external_design = std::move(design);
        cfg.n = static_cast<int>(cfg.external_design->n());
        cfg.p = static_cast<int>(cfg.external_design->p());
    }
    return cfg;
}

int cmd_simulate(const RunManifest& manifest, int threads, bool center) {
    oatk::SimulationConfig cfg = parse_simulation_config(manifest.config_path, center);
    if (threads > 0) {
        cfg.threads = threads;
    }
    const auto table = oatk::run_experiment(cfg);

    if (manifest.output_path.empty()) {
        oatk::write_experiment_csv(std::cout, table);
    } else {
        std::ofstream out(manifest.output_path);
        if (!out) {
            throw oatk::ConfigError("cannot write to " + manifest.output_path);
        }
        oatk::write_experiment_csv(out, table);
    }

    std::cerr << "method summary (FDR, power, failures):\n";
    for (const auto& s : table.summaries()) {
        std::cerr << "  " << s.method << ": " << oatk::format_double(s.fdr) << ", "
                  << oatk::format_double(s.power) << ", " << s.failures << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-at-a-time knockoff variable selection"};
    app.require_subcommand(1);

    RunManifest manifest;
    CommonFlags flags;
    bool seed_given = false;
    std::uint64_t seed_flag = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_data) {
        if (needs_data) {
            cmd->add_option("--design", manifest.design_path, "design matrix CSV")
                ->required();
            cmd->add_option("--response", manifest.response_path, "response CSV")
                ->required();
        }
        cmd->add_option("--alpha", flags.alpha, "target FDR level");
        cmd->add_option("--seed", seed_flag, "RNG seed (fallback: OATK_SEED)")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--output", manifest.output_path, "output path (default stdout)");
        cmd->add_option("--threads", flags.threads, "worker cap");
        cmd->add_flag("--center", flags.center, "center design columns before scaling");
    };

    auto* select = app.add_subcommand("select", "variable selection on a dataset");
    add_common(select, true);
    double lambda_flag = -1.0;
    select->add_option("--lambda", lambda_flag, "ridge penalty (overrides LOOCV)");
    select->add_option("--method", flags.method, "oatk | bh | gm");
    select->add_option("--offset-c", flags.offset_c, "threshold offset (0 or 1)");
    select->add_option("--m-copies", flags.m_copies, "knockoff copies per feature");
    select->add_option("--gamma", flags.gamma, "SeqStep+ split point");
    select->add_flag("--clean", flags.clean, "drop missing/duplicate rows and rare columns");

    auto* derand = app.add_subcommand("derandomize", "aggregate OATK over knockoff redraws");
    add_common(derand, true);
    int derand_m = 30;
    derand->add_option("--lambda", lambda_flag, "ridge penalty (overrides LOOCV)");
    derand->add_option("--m-copies", derand_m, "number of knockoff redraws");
    derand->add_option("--eta", flags.eta, "rejection frequency threshold");
    derand->add_option("--offset-c", flags.offset_c, "threshold offset (0 or 1)");
    derand->add_flag("--clean", flags.clean, "drop missing/duplicate rows and rare columns");

    auto* calibrate = app.add_subcommand("calibrate", "conditionally calibrated OATK");
    add_common(calibrate, true);
    oatk::CalibrationConfig cal_cfg;
    std::string rule = "fast";
    calibrate->add_option("--mc-replicates", cal_cfg.mc_replicates, "Monte Carlo draws per feature");
    calibrate->add_option("--beta", cal_cfg.beta_level, "inner level (default alpha)");
    calibrate->add_option("--offset-c", cal_cfg.c, "calibration offset");
    calibrate->add_option("--candidate-rule", rule, "fast | full");
    calibrate->add_flag("--clean", flags.clean, "drop missing/duplicate rows and rare columns");

    auto* simulate = app.add_subcommand("simulate", "run a simulation sweep");
    simulate->add_option("--config", manifest.config_path, "flat key = value config")
        ->required();
    simulate->add_option("--output", manifest.output_path, "CSV output path (default stdout)");
    simulate->add_option("--threads", flags.threads, "worker cap");
    simulate->add_flag("--center", flags.center, "center external design columns");

    CLI11_PARSE(app, argc, argv);

    try {
        manifest.seed = seed_given ? seed_flag : default_seed();
        if (lambda_flag >= 0.0) {
            flags.lambda_override = lambda_flag;
        }

        if (select->parsed()) {
            manifest.command = "select";
            return cmd_select(manifest, flags);
        }
        if (derand->parsed()) {
            manifest.command = "derandomize";
            return cmd_derandomize(manifest, flags, derand_m);
        }
        if (calibrate->parsed()) {
            manifest.command = "calibrate";
            if (rule == "fast") {
                cal_cfg.candidate_rule = oatk::CalibrationConfig::CandidateRule::fast;
            } else if (rule == "full") {
                cal_cfg.candidate_rule = oatk::CalibrationConfig::CandidateRule::full;
            } else {
                throw oatk::ConfigError("unknown candidate rule: " + rule);
            }
            return cmd_calibrate(manifest, flags, cal_cfg);
        }
        if (simulate->parsed()) {
            manifest.command = "simulate";
            return cmd_simulate(manifest, flags.threads, flags.center);
        }
    } catch (const oatk::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const oatk::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const oatk::DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const oatk::RankDeficientError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const oatk::NonFiniteError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const oatk::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
