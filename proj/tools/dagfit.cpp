#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dagfit/ci.hpp"
#include "dagfit/dag.hpp"
#include "dagfit/glm.hpp"
#include "dagfit/pipeline.hpp"
#include "dagfit/scm.hpp"

namespace {

using namespace dagfit;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + out_path);
    out << text;
}

struct DataOptions {
    std::string data_path;
    bool aggregate_rows = false;
    FilterConfig filter;

    void attach(CLI::App* cmd, bool required = true) {
        auto* opt = cmd->add_option("--data", data_path, "input CSV (canonical schema)");
        if (required) opt->required();
        cmd->add_flag("--aggregate", aggregate_rows,
                      "merge duplicate (nickname, challenge) rows before filtering");
        cmd->add_option("--min-years", filter.min_years, "min distinct years per participant")
            ->default_val(2);
        cmd->add_option("--min-rounds", filter.min_rounds,
                        "min distinct rounds in some year")
            ->default_val(6);
        cmd->add_option("--top-languages", filter.top_k_languages, "keep k most used languages")
            ->default_val(3);
    }

    Dataset load() const {
        LoadResult loaded = load_csv(data_path);
        for (const auto& e : loaded.row_errors) std::cerr << "warning: " << e << "\n";
        if (aggregate_rows) loaded.rows = dagfit::aggregate(loaded.rows);
        return filter_dataset(loaded.rows, filter);
    }

    std::vector<RawSubmission> load_rows() const {
        LoadResult loaded = load_csv(data_path);
        for (const auto& e : loaded.row_errors) std::cerr << "warning: " << e << "\n";
        if (aggregate_rows) loaded.rows = dagfit::aggregate(loaded.rows);
        return loaded.rows;
    }
};

std::vector<std::pair<std::string, Dag>> load_dags(const std::vector<std::string>& paths) {
    if (paths.empty()) return default_dags();
    std::vector<std::pair<std::string, Dag>> out;
    for (const auto& p : paths) {
        out.emplace_back(std::filesystem::path(p).stem().string(), parse_dag(read_file(p)));
    }
    return out;
}

std::string set_text(const std::vector<std::string>& s) {
    std::string t = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) t += ", ";
        t += s[i];
    }
    return t + "}";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal DAG analysis and regression toolkit for contest data"};
    app.require_subcommand(1);

    std::string format = "text";
    std::string out_path;
    app.add_option("--format", format, "output format")
        ->check(CLI::IsMember({"text", "json"}))
        ->default_val("text");
    app.add_option("--out", out_path, "write output to this path instead of stdout");

    // ---- dag ----------------------------------------------------------
    auto* dag_cmd = app.add_subcommand("dag", "DAG structure queries");
    dag_cmd->require_subcommand(1);

    std::string dag_path;
    std::string treatment = "language", outcome = "rank";
    bool include_latent = false;

    auto* paths_cmd = dag_cmd->add_subcommand("paths", "paths between two nodes");
    paths_cmd->add_option("--dag", dag_path, "DAG DSL file")->required();
    paths_cmd->add_option("--treatment", treatment, "treatment node")->default_val("language");
    paths_cmd->add_option("--outcome", outcome, "outcome node")->default_val("rank");

    auto* indep_cmd = dag_cmd->add_subcommand("independencies",
                                              "implied conditional independencies");
    indep_cmd->add_option("--dag", dag_path, "DAG DSL file")->required();
    indep_cmd->add_flag("--include-latent", include_latent,
                        "also list statements involving latent nodes");

    auto* adjust_cmd = dag_cmd->add_subcommand("adjust", "backdoor adjustment sets");
    adjust_cmd->add_option("--dag", dag_path, "DAG DSL file")->required();
    adjust_cmd->add_option("--treatment", treatment, "treatment node")->default_val("language");
    adjust_cmd->add_option("--outcome", outcome, "outcome node")->default_val("rank");

    DataOptions validate_data;
    double level = 0.5, threshold = 0.2;
    auto* validate_cmd = dag_cmd->add_subcommand("validate",
                                                 "test implied independencies against data");
    validate_cmd->add_option("--dag", dag_path, "DAG DSL file")->required();
    validate_data.attach(validate_cmd);
    validate_cmd->add_option("--level", level, "interval probability level")->default_val(0.5);
    validate_cmd->add_option("--threshold", threshold, "max nonzero fraction to pass")
        ->default_val(0.2);

    // ---- fit ----------------------------------------------------------
    std::string formula;
    DataOptions fit_data;
    auto* fit_cmd = app.add_subcommand("fit", "fit one regression model");
    fit_cmd->add_option("formula", formula,
                        "model formula, e.g. 'rank ~ language + nickname [family=negbin]'")
        ->required();
    fit_data.attach(fit_cmd);
    fit_cmd->add_option("--level", level, "interval probability level")->default_val(0.5);

    // ---- analyze ------------------------------------------------------
    DataOptions analyze_data;
    std::vector<std::string> dag_paths;
    std::string plot_dir;
    bool no_validate = false;
    auto* analyze_cmd = app.add_subcommand("analyze", "full analysis report");
    analyze_data.attach(analyze_cmd);
    analyze_cmd->add_option("--dag", dag_paths, "DAG DSL file(s); default d0/d1/d2");
    analyze_cmd->add_option("--level", level, "interval probability level")->default_val(0.5);
    analyze_cmd->add_option("--threshold", threshold, "max nonzero fraction to pass")
        ->default_val(0.2);
    analyze_cmd->add_flag("--no-validate", no_validate, "skip DAG validation");
    analyze_cmd->add_option("--plot-data", plot_dir, "write plot CSVs into this directory");

    // ---- sweep --------------------------------------------------------
    DataOptions sweep_data;
    std::vector<int> years_range = {1, 7}, rounds_range = {1, 6};
    auto* sweep_cmd = app.add_subcommand("sweep", "robustness sweep over filter cutoffs");
    sweep_data.attach(sweep_cmd);
    sweep_cmd->add_option("--years", years_range, "year cutoff range (lo hi)")
        ->expected(2);
    sweep_cmd->add_option("--rounds", rounds_range, "round cutoff range (lo hi)")
        ->expected(2);
    sweep_cmd->add_option("--level", level, "interval probability level")->default_val(0.5);
    sweep_cmd->add_option("--threshold", threshold, "max nonzero fraction to pass")
        ->default_val(0.2);
    sweep_cmd->add_flag("--no-validate", no_validate, "skip DAG validation per cell");
    sweep_cmd->add_option("--plot-data", plot_dir, "write plot CSVs into this directory");

    // ---- synth --------------------------------------------------------
    std::string synth_out, params_path, variant;
    std::int64_t synth_n = 20000, truth_n = 200000;
    std::uint64_t seed = 1;
    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic contest data");
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("-n,--rows", synth_n, "rows to sample")->default_val(20000);
    synth_cmd->add_option("--seed", seed, "random seed")->default_val(1);
    synth_cmd->add_option("--params", params_path, "parameter bundle file (key = value)");
    synth_cmd->add_option("--variant", variant, "DAG variant override (d0|d1|d2)");
    synth_cmd->add_option("--truth-n", truth_n, "Monte-Carlo size for the ground truth")
        ->default_val(200000);

    CLI11_PARSE(app, argc, argv);
    const bool json_out = format == "json";

    try {
        if (paths_cmd->parsed()) {
            const Dag dag = parse_dag(read_file(dag_path));
            const auto all = enumerate_paths(dag, treatment, outcome);
            const auto backdoor = backdoor_paths(dag, treatment, outcome);
            if (json_out) {
                nlohmann::json j;
                j["paths"] = nlohmann::json::array();
                for (const auto& p : all) {
                    const auto cls = classify_path(p, dag, {});
                    j["paths"].push_back(
                        {{"path", p.to_string()},
                         {"kind", cls.kind == PathKind::Backdoor ? "backdoor" : "causal"},
                         {"open_given_empty", cls.status == PathStatus::Open}});
                }
                j["count"] = all.size();
                j["backdoor_count"] = backdoor.size();
                emit(j.dump(2), out_path);
            } else {
                std::ostringstream text;
                text << all.size() << " paths from " << treatment << " to " << outcome << " ("
                     << backdoor.size() << " backdoor):\n";
                for (const auto& p : all) {
                    const auto cls = classify_path(p, dag, {});
                    text << "  ["
                         << (cls.kind == PathKind::Backdoor ? "backdoor" : "causal  ") << ", "
                         << (cls.status == PathStatus::Open ? "open  " : "closed") << "] "
                         << p.to_string() << "\n";
                }
                emit(text.str(), out_path);
            }
        } else if (indep_cmd->parsed()) {
            const Dag dag = parse_dag(read_file(dag_path));
            const auto statements = implied_independencies(dag, !include_latent);
            if (json_out) {
                nlohmann::json j = nlohmann::json::array();
                for (const auto& s : statements) {
                    j.push_back({{"x", s.x}, {"y", s.y}, {"given", s.given}});
                }
                emit(j.dump(2), out_path);
            } else {
                std::ostringstream text;
                for (const auto& s : statements) text << s.to_string() << "\n";
                if (statements.empty()) text << "(none)\n";
                emit(text.str(), out_path);
            }
        } else if (adjust_cmd->parsed()) {
            const Dag dag = parse_dag(read_file(dag_path));
            const auto report = adjustment_sets(dag, treatment, outcome);
            if (json_out) {
                nlohmann::json j = {{"treatment", treatment},
                                    {"outcome", outcome},
                                    {"all_valid", report.all_valid},
                                    {"minimal", report.minimal}};
                emit(j.dump(2), out_path);
            } else {
                std::ostringstream text;
                text << "valid adjustment sets:";
                for (const auto& s : report.all_valid) text << " " << set_text(s);
                text << "\nminimal:";
                for (const auto& s : report.minimal) text << " " << set_text(s);
                text << "\n";
                emit(text.str(), out_path);
            }
        } else if (validate_cmd->parsed()) {
            const Dag dag = parse_dag(read_file(dag_path));
            const Dataset data = validate_data.load();
            const auto report = validate_dag(dag, data, level, threshold, {},
                                             std::filesystem::path(dag_path).stem().string());
            if (json_out) {
                emit(validation_report_json(report).dump(2), out_path);
            } else {
                std::ostringstream text;
                text << report.dag_id << ": " << to_string(report.overall) << "\n";
                for (const auto& e : report.entries) {
                    text << "  " << e.spec.statement.to_string()
                         << "  nonzero=" << e.result.nonzero_fraction << "  "
                         << to_string(e.result.verdict);
                    if (!e.result.note.empty()) text << "  (" << e.result.note << ")";
                    text << "\n";
                }
                emit(text.str(), out_path);
            }
        } else if (fit_cmd->parsed()) {
            const Dataset data = fit_data.load();
            const ModelSpec spec = parse_formula(formula);
            const FitResult result = fit(data, spec);
            nlohmann::json coefs = nlohmann::json::object();
            const auto intervals =
                result.converged ? wald_intervals(result, level) : std::vector<CoefInterval>{};
            for (std::size_t i = 0; i < result.coef.size(); ++i) {
                nlohmann::json c = {{"estimate", result.coef[i]}};
                if (!intervals.empty()) {
                    c["stderr"] = intervals[i].stderr_;
                    c["lower"] = intervals[i].lower;
                    c["upper"] = intervals[i].upper;
                }
                coefs[result.design.names[i]] = c;
            }
            nlohmann::json j = {{"formula", format_formula(spec)},
                                {"converged", result.converged},
                                {"iterations", result.iterations},
                                {"loglik", result.loglik},
                                {"aic", result.aic},
                                {"k", result.k_free},
                                {"dispersion", result.dispersion},
                                {"level", level},
                                {"coefficients", coefs},
                                {"messages", result.messages}};
            if (json_out) {
                nlohmann::json cov = nlohmann::json::array();
                const int k = static_cast<int>(result.coef.size());
                for (int a = 0; a < k; ++a) {
                    nlohmann::json row = nlohmann::json::array();
                    for (int b = 0; b < k; ++b) row.push_back(result.cov(a, b));
                    cov.push_back(row);
                }
                j["covariance"] = cov;
                emit(j.dump(2), out_path);
            } else {
                std::ostringstream text;
                text << format_formula(spec) << "\n"
                     << "converged=" << (result.converged ? "yes" : "no")
                     << " iterations=" << result.iterations << " loglik=" << result.loglik
                     << " aic=" << result.aic << " dispersion=" << result.dispersion << "\n";
                for (std::size_t i = 0; i < result.coef.size(); ++i) {
                    text << "  " << result.design.names[i] << " = " << result.coef[i];
                    if (!intervals.empty()) {
                        text << "  [" << intervals[i].lower << ", " << intervals[i].upper
                             << "]";
                    }
                    text << "\n";
                }
                for (const auto& m : result.messages) text << "note: " << m << "\n";
                emit(text.str(), out_path);
            }
        } else if (analyze_cmd->parsed()) {
            const Dataset data = analyze_data.load();
            AnalysisConfig config;
            config.level = level;
            config.threshold = threshold;
            config.filter = analyze_data.filter;
            config.validate_dags = !no_validate;
            const AnalysisReport report = analyze(data, load_dags(dag_paths), config);
            if (!plot_dir.empty()) {
                std::filesystem::create_directories(plot_dir);
                write_effects_csv(
                    (std::filesystem::path(plot_dir) / "language_effects.csv").string(),
                    report);
            }
            emit(json_out ? report_json(report).dump(2) : report_text(report), out_path);
        } else if (sweep_cmd->parsed()) {
            const auto rows = sweep_data.load_rows();
            AnalysisConfig config;
            config.level = level;
            config.threshold = threshold;
            config.filter = sweep_data.filter;
            config.validate_dags = !no_validate;
            const auto cells = sweep(rows, {years_range[0], years_range[1]},
                                     {rounds_range[0], rounds_range[1]}, config);
            if (!plot_dir.empty()) {
                std::filesystem::create_directories(plot_dir);
                write_sweep_csv(
                    (std::filesystem::path(plot_dir) / "sweep_effects.csv").string(), cells);
            }
            emit(json_out ? sweep_json(cells).dump(2) : sweep_text(cells), out_path);
        } else if (synth_cmd->parsed()) {
            CodeJamParams params;
            if (!params_path.empty()) params = load_codejam_params(read_file(params_path));
            if (!variant.empty()) params.variant = variant;
            const SynthResult result = synth(params, synth_n, seed, synth_out, truth_n);
            std::cerr << "wrote " << result.data_path << ", " << result.truth_path << ", "
                      << result.dag_path << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
