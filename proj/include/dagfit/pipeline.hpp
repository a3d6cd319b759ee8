#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dagfit/ci.hpp"
#include "dagfit/dag.hpp"
#include "dagfit/dataset.hpp"
#include "dagfit/glm.hpp"
#include "dagfit/scm.hpp"

#include "json.hpp"

namespace dagfit {

struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One contest datapoint: a participant's result in one round.
struct RawSubmission {
    std::string challenge;  // "<year>-<round>"
    std::string nickname;
    std::string language;
    std::int64_t size = 0;  // total submission bytes, >= 1
    std::int64_t rank = 0;  // 1 = top
};

struct LoadResult {
    std::vector<RawSubmission> rows;
    std::vector<std::string> row_errors;  // "line N: reason" per rejected row
};

/// Reads the canonical CSV (header `challenge,nickname,language,size,rank`;
/// RFC-4180 quoting accepted). Malformed rows are collected, not fatal;
/// a missing file, bad header, or empty file is.
LoadResult load_csv(const std::string& path);
LoadResult load_csv_text(const std::string& text);

void write_csv(const std::string& path, const std::vector<RawSubmission>& rows);

/// Merges duplicate (nickname, challenge) rows: sizes sum, ranks must agree,
/// language by majority with alphabetical tie-break. Output keeps first-
/// occurrence order of the keys.
std::vector<RawSubmission> aggregate(const std::vector<RawSubmission>& rows);

struct FilterConfig {
    int min_years = 2;
    int min_rounds = 6;
    int top_k_languages = 3;
};

/// Keeps the top-k languages (by frequency over the input), then the
/// participants with >= min_years distinct years and, within at least one
/// year, >= min_rounds distinct rounds; emits the typed analysis table.
Dataset filter_dataset(const std::vector<RawSubmission>& rows, const FilterConfig& cfg);

struct AnalysisConfig {
    double level = 0.5;
    double threshold = 0.2;
    FilterConfig filter;  // echoed into reports
    FitOptions fit;
    bool validate_dags = true;
};

struct LanguageEffect {
    std::string language;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::string verdict;  // better | worse | none (interval below/above/astride zero)
};

struct ModelEntry {
    std::string name;
    std::string formula;
    bool ok = false;
    std::string error;
    bool converged = false;
    double aic = 0.0;
    double loglik = 0.0;
    int k_free = 0;
    double dispersion = 0.0;
    std::vector<LanguageEffect> language_effects;
};

struct AnalysisReport {
    AnalysisConfig config;

    std::size_t rows = 0;
    std::size_t participants = 0;
    std::size_t challenges = 0;
    std::vector<std::string> languages;

    std::vector<ModelEntry> models;  // m1..m4 analogues
    std::vector<std::pair<std::string, double>> ranking;  // (model, delta AIC vs best)
    std::string best_predictive;  // lowest-AIC model
    std::string causal_model;     // adjustment-set-consistent model used for the causal answer

    std::vector<DagValidationReport> dag_validation;
    struct DagAdjustment {
        std::string dag_id;
        AdjustmentReport report;
    };
    std::vector<DagAdjustment> adjustment_sets;  // for (language, rank) per DAG

    std::vector<std::string> warnings;
};

/// The canonical d0/d1/d2 hypotheses, used when no DAG files are supplied.
std::vector<std::pair<std::string, Dag>> default_dags();

/// Full report over one dataset: m1-m4 analogue fits, centered language
/// effects with verdicts, AIC ranking, DAG validation, and adjustment sets.
/// Per-model failures are recorded in place; the report is still produced.
AnalysisReport analyze(const Dataset& data,
                       const std::vector<std::pair<std::string, Dag>>& dags,
                       const AnalysisConfig& config);

nlohmann::json report_json(const AnalysisReport& report);
std::string report_text(const AnalysisReport& report);

/// Writes per-figure CSVs (effect intervals per model/language) for external
/// plotting.
void write_effects_csv(const std::string& path, const AnalysisReport& report);

struct SweepCell {
    int years = 0;
    int rounds = 0;
    int size_index = 0;  // ordinal by datapoint count, 1 = smallest
    std::size_t datapoints = 0;
    std::size_t participants = 0;
    bool ok = false;
    std::string error;
    std::vector<ModelEntry> models;
};

/// Re-runs the analysis over the (years, rounds) cutoff grid; cells with an
/// empty dataset are dropped, failed cells are marked. Sorted ascending by
/// datapoint count.
std::vector<SweepCell> sweep(const std::vector<RawSubmission>& rows,
                             std::pair<int, int> year_range, std::pair<int, int> round_range,
                             const AnalysisConfig& config);

nlohmann::json sweep_json(const std::vector<SweepCell>& cells);
std::string sweep_text(const std::vector<SweepCell>& cells);
void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells);

struct SynthResult {
    std::string data_path;
    std::string truth_path;
    std::string dag_path;
};

/// Samples the contest generator and writes the data CSV, a ground-truth
/// JSON sidecar (true centered language effects, variant, parameters), and
/// the DAG fixture used.
SynthResult synth(const CodeJamParams& params, std::int64_t n, std::uint64_t seed,
                  const std::string& out_dir, std::int64_t truth_mc_n = 200000);

}  // namespace dagfit
