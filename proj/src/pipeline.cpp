#include "dagfit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dagfit {

namespace {

constexpr const char* kHeader = "challenge,nickname,language,size,rank";

// RFC-4180 tokenizer over the whole text; quoted fields may contain commas,
// doubled quotes, and newlines.
std::vector<std::vector<std::string>> csv_records(const std::string& text,
                                                  std::vector<int>* line_of_record) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any = false;
    int line = 1, record_line = 1;

    auto end_field = [&]() {
        record.push_back(field);
        field.clear();
        any = true;
    };
    auto end_record = [&]() {
        end_field();
        records.push_back(std::move(record));
        if (line_of_record) line_of_record->push_back(record_line);
        record.clear();
        any = false;
        record_line = line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                end_record();
                record_line = line;
                break;
            default:
                field += c;
        }
    }
    if (quoted) throw PipelineError("unterminated quote in CSV input");
    if (!field.empty() || any || !record.empty()) end_record();
    return records;
}

bool parse_positive_int(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    std::int64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
        if (v > 1'000'000'000'000LL) return false;
    }
    out = v;
    return v >= 1;
}

void parse_challenge_id(const std::string& id, int& year, int& round) {
    const auto dash = id.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 >= id.size()) {
        throw PipelineError("unparseable challenge id (expected <year>-<round>): " + id);
    }
    try {
        std::size_t used = 0;
        year = std::stoi(id.substr(0, dash), &used);
        if (used != dash) throw std::invalid_argument(id);
        const std::string tail = id.substr(dash + 1);
        round = std::stoi(tail, &used);
        if (used != tail.size()) throw std::invalid_argument(id);
    } catch (const std::exception&) {
        throw PipelineError("unparseable challenge id (expected <year>-<round>): " + id);
    }
}

}  // namespace

LoadResult load_csv_text(const std::string& text) {
    std::vector<int> lines;
    const auto records = csv_records(text, &lines);
    if (records.empty()) throw PipelineError("empty CSV input");

    {
        std::string header;
        for (std::size_t i = 0; i < records[0].size(); ++i) {
            if (i) header += ",";
            header += records[0][i];
        }
        if (header != kHeader) {
            throw PipelineError("CSV header must be exactly '" + std::string(kHeader) +
                                "', got '" + header + "'");
        }
    }
    if (records.size() == 1) throw PipelineError("CSV has a header but no rows");

    LoadResult out;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const int line = lines[r];
        auto reject = [&](const std::string& why) {
            out.row_errors.push_back("line " + std::to_string(line) + ": " + why);
        };
        if (rec.size() != 5) {
            reject("expected 5 fields, got " + std::to_string(rec.size()));
            continue;
        }
        RawSubmission row;
        row.challenge = rec[0];
        row.nickname = rec[1];
        row.language = rec[2];
        if (row.challenge.empty() || row.nickname.empty() || row.language.empty()) {
            reject("empty field");
            continue;
        }
        if (!parse_positive_int(rec[3], row.size)) {
            reject("size must be a positive integer, got '" + rec[3] + "'");
            continue;
        }
        if (!parse_positive_int(rec[4], row.rank)) {
            reject("rank must be a positive integer, got '" + rec[4] + "'");
            continue;
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

LoadResult load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PipelineError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_csv_text(buf.str());
}

void write_csv(const std::string& path, const std::vector<RawSubmission>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError("cannot write file: " + path);
    out << kHeader << "\n";
    for (const auto& r : rows) {
        out << r.challenge << "," << r.nickname << "," << r.language << "," << r.size << ","
            << r.rank << "\n";
    }
    if (!out) throw PipelineError("write failed: " + path);
}

std::vector<RawSubmission> aggregate(const std::vector<RawSubmission>& rows) {
    std::map<std::pair<std::string, std::string>, std::size_t> index;  // key -> output slot
    std::vector<RawSubmission> out;
    std::vector<std::map<std::string, int>> language_votes;

    for (const auto& row : rows) {
        const auto key = std::make_pair(row.nickname, row.challenge);
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, out.size());
            out.push_back(row);
            language_votes.push_back({{row.language, 1}});
            continue;
        }
        RawSubmission& merged = out[it->second];
        if (merged.rank != row.rank) {
            throw PipelineError("conflicting ranks for (" + row.nickname + ", " +
                                row.challenge + "): " + std::to_string(merged.rank) + " vs " +
                                std::to_string(row.rank));
        }
        merged.size += row.size;
        ++language_votes[it->second][row.language];
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        int best = 0;
        std::string winner;
        for (const auto& [lang, votes] : language_votes[i]) {  // map order = alphabetical
            if (votes > best) {
                best = votes;
                winner = lang;
            }
        }
        out[i].language = winner;
    }
    return out;
}

Dataset filter_dataset(const std::vector<RawSubmission>& rows, const FilterConfig& cfg) {
    if (cfg.min_years < 1 || cfg.min_rounds < 1 || cfg.top_k_languages < 1) {
        throw PipelineError("filter cutoffs must be positive");
    }

    // Language frequencies over the full input; ties by name.
    std::map<std::string, std::size_t> freq;
    for (const auto& r : rows) ++freq[r.language];
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::set<std::string> kept_languages;
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(cfg.top_k_languages);
         ++i) {
        kept_languages.insert(ranked[i].first);
    }

    std::vector<const RawSubmission*> lang_rows;
    for (const auto& r : rows) {
        if (kept_languages.count(r.language)) lang_rows.push_back(&r);
    }

    // Participation structure: distinct years, and distinct rounds per year.
    std::map<std::string, std::map<int, std::set<int>>> participation;
    for (const auto* r : lang_rows) {
        int year = 0, round = 0;
        parse_challenge_id(r->challenge, year, round);
        participation[r->nickname][year].insert(round);
    }
    std::set<std::string> experienced;
    for (const auto& [nick, years] : participation) {
        if (years.size() < static_cast<std::size_t>(cfg.min_years)) continue;
        for (const auto& [year, rounds] : years) {
            if (rounds.size() >= static_cast<std::size_t>(cfg.min_rounds)) {
                experienced.insert(nick);
                break;
            }
        }
    }

    std::vector<std::string> challenge, nickname, language;
    std::vector<double> size;
    std::vector<std::int64_t> rank;
    for (const auto* r : lang_rows) {
        if (!experienced.count(r->nickname)) continue;
        challenge.push_back(r->challenge);
        nickname.push_back(r->nickname);
        language.push_back(r->language);
        size.push_back(static_cast<double>(r->size));
        rank.push_back(r->rank);
    }
    if (challenge.empty()) throw PipelineError("empty result after filtering");

    Dataset out;
    out.add_factor("challenge", challenge);
    out.add_factor("nickname", nickname);
    out.add_factor("language", language);
    out.add_continuous("size", size);
    out.add_count("rank", rank);
    return out;
}

std::vector<std::pair<std::string, Dag>> default_dags() {
    std::vector<std::pair<std::string, Dag>> out;
    for (const char* v : {"d0", "d1", "d2"}) {
        out.emplace_back(v, parse_dag(codejam_dag_source(v)));
    }
    return out;
}

namespace {

std::string interval_verdict(double lower, double upper) {
    if (upper < 0.0) return "better";  // smaller rank ordinals
    if (lower > 0.0) return "worse";
    return "none";
}

ModelEntry run_model(const std::string& name, const ModelSpec& spec, const Dataset& data,
                     const AnalysisConfig& config, FitResult* keep_fit) {
    ModelEntry entry;
    entry.name = name;
    entry.formula = format_formula(spec);
    try {
        FitResult f = fit(data, spec, config.fit);
        entry.ok = true;
        entry.converged = f.converged;
        entry.aic = f.aic;
        entry.loglik = f.loglik;
        entry.k_free = f.k_free;
        entry.dispersion = f.dispersion;
        const Column& lang = data.column("language");
        if (lang.levels.size() >= 2 && f.converged) {
            const EffectSummary effects = centered_effects(f, "language", config.level);
            for (const auto& e : effects.effects) {
                entry.language_effects.push_back({e.level, e.estimate, e.lower, e.upper,
                                                  interval_verdict(e.lower, e.upper)});
            }
        }
        if (keep_fit) *keep_fit = std::move(f);
    } catch (const std::exception& e) {
        entry.ok = false;
        entry.error = e.what();
    }
    return entry;
}

std::vector<std::pair<std::string, ModelSpec>> standard_models() {
    std::vector<std::pair<std::string, ModelSpec>> out;
    ModelSpec spec;
    spec.outcome = "rank";
    spec.family = Family::NegativeBinomialLog;
    spec.terms = {Term::factor("language")};
    out.emplace_back("m1", spec);
    spec.terms.push_back(Term::factor("nickname"));
    out.emplace_back("m2", spec);
    spec.terms.push_back(Term::factor("challenge"));
    out.emplace_back("m3", spec);
    spec.terms.push_back(Term::slope("size", Transform::Log));
    out.emplace_back("m4", spec);
    return out;
}

// A model estimates the causal language effect when its non-treatment factor
// predictors form a valid adjustment set and no collider-prone slope is
// conditioned on.
bool adjustment_consistent(const ModelSpec& spec, const AdjustmentReport& report) {
    if (!spec.terms.empty() && spec.terms.front().column != "language") return false;
    std::vector<std::string> others;
    for (const auto& t : spec.terms) {
        if (t.column == "language") continue;
        if (t.kind == Term::Kind::Slope) return false;
        others.push_back(t.column);
    }
    std::sort(others.begin(), others.end());
    for (const auto& valid : report.all_valid) {
        if (valid == others) return true;
    }
    return false;
}

}  // namespace

AnalysisReport analyze(const Dataset& data,
                       const std::vector<std::pair<std::string, Dag>>& dags,
                       const AnalysisConfig& config) {
    for (const char* col : {"challenge", "nickname", "language", "size", "rank"}) {
        if (!data.has_column(col)) {
            throw PipelineError("dataset lacks canonical column: " + std::string(col));
        }
    }

    AnalysisReport report;
    report.config = config;
    report.rows = data.row_count();
    report.participants = data.column("nickname").levels.size();
    report.challenges = data.column("challenge").levels.size();
    report.languages = data.column("language").levels;
    if (report.languages.size() < 2) {
        report.warnings.push_back("single language level: language effects unavailable");
    }

    const auto specs = standard_models();
    std::vector<FitResult> fits(specs.size());
    std::vector<bool> usable(specs.size(), false);
    report.models.resize(specs.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t m = 0; m < specs.size(); ++m) {
        report.models[m] = run_model(specs[m].first, specs[m].second, data, config, &fits[m]);
    }
    for (std::size_t m = 0; m < specs.size(); ++m) {
        usable[m] = report.models[m].ok && report.models[m].converged;
        if (!report.models[m].ok) {
            report.warnings.push_back("model " + specs[m].first + " failed: " +
                                      report.models[m].error);
        }
    }

    // AIC ranking over the usable fits.
    {
        std::vector<FitResult> ranked_fits;
        std::vector<std::string> names;
        for (std::size_t m = 0; m < specs.size(); ++m) {
            if (usable[m]) {
                ranked_fits.push_back(fits[m]);
                names.push_back(specs[m].first);
            }
        }
        if (!ranked_fits.empty()) {
            for (const auto& r : compare_models(ranked_fits)) {
                report.ranking.emplace_back(names[r.index], r.delta_aic);
            }
            report.best_predictive = report.ranking.front().first;
        }
    }

    // DAG validation and adjustment sets.
    for (const auto& [id, dag] : dags) {
        if (config.validate_dags) {
            report.dag_validation.push_back(
                validate_dag(dag, data, config.level, config.threshold, config.fit, id));
        }
        if (dag.has_node("language") && dag.has_node("rank")) {
            report.adjustment_sets.push_back({id, adjustment_sets(dag, "language", "rank")});
        }
    }

    // The causal answer comes from the adjustment-consistent model with the
    // best AIC, judged against a validated DAG's adjustment sets.
    {
        const AnalysisReport::DagAdjustment* chosen = nullptr;
        for (const auto& v : report.dag_validation) {
            if (v.overall != CiVerdict::Pass) continue;
            for (const auto& adj : report.adjustment_sets) {
                if (adj.dag_id == v.dag_id) {
                    chosen = &adj;
                    break;
                }
            }
            if (chosen) break;
        }
        if (!chosen && !report.adjustment_sets.empty()) {
            chosen = &report.adjustment_sets.front();
            if (config.validate_dags) {
                report.warnings.push_back(
                    "no DAG passed validation; adjustment sets taken from " + chosen->dag_id);
            }
        }
        if (chosen) {
            double best_aic = 0.0;
            for (std::size_t m = 0; m < specs.size(); ++m) {
                if (!usable[m]) continue;
                if (!adjustment_consistent(specs[m].second, chosen->report)) continue;
                if (report.causal_model.empty() || fits[m].aic < best_aic) {
                    report.causal_model = specs[m].first;
                    best_aic = fits[m].aic;
                }
            }
        }
    }
    return report;
}

nlohmann::json report_json(const AnalysisReport& report) {
    nlohmann::json models = nlohmann::json::array();
    nlohmann::json effects = nlohmann::json::object();
    for (const auto& m : report.models) {
        models.push_back({{"name", m.name},
                          {"formula", m.formula},
                          {"ok", m.ok},
                          {"error", m.error},
                          {"converged", m.converged},
                          {"aic", m.aic},
                          {"loglik", m.loglik},
                          {"k", m.k_free},
                          {"dispersion", m.dispersion}});
        nlohmann::json per_lang = nlohmann::json::array();
        for (const auto& e : m.language_effects) {
            per_lang.push_back({{"language", e.language},
                                {"estimate", e.estimate},
                                {"lower", e.lower},
                                {"upper", e.upper},
                                {"verdict", e.verdict}});
        }
        effects[m.name] = per_lang;
    }

    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& [name, delta] : report.ranking) {
        ranking.push_back({{"model", name}, {"delta_aic", delta}});
    }

    nlohmann::json validation = nlohmann::json::array();
    for (const auto& v : report.dag_validation) validation.push_back(validation_report_json(v));

    nlohmann::json adjustments = nlohmann::json::array();
    for (const auto& a : report.adjustment_sets) {
        adjustments.push_back({{"dag", a.dag_id},
                               {"treatment", "language"},
                               {"outcome", "rank"},
                               {"all_valid", a.report.all_valid},
                               {"minimal", a.report.minimal}});
    }

    return {{"config",
             {{"level", report.config.level},
              {"threshold", report.config.threshold},
              {"min_years", report.config.filter.min_years},
              {"min_rounds", report.config.filter.min_rounds},
              {"top_languages", report.config.filter.top_k_languages}}},
            {"dataset_summary",
             {{"rows", report.rows},
              {"participants", report.participants},
              {"challenges", report.challenges},
              {"languages", report.languages}}},
            {"models", models},
            {"language_effects", effects},
            {"model_ranking",
             {{"ranking", ranking},
              {"best_predictive", report.best_predictive},
              {"causal_model", report.causal_model}}},
            {"dag_validation", validation},
            {"adjustment_sets", adjustments},
            {"warnings", report.warnings}};
}

std::string report_text(const AnalysisReport& report) {
    std::ostringstream out;
    out << "dataset: " << report.rows << " rows, " << report.participants << " participants, "
        << report.challenges << " challenges, " << report.languages.size() << " languages\n";

    out << "\nmodels (AIC ascending):\n";
    for (const auto& [name, delta] : report.ranking) {
        const ModelEntry* entry = nullptr;
        for (const auto& m : report.models) {
            if (m.name == name) entry = &m;
        }
        out << "  " << name << "  aic=" << std::fixed << std::setprecision(1) << entry->aic
            << "  (+" << delta << ")  " << entry->formula << "\n";
    }
    for (const auto& m : report.models) {
        if (!m.ok) out << "  " << m.name << "  FAILED: " << m.error << "\n";
    }

    out << "\ncentered language effects (" << std::setprecision(0)
        << report.config.level * 100 << "% intervals):\n";
    for (const auto& m : report.models) {
        if (m.language_effects.empty()) continue;
        out << "  " << m.name;
        if (m.name == report.best_predictive) out << " [best predictive]";
        if (m.name == report.causal_model) out << " [causal choice]";
        out << "\n";
        for (const auto& e : m.language_effects) {
            out << "    " << std::left << std::setw(10) << e.language << std::right
                << std::fixed << std::setprecision(4) << std::setw(9) << e.estimate << "  ["
                << std::setw(9) << e.lower << ", " << std::setw(9) << e.upper << "]  "
                << e.verdict << "\n";
        }
    }

    if (!report.dag_validation.empty()) {
        out << "\nDAG validation:\n";
        for (const auto& v : report.dag_validation) {
            out << "  " << v.dag_id << ": " << to_string(v.overall) << "\n";
            for (const auto& e : v.entries) {
                out << "    " << e.spec.statement.to_string() << "  nonzero="
                    << std::setprecision(3) << e.result.nonzero_fraction << "  "
                    << to_string(e.result.verdict);
                if (!e.result.note.empty()) out << "  (" << e.result.note << ")";
                out << "\n";
            }
        }
    }

    out << "\nadjustment sets for (language -> rank):\n";
    auto set_text = [](const std::vector<std::string>& s) {
        std::string t = "{";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) t += ", ";
            t += s[i];
        }
        return t + "}";
    };
    for (const auto& a : report.adjustment_sets) {
        out << "  " << a.dag_id << ": valid:";
        for (const auto& s : a.report.all_valid) out << " " << set_text(s);
        out << "  minimal:";
        for (const auto& s : a.report.minimal) out << " " << set_text(s);
        out << "\n";
    }

    for (const auto& w : report.warnings) out << "warning: " << w << "\n";
    return out.str();
}

void write_effects_csv(const std::string& path, const AnalysisReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError("cannot write file: " + path);
    out << "model,language,level,estimate,lower,upper,verdict\n";
    for (const auto& m : report.models) {
        for (const auto& e : m.language_effects) {
            out << m.name << "," << e.language << "," << report.config.level << ","
                << e.estimate << "," << e.lower << "," << e.upper << "," << e.verdict << "\n";
        }
    }
}

std::vector<SweepCell> sweep(const std::vector<RawSubmission>& rows,
                             std::pair<int, int> year_range, std::pair<int, int> round_range,
                             const AnalysisConfig& config) {
    if (year_range.first > year_range.second || round_range.first > round_range.second) {
        throw PipelineError("empty sweep range");
    }
    std::vector<std::pair<int, int>> grid;
    for (int y = year_range.first; y <= year_range.second; ++y) {
        for (int r = round_range.first; r <= round_range.second; ++r) {
            grid.emplace_back(y, r);
        }
    }

    std::vector<SweepCell> cells(grid.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SweepCell& cell = cells[i];
        cell.years = grid[i].first;
        cell.rounds = grid[i].second;
        AnalysisConfig cell_config = config;
        cell_config.filter.min_years = cell.years;
        cell_config.filter.min_rounds = cell.rounds;
        try {
            const Dataset data = filter_dataset(rows, cell_config.filter);
            cell.datapoints = data.row_count();
            cell.participants = data.column("nickname").levels.size();
            const AnalysisReport report = analyze(data, default_dags(), cell_config);
            cell.models = report.models;
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    }

    // Empty datasets vanish; failures with data stay, marked.
    cells.erase(std::remove_if(cells.begin(), cells.end(),
                               [](const SweepCell& c) {
                                   return !c.ok && c.datapoints == 0;
                               }),
                cells.end());
    std::stable_sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
        return a.datapoints < b.datapoints;
    });
    for (std::size_t i = 0; i < cells.size(); ++i) {
        cells[i].size_index = static_cast<int>(i) + 1;
    }
    return cells;
}

nlohmann::json sweep_json(const std::vector<SweepCell>& cells) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json models = nlohmann::json::object();
        for (const auto& m : c.models) {
            nlohmann::json per_lang = nlohmann::json::array();
            for (const auto& e : m.language_effects) {
                per_lang.push_back({{"language", e.language},
                                    {"estimate", e.estimate},
                                    {"lower", e.lower},
                                    {"upper", e.upper},
                                    {"verdict", e.verdict}});
            }
            models[m.name] = per_lang;
        }
        out.push_back({{"index", c.size_index},
                       {"years", c.years},
                       {"rounds", c.rounds},
                       {"datapoints", c.datapoints},
                       {"participants", c.participants},
                       {"ok", c.ok},
                       {"error", c.error},
                       {"language_effects", models}});
    }
    return out;
}

std::string sweep_text(const std::vector<SweepCell>& cells) {
    std::ostringstream out;
    out << "index  years  rounds  datapoints  participants\n";
    for (const auto& c : cells) {
        out << std::setw(5) << c.size_index << "  " << std::setw(5) << c.years << "  "
            << std::setw(6) << c.rounds << "  " << std::setw(10) << c.datapoints << "  "
            << std::setw(12) << c.participants;
        if (!c.ok) out << "  FAILED: " << c.error;
        out << "\n";
    }
    return out.str();
}

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError("cannot write file: " + path);
    out << "index,years,rounds,datapoints,participants,model,language,estimate,lower,upper\n";
    for (const auto& c : cells) {
        for (const auto& m : c.models) {
            for (const auto& e : m.language_effects) {
                out << c.size_index << "," << c.years << "," << c.rounds << ","
                    << c.datapoints << "," << c.participants << "," << m.name << ","
                    << e.language << "," << e.estimate << "," << e.lower << "," << e.upper
                    << "\n";
            }
        }
    }
}

SynthResult synth(const CodeJamParams& params, std::int64_t n, std::uint64_t seed,
                  const std::string& out_dir, std::int64_t truth_mc_n) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const Scm scm = codejam_scm(params);
    const Dataset data = sample(scm, n, seed);

    std::vector<RawSubmission> rows(data.row_count());
    const Column& challenge = data.column("challenge");
    const Column& nickname = data.column("nickname");
    const Column& language = data.column("language");
    const Column& size = data.column("size");
    const Column& rank = data.column("rank");
    for (std::size_t i = 0; i < data.row_count(); ++i) {
        rows[i].challenge = challenge.level_of(i);
        rows[i].nickname = nickname.level_of(i);
        rows[i].language = language.level_of(i);
        rows[i].size = std::max<std::int64_t>(1, std::llround(size.values[i]));
        rows[i].rank = std::max<std::int64_t>(1, rank.counts[i]);
    }

    SynthResult result;
    result.data_path = (fs::path(out_dir) / "data.csv").string();
    write_csv(result.data_path, rows);

    const auto truth = true_language_effects(scm, params.languages, truth_mc_n, seed + 1);
    nlohmann::json truth_json = {{"dag_variant", params.variant},
                                 {"n", n},
                                 {"seed", seed},
                                 {"truth_mc_n", truth_mc_n},
                                 {"true_effects", truth},
                                 {"params", format_codejam_params(params)}};
    result.truth_path = (fs::path(out_dir) / "truth.json").string();
    {
        std::ofstream out(result.truth_path, std::ios::binary);
        if (!out) throw PipelineError("cannot write file: " + result.truth_path);
        out << truth_json.dump(2) << "\n";
    }

    result.dag_path = (fs::path(out_dir) / (params.variant + ".dag")).string();
    {
        std::ofstream out(result.dag_path, std::ios::binary);
        if (!out) throw PipelineError("cannot write file: " + result.dag_path);
        out << codejam_dag_source(params.variant);
    }
    return result;
}

}  // namespace dagfit
