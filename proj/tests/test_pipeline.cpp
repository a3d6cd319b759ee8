#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "dagfit/pipeline.hpp"
#include "dagfit/rng.hpp"

using namespace dagfit;

namespace {

const char* kSmallCsv =
    "challenge,nickname,language,size,rank\n"
    "2010-1,alice,C++,1200,5\n"
    "2010-1,bob,Java,450,17\n"
    "2010-2,alice,C++,900,3\n";

// Synthetic contest rows shaped like the real dataset, with controllable
// participation depth.
std::vector<RawSubmission> synthetic_rows(std::uint64_t seed, int n) {
    Rng rng(seed);
    std::vector<RawSubmission> rows(n);
    const char* langs[4] = {"C++", "Java", "Python", "Haskell"};
    for (int i = 0; i < n; ++i) {
        rows[i].challenge = std::to_string(2008 + rng.next_u64() % 5) + "-" +
                            std::to_string(1 + rng.next_u64() % 4);
        rows[i].nickname = "p" + std::to_string(rng.next_u64() % 40);
        rows[i].language = langs[rng.next_u64() % 4];
        rows[i].size = 100 + static_cast<std::int64_t>(rng.next_u64() % 5000);
        rows[i].rank = 1 + static_cast<std::int64_t>(rng.next_u64() % 300);
    }
    return rows;
}

const Dataset& contest_dataset() {
    static const Dataset data = [] {
        const SynthResult files =
            synth(CodeJamParams{}, 12000, 31, "/tmp/dagfit_test_synth_main", 50000);
        LoadResult loaded = load_csv(files.data_path);
        REQUIRE(loaded.row_errors.empty());
        FilterConfig vacuous{1, 1, 3};
        return filter_dataset(loaded.rows, vacuous);
    }();
    return data;
}

const AnalysisReport& contest_report() {
    static const AnalysisReport report = [] {
        AnalysisConfig config;
        config.filter = {1, 1, 3};
        return analyze(contest_dataset(), default_dags(), config);
    }();
    return report;
}

}  // namespace

TEST_CASE("load_csv parses well-formed rows in order") {
    const LoadResult r = load_csv_text(kSmallCsv);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.row_errors.empty());
    CHECK(r.rows[0].nickname == "alice");
    CHECK(r.rows[0].size == 1200);
    CHECK(r.rows[1].language == "Java");
    CHECK(r.rows[2].rank == 3);
}

TEST_CASE("load_csv collects malformed rows instead of failing") {
    const std::string text =
        "challenge,nickname,language,size,rank\n"
        "2010-1,alice,C++,1200,5\n"
        "2010-1,bob,Java,450,0\n"        // rank must be >= 1
        "2010-1,carl,Python,xyz,3\n"     // non-numeric size
        "2010-1,dina,Python,800\n"       // missing field
        "2010-2,,C++,700,4\n";           // empty nickname
    const LoadResult r = load_csv_text(text);
    CHECK(r.rows.size() == 1);
    REQUIRE(r.row_errors.size() == 4);
    CHECK(r.row_errors[0].find("line 3") != std::string::npos);
    CHECK(r.row_errors[0].find("rank") != std::string::npos);
}

TEST_CASE("load_csv accepts RFC-4180 quoting") {
    const std::string text =
        "challenge,nickname,language,size,rank\n"
        "2010-1,\"last, first\",\"C++\",100,2\n"
        "2010-1,\"quote\"\"d\",Java,200,9\n";
    const LoadResult r = load_csv_text(text);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].nickname == "last, first");
    CHECK(r.rows[1].nickname == "quote\"d");
}

TEST_CASE("load_csv rejects structural problems outright") {
    CHECK_THROWS_AS(load_csv_text(""), PipelineError);
    CHECK_THROWS_AS(load_csv_text("challenge,nickname,language,size,rank\n"), PipelineError);
    CHECK_THROWS_AS(load_csv_text("challenge,nick,language,size,rank\n1,2,3,4,5\n"),
                    PipelineError);
    CHECK_THROWS_AS(load_csv("/no/such/file.csv"), PipelineError);
}

TEST_CASE("aggregate merges duplicate keys by summing sizes") {
    std::vector<RawSubmission> rows = {
        {"2010-1", "alice", "C++", 100, 5},
        {"2010-1", "alice", "C++", 250, 5},
        {"2010-1", "bob", "Java", 300, 9},
    };
    const auto merged = aggregate(rows);
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].size == 350);
    CHECK(merged[0].rank == 5);
    CHECK(merged[1].nickname == "bob");

    const auto idempotent = aggregate(merged);
    CHECK(idempotent.size() == merged.size());
    CHECK(idempotent[0].size == merged[0].size);
}

TEST_CASE("aggregate rejects conflicting ranks, naming the key") {
    std::vector<RawSubmission> rows = {
        {"2010-1", "alice", "C++", 100, 5},
        {"2010-1", "alice", "C++", 250, 7},
    };
    CHECK_THROWS_WITH_AS(aggregate(rows), doctest::Contains("alice"), PipelineError);
}

TEST_CASE("aggregate settles the language by majority with alphabetic ties") {
    std::vector<RawSubmission> rows = {
        {"2010-1", "alice", "Python", 10, 5},
        {"2010-1", "alice", "C++", 10, 5},
        {"2010-1", "alice", "Python", 10, 5},
        {"2010-2", "bob", "Java", 10, 2},
        {"2010-2", "bob", "C++", 10, 2},
    };
    const auto merged = aggregate(rows);
    CHECK(merged[0].language == "Python");  // 2-1 majority
    CHECK(merged[1].language == "C++");     // tie, alphabetically first
}

TEST_CASE("filter with unit cutoffs keeps every row") {
    const auto rows = synthetic_rows(4, 500);
    FilterConfig cfg{1, 1, 100};
    const Dataset data = filter_dataset(rows, cfg);
    CHECK(data.row_count() == rows.size());
}

TEST_CASE("filter keeps exactly the constructed boundary participant") {
    std::vector<RawSubmission> rows;
    // "deep" enters 2 years with 6 rounds in each; everyone else one year.
    for (int year : {2010, 2011}) {
        for (int round = 1; round <= 6; ++round) {
            rows.push_back({std::to_string(year) + "-" + std::to_string(round), "deep", "C++",
                            100, 10});
        }
    }
    for (int i = 0; i < 10; ++i) {
        rows.push_back({"2010-" + std::to_string(1 + i % 6), "casual" + std::to_string(i),
                        "Java", 100, 20});
    }
    FilterConfig cfg{2, 6, 10};
    const Dataset data = filter_dataset(rows, cfg);
    const Column& nickname = data.column("nickname");
    CHECK(nickname.levels == std::vector<std::string>{"deep"});
    CHECK(data.row_count() == 12);
}

TEST_CASE("filter keeps only the top-k languages") {
    std::vector<RawSubmission> rows;
    for (int i = 0; i < 30; ++i) rows.push_back({"2010-1", "a", "C++", 10, 1});
    for (int i = 0; i < 20; ++i) rows.push_back({"2010-1", "a", "Java", 10, 1});
    for (int i = 0; i < 10; ++i) rows.push_back({"2010-1", "a", "Pascal", 10, 1});
    FilterConfig cfg{1, 1, 2};
    const Dataset data = filter_dataset(rows, cfg);
    CHECK(data.column("language").levels == std::vector<std::string>{"C++", "Java"});
    CHECK(data.row_count() == 50);
}

TEST_CASE("tightening any filter cutoff never adds rows") {
    const auto rows = synthetic_rows(77, 3000);
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (int y = 1; y <= 4; ++y) {
        FilterConfig cfg{y, 1, 3};
        std::size_t count = 0;
        try {
            count = filter_dataset(rows, cfg).row_count();
        } catch (const PipelineError&) {
            count = 0;  // empty result
        }
        CHECK(count <= previous);
        previous = count;
    }
    previous = std::numeric_limits<std::size_t>::max();
    for (int r = 1; r <= 4; ++r) {
        FilterConfig cfg{1, r, 3};
        std::size_t count = 0;
        try {
            count = filter_dataset(rows, cfg).row_count();
        } catch (const PipelineError&) {
            count = 0;
        }
        CHECK(count <= previous);
        previous = count;
    }
}

TEST_CASE("filter rejects malformed challenge ids and empty results") {
    std::vector<RawSubmission> rows = {{"no-dash-year", "a", "C++", 10, 1}};
    rows[0].challenge = "weird";
    FilterConfig cfg{1, 1, 3};
    CHECK_THROWS_WITH_AS(filter_dataset(rows, cfg), doctest::Contains("challenge id"),
                         PipelineError);

    std::vector<RawSubmission> shallow = {{"2010-1", "a", "C++", 10, 1}};
    FilterConfig deep{5, 5, 3};
    CHECK_THROWS_WITH_AS(filter_dataset(shallow, deep), doctest::Contains("empty"),
                         PipelineError);
}

TEST_CASE("analysis report answers both questions on synthetic ground truth") {
    const AnalysisReport& report = contest_report();

    CHECK(report.rows == 12000);
    CHECK(report.participants == 105);
    CHECK(report.languages == std::vector<std::string>{"C++", "Java", "Python"});

    // Predictive ranking ends at the size model; the causal choice differs.
    CHECK(report.best_predictive == "m4");
    CHECK(report.causal_model == "m3");

    const ModelEntry* m3 = nullptr;
    const ModelEntry* m4 = nullptr;
    for (const auto& m : report.models) {
        if (m.name == "m3") m3 = &m;
        if (m.name == "m4") m4 = &m;
    }
    REQUIRE(m3 != nullptr);
    REQUIRE(m4 != nullptr);

    std::map<std::string, std::string> causal_verdicts, collider_verdicts;
    for (const auto& e : m3->language_effects) causal_verdicts[e.language] = e.verdict;
    for (const auto& e : m4->language_effects) collider_verdicts[e.language] = e.verdict;
    CHECK(causal_verdicts["C++"] == "better");
    CHECK(causal_verdicts["Python"] == "worse");
    CHECK(causal_verdicts != collider_verdicts);

    // d0 fails validation; d1 and d2 pass.
    std::map<std::string, CiVerdict> verdicts;
    for (const auto& v : report.dag_validation) verdicts[v.dag_id] = v.overall;
    CHECK(verdicts["d0"] == CiVerdict::Fail);
    CHECK(verdicts["d1"] == CiVerdict::Pass);
    CHECK(verdicts["d2"] == CiVerdict::Pass);

    // Adjustment sets match the published ones for every variant.
    for (const auto& a : report.adjustment_sets) {
        CHECK(a.report.all_valid ==
              std::vector<std::vector<std::string>>{{"nickname"}, {"challenge", "nickname"}});
        CHECK(a.report.minimal == std::vector<std::vector<std::string>>{{"nickname"}});
    }
}

TEST_CASE("verdicts match the interval position exactly") {
    for (const auto& m : contest_report().models) {
        for (const auto& e : m.language_effects) {
            if (e.upper < 0.0) CHECK(e.verdict == "better");
            else if (e.lower > 0.0) CHECK(e.verdict == "worse");
            else CHECK(e.verdict == "none");
        }
    }
}

TEST_CASE("report JSON carries the documented top-level keys") {
    const nlohmann::json j = report_json(contest_report());
    for (const char* key : {"config", "dataset_summary", "models", "language_effects",
                            "model_ranking", "dag_validation", "adjustment_sets"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["dataset_summary"]["rows"] == 12000);
    CHECK(j["model_ranking"]["best_predictive"] == "m4");

    // Determinism: a fresh run serializes identically.
    AnalysisConfig config;
    config.filter = {1, 1, 3};
    const AnalysisReport again = analyze(contest_dataset(), default_dags(), config);
    CHECK(report_json(again).dump() == j.dump());
}

TEST_CASE("single-language datasets yield a warning and no effects") {
    std::vector<RawSubmission> rows;
    Rng rng(5);
    for (int i = 0; i < 400; ++i) {
        rows.push_back({"2010-" + std::to_string(1 + i % 4),
                        "p" + std::to_string(i % 20), "C++",
                        100 + static_cast<std::int64_t>(rng.next_u64() % 900),
                        1 + static_cast<std::int64_t>(rng.next_u64() % 60)});
    }
    FilterConfig cfg{1, 1, 3};
    AnalysisConfig config;
    config.filter = cfg;
    config.validate_dags = false;
    const AnalysisReport report = analyze(filter_dataset(rows, cfg), default_dags(), config);
    bool warned = false;
    for (const auto& w : report.warnings) {
        if (w.find("single language") != std::string::npos) warned = true;
    }
    CHECK(warned);
    for (const auto& m : report.models) CHECK(m.language_effects.empty());
}

TEST_CASE("degenerate sweep equals a direct analysis") {
    const auto rows = synthetic_rows(15, 2500);
    AnalysisConfig config;
    config.validate_dags = false;
    const auto cells = sweep(rows, {1, 1}, {1, 1}, config);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].size_index == 1);
    REQUIRE(cells[0].ok);

    AnalysisConfig direct = config;
    direct.filter = {1, 1, 3};
    const AnalysisReport report =
        analyze(filter_dataset(rows, direct.filter), default_dags(), direct);
    REQUIRE(cells[0].models.size() == report.models.size());
    for (std::size_t i = 0; i < report.models.size(); ++i) {
        CHECK(cells[0].models[i].aic == doctest::Approx(report.models[i].aic));
    }
    CHECK(cells[0].datapoints == report.rows);
}

TEST_CASE("sweep cells shrink monotonically along the cutoff grid") {
    const auto rows = synthetic_rows(42, 4000);
    AnalysisConfig config;
    config.validate_dags = false;
    const auto cells = sweep(rows, {1, 3}, {1, 3}, config);
    REQUIRE(!cells.empty());

    // Sorted ascending by datapoints with consecutive indexes.
    for (std::size_t i = 1; i < cells.size(); ++i) {
        CHECK(cells[i].datapoints >= cells[i - 1].datapoints);
        CHECK(cells[i].size_index == static_cast<int>(i) + 1);
    }
    // Tightening either cutoff never grows the dataset.
    std::map<std::pair<int, int>, std::size_t> counts;
    for (const auto& c : cells) counts[{c.years, c.rounds}] = c.datapoints;
    for (const auto& [key, count] : counts) {
        const auto [y, r] = key;
        if (counts.count({y - 1, r})) CHECK(count <= counts[{y - 1, r}]);
        if (counts.count({y, r - 1})) CHECK(count <= counts[{y, r - 1}]);
    }
}

TEST_CASE("synth writes a loadable dataset with a centered ground truth") {
    const std::string dir = "/tmp/dagfit_test_synth_roundtrip";
    std::filesystem::remove_all(dir);
    CodeJamParams params;
    const SynthResult files = synth(params, 1500, 99, dir, 50000);

    const LoadResult loaded = load_csv(files.data_path);
    CHECK(loaded.rows.size() == 1500);
    CHECK(loaded.row_errors.empty());

    std::ifstream truth_in(files.truth_path);
    REQUIRE(truth_in.good());
    nlohmann::json truth;
    truth_in >> truth;
    CHECK(truth["dag_variant"] == "d2");
    double total = 0.0;
    for (const auto& [lang, v] : truth["true_effects"].items()) {
        total += v.get<double>();
    }
    CHECK(std::fabs(total) < 1e-9);

    std::ifstream dag_in(files.dag_path);
    REQUIRE(dag_in.good());
    std::stringstream dag_text;
    dag_text << dag_in.rdbuf();
    CHECK(parse_dag(dag_text.str()) == parse_dag(codejam_dag_source("d2")));

    // Lossless round trip: writing the loaded rows again reproduces the file.
    const std::string copy = dir + "/copy.csv";
    write_csv(copy, loaded.rows);
    std::ifstream a(files.data_path), b(copy);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
}
