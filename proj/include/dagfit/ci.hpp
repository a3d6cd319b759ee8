#pragma once

#include <string>
#include <vector>

#include "dagfit/dag.hpp"
#include "dagfit/dataset.hpp"
#include "dagfit/glm.hpp"

#include "json.hpp"

namespace dagfit {

struct CiError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A conditional-independence statement turned into a regression: the
/// statement's outcome side is the model outcome, the focus variable and the
/// conditioning set enter as predictors, and the focus coefficients are the
/// ones tested against zero.
struct CiTestSpec {
    CondIndep statement;  // oriented so that statement.x is the outcome
    ModelSpec regression;
    std::string focus_column;  // the statement's y
};

enum class CiVerdict { Pass, Fail, Inconclusive };

std::string to_string(CiVerdict v);

struct CiTestResult {
    std::vector<CoefInterval> focus_intervals;
    double level = 0.5;
    double threshold = 0.2;
    /// Share of focus coefficients whose interval excludes zero.
    double nonzero_fraction = 0.0;
    CiVerdict verdict = CiVerdict::Inconclusive;
    std::string note;  // set for inconclusive results
};

struct DagValidationEntry {
    CiTestSpec spec;
    CiTestResult result;
};

struct DagValidationReport {
    std::string dag_id;
    double level = 0.5;
    double threshold = 0.2;
    std::vector<DagValidationEntry> entries;  // one per testable statement
    CiVerdict overall = CiVerdict::Pass;      // vacuous pass when nothing is testable
};

/// Builds the regression for one statement. The outcome side is chosen by
/// response-likeness of the column class (count, then continuous, then
/// factor; ties go to the lexicographically later name), which reproduces
/// the standard constructions: a factor-vs-factor statement regresses the
/// later factor's integer codes with a count family; a continuous outcome on
/// a strictly positive scale is modeled as gaussian on its logarithm.
CiTestSpec regression_for_ci(const CondIndep& ci, const Dataset& schema);

/// Fits the regression and applies the interval/threshold rule: pass iff the
/// nonzero fraction of the focus coefficients is at most `threshold`.
/// Non-convergent fits yield an inconclusive verdict, never a pass.
CiTestResult run_ci_test(const Dataset& data, const CiTestSpec& spec, double level = 0.5,
                         double threshold = 0.2, const FitOptions& options = {});

/// Runs one CI test per testable implied independence of the DAG. Overall
/// verdict: inconclusive if any entry is, otherwise pass iff all entries pass.
DagValidationReport validate_dag(const Dag& dag, const Dataset& data, double level = 0.5,
                                 double threshold = 0.2, const FitOptions& options = {},
                                 const std::string& dag_id = "");

nlohmann::json validation_report_json(const DagValidationReport& report);

}  // namespace dagfit
