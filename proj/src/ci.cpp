#include "dagfit/ci.hpp"

#include <algorithm>
#include <cmath>

namespace dagfit {

std::string to_string(CiVerdict v) {
    switch (v) {
        case CiVerdict::Pass: return "pass";
        case CiVerdict::Fail: return "fail";
        case CiVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

int response_rank(ColumnClass cls) {
    switch (cls) {
        case ColumnClass::Count: return 2;
        case ColumnClass::Continuous: return 1;
        case ColumnClass::Factor: return 0;
    }
    return -1;
}

bool strictly_positive(const Column& col) {
    for (std::size_t i = 0; i < col.size(); ++i) {
        if (col.as_double(i) <= 0.0) return false;
    }
    return true;
}

Term predictor_term(const Dataset& data, const std::string& name) {
    const Column& col = data.column(name);
    if (col.cls == ColumnClass::Factor) return Term::factor(name);
    return Term::slope(name, strictly_positive(col) ? Transform::Log : Transform::Identity);
}

}  // namespace

CiTestSpec regression_for_ci(const CondIndep& ci, const Dataset& schema) {
    for (const auto& name : {ci.x, ci.y}) {
        if (!schema.has_column(name)) {
            throw CiError("statement variable not observed in data: " + name);
        }
    }
    for (const auto& name : ci.given) {
        if (!schema.has_column(name)) {
            throw CiError("conditioning variable not observed in data: " + name);
        }
    }

    const Column& cx = schema.column(ci.x);
    const Column& cy = schema.column(ci.y);
    std::string outcome = ci.x, focus = ci.y;
    const int rx = response_rank(cx.cls), ry = response_rank(cy.cls);
    if (ry > rx || (ry == rx && ci.y > ci.x)) std::swap(outcome, focus);

    CiTestSpec spec;
    spec.statement = CondIndep{outcome, focus, ci.given};
    spec.focus_column = focus;

    const Column& oc = schema.column(outcome);
    ModelSpec& model = spec.regression;
    model.outcome = outcome;
    model.include_intercept = true;
    switch (oc.cls) {
        case ColumnClass::Count:
        case ColumnClass::Factor:
            // Integer outcome (counts, or a factor's integer codes).
            model.family = Family::NegativeBinomialLog;
            model.outcome_transform = Transform::Identity;
            break;
        case ColumnClass::Continuous:
            model.family = Family::GaussianIdentity;
            model.outcome_transform =
                strictly_positive(oc) ? Transform::Log : Transform::Identity;
            break;
    }
    model.terms.push_back(predictor_term(schema, focus));
    for (const auto& z : ci.given) model.terms.push_back(predictor_term(schema, z));
    model.validate();
    return spec;
}

CiTestResult run_ci_test(const Dataset& data, const CiTestSpec& spec, double level,
                         double threshold, const FitOptions& options) {
    CiTestResult out;
    out.level = level;
    out.threshold = threshold;

    FitResult fitted;
    try {
        fitted = fit(data, spec.regression, options);
    } catch (const FitError& e) {
        out.verdict = CiVerdict::Inconclusive;
        out.note = e.what();
        return out;
    }
    if (!fitted.converged) {
        out.verdict = CiVerdict::Inconclusive;
        out.note = "fit did not converge";
        return out;
    }

    const auto focus_cols = fitted.design.term_columns(spec.focus_column);
    if (focus_cols.empty()) {
        throw CiError("empty focus group: " + spec.focus_column +
                      " contributes no design columns");
    }
    const auto intervals = wald_intervals(fitted, level);
    int nonzero = 0;
    for (int c : focus_cols) {
        out.focus_intervals.push_back(intervals[c]);
        if (intervals[c].lower > 0.0 || intervals[c].upper < 0.0) ++nonzero;
    }
    out.nonzero_fraction = static_cast<double>(nonzero) / focus_cols.size();
    out.verdict = out.nonzero_fraction <= threshold ? CiVerdict::Pass : CiVerdict::Fail;
    return out;
}

DagValidationReport validate_dag(const Dag& dag, const Dataset& data, double level,
                                 double threshold, const FitOptions& options,
                                 const std::string& dag_id) {
    DagValidationReport report;
    report.dag_id = dag_id;
    report.level = level;
    report.threshold = threshold;

    const auto statements = implied_independencies(dag, /*testable_only=*/true);
    bool any_inconclusive = false;
    bool all_pass = true;
    for (const auto& ci : statements) {
        DagValidationEntry entry;
        try {
            entry.spec = regression_for_ci(ci, data);
            entry.result = run_ci_test(data, entry.spec, level, threshold, options);
        } catch (const std::exception& e) {
            entry.spec.statement = ci;
            entry.result.verdict = CiVerdict::Inconclusive;
            entry.result.note = e.what();
        }
        if (entry.result.verdict == CiVerdict::Inconclusive) any_inconclusive = true;
        if (entry.result.verdict != CiVerdict::Pass) all_pass = false;
        report.entries.push_back(std::move(entry));
    }
    report.overall = any_inconclusive ? CiVerdict::Inconclusive
                                      : (all_pass ? CiVerdict::Pass : CiVerdict::Fail);
    return report;
}

nlohmann::json validation_report_json(const DagValidationReport& report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        nlohmann::json intervals = nlohmann::json::array();
        for (const auto& ci : e.result.focus_intervals) {
            intervals.push_back({{"coefficient", ci.name},
                                 {"estimate", ci.estimate},
                                 {"stderr", ci.stderr_},
                                 {"lower", ci.lower},
                                 {"upper", ci.upper}});
        }
        entries.push_back(
            {{"statement", e.spec.statement.to_string()},
             {"family", e.spec.regression.family == Family::NegativeBinomialLog ? "negbin"
                                                                                : "gaussian"},
             {"formula", format_formula(e.spec.regression)},
             {"nonzero_fraction", e.result.nonzero_fraction},
             {"verdict", to_string(e.result.verdict)},
             {"note", e.result.note},
             {"intervals", intervals}});
    }
    return {{"dag", report.dag_id},
            {"level", report.level},
            {"threshold", report.threshold},
            {"statements", entries},
            {"overall", to_string(report.overall)}};
}

}  // namespace dagfit
