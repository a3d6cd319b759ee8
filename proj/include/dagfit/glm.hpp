#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dagfit/dataset.hpp"

namespace dagfit {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Family { NegativeBinomialLog, GaussianIdentity };
enum class Transform { Identity, Log };

/// One predictor: a factor expanded to per-level intercepts, or a numeric
/// slope (optionally on the log scale).
struct Term {
    enum class Kind { FactorIntercepts, Slope };
    Kind kind = Kind::FactorIntercepts;
    std::string column;
    Transform transform = Transform::Identity;  // slopes only

    static Term factor(std::string column) {
        return Term{Kind::FactorIntercepts, std::move(column), Transform::Identity};
    }
    static Term slope(std::string column, Transform tf = Transform::Identity) {
        return Term{Kind::Slope, std::move(column), tf};
    }
    bool operator==(const Term& o) const {
        return kind == o.kind && column == o.column && transform == o.transform;
    }
};

struct ModelSpec {
    std::string outcome;
    Transform outcome_transform = Transform::Identity;
    Family family = Family::NegativeBinomialLog;
    std::vector<Term> terms;
    bool include_intercept = true;

    void validate() const;  // outcome not a predictor, no duplicate columns
};

/// Formula grammar: `<outcome> ~ <term> + ... [family=negbin|gaussian]`
/// where outcome/term is `name`, `log(name)`, or (terms only) `slope(name)`.
/// A bare term name means factor intercepts. Family defaults to negbin.
ModelSpec parse_formula(const std::string& text);
std::string format_formula(const ModelSpec& spec);

/// Reference-coded design layout: per factor, the alphabetically first level
/// is dropped; a global intercept column comes first when enabled.
struct FactorBlock {
    std::string column;
    std::vector<std::string> levels;
    int reference = 0;                  // index into levels
    std::vector<int> column_of_level;   // design column per level; -1 = reference
};
struct SlopeBlock {
    std::string column;
    Transform transform = Transform::Identity;
    int column_index = -1;
};
struct DesignInfo {
    std::vector<std::string> names;  // one per design column
    bool intercept = true;
    int intercept_column = -1;
    std::vector<FactorBlock> factors;
    std::vector<SlopeBlock> slopes;
    int ncols = 0;

    const FactorBlock& factor(const std::string& column) const;
    /// Design columns spanned by the named term (factor block or slope).
    std::vector<int> term_columns(const std::string& column) const;
};

/// Row-sparse design plus the extracted outcome.
struct DesignMatrix {
    DesignInfo info;
    std::size_t rows = 0;
    std::vector<int> row_offsets;  // rows + 1
    std::vector<int> cols;
    std::vector<double> vals;
    /// Outcome after its transform; for the count family these are the raw
    /// nonnegative integers as doubles.
    std::vector<double> outcome;
};

DesignInfo encode_design(const Dataset& data, const ModelSpec& spec);
DesignMatrix build_design(const Dataset& data, const ModelSpec& spec);

/// Exact negative-binomial log-likelihood / score at (beta, phi); the score
/// vector is laid out as [per-coefficient..., d/dphi].
double nb_loglik(const DesignMatrix& design, const std::vector<double>& beta, double phi);
std::vector<double> nb_score(const DesignMatrix& design, const std::vector<double>& beta,
                             double phi);

struct FitOptions {
    int max_outer_iterations = 200;
    double rel_tol = 1e-10;
    double phi_min = 1e-4;
    double phi_max = 1e6;
};

struct FitResult {
    ModelSpec spec;
    DesignInfo design;
    std::vector<double> coef;        // aligned with design.names
    double dispersion = 0.0;         // phi (negbin) or sigma (gaussian)
    double dispersion_se = 0.0;
    std::vector<double> covariance;  // ncols x ncols, row-major, coefficients only
    double loglik = 0.0;
    double aic = 0.0;
    int k_free = 0;                  // coefficient count + dispersion
    int iterations = 0;
    bool converged = false;
    std::vector<double> loglik_trace;  // per outer iteration (negbin)
    std::vector<std::string> messages;

    // Dataset fingerprint for model-comparison sanity checks.
    std::size_t n_rows = 0;
    std::string outcome_name;
    double outcome_checksum = 0.0;

    double coefficient(const std::string& name) const;
    double cov(int i, int j) const { return covariance[static_cast<std::size_t>(i) * coef.size() + j]; }
};

FitResult fit(const Dataset& data, const ModelSpec& spec, const FitOptions& options = {});

struct CoefInterval {
    std::string name;
    double estimate = 0.0;
    double stderr_ = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// estimate +/- z(level) * stderr per coefficient; z from the standard
/// normal quantile (z(0.5) = 0.6745).
std::vector<CoefInterval> wald_intervals(const FitResult& fit, double level);

/// Standard normal quantile at probability p (Acklam's rational approximation).
double normal_quantile(double p);
/// Two-sided interval half-width multiplier for a central `level` interval.
double interval_z(double level);

struct EffectEntry {
    std::string level;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// Centered per-level factor effects: per-level alpha (reference = 0) minus
/// the across-level mean, with intervals from the contrast covariance.
struct EffectSummary {
    std::string factor;
    double level_prob = 0.5;
    std::vector<EffectEntry> effects;  // sum of estimates is zero
};

EffectSummary centered_effects(const FitResult& fit, const std::string& factor,
                               double level = 0.5);

/// beta * s with the |s|-scaled interval, for a deviation s of the slope
/// column from its reference point.
EffectEntry slope_effect(const FitResult& fit, const std::string& column, double s,
                         double level = 0.5);

struct ModelRank {
    int index = 0;  // position in the input list
    double aic = 0.0;
    double delta_aic = 0.0;  // versus the best
};

/// Sorted ascending by AIC. All fits must target the same dataset/outcome.
std::vector<ModelRank> compare_models(const std::vector<FitResult>& fits);

struct SelectionStep {
    std::string added;   // column of the accepted candidate ("" = stop)
    double aic_before = 0.0;
    double aic_after = 0.0;
    std::vector<std::string> skipped;  // candidates whose fit failed
};

/// Greedy forward selection by AIC: repeatedly adds the candidate with the
/// largest improvement (ties broken by candidate order) until none improves.
ModelSpec forward_selection(const Dataset& data, const ModelSpec& base,
                            const std::vector<Term>& candidates,
                            const FitOptions& options = {},
                            std::vector<SelectionStep>* trace = nullptr);

}  // namespace dagfit
