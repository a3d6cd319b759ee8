#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "dagfit/dataset.hpp"
#include "dagfit/glm.hpp"
#include "dagfit/rng.hpp"
#include "dagfit/scm.hpp"

using namespace dagfit;

namespace {

// Fixed 20-row count dataset used by the likelihood-search oracle.
struct NbFixture {
    Dataset data;
    DesignMatrix design;
};

NbFixture nb_fixture() {
    Rng rng(20240815);
    std::vector<double> x;
    std::vector<std::int64_t> y;
    for (int i = 0; i < 20; ++i) {
        const double xi = -1.5 + 3.0 * i / 19.0;
        x.push_back(xi);
        y.push_back(rng.negative_binomial(std::exp(1.5 + 0.6 * xi), 2.0));
    }
    NbFixture fx;
    fx.data.add_continuous("x", x);
    fx.data.add_count("y", y);
    ModelSpec spec;
    spec.outcome = "y";
    spec.family = Family::NegativeBinomialLog;
    spec.terms = {Term::slope("x")};
    fx.design = build_design(fx.data, spec);
    return fx;
}

// Independent 3-D maximizer: coarse grid around the current best, repeatedly
// shrunk. Knows nothing about IRLS or Newton steps.
std::array<double, 3> grid_refine_oracle(const DesignMatrix& dm) {
    double b0 = 3.0, b1 = 0.0, logphi = 0.0;
    double w0 = 3.0, w1 = 2.0, wp = std::log(50.0);
    for (int round = 0; round < 60; ++round) {
        double best = -1e300;
        std::array<double, 3> arg{b0, b1, logphi};
        for (int i = -5; i <= 5; ++i) {
            for (int j = -5; j <= 5; ++j) {
                for (int k = -5; k <= 5; ++k) {
                    const double cb0 = b0 + w0 * i / 5.0;
                    const double cb1 = b1 + w1 * j / 5.0;
                    const double clp = logphi + wp * k / 5.0;
                    const double ll = nb_loglik(dm, {cb0, cb1}, std::exp(clp));
                    if (ll > best) {
                        best = ll;
                        arg = {cb0, cb1, clp};
                    }
                }
            }
        }
        b0 = arg[0];
        b1 = arg[1];
        logphi = arg[2];
        w0 *= 0.55;
        w1 *= 0.55;
        wp *= 0.55;
    }
    return {b0, b1, std::exp(logphi)};
}

Dataset simulate_nb(std::uint64_t seed, int n, double b0, double b1, double phi) {
    Rng rng(seed);
    std::vector<double> x;
    std::vector<std::int64_t> y;
    for (int i = 0; i < n; ++i) {
        const double xi = rng.normal();
        x.push_back(xi);
        y.push_back(rng.negative_binomial(std::exp(b0 + b1 * xi), phi));
    }
    Dataset data;
    data.add_continuous("x", x);
    data.add_count("y", y);
    return data;
}

ModelSpec nb_slope_spec() {
    ModelSpec spec;
    spec.outcome = "y";
    spec.family = Family::NegativeBinomialLog;
    spec.terms = {Term::slope("x")};
    return spec;
}

}  // namespace

TEST_CASE("formula grammar round-trips the standard models") {
    const ModelSpec m4 = parse_formula("rank ~ language + nickname + challenge + log(size)");
    CHECK(m4.outcome == "rank");
    CHECK(m4.family == Family::NegativeBinomialLog);
    REQUIRE(m4.terms.size() == 4);
    CHECK(m4.terms[3].kind == Term::Kind::Slope);
    CHECK(m4.terms[3].transform == Transform::Log);
    CHECK(format_formula(m4) ==
          "rank ~ language + nickname + challenge + log(size) [family=negbin]");

    const ModelSpec mid2 = parse_formula("log(size) ~ challenge + nickname [family=gaussian]");
    CHECK(mid2.outcome == "size");
    CHECK(mid2.outcome_transform == Transform::Log);
    CHECK(mid2.family == Family::GaussianIdentity);

    CHECK_THROWS_AS(parse_formula("rank ~ rank"), FitError);          // outcome as predictor
    CHECK_THROWS_AS(parse_formula("rank ~ a + a"), FitError);         // duplicate
    CHECK_THROWS_AS(parse_formula("rank + language"), FitError);      // no tilde
    CHECK_THROWS_AS(parse_formula("y ~ x [family=poisson]"), FitError);
}

TEST_CASE("encode_design uses reference coding with an alphabetic reference") {
    Dataset data;
    data.add_factor("language", {"Python", "Cpp", "Java", "Cpp"});
    data.add_count("rank", {3, 1, 2, 4});

    ModelSpec m1;
    m1.outcome = "rank";
    m1.terms = {Term::factor("language")};
    const DesignInfo info = encode_design(data, m1);
    CHECK(info.ncols == 3);  // intercept + 2 indicators
    CHECK(info.names == std::vector<std::string>{"(Intercept)", "language=Java",
                                                 "language=Python"});
    const FactorBlock& block = info.factor("language");
    CHECK(block.levels == std::vector<std::string>{"Cpp", "Java", "Python"});
    CHECK(block.column_of_level[0] == -1);  // Cpp is the reference
}

TEST_CASE("encode_design column count matches the hand count for two factors") {
    std::vector<std::string> a, b;
    std::vector<std::int64_t> y;
    Rng rng(5);
    for (int i = 0; i < 60; ++i) {
        a.push_back("a" + std::to_string(rng.next_u64() % 4));
        b.push_back("b" + std::to_string(rng.next_u64() % 3));
        y.push_back(static_cast<std::int64_t>(rng.next_u64() % 9));
    }
    Dataset data;
    data.add_factor("a", a);
    data.add_factor("b", b);
    data.add_count("y", y);
    ModelSpec spec;
    spec.outcome = "y";
    spec.terms = {Term::factor("a"), Term::factor("b")};
    CHECK(encode_design(data, spec).ncols == 1 + (4 - 1) + (3 - 1));
}

TEST_CASE("design construction errors") {
    Dataset data;
    data.add_continuous("x", {1.0, 1.0, 1.0});
    data.add_continuous("z", {-1.0, 0.5, 2.0});
    data.add_count("y", {1, 2, 3});

    ModelSpec spec;
    spec.outcome = "y";
    spec.terms = {Term::slope("x")};
    CHECK_THROWS_WITH_AS(build_design(data, spec), doctest::Contains("zero-variance"),
                         FitError);
    spec.terms = {Term::slope("missing")};
    CHECK_THROWS_AS(build_design(data, spec), DataError);
    spec.terms = {Term::slope("z", Transform::Log)};
    CHECK_THROWS_WITH_AS(build_design(data, spec), doctest::Contains("strictly positive"),
                         FitError);

    ModelSpec bad;
    bad.outcome = "x";  // continuous outcome for the count family
    bad.family = Family::NegativeBinomialLog;
    bad.terms = {Term::slope("z")};
    CHECK_THROWS_WITH_AS(build_design(data, bad), doctest::Contains("integer outcome"),
                         FitError);
}

TEST_CASE("gaussian fit reproduces an exact line with a guarded sigma") {
    Dataset data;
    data.add_continuous("x", {0.0, 1.0, 2.0});
    data.add_continuous("y", {1.0, 3.0, 5.0});
    ModelSpec spec;
    spec.outcome = "y";
    spec.family = Family::GaussianIdentity;
    spec.terms = {Term::slope("x")};
    const FitResult f = fit(data, spec);
    CHECK(f.converged);
    CHECK(f.coefficient("(Intercept)") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f.coefficient("x") == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::isfinite(f.loglik));
    REQUIRE(!f.messages.empty());
    CHECK(f.messages.front().find("guard") != std::string::npos);
}

TEST_CASE("intercept-only negative binomial on constant counts") {
    Dataset data;
    data.add_count("y", std::vector<std::int64_t>(24, 7));
    ModelSpec spec;
    spec.outcome = "y";
    spec.family = Family::NegativeBinomialLog;
    const FitResult f = fit(data, spec);
    CHECK(f.converged);
    CHECK(f.coefficient("(Intercept)") == doctest::Approx(std::log(7.0)).epsilon(1e-6));
    CHECK(std::isfinite(f.loglik));
    CHECK(f.dispersion == doctest::Approx(1e6));  // equidispersed data hits the cap
    bool warned = false;
    for (const auto& m : f.messages) {
        if (m.find("phi at upper bound") != std::string::npos) warned = true;
    }
    CHECK(warned);
}

TEST_CASE("negative binomial fit matches the grid-refinement oracle") {
    const NbFixture fx = nb_fixture();
    const FitResult f = fit(fx.data, nb_slope_spec());
    REQUIRE(f.converged);

    const auto oracle = grid_refine_oracle(fx.design);
    CHECK(std::fabs(f.coefficient("(Intercept)") - oracle[0]) < 1e-4);
    CHECK(std::fabs(f.coefficient("x") - oracle[1]) < 1e-4);
    CHECK(std::fabs(f.dispersion - oracle[2]) < 1e-4);

    // Likelihood ascent was monitored along the way.
    for (std::size_t i = 1; i < f.loglik_trace.size(); ++i) {
        CHECK(f.loglik_trace[i] >=
              f.loglik_trace[i - 1] - 1e-9 * (std::fabs(f.loglik_trace[i]) + 1.0));
    }
}

TEST_CASE("analytic score vanishes at the optimum and matches finite differences") {
    const NbFixture fx = nb_fixture();
    const FitResult f = fit(fx.data, nb_slope_spec());
    REQUIRE(f.converged);

    const auto score_at_opt = nb_score(fx.design, f.coef, f.dispersion);
    for (double s : score_at_opt) {
        CHECK(std::fabs(s) < 1e-6 * static_cast<double>(fx.design.rows));
    }

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> db(-0.5, 0.5);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<double> beta = {1.2 + db(rng), 0.4 + db(rng)};
        const double phi = std::exp(0.5 + db(rng));
        const auto analytic = nb_score(fx.design, beta, phi);

        for (std::size_t j = 0; j < 3; ++j) {
            auto eval = [&](double eps) {
                std::vector<double> b = beta;
                double p = phi;
                if (j < 2) b[j] += eps;
                else p += eps;
                return nb_loglik(fx.design, b, p);
            };
            const double h = 1e-6 * (1.0 + std::fabs(j < 2 ? beta[j] : phi));
            const double fd = (eval(h) - eval(-h)) / (2.0 * h);
            CHECK(std::fabs(analytic[j] - fd) <=
                  1e-4 * (std::fabs(analytic[j]) + std::fabs(fd) + 1e-6));
        }
    }
}

TEST_CASE("wald intervals follow the normal quantile arithmetic") {
    CHECK(interval_z(0.5) == doctest::Approx(0.67448975).epsilon(1e-6));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));

    // Forged minimal fit: one coefficient with estimate 1.0, stderr 0.1.
    FitResult f;
    f.spec.outcome = "y";
    f.design.names = {"x"};
    f.design.ncols = 1;
    f.coef = {1.0};
    f.covariance = {0.01};
    f.converged = true;
    const auto at50 = wald_intervals(f, 0.5);
    CHECK(at50[0].lower == doctest::Approx(0.93255).epsilon(1e-4));
    CHECK(at50[0].upper == doctest::Approx(1.06745).epsilon(1e-4));

    const auto at95 = wald_intervals(f, 0.95);
    CHECK(at95[0].lower < at50[0].lower);
    CHECK(at95[0].upper > at50[0].upper);

    f.converged = false;
    CHECK_THROWS_AS(wald_intervals(f, 0.5), FitError);
}

TEST_CASE("50% intervals cover the true slope about half the time") {
    int covered = 0;
    const int runs = 500;
    for (int r = 0; r < runs; ++r) {
        const Dataset data = simulate_nb(1000 + r, 200, 2.0, 0.5, 3.0);
        const FitResult f = fit(data, nb_slope_spec());
        if (!f.converged) continue;
        const auto ci = wald_intervals(f, 0.5);
        if (ci[1].lower <= 0.5 && 0.5 <= ci[1].upper) ++covered;
    }
    CHECK(covered >= static_cast<int>(runs * 0.45));
    CHECK(covered <= static_cast<int>(runs * 0.55));
}

TEST_CASE("centered effects subtract the per-factor mean") {
    // Forged fit with levels (ref, +1, +2): per-level alphas (0, 1, 2).
    FitResult f;
    f.design.names = {"(Intercept)", "lang=b", "lang=c"};
    f.design.intercept = true;
    f.design.intercept_column = 0;
    f.design.ncols = 3;
    FactorBlock block;
    block.column = "lang";
    block.levels = {"a", "b", "c"};
    block.column_of_level = {-1, 1, 2};
    f.design.factors = {block};
    f.coef = {10.0, 1.0, 2.0};
    f.covariance.assign(9, 0.0);
    f.covariance[0] = 4.0;  // intercept variance must not leak into contrasts
    f.covariance[4] = 0.04;
    f.covariance[8] = 0.04;
    f.converged = true;

    const EffectSummary summary = centered_effects(f, "lang");
    REQUIRE(summary.effects.size() == 3);
    CHECK(summary.effects[0].estimate == doctest::Approx(-1.0));
    CHECK(summary.effects[1].estimate == doctest::Approx(0.0));
    CHECK(summary.effects[2].estimate == doctest::Approx(1.0));

    double total = 0.0;
    for (const auto& e : summary.effects) {
        total += e.estimate;
        CHECK(e.lower <= e.estimate);
        CHECK(e.estimate <= e.upper);
    }
    CHECK(std::fabs(total) < 1e-10);

    // Shifting the intercept (an equivalent reparameterization of the level
    // baseline) leaves every centered effect unchanged.
    FitResult shifted = f;
    shifted.coef[0] = -3.0;
    const EffectSummary again = centered_effects(shifted, "lang");
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(again.effects[i].estimate == doctest::Approx(summary.effects[i].estimate));
        CHECK(again.effects[i].lower == doctest::Approx(summary.effects[i].lower));
    }

    CHECK_THROWS_AS(centered_effects(f, "ghost"), FitError);
}

TEST_CASE("slope effects scale linearly with the deviation") {
    const NbFixture fx = nb_fixture();
    const FitResult f = fit(fx.data, nb_slope_spec());

    const EffectEntry zero = slope_effect(f, "x", 0.0);
    CHECK(zero.estimate == 0.0);
    CHECK(zero.lower == 0.0);
    CHECK(zero.upper == 0.0);

    const EffectEntry plus = slope_effect(f, "x", 1.7);
    const EffectEntry minus = slope_effect(f, "x", -1.7);
    CHECK(plus.estimate == doctest::Approx(-minus.estimate));
    CHECK(plus.lower == doctest::Approx(-minus.upper));
    CHECK(plus.upper == doctest::Approx(-minus.lower));

    CHECK_THROWS_AS(slope_effect(f, "y", 1.0), FitError);
}

TEST_CASE("slope effect recovers an injected coefficient") {
    const Dataset data = simulate_nb(31337, 4000, 2.0, 0.5, 3.0);
    const FitResult f = fit(data, nb_slope_spec());
    const EffectEntry at2 = slope_effect(f, "x", 2.0);
    const double se = (at2.upper - at2.estimate) / interval_z(0.5);
    CHECK(std::fabs(at2.estimate - 1.0) < 3.0 * se);
}

TEST_CASE("model comparison is reflexive and validates its inputs") {
    const Dataset data = simulate_nb(7, 300, 2.0, 0.5, 3.0);
    const FitResult f = fit(data, nb_slope_spec());
    const auto ranks = compare_models({f, f});
    CHECK(ranks[0].delta_aic == 0.0);
    CHECK(ranks[1].delta_aic == 0.0);

    const Dataset other = simulate_nb(8, 300, 2.0, 0.5, 3.0);
    const FitResult g = fit(other, nb_slope_spec());
    CHECK_THROWS_AS(compare_models({f, g}), FitError);
}

TEST_CASE("AIC prefers the true model over one with a pure-noise factor") {
    std::mt19937_64 rng(2025);
    std::normal_distribution<double> noise(0.0, 1.0);
    int true_wins = 0;
    const int sims = 100;
    for (int s = 0; s < sims; ++s) {
        const int n = 5000;
        std::vector<double> x(n), y(n);
        std::vector<std::string> junk(n);
        for (int i = 0; i < n; ++i) {
            x[i] = noise(rng);
            y[i] = 1.0 + 0.5 * x[i] + noise(rng);
            junk[i] = "g" + std::to_string(rng() % 10);
        }
        Dataset data;
        data.add_continuous("x", x);
        data.add_continuous("y", y);
        data.add_factor("junk", junk);

        ModelSpec truth;
        truth.outcome = "y";
        truth.family = Family::GaussianIdentity;
        truth.terms = {Term::slope("x")};
        ModelSpec padded = truth;
        padded.terms.push_back(Term::factor("junk"));

        if (fit(data, truth).aic < fit(data, padded).aic) ++true_wins;
    }
    CHECK(true_wins >= 90);
}

TEST_CASE("forward selection stops when nothing improves") {
    const Dataset data = simulate_nb(11, 500, 2.0, 0.0, 3.0);  // x is pure noise
    ModelSpec base;
    base.outcome = "y";
    base.family = Family::NegativeBinomialLog;
    std::vector<SelectionStep> trace;
    const ModelSpec chosen = forward_selection(data, base, {Term::slope("x")}, {}, &trace);
    CHECK(chosen.terms.empty());

    CHECK_THROWS_AS(forward_selection(data, nb_slope_spec(), {Term::slope("x")}, {}, nullptr),
                    FitError);  // candidate already in base
}

TEST_CASE("forward selection adds the informative candidate first") {
    std::mt19937_64 seed_gen(424242);
    int informative_first = 0;
    const int sims = 100;
    for (int s = 0; s < sims; ++s) {
        Rng rng(seed_gen());
        const int n = 400;
        std::vector<double> x(n), w(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = rng.normal();
            w[i] = rng.normal();
            y[i] = 0.5 + 0.8 * x[i] + rng.normal();
        }
        Dataset data;
        data.add_continuous("x", x);
        data.add_continuous("w", w);
        data.add_continuous("y", y);
        ModelSpec base;
        base.outcome = "y";
        base.family = Family::GaussianIdentity;
        std::vector<SelectionStep> trace;
        forward_selection(data, base, {Term::slope("w"), Term::slope("x")}, {}, &trace);
        if (!trace.empty() && trace.front().added == "x") ++informative_first;
    }
    CHECK(informative_first >= 90);
}

TEST_CASE("forward selection on synthetic contest data reaches the full model") {
    CodeJamParams params;
    const Dataset data = sample(codejam_scm(params), 8000, 2024);
    ModelSpec base;
    base.outcome = "rank";
    base.family = Family::NegativeBinomialLog;
    base.terms = {Term::factor("language")};
    const std::vector<Term> candidates = {Term::factor("nickname"), Term::factor("challenge"),
                                          Term::slope("size", Transform::Log)};
    std::vector<SelectionStep> trace;
    const ModelSpec chosen = forward_selection(data, base, candidates, {}, &trace);
    CHECK(chosen.terms.size() == 4);  // all three candidates accepted
}

TEST_CASE("adding a term never lowers the maximized log-likelihood") {
    const Dataset data = simulate_nb(55, 600, 2.0, 0.3, 2.0);
    ModelSpec small;
    small.outcome = "y";
    small.family = Family::NegativeBinomialLog;
    ModelSpec big = small;
    big.terms = {Term::slope("x")};
    CHECK(fit(data, big).loglik >= fit(data, small).loglik - 1e-6);

    ModelSpec gs = small;
    gs.family = Family::GaussianIdentity;
    ModelSpec gb = big;
    gb.family = Family::GaussianIdentity;
    CHECK(fit(data, gb).loglik >= fit(data, gs).loglik - 1e-6);
}

TEST_CASE("rescaling a slope column rescales only its coefficient") {
    const Dataset data = simulate_nb(77, 400, 2.0, 0.5, 3.0);
    const FitResult f = fit(data, nb_slope_spec());

    const double c = 3.7;
    std::vector<double> scaled;
    for (std::size_t i = 0; i < data.row_count(); ++i) {
        scaled.push_back(data.column("x").values[i] * c);
    }
    Dataset data2;
    data2.add_continuous("x", scaled);
    data2.add_count("y", data.column("y").counts);
    const FitResult g = fit(data2, nb_slope_spec());

    CHECK(std::fabs(g.coefficient("x") - f.coefficient("x") / c) < 1e-8);
    CHECK(std::fabs(g.loglik - f.loglik) < 1e-8 * (std::fabs(f.loglik) + 1.0));
    CHECK(std::fabs(g.aic - f.aic) < 1e-6);
}

TEST_CASE("gaussian fit solves the normal equations") {
    Rng rng(99);
    const int n = 250;
    std::vector<double> x1(n), x2(n), y(n);
    for (int i = 0; i < n; ++i) {
        x1[i] = rng.normal();
        x2[i] = rng.normal(0.0, 2.0);
        y[i] = 1.0 + 0.3 * x1[i] - 0.7 * x2[i] + rng.normal();
    }
    Dataset data;
    data.add_continuous("x1", x1);
    data.add_continuous("x2", x2);
    data.add_continuous("y", y);
    ModelSpec spec;
    spec.outcome = "y";
    spec.family = Family::GaussianIdentity;
    spec.terms = {Term::slope("x1"), Term::slope("x2")};
    const FitResult f = fit(data, spec);

    // Direct 3x3 normal-equations solve by Gaussian elimination.
    double a[3][3] = {}, b[3] = {};
    for (int i = 0; i < n; ++i) {
        const double row[3] = {1.0, x1[i], x2[i]};
        for (int p = 0; p < 3; ++p) {
            b[p] += row[p] * y[i];
            for (int q = 0; q < 3; ++q) a[p][q] += row[p] * row[q];
        }
    }
    for (int p = 0; p < 3; ++p) {
        const double piv = a[p][p];
        for (int q = p; q < 3; ++q) a[p][q] /= piv;
        b[p] /= piv;
        for (int r = 0; r < 3; ++r) {
            if (r == p) continue;
            const double m = a[r][p];
            for (int q = p; q < 3; ++q) a[r][q] -= m * a[p][q];
            b[r] -= m * b[p];
        }
    }
    CHECK(std::fabs(f.coef[0] - b[0]) < 1e-10);
    CHECK(std::fabs(f.coef[1] - b[1]) < 1e-10);
    CHECK(std::fabs(f.coef[2] - b[2]) < 1e-10);
}

TEST_CASE("singular designs are rejected with the offending columns named") {
    std::vector<std::string> a = {"u", "v", "u", "v", "u", "v"};
    Dataset data;
    data.add_factor("a", a);
    data.add_factor("b", a);  // perfectly aliased copy
    data.add_count("y", {1, 2, 3, 4, 5, 6});
    ModelSpec spec;
    spec.outcome = "y";
    spec.terms = {Term::factor("a"), Term::factor("b")};
    CHECK_THROWS_WITH_AS(fit(data, spec), doctest::Contains("aliased"), FitError);
}

TEST_CASE("too few rows for the parameter count is an error") {
    Dataset data;
    data.add_continuous("x", {1.0, 2.0});
    data.add_count("y", {1, 2});
    CHECK_THROWS_WITH_AS(fit(data, nb_slope_spec()), doctest::Contains("rows"), FitError);
}
