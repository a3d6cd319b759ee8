#include "dagfit/glm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace dagfit {

namespace {

constexpr double kEtaBound = 40.0;  // |log mean| beyond this means separation

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// digamma via shift-up recurrence plus asymptotic expansion.
double digamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return result;
}

double trigamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += inv * (1.0 + 0.5 * inv +
                     inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0))));
    return result;
}

}  // namespace

void ModelSpec::validate() const {
    std::set<std::string> seen;
    for (const auto& t : terms) {
        if (t.column == outcome) {
            throw FitError("outcome column also appears as predictor: " + t.column);
        }
        if (!seen.insert(t.column).second) {
            throw FitError("column referenced more than once: " + t.column);
        }
    }
}

ModelSpec parse_formula(const std::string& text) {
    std::string body = trim(text);
    ModelSpec spec;

    if (auto open = body.find('['); open != std::string::npos) {
        const auto close = body.find(']', open);
        if (close == std::string::npos) throw FitError("unterminated '[' in formula");
        std::string opts = trim(body.substr(open + 1, close - open - 1));
        body = trim(body.substr(0, open));
        const auto eq = opts.find('=');
        if (eq == std::string::npos || trim(opts.substr(0, eq)) != "family") {
            throw FitError("expected [family=...] in formula options");
        }
        const std::string fam = trim(opts.substr(eq + 1));
        if (fam == "negbin") spec.family = Family::NegativeBinomialLog;
        else if (fam == "gaussian") spec.family = Family::GaussianIdentity;
        else throw FitError("unknown family: " + fam);
    }

    const auto tilde = body.find('~');
    if (tilde == std::string::npos) throw FitError("formula needs '~'");

    auto parse_atom = [](const std::string& raw, std::string& name, Transform& tf,
                         bool& explicit_slope) {
        std::string s = trim(raw);
        tf = Transform::Identity;
        explicit_slope = false;
        for (const char* prefix : {"log(", "slope("}) {
            const std::size_t plen = std::string(prefix).size();
            if (s.rfind(prefix, 0) == 0 && s.back() == ')') {
                name = trim(s.substr(plen, s.size() - plen - 1));
                tf = (prefix[0] == 'l') ? Transform::Log : Transform::Identity;
                explicit_slope = true;
                return;
            }
        }
        name = s;
    };

    {
        std::string name;
        Transform tf;
        bool is_slope;
        parse_atom(body.substr(0, tilde), name, tf, is_slope);
        if (name.empty()) throw FitError("formula has empty outcome");
        spec.outcome = name;
        spec.outcome_transform = tf;
    }

    std::string rhs = trim(body.substr(tilde + 1));
    if (rhs.empty()) throw FitError("formula has empty predictor list");
    std::size_t pos = 0;
    bool first = true;
    while (pos <= rhs.size()) {
        auto plus = rhs.find('+', pos);
        std::string piece = trim(rhs.substr(pos, plus == std::string::npos ? std::string::npos
                                                                           : plus - pos));
        pos = plus == std::string::npos ? rhs.size() + 1 : plus + 1;
        if (piece == "1" || (first && piece == "0")) {
            if (piece == "0") spec.include_intercept = false;
            first = false;
            continue;
        }
        if (piece.empty()) throw FitError("empty term in formula");
        std::string name;
        Transform tf;
        bool is_slope;
        parse_atom(piece, name, tf, is_slope);
        if (name.empty()) throw FitError("empty term in formula");
        spec.terms.push_back(is_slope ? Term::slope(name, tf) : Term::factor(name));
        first = false;
    }
    spec.validate();
    return spec;
}

std::string format_formula(const ModelSpec& spec) {
    std::ostringstream out;
    if (spec.outcome_transform == Transform::Log) out << "log(" << spec.outcome << ")";
    else out << spec.outcome;
    out << " ~ ";
    if (!spec.include_intercept) out << "0 + ";
    for (std::size_t i = 0; i < spec.terms.size(); ++i) {
        if (i > 0) out << " + ";
        const Term& t = spec.terms[i];
        if (t.kind == Term::Kind::FactorIntercepts) out << t.column;
        else if (t.transform == Transform::Log) out << "log(" << t.column << ")";
        else out << "slope(" << t.column << ")";
    }
    out << " [family="
        << (spec.family == Family::NegativeBinomialLog ? "negbin" : "gaussian") << "]";
    return out.str();
}

const FactorBlock& DesignInfo::factor(const std::string& column) const {
    for (const auto& f : factors) {
        if (f.column == column) return f;
    }
    throw FitError("factor not in design: " + column);
}

std::vector<int> DesignInfo::term_columns(const std::string& column) const {
    for (const auto& f : factors) {
        if (f.column == column) {
            std::vector<int> out;
            for (int c : f.column_of_level) {
                if (c >= 0) out.push_back(c);
            }
            return out;
        }
    }
    for (const auto& s : slopes) {
        if (s.column == column) return {s.column_index};
    }
    throw FitError("term not in design: " + column);
}

DesignMatrix build_design(const Dataset& data, const ModelSpec& spec) {
    spec.validate();
    DesignMatrix dm;
    dm.rows = data.row_count();
    if (dm.rows == 0) throw FitError("empty dataset");

    DesignInfo& info = dm.info;
    info.intercept = spec.include_intercept;
    int next = 0;
    if (info.intercept) {
        info.intercept_column = next++;
        info.names.push_back("(Intercept)");
    }

    for (const auto& t : spec.terms) {
        const Column& col = data.column(t.column);  // throws when missing
        if (t.kind == Term::Kind::FactorIntercepts) {
            if (col.cls != ColumnClass::Factor) {
                throw FitError("factor term on non-factor column: " + t.column);
            }
            FactorBlock block;
            block.column = t.column;
            block.levels = col.levels;
            block.reference = 0;  // levels are sorted; alphabetically first is dropped
            block.column_of_level.assign(block.levels.size(), -1);
            for (std::size_t l = 1; l < block.levels.size(); ++l) {
                block.column_of_level[l] = next;
                info.names.push_back(t.column + "=" + block.levels[l]);
                ++next;
            }
            info.factors.push_back(std::move(block));
        } else {
            if (col.cls == ColumnClass::Factor) {
                throw FitError("slope term on factor column: " + t.column);
            }
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < dm.rows; ++i) {
                const double v = col.as_double(i);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (t.transform == Transform::Log && lo <= 0.0) {
                throw FitError("log transform needs strictly positive column: " + t.column);
            }
            if (hi == lo) throw FitError("zero-variance slope column: " + t.column);
            SlopeBlock block;
            block.column = t.column;
            block.transform = t.transform;
            block.column_index = next;
            info.names.push_back(t.transform == Transform::Log ? "log(" + t.column + ")"
                                                               : t.column);
            ++next;
            info.slopes.push_back(std::move(block));
        }
    }
    info.ncols = next;

    // Outcome extraction.
    const Column& yc = data.column(spec.outcome);
    dm.outcome.resize(dm.rows);
    if (spec.family == Family::NegativeBinomialLog) {
        if (spec.outcome_transform != Transform::Identity) {
            throw FitError("count-family outcome takes no transform");
        }
        if (yc.cls == ColumnClass::Continuous) {
            throw FitError("count family needs an integer outcome: " + spec.outcome);
        }
        for (std::size_t i = 0; i < dm.rows; ++i) {
            const double v = yc.as_double(i);
            if (v < 0) throw FitError("negative outcome for count family: " + spec.outcome);
            dm.outcome[i] = v;
        }
    } else {
        for (std::size_t i = 0; i < dm.rows; ++i) {
            double v = yc.as_double(i);
            if (spec.outcome_transform == Transform::Log) {
                if (v <= 0.0) {
                    throw FitError("log transform needs strictly positive column: " +
                                   spec.outcome);
                }
                v = std::log(v);
            }
            dm.outcome[i] = v;
        }
    }

    // Row-sparse design entries.
    dm.row_offsets.assign(dm.rows + 1, 0);
    std::vector<const Column*> factor_cols, slope_cols;
    for (const auto& f : info.factors) factor_cols.push_back(&data.column(f.column));
    for (const auto& s : info.slopes) slope_cols.push_back(&data.column(s.column));
    for (std::size_t i = 0; i < dm.rows; ++i) {
        if (info.intercept) {
            dm.cols.push_back(info.intercept_column);
            dm.vals.push_back(1.0);
        }
        for (std::size_t f = 0; f < info.factors.size(); ++f) {
            const int design_col = info.factors[f].column_of_level[factor_cols[f]->codes[i]];
            if (design_col >= 0) {
                dm.cols.push_back(design_col);
                dm.vals.push_back(1.0);
            }
        }
        for (std::size_t s = 0; s < info.slopes.size(); ++s) {
            double v = slope_cols[s]->as_double(i);
            if (info.slopes[s].transform == Transform::Log) v = std::log(v);
            dm.cols.push_back(info.slopes[s].column_index);
            dm.vals.push_back(v);
        }
        dm.row_offsets[i + 1] = static_cast<int>(dm.cols.size());
    }
    return dm;
}

DesignInfo encode_design(const Dataset& data, const ModelSpec& spec) {
    return build_design(data, spec).info;
}

namespace {

std::vector<double> linear_predictor(const DesignMatrix& dm, const std::vector<double>& beta) {
    std::vector<double> eta(dm.rows, 0.0);
    for (std::size_t i = 0; i < dm.rows; ++i) {
        double e = 0.0;
        for (int k = dm.row_offsets[i]; k < dm.row_offsets[i + 1]; ++k) {
            e += dm.vals[k] * beta[dm.cols[k]];
        }
        eta[i] = e;
    }
    return eta;
}

// Rejects rank-deficient designs up front, naming the aliased columns.
void check_design_rank(const DesignMatrix& dm) {
    const int k = dm.info.ncols;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t i = 0; i < dm.rows; ++i) {
        for (int a = dm.row_offsets[i]; a < dm.row_offsets[i + 1]; ++a) {
            for (int b = dm.row_offsets[i]; b < dm.row_offsets[i + 1]; ++b) {
                gram(dm.cols[a], dm.cols[b]) += dm.vals[a] * dm.vals[b];
            }
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) {
        const auto perm = qr.colsPermutation().indices();
        std::string aliased;
        for (int j = qr.rank(); j < k; ++j) {
            if (!aliased.empty()) aliased += ", ";
            aliased += dm.info.names[perm[j]];
        }
        throw FitError("singular design; aliased columns: " + aliased);
    }
}

}  // namespace

double nb_loglik(const DesignMatrix& dm, const std::vector<double>& beta, double phi) {
    const auto eta = linear_predictor(dm, beta);
    double ll = 0.0;
    for (std::size_t i = 0; i < dm.rows; ++i) {
        const double y = dm.outcome[i];
        const double lambda = std::exp(eta[i]);
        ll += std::lgamma(y + phi) - std::lgamma(phi) - std::lgamma(y + 1.0) +
              phi * std::log(phi) + y * eta[i] - (y + phi) * std::log(phi + lambda);
    }
    return ll;
}

std::vector<double> nb_score(const DesignMatrix& dm, const std::vector<double>& beta,
                             double phi) {
    const auto eta = linear_predictor(dm, beta);
    std::vector<double> score(beta.size() + 1, 0.0);
    for (std::size_t i = 0; i < dm.rows; ++i) {
        const double y = dm.outcome[i];
        const double lambda = std::exp(eta[i]);
        const double deta = (y - lambda) * phi / (phi + lambda);
        for (int k = dm.row_offsets[i]; k < dm.row_offsets[i + 1]; ++k) {
            score[dm.cols[k]] += dm.vals[k] * deta;
        }
        score[beta.size()] += digamma(y + phi) - digamma(phi) + std::log(phi) + 1.0 -
                              std::log(phi + lambda) - (y + phi) / (phi + lambda);
    }
    return score;
}

namespace {

double gaussian_loglik(std::size_t n, double rss, double sigma2) {
    constexpr double two_pi = 6.283185307179586;
    return -0.5 * static_cast<double>(n) *
           (std::log(two_pi * sigma2) + rss / (static_cast<double>(n) * sigma2));
}

FitResult fit_gaussian(const ModelSpec& spec, const DesignMatrix& dm) {
    const int k = dm.info.ncols;
    const std::size_t n = dm.rows;
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (int a = dm.row_offsets[i]; a < dm.row_offsets[i + 1]; ++a) {
            xty(dm.cols[a]) += dm.vals[a] * dm.outcome[i];
            for (int b = dm.row_offsets[i]; b < dm.row_offsets[i + 1]; ++b) {
                xtx(dm.cols[a], dm.cols[b]) += dm.vals[a] * dm.vals[b];
            }
        }
    }
    const Eigen::VectorXd beta = xtx.ldlt().solve(xty);

    FitResult out;
    out.spec = spec;
    out.design = dm.info;
    out.coef.assign(beta.data(), beta.data() + k);

    double rss = 0.0;
    const auto eta = linear_predictor(dm, out.coef);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = dm.outcome[i] - eta[i];
        rss += r * r;
    }
    double sigma2 = rss / static_cast<double>(n);  // ML estimate
    if (sigma2 < 1e-12) {
        sigma2 = 1e-12;
        out.messages.push_back("residual variance at lower guard");
    }
    out.dispersion = std::sqrt(sigma2);
    out.dispersion_se = out.dispersion / std::sqrt(2.0 * static_cast<double>(n));
    out.loglik = gaussian_loglik(n, rss, sigma2);
    out.k_free = k + 1;
    out.aic = 2.0 * out.k_free - 2.0 * out.loglik;
    out.iterations = 1;
    out.converged = true;

    const Eigen::MatrixXd cov = sigma2 * xtx.inverse();
    out.covariance.assign(cov.data(), cov.data() + static_cast<std::size_t>(k) * k);
    // Eigen stores column-major; covariance is symmetric so the layout matches.
    return out;
}

struct NbWork {
    const DesignMatrix& dm;
    std::vector<double> eta;
    std::vector<double> lambda;

    explicit NbWork(const DesignMatrix& d) : dm(d), eta(d.rows, 0.0), lambda(d.rows, 1.0) {}

    void refresh(const std::vector<double>& beta) {
        eta = linear_predictor(dm, beta);
        for (std::size_t i = 0; i < dm.rows; ++i) {
            if (std::fabs(eta[i]) > kEtaBound) {
                throw FitError("linear predictor diverged (separation suspected)");
            }
            lambda[i] = std::exp(eta[i]);
        }
    }

    double loglik(double phi) const {
        double ll = 0.0;
        for (std::size_t i = 0; i < dm.rows; ++i) {
            const double y = dm.outcome[i];
            ll += std::lgamma(y + phi) - std::lgamma(phi) - std::lgamma(y + 1.0) +
                  phi * std::log(phi) + y * eta[i] - (y + phi) * std::log(phi + lambda[i]);
        }
        return ll;
    }
};

FitResult fit_negbin(const ModelSpec& spec, const DesignMatrix& dm,
                     const FitOptions& opt) {
    const int k = dm.info.ncols;
    const std::size_t n = dm.rows;

    // Start from least squares on log(y + 0.5).
    std::vector<double> beta(k, 0.0);
    {
        Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd xtz = Eigen::VectorXd::Zero(k);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = std::log(dm.outcome[i] + 0.5);
            for (int a = dm.row_offsets[i]; a < dm.row_offsets[i + 1]; ++a) {
                xtz(dm.cols[a]) += dm.vals[a] * z;
                for (int b = dm.row_offsets[i]; b < dm.row_offsets[i + 1]; ++b) {
                    xtx(dm.cols[a], dm.cols[b]) += dm.vals[a] * dm.vals[b];
                }
            }
        }
        const Eigen::VectorXd b = xtx.ldlt().solve(xtz);
        for (int j = 0; j < k; ++j) beta[j] = b(j);
    }

    NbWork work(dm);
    work.refresh(beta);

    // Moment start for phi from Pearson-style residuals.
    double phi;
    {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = dm.outcome[i] - work.lambda[i];
            num += r * r - work.lambda[i];
            den += work.lambda[i] * work.lambda[i];
        }
        const double alpha = num / std::max(den, 1e-12);
        phi = alpha > 1e-8 ? 1.0 / alpha : opt.phi_max;
        phi = std::clamp(phi, opt.phi_min, opt.phi_max);
    }

    FitResult out;
    out.spec = spec;
    out.design = dm.info;

    double ll = work.loglik(phi);
    out.loglik_trace.push_back(ll);
    bool converged = false;
    int iter = 0;
    bool phi_high = false, phi_low = false;

    for (iter = 1; iter <= opt.max_outer_iterations; ++iter) {
        // IRLS proposal for the coefficients at fixed phi.
        Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd xtwz = Eigen::VectorXd::Zero(k);
        for (std::size_t i = 0; i < n; ++i) {
            const double lam = work.lambda[i];
            const double w = lam * phi / (phi + lam);
            const double z = work.eta[i] + (dm.outcome[i] - lam) / lam;
            for (int a = dm.row_offsets[i]; a < dm.row_offsets[i + 1]; ++a) {
                xtwz(dm.cols[a]) += dm.vals[a] * w * z;
                for (int b = dm.row_offsets[i]; b < dm.row_offsets[i + 1]; ++b) {
                    xtwx(dm.cols[a], dm.cols[b]) += dm.vals[a] * w * dm.vals[b];
                }
            }
        }
        const Eigen::VectorXd proposal = xtwx.ldlt().solve(xtwz);

        // Step-halve towards the proposal until the likelihood does not drop.
        std::vector<double> beta_old = beta;
        double step = 1.0;
        double ll_new = ll;
        for (int h = 0; h < 40; ++h) {
            for (int j = 0; j < k; ++j) {
                beta[j] = beta_old[j] + step * (proposal(j) - beta_old[j]);
            }
            work.refresh(beta);
            ll_new = work.loglik(phi);
            if (ll_new >= ll - 1e-12 * (std::fabs(ll) + 1.0)) break;
            step *= 0.5;
            ll_new = ll;
        }
        if (ll_new <= ll - 1e-12 * (std::fabs(ll) + 1.0)) {
            beta = beta_old;
            work.refresh(beta);
            ll_new = ll;
        }
        ll = ll_new;

        // Safeguarded Newton step for phi on the log scale.
        {
            double dphi = 0.0, d2phi = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double y = dm.outcome[i];
                const double lam = work.lambda[i];
                dphi += digamma(y + phi) - digamma(phi) + std::log(phi) + 1.0 -
                        std::log(phi + lam) - (y + phi) / (phi + lam);
                d2phi += trigamma(y + phi) - trigamma(phi) + 1.0 / phi - 2.0 / (phi + lam) +
                         (y + phi) / ((phi + lam) * (phi + lam));
            }
            const double s = std::log(phi);
            const double ds = phi * dphi;                    // d ll / d log phi
            const double d2s = phi * phi * d2phi + phi * dphi;
            double step_s = (d2s < 0.0) ? -ds / d2s : (ds > 0 ? 0.5 : -0.5);
            step_s = std::clamp(step_s, -2.0, 2.0);
            const double phi_old = phi;
            double ll_phi = ll;
            for (int h = 0; h < 40; ++h) {
                phi = std::clamp(std::exp(s + step_s), opt.phi_min, opt.phi_max);
                ll_phi = work.loglik(phi);
                if (ll_phi >= ll - 1e-12 * (std::fabs(ll) + 1.0)) break;
                step_s *= 0.5;
                ll_phi = ll;
            }
            if (ll_phi <= ll - 1e-12 * (std::fabs(ll) + 1.0)) {
                phi = phi_old;
                ll_phi = ll;
            }
            ll = std::max(ll, ll_phi);
        }

        out.loglik_trace.push_back(ll);
        const double prev = out.loglik_trace[out.loglik_trace.size() - 2];
        if (std::fabs(ll - prev) < opt.rel_tol * (std::fabs(ll) + 1.0)) {
            converged = true;
            break;
        }
    }
    phi_high = phi >= opt.phi_max * (1.0 - 1e-9);
    phi_low = phi <= opt.phi_min * (1.0 + 1e-9);

    out.coef = beta;
    out.dispersion = phi;
    out.loglik = ll;
    out.k_free = k + 1;
    out.aic = 2.0 * out.k_free - 2.0 * out.loglik;
    out.iterations = std::min(iter, opt.max_outer_iterations);
    out.converged = converged;
    if (!converged) out.messages.push_back("reached iteration limit before tolerance");
    if (phi_high) out.messages.push_back("phi at upper bound (data near equidispersion)");
    if (phi_low) out.messages.push_back("phi at lower bound");

    // Covariance: invert the joint observed information in (beta, log phi),
    // then keep the coefficient block. The log-phi block is dropped when phi
    // sits on its bound (the information there is meaningless).
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = dm.outcome[i];
        const double lam = work.lambda[i];
        const double denom = (phi + lam) * (phi + lam);
        const double hbb = phi * lam * (phi + y) / denom;  // -d2 ll / d eta2
        const double hbp = (y - lam) * lam / denom;        // d2 ll / d eta d phi
        for (int a = dm.row_offsets[i]; a < dm.row_offsets[i + 1]; ++a) {
            for (int b = dm.row_offsets[i]; b < dm.row_offsets[i + 1]; ++b) {
                info(dm.cols[a], dm.cols[b]) += dm.vals[a] * hbb * dm.vals[b];
            }
            info(dm.cols[a], k) -= dm.vals[a] * hbp * phi;  // chain rule to log phi
            info(k, dm.cols[a]) -= dm.vals[a] * hbp * phi;
        }
        const double d2phi = trigamma(y + phi) - trigamma(phi) + 1.0 / phi -
                             2.0 / (phi + lam) + (y + phi) / denom;
        const double dphi = digamma(y + phi) - digamma(phi) + std::log(phi) + 1.0 -
                            std::log(phi + lam) - (y + phi) / (phi + lam);
        info(k, k) -= phi * phi * d2phi + phi * dphi;
    }
    out.covariance.assign(static_cast<std::size_t>(k) * k, 0.0);
    if (phi_high || phi_low) {
        const Eigen::MatrixXd cov = info.topLeftCorner(k, k).inverse();
        for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) out.covariance[a * static_cast<std::size_t>(k) + b] = cov(a, b);
        }
        out.dispersion_se = 0.0;
    } else {
        const Eigen::MatrixXd cov = info.inverse();
        for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) out.covariance[a * static_cast<std::size_t>(k) + b] = cov(a, b);
        }
        // Var(log phi) back to Var(phi) by the delta method.
        out.dispersion_se = std::sqrt(std::max(0.0, cov(k, k))) * phi;
    }
    return out;
}

}  // namespace

FitResult fit(const Dataset& data, const ModelSpec& spec, const FitOptions& options) {
    const DesignMatrix dm = build_design(data, spec);
    if (dm.rows < static_cast<std::size_t>(dm.info.ncols) + 1) {
        throw FitError("need more rows than coefficients (" +
                       std::to_string(dm.info.ncols + 1) + "), got " +
                       std::to_string(dm.rows));
    }
    check_design_rank(dm);

    FitResult out = spec.family == Family::GaussianIdentity
                        ? fit_gaussian(spec, dm)
                        : fit_negbin(spec, dm, options);
    out.n_rows = dm.rows;
    out.outcome_name = (spec.outcome_transform == Transform::Log ? "log(" + spec.outcome + ")"
                                                                 : spec.outcome);
    out.outcome_checksum = std::accumulate(dm.outcome.begin(), dm.outcome.end(), 0.0);
    return out;
}

double FitResult::coefficient(const std::string& name) const {
    for (std::size_t i = 0; i < design.names.size(); ++i) {
        if (design.names[i] == name) return coef[i];
    }
    throw FitError("no coefficient named " + name);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw FitError("quantile probability must be in (0,1)");
    // Acklam's rational approximation, |relative error| < 1.2e-9.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double interval_z(double level) {
    if (!(level > 0.0 && level < 1.0)) throw FitError("interval level must be in (0,1)");
    return normal_quantile(0.5 + level / 2.0);
}

std::vector<CoefInterval> wald_intervals(const FitResult& fit, double level) {
    if (!fit.converged) throw FitError("intervals need a converged fit");
    const double z = interval_z(level);
    std::vector<CoefInterval> out;
    for (std::size_t i = 0; i < fit.coef.size(); ++i) {
        const double var = fit.cov(static_cast<int>(i), static_cast<int>(i));
        if (!(var >= 0.0) || !std::isfinite(var)) {
            throw FitError("covariance is not positive semi-definite");
        }
        CoefInterval ci;
        ci.name = fit.design.names[i];
        ci.estimate = fit.coef[i];
        ci.stderr_ = std::sqrt(var);
        ci.lower = ci.estimate - z * ci.stderr_;
        ci.upper = ci.estimate + z * ci.stderr_;
        out.push_back(std::move(ci));
    }
    return out;
}

EffectSummary centered_effects(const FitResult& fit, const std::string& factor, double level) {
    const FactorBlock& block = fit.design.factor(factor);  // throws when absent
    const int nlevels = static_cast<int>(block.levels.size());
    const double z = interval_z(level);

    // Per-level alpha: 0 for the reference, fitted coefficient otherwise.
    std::vector<double> alpha(nlevels, 0.0);
    for (int l = 0; l < nlevels; ++l) {
        if (block.column_of_level[l] >= 0) alpha[l] = fit.coef[block.column_of_level[l]];
    }
    const double mean = std::accumulate(alpha.begin(), alpha.end(), 0.0) / nlevels;

    EffectSummary out;
    out.factor = factor;
    out.level_prob = level;
    for (int l = 0; l < nlevels; ++l) {
        // Contrast over the factor's design columns: delta_l = alpha_l - mean.
        double var = 0.0;
        std::vector<std::pair<int, double>> contrast;
        for (int m = 0; m < nlevels; ++m) {
            const int col = block.column_of_level[m];
            if (col < 0) continue;
            double w = -1.0 / nlevels;
            if (m == l) w += 1.0;
            contrast.emplace_back(col, w);
        }
        for (const auto& [ca, wa] : contrast) {
            for (const auto& [cb, wb] : contrast) {
                var += wa * fit.cov(ca, cb) * wb;
            }
        }
        var = std::max(var, 0.0);
        EffectEntry e;
        e.level = block.levels[l];
        e.estimate = alpha[l] - mean;
        e.lower = e.estimate - z * std::sqrt(var);
        e.upper = e.estimate + z * std::sqrt(var);
        out.effects.push_back(std::move(e));
    }
    return out;
}

EffectEntry slope_effect(const FitResult& fit, const std::string& column, double s,
                         double level) {
    const SlopeBlock* slope = nullptr;
    for (const auto& b : fit.design.slopes) {
        if (b.column == column) slope = &b;
    }
    if (!slope) throw FitError("column not fitted as slope: " + column);
    const double z = interval_z(level);
    const double beta = fit.coef[slope->column_index];
    const double se = std::sqrt(std::max(0.0, fit.cov(slope->column_index, slope->column_index)));
    EffectEntry out;
    out.level = column;
    out.estimate = beta * s;
    out.lower = out.estimate - z * std::fabs(s) * se;
    out.upper = out.estimate + z * std::fabs(s) * se;
    return out;
}

std::vector<ModelRank> compare_models(const std::vector<FitResult>& fits) {
    if (fits.empty()) throw FitError("nothing to compare");
    for (const auto& f : fits) {
        if (f.n_rows != fits.front().n_rows || f.outcome_name != fits.front().outcome_name ||
            std::fabs(f.outcome_checksum - fits.front().outcome_checksum) >
                1e-8 * (std::fabs(fits.front().outcome_checksum) + 1.0)) {
            throw FitError("model comparison requires the same dataset and outcome");
        }
    }
    std::vector<ModelRank> out(fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) {
        out[i].index = static_cast<int>(i);
        out[i].aic = fits[i].aic;
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ModelRank& a, const ModelRank& b) { return a.aic < b.aic; });
    for (auto& r : out) r.delta_aic = r.aic - out.front().aic;
    return out;
}

ModelSpec forward_selection(const Dataset& data, const ModelSpec& base,
                            const std::vector<Term>& candidates, const FitOptions& options,
                            std::vector<SelectionStep>* trace) {
    for (const auto& c : candidates) {
        for (const auto& t : base.terms) {
            if (t.column == c.column) {
                throw FitError("candidate already in base model: " + c.column);
            }
        }
    }

    ModelSpec current = base;
    std::vector<Term> remaining = candidates;
    double current_aic = fit(data, current, options).aic;

    while (!remaining.empty()) {
        SelectionStep step;
        step.aic_before = current_aic;
        int best = -1;
        double best_aic = current_aic;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            ModelSpec candidate = current;
            candidate.terms.push_back(remaining[i]);
            double aic;
            try {
                const FitResult f = fit(data, candidate, options);
                if (!f.converged) {
                    step.skipped.push_back(remaining[i].column);
                    continue;
                }
                aic = f.aic;
            } catch (const FitError&) {
                step.skipped.push_back(remaining[i].column);
                continue;
            }
            if (aic < best_aic) {  // strict improvement; first winner kept on ties
                best_aic = aic;
                best = static_cast<int>(i);
            }
        }
        if (best < 0) {
            if (trace && !step.skipped.empty()) trace->push_back(step);
            break;
        }
        current.terms.push_back(remaining[best]);
        remaining.erase(remaining.begin() + best);
        current_aic = best_aic;
        step.added = current.terms.back().column;
        step.aic_after = best_aic;
        if (trace) trace->push_back(step);
    }
    return current;
}

}  // namespace dagfit
