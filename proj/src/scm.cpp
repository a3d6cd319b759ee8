#include "dagfit/scm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dagfit/rng.hpp"

namespace dagfit {

Mechanism Mechanism::deterministic(double value) {
    Mechanism m;
    m.kind = MechKind::Deterministic;
    m.baseline = value;
    return m;
}

Mechanism Mechanism::point_mass_level(const std::vector<std::string>& levels,
                                      const std::string& level) {
    auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) throw ScmError("point mass on unknown level: " + level);
    Mechanism m;
    m.kind = MechKind::CategoricalLogit;
    m.levels = levels;
    // Keeps the full level set so downstream factor contributions still
    // index consistently; non-assigned levels get probability zero.
    m.level_logits.assign(levels.size(), -1e9);
    m.level_logits[it - levels.begin()] = 0.0;
    return m;
}

namespace {

void validate_mechanism(const Dag& dag, int node, const Mechanism& m) {
    const std::string& name = dag.node_name(node);
    std::vector<std::string> parents;
    for (int p : dag.parents(node)) parents.push_back(dag.node_name(p));
    std::sort(parents.begin(), parents.end());

    std::vector<std::string> referenced;
    if (m.is_categorical()) {
        if (m.levels.size() < 2) {
            throw ScmError("categorical mechanism on " + name + " needs >= 2 levels");
        }
        for (double l : m.level_logits) {
            if (!std::isfinite(l)) throw ScmError("non-finite logit on node " + name);
        }
        if (m.level_logits.size() != m.levels.size()) {
            throw ScmError("logit/level count mismatch on node " + name);
        }
        for (const auto& [p, table] : m.factor_logit_terms) {
            referenced.push_back(p);
            for (const auto& row : table) {
                if (row.size() != m.levels.size()) {
                    throw ScmError("logit table width mismatch on node " + name);
                }
            }
        }
        for (const auto& [p, slopes] : m.numeric_logit_terms) {
            referenced.push_back(p);
            if (slopes.size() != m.levels.size()) {
                throw ScmError("logit slope count mismatch on node " + name);
            }
        }
    } else {
        if (m.kind == MechKind::Gaussian && !(m.sigma > 0)) {
            throw ScmError("gaussian mechanism on " + name + " needs sigma > 0");
        }
        if (m.kind == MechKind::NegativeBinomialLog && !(m.phi > 0)) {
            throw ScmError("negative-binomial mechanism on " + name + " needs phi > 0");
        }
        for (const auto& [p, w] : m.factor_terms) {
            referenced.push_back(p);
            (void)w;
        }
        for (const auto& [p, w] : m.numeric_terms) {
            referenced.push_back(p);
            (void)w;
        }
    }
    std::sort(referenced.begin(), referenced.end());
    if (referenced != parents) {
        throw ScmError("mechanism parents of " + name + " do not match DAG parents");
    }
}

}  // namespace

Scm::Scm(Dag dag, std::map<std::string, Mechanism> mechanisms) : dag_(std::move(dag)) {
    mech_.resize(dag_.node_count());
    std::vector<bool> have(dag_.node_count(), false);
    for (auto& [name, m] : mechanisms) {
        const int idx = dag_.node_index(name);  // throws on unknown node
        mech_[idx] = std::move(m);
        have[idx] = true;
    }
    for (int i = 0; i < dag_.node_count(); ++i) {
        if (!have[i]) throw ScmError("node without mechanism: " + dag_.node_name(i));
        validate_mechanism(dag_, i, mech_[i]);
    }
}

const Mechanism& Scm::mechanism(const std::string& node) const {
    return mech_.at(dag_.node_index(node));
}

Scm Scm::intervene(const Intervention& iv) const {
    std::vector<int> targets;
    for (const auto& [name, value] : iv.assignments) {
        (void)value;
        targets.push_back(dag_.node_index(name));  // throws on unknown node
    }
    Dag cut = dag_.without_incoming_edges(targets);

    std::map<std::string, Mechanism> mechs;
    for (int i = 0; i < dag_.node_count(); ++i) {
        const std::string& name = dag_.node_name(i);
        auto it = iv.assignments.find(name);
        if (it == iv.assignments.end()) {
            mechs[name] = mech_[i];
            continue;
        }
        if (mech_[i].is_categorical()) {
            const auto* level = std::get_if<std::string>(&it->second);
            if (!level) throw ScmError("intervention on " + name + " needs a level name");
            mechs[name] = Mechanism::point_mass_level(mech_[i].levels, *level);
        } else {
            const auto* value = std::get_if<double>(&it->second);
            if (!value) throw ScmError("intervention on " + name + " needs a numeric value");
            mechs[name] = Mechanism::deterministic(*value);
        }
    }
    return Scm(std::move(cut), std::move(mechs));
}

namespace {

// Index-resolved view of one node's mechanism, so the per-row loop touches
// no string lookups.
struct NodePlan {
    int node;
    const Mechanism* mech;
    std::vector<std::pair<int, const std::vector<double>*>> factor_terms;
    std::vector<std::pair<int, double>> numeric_terms;
    std::vector<std::pair<int, const std::vector<std::vector<double>>*>> factor_logit_terms;
    std::vector<std::pair<int, const std::vector<double>*>> numeric_logit_terms;
};

std::vector<NodePlan> compile_plan(const Scm& scm) {
    const Dag& dag = scm.dag();
    std::vector<NodePlan> plan;
    for (int v : dag.topological_order()) {
        NodePlan np;
        np.node = v;
        np.mech = &scm.mechanism(v);
        for (const auto& [parent, weights] : np.mech->factor_terms) {
            np.factor_terms.emplace_back(dag.node_index(parent), &weights);
        }
        for (const auto& [parent, weight] : np.mech->numeric_terms) {
            np.numeric_terms.emplace_back(dag.node_index(parent), weight);
        }
        for (const auto& [parent, table] : np.mech->factor_logit_terms) {
            np.factor_logit_terms.emplace_back(dag.node_index(parent), &table);
        }
        for (const auto& [parent, slopes] : np.mech->numeric_logit_terms) {
            np.numeric_logit_terms.emplace_back(dag.node_index(parent), &slopes);
        }
        plan.push_back(std::move(np));
    }
    return plan;
}

// Node values for one row; `numeric` mirrors categorical codes as doubles.
void sample_row(const std::vector<NodePlan>& plan, Rng& rng, double* numeric, int* code,
                std::vector<double>& logits_scratch, const Dag& dag) {
    for (const NodePlan& np : plan) {
        const Mechanism& m = *np.mech;
        if (m.is_categorical()) {
            logits_scratch = m.level_logits;
            for (const auto& [p, table] : np.factor_logit_terms) {
                const auto& contrib = (*table)[code[p]];
                for (std::size_t k = 0; k < logits_scratch.size(); ++k) {
                    logits_scratch[k] += contrib[k];
                }
            }
            for (const auto& [p, slopes] : np.numeric_logit_terms) {
                for (std::size_t k = 0; k < logits_scratch.size(); ++k) {
                    logits_scratch[k] += (*slopes)[k] * numeric[p];
                }
            }
            code[np.node] = rng.categorical_logit(logits_scratch);
            numeric[np.node] = static_cast<double>(code[np.node]);
            continue;
        }
        double eta = m.baseline;
        for (const auto& [p, weights] : np.factor_terms) eta += (*weights)[code[p]];
        for (const auto& [p, w] : np.numeric_terms) eta += w * numeric[p];
        if (!std::isfinite(eta)) {
            throw ScmError("non-finite linear predictor at node " + dag.node_name(np.node));
        }
        double value = 0.0;
        switch (m.kind) {
            case MechKind::Deterministic:
                value = eta;
                break;
            case MechKind::Gaussian:
                value = rng.normal(eta, m.sigma);
                break;
            case MechKind::NegativeBinomialLog:
                value = static_cast<double>(rng.negative_binomial(std::exp(eta), m.phi));
                break;
            case MechKind::CategoricalLogit:
                break;  // handled above
        }
        if (m.exp_output) value = std::exp(value);
        if (!std::isfinite(value)) {
            throw ScmError("non-finite sample at node " + dag.node_name(np.node));
        }
        numeric[np.node] = value;
    }
}

struct SampleBuffer {
    std::int64_t n = 0;
    int nodes = 0;
    std::vector<double> numeric;  // n * nodes, row-major
    std::vector<int> code;
};

Dataset assemble(const Scm& scm, const SampleBuffer& buf, bool keep_latent) {
    const Dag& dag = scm.dag();
    Dataset out;
    for (int v = 0; v < dag.node_count(); ++v) {
        if (dag.is_latent(v) && !keep_latent) continue;
        const Mechanism& m = scm.mechanism(v);
        const std::string& name = dag.node_name(v);
        const std::size_t n = static_cast<std::size_t>(buf.n);
        if (m.is_categorical()) {
            std::vector<int> codes(n);
            for (std::size_t i = 0; i < n; ++i) codes[i] = buf.code[i * buf.nodes + v];
            if (std::is_sorted(m.levels.begin(), m.levels.end())) {
                out.add_factor_coded(name, std::move(codes), m.levels);
            } else {
                std::vector<std::string> vals(n);
                for (std::size_t i = 0; i < n; ++i) vals[i] = m.levels[codes[i]];
                out.add_factor(name, vals);
            }
        } else if (m.kind == MechKind::NegativeBinomialLog) {
            std::vector<std::int64_t> counts(n);
            for (std::size_t i = 0; i < n; ++i) {
                counts[i] = static_cast<std::int64_t>(buf.numeric[i * buf.nodes + v]);
            }
            out.add_count(name, std::move(counts));
        } else {
            std::vector<double> vals(n);
            for (std::size_t i = 0; i < n; ++i) vals[i] = buf.numeric[i * buf.nodes + v];
            out.add_continuous(name, std::move(vals));
        }
    }
    return out;
}

SampleBuffer sample_rows(const Scm& scm, std::int64_t n, std::uint64_t seed, bool parallel) {
    const auto plan = compile_plan(scm);
    const Dag& dag = scm.dag();
    SampleBuffer buf;
    buf.n = n;
    buf.nodes = dag.node_count();
    buf.numeric.assign(static_cast<std::size_t>(n) * buf.nodes, 0.0);
    buf.code.assign(static_cast<std::size_t>(n) * buf.nodes, 0);
#ifdef _OPENMP
    if (parallel) {
        std::string failure;  // exceptions may not cross the parallel region
#pragma omp parallel
        {
            std::vector<double> scratch;
#pragma omp for schedule(static)
            for (std::int64_t i = 0; i < n; ++i) {
                try {
                    Rng rng(seed, static_cast<std::uint64_t>(i));
                    sample_row(plan, rng, &buf.numeric[i * buf.nodes],
                               &buf.code[i * buf.nodes], scratch, dag);
                } catch (const std::exception& e) {
#pragma omp critical
                    failure = e.what();
                }
            }
        }
        if (!failure.empty()) throw ScmError(failure);
        return buf;
    }
#else
    (void)parallel;
#endif
    std::vector<double> scratch;
    for (std::int64_t i = 0; i < n; ++i) {
        Rng rng(seed, static_cast<std::uint64_t>(i));
        sample_row(plan, rng, &buf.numeric[i * buf.nodes], &buf.code[i * buf.nodes], scratch,
                   dag);
    }
    return buf;
}

}  // namespace

Dataset sample(const Scm& scm, std::int64_t n, std::uint64_t seed,
               const SampleOptions& options) {
    if (n < 1) throw ScmError("sample size must be >= 1");
    const SampleBuffer buf = sample_rows(scm, n, seed, options.parallel);
    return assemble(scm, buf, options.keep_latent);
}

Dataset sample_serial(const Scm& scm, std::int64_t n, std::uint64_t seed,
                      const SampleOptions& options) {
    if (n < 1) throw ScmError("sample size must be >= 1");
    const SampleBuffer buf = sample_rows(scm, n, seed, /*parallel=*/false);
    return assemble(scm, buf, options.keep_latent);
}

std::map<std::string, double> true_language_effects(const Scm& scm,
                                                    const std::vector<std::string>& languages,
                                                    std::int64_t n, std::uint64_t seed) {
    if (!scm.dag().has_node("language") || !scm.dag().has_node("rank")) {
        throw ScmError("true_language_effects needs nodes 'language' and 'rank'");
    }
    if (n < 1000) throw ScmError("true_language_effects needs n >= 1000");

    std::map<std::string, double> mean_log_rank;
    for (const auto& lang : languages) {
        Intervention iv;
        iv.assignments["language"] = lang;
        const Scm cut = scm.intervene(iv);
        // Same seed for every language: common random numbers tighten the
        // Monte-Carlo error of the contrasts.
        const Dataset data = sample(cut, n, seed);
        const Column& rank = data.column("rank");
        double total = 0.0;
        for (std::size_t i = 0; i < data.row_count(); ++i) {
            total += std::log(static_cast<double>(std::max<std::int64_t>(1, rank.counts[i])));
        }
        mean_log_rank[lang] = total / static_cast<double>(data.row_count());
    }
    double mean = 0.0;
    for (const auto& [lang, v] : mean_log_rank) mean += v;
    mean /= static_cast<double>(mean_log_rank.size());
    for (auto& [lang, v] : mean_log_rank) v -= mean;
    return mean_log_rank;
}

// ---------------------------------------------------------------------------
// Contest-shaped generator
// ---------------------------------------------------------------------------

namespace {

// Deterministic per-level draw in [-spread, spread], keyed so that parameter
// bundles reproduce the same coefficient tables on every run.
double keyed_uniform(std::uint64_t param_seed, std::uint64_t stream, std::uint64_t item,
                     double spread) {
    Rng rng(mix_keys(param_seed, stream), item);
    return rng.uniform(-spread, spread);
}

std::vector<std::string> challenge_levels(const CodeJamParams& p) {
    std::vector<std::string> out;
    for (int y = 0; y < p.years; ++y) {
        for (int r = 1; r <= p.rounds_per_year; ++r) {
            out.push_back(std::to_string(p.first_year + y) + "-" + std::to_string(r));
        }
    }
    return out;
}

std::vector<std::string> nickname_levels(const CodeJamParams& p) {
    const int width = static_cast<int>(std::to_string(p.nicknames).size());
    std::vector<std::string> out;
    for (int i = 1; i <= p.nicknames; ++i) {
        std::string num = std::to_string(i);
        out.push_back("p" + std::string(width - num.size(), '0') + num);
    }
    return out;
}

}  // namespace

std::string codejam_dag_source(const std::string& variant) {
    if (variant != "d0" && variant != "d1" && variant != "d2") {
        throw ScmError("unknown DAG variant: " + variant);
    }
    std::ostringstream out;
    out << "# Causal hypothesis " << variant << " for contest data.\n";
    out << "latent skill\n";
    out << "challenge -> nickname\n";
    out << "challenge -> skill\n";
    out << "challenge -> rank\n";
    out << "nickname -> skill\n";
    out << "nickname -> language\n";
    if (variant == "d0" || variant == "d2") out << "nickname -> size\n";
    out << "skill -> rank\n";
    if (variant == "d1" || variant == "d2") out << "skill -> size\n";
    out << "language -> rank\n";
    out << "language -> size\n";
    return out.str();
}

Scm codejam_scm(const CodeJamParams& p) {
    if (p.years <= 0 || p.rounds_per_year <= 0 || p.nicknames <= 0) {
        throw ScmError("counts must be positive");
    }
    if (p.variant != "d0" && p.variant != "d1" && p.variant != "d2") {
        throw ScmError("unknown DAG variant: " + p.variant);
    }
    if (p.languages.size() < 2) throw ScmError("need at least two languages");
    if (p.language_rank_effects.size() != p.languages.size() ||
        p.language_size_effects.size() != p.languages.size()) {
        throw ScmError("language effect vectors must align with the language list");
    }

    const Dag dag = parse_dag(codejam_dag_source(p.variant));
    const auto challenges = challenge_levels(p);
    const auto nicknames = nickname_levels(p);
    const int nc = static_cast<int>(challenges.size());
    const int nn = static_cast<int>(nicknames.size());
    const int nl = static_cast<int>(p.languages.size());

    std::map<std::string, Mechanism> mechs;

    {
        Mechanism challenge;
        challenge.kind = MechKind::CategoricalLogit;
        challenge.levels = challenges;
        challenge.level_logits.assign(nc, 0.0);
        mechs["challenge"] = std::move(challenge);
    }
    {
        Mechanism nickname;
        nickname.kind = MechKind::CategoricalLogit;
        nickname.levels = nicknames;
        nickname.level_logits.assign(nn, 0.0);
        std::vector<std::vector<double>> tilt(nc, std::vector<double>(nn));
        for (int c = 0; c < nc; ++c) {
            for (int n = 0; n < nn; ++n) {
                tilt[c][n] = keyed_uniform(p.param_seed, 1,
                                           static_cast<std::uint64_t>(c) * nn + n,
                                           p.challenge_nickname_tilt);
            }
        }
        nickname.factor_logit_terms["challenge"] = std::move(tilt);
        mechs["nickname"] = std::move(nickname);
    }
    {
        Mechanism skill;
        skill.kind = MechKind::Gaussian;
        skill.sigma = p.skill_sd;
        std::vector<double> by_nickname(nn), by_challenge(nc);
        for (int n = 0; n < nn; ++n) {
            by_nickname[n] = keyed_uniform(p.param_seed, 2, n, p.skill_nickname_spread);
        }
        for (int c = 0; c < nc; ++c) {
            by_challenge[c] = keyed_uniform(p.param_seed, 3, c, p.skill_challenge_spread);
        }
        skill.factor_terms["nickname"] = std::move(by_nickname);
        skill.factor_terms["challenge"] = std::move(by_challenge);
        mechs["skill"] = std::move(skill);
    }
    {
        Mechanism language;
        language.kind = MechKind::CategoricalLogit;
        language.levels = p.languages;
        language.level_logits.assign(nl, 0.0);
        const double s = std::min(std::max(p.stickiness, 0.5), 0.999);
        const double pref_logit = std::log(s * (nl - 1) / (1.0 - s));
        const auto& skill_by_nickname = mechs["skill"].factor_terms.at("nickname");
        std::vector<std::vector<double>> pref(nn, std::vector<double>(nl, 0.0));
        for (int n = 0; n < nn; ++n) {
            Rng rng(mix_keys(p.param_seed, 4), static_cast<std::uint64_t>(n));
            int favorite = static_cast<int>(rng.next_u64() % nl);
            if (rng.uniform() < p.skill_language_alignment) {
                // Skill tier decides the favorite: the most skilled tier
                // prefers the first language in the list.
                const double spread = std::max(p.skill_nickname_spread, 1e-12);
                const double q = (spread - skill_by_nickname[n]) / (2.0 * spread);
                favorite = std::clamp(static_cast<int>(q * nl), 0, nl - 1);
            }
            pref[n][favorite] = pref_logit;
        }
        language.factor_logit_terms["nickname"] = std::move(pref);
        mechs["language"] = std::move(language);
    }
    {
        Mechanism size;
        size.kind = MechKind::Gaussian;
        size.sigma = p.size_noise_sd;
        size.baseline = p.size_intercept;
        size.exp_output = true;  // log-normal byte counts
        size.factor_terms["language"] = p.language_size_effects;
        if (p.variant == "d0" || p.variant == "d2") {
            std::vector<double> by_nickname(nn);
            for (int n = 0; n < nn; ++n) {
                by_nickname[n] = keyed_uniform(p.param_seed, 5, n, p.size_nickname_spread);
            }
            size.factor_terms["nickname"] = std::move(by_nickname);
        }
        if (p.variant == "d1" || p.variant == "d2") {
            size.numeric_terms["skill"] = p.size_skill_coef;
        }
        mechs["size"] = std::move(size);
    }
    {
        Mechanism rank;
        rank.kind = MechKind::NegativeBinomialLog;
        rank.phi = p.rank_phi;
        rank.baseline = p.rank_intercept;
        rank.factor_terms["language"] = p.language_rank_effects;
        std::vector<double> by_challenge(nc);
        for (int c = 0; c < nc; ++c) {
            by_challenge[c] = keyed_uniform(p.param_seed, 6, c, p.rank_challenge_spread);
        }
        rank.factor_terms["challenge"] = std::move(by_challenge);
        rank.numeric_terms["skill"] = p.rank_skill_coef;
        mechs["rank"] = std::move(rank);
    }

    return Scm(dag, std::move(mechs));
}

// ---------------------------------------------------------------------------
// Parameter bundle serialization
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& v : out) {
        const auto b = v.find_first_not_of(" \t");
        const auto e = v.find_last_not_of(" \t");
        v = b == std::string::npos ? "" : v.substr(b, e - b + 1);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(std::stod(item));
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out << ",";
        out << v[i];
    }
    return out.str();
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ",";
        out += v[i];
    }
    return out;
}

}  // namespace

CodeJamParams load_codejam_params(const std::string& text) {
    CodeJamParams p;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) {
            throw ScmError("expected 'key = value' at params line " + std::to_string(line_no));
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "variant") p.variant = value;
            else if (key == "years") p.years = std::stoi(value);
            else if (key == "rounds_per_year") p.rounds_per_year = std::stoi(value);
            else if (key == "first_year") p.first_year = std::stoi(value);
            else if (key == "nicknames") p.nicknames = std::stoi(value);
            else if (key == "languages") p.languages = split_list(value);
            else if (key == "language_rank_effects") p.language_rank_effects = parse_doubles(value);
            else if (key == "language_size_effects") p.language_size_effects = parse_doubles(value);
            else if (key == "stickiness") p.stickiness = std::stod(value);
            else if (key == "challenge_nickname_tilt") p.challenge_nickname_tilt = std::stod(value);
            else if (key == "skill_language_alignment") p.skill_language_alignment = std::stod(value);
            else if (key == "skill_nickname_spread") p.skill_nickname_spread = std::stod(value);
            else if (key == "skill_challenge_spread") p.skill_challenge_spread = std::stod(value);
            else if (key == "skill_sd") p.skill_sd = std::stod(value);
            else if (key == "size_intercept") p.size_intercept = std::stod(value);
            else if (key == "size_skill_coef") p.size_skill_coef = std::stod(value);
            else if (key == "size_nickname_spread") p.size_nickname_spread = std::stod(value);
            else if (key == "size_noise_sd") p.size_noise_sd = std::stod(value);
            else if (key == "rank_intercept") p.rank_intercept = std::stod(value);
            else if (key == "rank_skill_coef") p.rank_skill_coef = std::stod(value);
            else if (key == "rank_challenge_spread") p.rank_challenge_spread = std::stod(value);
            else if (key == "rank_phi") p.rank_phi = std::stod(value);
            else if (key == "param_seed") p.param_seed = std::stoull(value);
            else throw ScmError("unknown parameter key: " + key);
        } catch (const std::invalid_argument&) {
            throw ScmError("bad value for " + key + " at params line " + std::to_string(line_no));
        }
    }
    return p;
}

std::string format_codejam_params(const CodeJamParams& p) {
    std::ostringstream out;
    out << "variant = " << p.variant << "\n";
    out << "years = " << p.years << "\n";
    out << "rounds_per_year = " << p.rounds_per_year << "\n";
    out << "first_year = " << p.first_year << "\n";
    out << "nicknames = " << p.nicknames << "\n";
    out << "languages = " << join_strings(p.languages) << "\n";
    out << "language_rank_effects = " << join_doubles(p.language_rank_effects) << "\n";
    out << "language_size_effects = " << join_doubles(p.language_size_effects) << "\n";
    out << "stickiness = " << p.stickiness << "\n";
    out << "challenge_nickname_tilt = " << p.challenge_nickname_tilt << "\n";
    out << "skill_language_alignment = " << p.skill_language_alignment << "\n";
    out << "skill_nickname_spread = " << p.skill_nickname_spread << "\n";
    out << "skill_challenge_spread = " << p.skill_challenge_spread << "\n";
    out << "skill_sd = " << p.skill_sd << "\n";
    out << "size_intercept = " << p.size_intercept << "\n";
    out << "size_skill_coef = " << p.size_skill_coef << "\n";
    out << "size_nickname_spread = " << p.size_nickname_spread << "\n";
    out << "size_noise_sd = " << p.size_noise_sd << "\n";
    out << "rank_intercept = " << p.rank_intercept << "\n";
    out << "rank_skill_coef = " << p.rank_skill_coef << "\n";
    out << "rank_challenge_spread = " << p.rank_challenge_spread << "\n";
    out << "rank_phi = " << p.rank_phi << "\n";
    out << "param_seed = " << p.param_seed << "\n";
    return out.str();
}

}  // namespace dagfit
