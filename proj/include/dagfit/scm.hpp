#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "dagfit/dag.hpp"
#include "dagfit/dataset.hpp"

namespace dagfit {

struct ScmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class MechKind { CategoricalLogit, Gaussian, NegativeBinomialLog, Deterministic };

/// Generative mechanism for one node. Scalar kinds (gaussian,
/// negative-binomial, deterministic) build a linear predictor from
/// `baseline` plus per-parent contributions; categorical-logit builds one
/// logit per output level the same way and samples from the softmax.
struct Mechanism {
    MechKind kind = MechKind::Deterministic;

    // Scalar kinds.
    double baseline = 0.0;
    /// Factor parent -> weight per parent level (indexed by level code).
    std::map<std::string, std::vector<double>> factor_terms;
    /// Numeric parent -> linear weight.
    std::map<std::string, double> numeric_terms;
    double sigma = 0.0;      // gaussian noise sd
    double phi = 0.0;        // negative-binomial dispersion
    bool exp_output = false; // emit exp(value); a gaussian node becomes log-normal

    // Categorical-logit kind.
    std::vector<std::string> levels;
    std::vector<double> level_logits;
    /// Factor parent -> [parent level][output level] logit contribution.
    std::map<std::string, std::vector<std::vector<double>>> factor_logit_terms;
    /// Numeric parent -> per-output-level slope.
    std::map<std::string, std::vector<double>> numeric_logit_terms;

    bool is_categorical() const { return kind == MechKind::CategoricalLogit; }

    static Mechanism deterministic(double value);
    static Mechanism point_mass_level(const std::vector<std::string>& levels,
                                      const std::string& level);
};

/// Do-intervention: fixed values for a set of nodes. Values are level names
/// for categorical nodes and doubles for scalar nodes.
struct Intervention {
    std::map<std::string, std::variant<double, std::string>> assignments;
};

/// A Dag plus one mechanism per node. Immutable; sampling is pure given
/// (scm, n, seed) and safe to run concurrently on the same instance.
class Scm {
public:
    Scm(Dag dag, std::map<std::string, Mechanism> mechanisms);

    const Dag& dag() const { return dag_; }
    const Mechanism& mechanism(const std::string& node) const;
    const Mechanism& mechanism(int node_index) const { return mech_.at(node_index); }

    /// New Scm with each assigned node's incoming edges removed and its
    /// mechanism replaced by a point mass. The original is unchanged.
    Scm intervene(const Intervention& iv) const;

private:
    Dag dag_;
    std::vector<Mechanism> mech_;  // by node index
};

struct SampleOptions {
    bool keep_latent = false;   // include latent columns in the output
    bool parallel = true;       // use the OpenMP kernel when available
};

/// Ancestral sampling: n rows, nodes in topological order. Each row consumes
/// its own seed-derived random stream, so output is bit-identical across
/// serial/parallel execution and thread counts.
Dataset sample(const Scm& scm, std::int64_t n, std::uint64_t seed,
               const SampleOptions& options = {});

/// Serial reference implementation of the sampling kernel; kept for testing
/// and benchmarking against the parallel path.
Dataset sample_serial(const Scm& scm, std::int64_t n, std::uint64_t seed,
                      const SampleOptions& options = {});

/// Monte-Carlo E[log rank | do(language = l)] per language, centered by the
/// across-language mean. Ground-truth counterpart of the fitted centered
/// language effects. Rejects n < 1000.
std::map<std::string, double> true_language_effects(const Scm& scm,
                                                    const std::vector<std::string>& languages,
                                                    std::int64_t n, std::uint64_t seed);

/// Parameter bundle for the contest-shaped generator. Serializable as a flat
/// `key = value` text file; see `load_codejam_params` for the keys.
struct CodeJamParams {
    std::string variant = "d2";  // d0 | d1 | d2
    int years = 7;
    int rounds_per_year = 6;
    int first_year = 2008;
    int nicknames = 105;
    std::vector<std::string> languages = {"C++", "Java", "Python"};

    /// Log-scale direct effects of each language on rank / log-size,
    /// aligned with `languages`.
    std::vector<double> language_rank_effects = {-0.2, 0.0, 0.2};
    std::vector<double> language_size_effects = {0.3, 0.7, -1.0};

    double stickiness = 0.9;             // P(participant uses their preferred language)
    double challenge_nickname_tilt = 0.5;  // inclusion-logit variation across challenges
    /// Probability that a participant's preferred language follows their
    /// skill tier (top tier prefers the first language) instead of being
    /// random; this is what makes the naive per-language contrast confounded.
    double skill_language_alignment = 0.7;

    double skill_nickname_spread = 0.8;
    double skill_challenge_spread = 0.4;
    double skill_sd = 0.5;

    double size_intercept = 7.0;  // log-bytes
    double size_skill_coef = 0.8;
    double size_nickname_spread = 0.3;
    double size_noise_sd = 0.35;

    double rank_intercept = 4.5;  // log-rank scale
    double rank_skill_coef = -0.9;
    double rank_challenge_spread = 0.5;
    double rank_phi = 1.8;

    std::uint64_t param_seed = 42;  // keys the per-level coefficient draws
};

CodeJamParams load_codejam_params(const std::string& text);
std::string format_codejam_params(const CodeJamParams& params);

/// Contest-shaped Scm over {challenge, nickname, skill (latent), language,
/// size, rank} with the edge set of the chosen DAG variant.
Scm codejam_scm(const CodeJamParams& params);

/// DSL source of the three canonical DAG variants ("d0" | "d1" | "d2").
std::string codejam_dag_source(const std::string& variant);

}  // namespace dagfit
