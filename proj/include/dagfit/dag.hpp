#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagfit {

struct DagError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parse / construction failure with source position (1-based; 0 = unknown).
struct DagParseError : DagError {
    DagParseError(const std::string& msg, int line, int column)
        : DagError(msg + " (line " + std::to_string(line) + ", column " +
                   std::to_string(column) + ")"),
          line(line),
          column(column) {}
    int line;
    int column;
};

/// Directed acyclic graph over named nodes, some of which may be flagged
/// latent (causally present but never observed in data). Immutable after
/// construction; construction rejects cycles, self-loops, and duplicate or
/// dangling edges.
class Dag {
public:
    Dag(std::vector<std::string> nodes,
        std::vector<std::pair<std::string, std::string>> edges,
        std::vector<std::string> latent = {});

    int node_count() const { return static_cast<int>(nodes_.size()); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::string& node_name(int i) const { return nodes_.at(i); }
    int node_index(const std::string& name) const;  // throws on unknown name
    bool has_node(const std::string& name) const;

    bool is_latent(int i) const { return latent_.at(i); }
    bool is_latent(const std::string& name) const { return latent_.at(node_index(name)); }
    std::vector<std::string> latent_nodes() const;
    std::vector<std::string> observed_nodes() const;

    bool has_edge(int parent, int child) const;
    const std::vector<int>& parents(int i) const { return parents_.at(i); }
    const std::vector<int>& children(int i) const { return children_.at(i); }
    std::vector<std::pair<std::string, std::string>> edges() const;
    int edge_count() const;

    /// Node indices in a valid topological order (parents before children).
    const std::vector<int>& topological_order() const { return topo_; }

    /// All strict descendants of `i`, as a sorted index list.
    std::vector<int> descendants(int i) const;
    /// All strict ancestors of `i`, as a sorted index list.
    std::vector<int> ancestors(int i) const;

    /// Graph surgery: drop every edge entering one of `targets`.
    Dag without_incoming_edges(const std::vector<int>& targets) const;
    /// Graph surgery: drop every edge leaving one of `targets`.
    Dag without_outgoing_edges(const std::vector<int>& targets) const;

    bool operator==(const Dag& other) const;

private:
    std::vector<std::string> nodes_;
    std::vector<bool> latent_;
    std::vector<std::vector<int>> parents_;
    std::vector<std::vector<int>> children_;
    std::vector<int> topo_;
};

/// Parses the line-oriented DAG DSL:
///   `#` starts a comment, blank lines are skipped,
///   `latent <name>` flags a node as unobserved,
///   `<name> -> <name>` declares an edge (nodes auto-declared on first
///   mention, in mention order). Names match [A-Za-z_][A-Za-z0-9_]*.
Dag parse_dag(const std::string& text);

/// Renders a Dag back to DSL text (edges in declaration order).
std::string format_dag(const Dag& dag);

/// An undirected-sense simple path. `nodes[i]` and `nodes[i+1]` are adjacent
/// in the Dag; `forward[i]` is true when the edge is nodes[i] -> nodes[i+1].
struct Path {
    std::vector<std::string> nodes;
    std::vector<bool> forward;

    std::string to_string() const;
    bool operator==(const Path& other) const {
        return nodes == other.nodes && forward == other.forward;
    }
};

enum class PathKind { Causal, Backdoor };
enum class PathStatus { Open, Closed };

struct PathClassification {
    PathKind kind;
    PathStatus status;
    /// Nodes responsible for closure: conditioned non-colliders, plus
    /// colliders neither conditioned on nor with a conditioned descendant.
    std::vector<std::string> blockers;
};

/// Conditional-independence statement x indep y given `given`. Canonical form:
/// x < y lexicographically, `given` sorted.
struct CondIndep {
    std::string x;
    std::string y;
    std::vector<std::string> given;

    static CondIndep make(std::string a, std::string b, std::vector<std::string> z);
    std::string to_string() const;
    bool operator==(const CondIndep& other) const {
        return x == other.x && y == other.y && given == other.given;
    }
    bool operator<(const CondIndep& other) const;
};

struct AdjustmentReport {
    /// Every observed-node set satisfying the backdoor criterion, ordered by
    /// size then lexicographically.
    std::vector<std::vector<std::string>> all_valid;
    /// The inclusion-minimal members of all_valid, same ordering.
    std::vector<std::vector<std::string>> minimal;
};

/// All simple paths between x and y ignoring edge direction, in lexicographic
/// order of their node-name sequences.
std::vector<Path> enumerate_paths(const Dag& dag, const std::string& x, const std::string& y);

/// Classifies one path relative to a conditioning set: backdoor iff its first
/// edge enters the x-side endpoint; open iff every collider on it is
/// conditioned (directly or via a descendant) and no non-collider is.
PathClassification classify_path(const Path& path, const Dag& dag,
                                 const std::set<std::string>& given);

/// The subset of enumerate_paths whose first edge enters x.
std::vector<Path> backdoor_paths(const Dag& dag, const std::string& x, const std::string& y);

/// True iff every path between x and y is closed given `given`. Implemented
/// by reachability over active trails, not by path enumeration.
bool d_separated(const Dag& dag, const std::string& x, const std::string& y,
                 const std::set<std::string>& given);

/// One statement per non-adjacent node pair that admits a separating subset
/// of the remaining nodes; the minimal-cardinality separator is reported
/// (lexicographic tie-break). With testable_only, statements touching latent
/// nodes are dropped. Output is deduplicated and sorted.
std::vector<CondIndep> implied_independencies(const Dag& dag, bool testable_only);

/// Enumerates every observed-node set that closes all backdoor paths from x
/// to y, excluding x, y, latent nodes, and descendants of x. Refuses graphs
/// with more than 20 candidate nodes.
AdjustmentReport adjustment_sets(const Dag& dag, const std::string& x, const std::string& y);

}  // namespace dagfit
