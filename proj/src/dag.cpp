#include "dagfit/dag.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>
#include <map>
#include <sstream>

namespace dagfit {

namespace {

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

}  // namespace

Dag::Dag(std::vector<std::string> nodes,
         std::vector<std::pair<std::string, std::string>> edges,
         std::vector<std::string> latent)
    : nodes_(std::move(nodes)) {
    std::map<std::string, int> index;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
        if (!index.emplace(nodes_[i], i).second) {
            throw DagError("duplicate node declaration: " + nodes_[i]);
        }
    }
    latent_.assign(nodes_.size(), false);
    for (const auto& name : latent) {
        auto it = index.find(name);
        if (it == index.end()) throw DagError("unknown node in latent declaration: " + name);
        latent_[it->second] = true;
    }
    parents_.assign(nodes_.size(), {});
    children_.assign(nodes_.size(), {});
    for (const auto& [p, c] : edges) {
        auto pi = index.find(p);
        auto ci = index.find(c);
        if (pi == index.end()) throw DagError("edge references undeclared node: " + p);
        if (ci == index.end()) throw DagError("edge references undeclared node: " + c);
        if (pi->second == ci->second) throw DagError("self-loop on node: " + p);
        for (int existing : children_[pi->second]) {
            if (existing == ci->second) throw DagError("duplicate edge: " + p + " -> " + c);
        }
        children_[pi->second].push_back(ci->second);
        parents_[ci->second].push_back(pi->second);
    }

    // Kahn's algorithm; leftover nodes witness a cycle.
    std::vector<int> indegree(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        indegree[i] = static_cast<int>(parents_[i].size());
    }
    std::deque<int> ready;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (indegree[i] == 0) ready.push_back(static_cast<int>(i));
    }
    while (!ready.empty()) {
        int v = ready.front();
        ready.pop_front();
        topo_.push_back(v);
        for (int c : children_[v]) {
            if (--indegree[c] == 0) ready.push_back(c);
        }
    }
    if (topo_.size() != nodes_.size()) {
        std::string cyclic;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (indegree[i] > 0) cyclic += (cyclic.empty() ? "" : ", ") + nodes_[i];
        }
        throw DagError("cycle detected among nodes: " + cyclic);
    }
}

int Dag::node_index(const std::string& name) const {
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
        if (nodes_[i] == name) return i;
    }
    throw DagError("unknown node: " + name);
}

bool Dag::has_node(const std::string& name) const {
    return std::find(nodes_.begin(), nodes_.end(), name) != nodes_.end();
}

std::vector<std::string> Dag::latent_nodes() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (latent_[i]) out.push_back(nodes_[i]);
    }
    return out;
}

std::vector<std::string> Dag::observed_nodes() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!latent_[i]) out.push_back(nodes_[i]);
    }
    return out;
}

bool Dag::has_edge(int parent, int child) const {
    const auto& ch = children_.at(parent);
    return std::find(ch.begin(), ch.end(), child) != ch.end();
}

std::vector<std::pair<std::string, std::string>> Dag::edges() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t p = 0; p < nodes_.size(); ++p) {
        for (int c : children_[p]) out.emplace_back(nodes_[p], nodes_[c]);
    }
    return out;
}

int Dag::edge_count() const {
    int n = 0;
    for (const auto& ch : children_) n += static_cast<int>(ch.size());
    return n;
}

std::vector<int> Dag::descendants(int i) const {
    std::vector<bool> seen(nodes_.size(), false);
    std::deque<int> queue{i};
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int c : children_[v]) {
            if (!seen[c]) {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(nodes_.size()); ++v) {
        if (seen[v]) out.push_back(v);
    }
    return out;
}

std::vector<int> Dag::ancestors(int i) const {
    std::vector<bool> seen(nodes_.size(), false);
    std::deque<int> queue{i};
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int p : parents_[v]) {
            if (!seen[p]) {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(nodes_.size()); ++v) {
        if (seen[v]) out.push_back(v);
    }
    return out;
}

Dag Dag::without_incoming_edges(const std::vector<int>& targets) const {
    std::vector<bool> cut(nodes_.size(), false);
    for (int t : targets) cut.at(t) = true;
    std::vector<std::pair<std::string, std::string>> kept;
    for (const auto& [p, c] : edges()) {
        if (!cut[node_index(c)]) kept.emplace_back(p, c);
    }
    return Dag(nodes_, kept, latent_nodes());
}

Dag Dag::without_outgoing_edges(const std::vector<int>& targets) const {
    std::vector<bool> cut(nodes_.size(), false);
    for (int t : targets) cut.at(t) = true;
    std::vector<std::pair<std::string, std::string>> kept;
    for (const auto& [p, c] : edges()) {
        if (!cut[node_index(p)]) kept.emplace_back(p, c);
    }
    return Dag(nodes_, kept, latent_nodes());
}

bool Dag::operator==(const Dag& other) const {
    if (nodes_ != other.nodes_ || latent_ != other.latent_) return false;
    auto a = edges();
    auto b = other.edges();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

Dag parse_dag(const std::string& text) {
    std::vector<std::string> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    std::vector<std::pair<std::string, int>> latent_decls;  // name, line

    auto declare = [&](const std::string& name) {
        if (std::find(nodes.begin(), nodes.end(), name) == nodes.end()) nodes.push_back(name);
    };

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        // Trim; remember the indent so column reports point into the raw line.
        std::size_t begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        std::size_t end = line.find_last_not_of(" \t\r");
        std::string body = line.substr(begin, end - begin + 1);
        int col = static_cast<int>(begin) + 1;

        std::istringstream tokens(body);
        std::string first;
        tokens >> first;
        if (first == "latent") {
            std::string name;
            if (!(tokens >> name) || !valid_name(name)) {
                throw DagParseError("expected node name after 'latent'", line_no, col);
            }
            std::string extra;
            if (tokens >> extra) {
                throw DagParseError("unexpected token after latent declaration: " + extra,
                                    line_no, col);
            }
            latent_decls.emplace_back(name, line_no);
            continue;
        }
        std::string arrow, to, extra;
        if (!(tokens >> arrow >> to) || arrow != "->" || (tokens >> extra)) {
            throw DagParseError("expected '<name> -> <name>' or 'latent <name>'", line_no, col);
        }
        if (!valid_name(first)) throw DagParseError("invalid node name: " + first, line_no, col);
        if (!valid_name(to)) throw DagParseError("invalid node name: " + to, line_no, col);
        declare(first);
        declare(to);
        edges.emplace_back(first, to);
    }

    std::vector<std::string> latent;
    for (const auto& [name, decl_line] : latent_decls) {
        if (std::find(nodes.begin(), nodes.end(), name) == nodes.end()) {
            throw DagParseError("unknown node in latent declaration: " + name, decl_line, 1);
        }
        latent.push_back(name);
    }
    return Dag(std::move(nodes), std::move(edges), std::move(latent));
}

std::string format_dag(const Dag& dag) {
    std::ostringstream out;
    for (const auto& name : dag.latent_nodes()) out << "latent " << name << "\n";
    for (const auto& [p, c] : dag.edges()) out << p << " -> " << c << "\n";
    return out.str();
}

std::string Path::to_string() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (i > 0) out << (forward[i - 1] ? " -> " : " <- ");
        out << nodes[i];
    }
    return out.str();
}

CondIndep CondIndep::make(std::string a, std::string b, std::vector<std::string> z) {
    if (a == b) throw DagError("independence statement requires distinct nodes");
    if (b < a) std::swap(a, b);
    std::sort(z.begin(), z.end());
    z.erase(std::unique(z.begin(), z.end()), z.end());
    for (const auto& g : z) {
        if (g == a || g == b) {
            throw DagError("conditioning set contains statement variable: " + g);
        }
    }
    return CondIndep{std::move(a), std::move(b), std::move(z)};
}

std::string CondIndep::to_string() const {
    std::string out = x + " _||_ " + y;
    if (!given.empty()) {
        out += " | ";
        for (std::size_t i = 0; i < given.size(); ++i) {
            if (i > 0) out += ", ";
            out += given[i];
        }
    }
    return out;
}

bool CondIndep::operator<(const CondIndep& other) const {
    if (x != other.x) return x < other.x;
    if (y != other.y) return y < other.y;
    return given < other.given;
}

std::vector<Path> enumerate_paths(const Dag& dag, const std::string& x, const std::string& y) {
    const int xi = dag.node_index(x);
    const int yi = dag.node_index(y);
    if (xi == yi) throw DagError("path endpoints must be distinct");

    std::vector<Path> out;
    std::vector<int> trail{xi};
    std::vector<bool> trail_fwd;
    std::vector<bool> on_trail(dag.node_count(), false);
    on_trail[xi] = true;

    std::function<void(int)> extend = [&](int v) {
        if (v == yi) {
            Path p;
            for (int n : trail) p.nodes.push_back(dag.node_name(n));
            p.forward = trail_fwd;
            out.push_back(std::move(p));
            return;
        }
        // Neighbors in name order keeps the output lexicographic.
        std::vector<std::pair<std::string, std::pair<int, bool>>> next;
        for (int c : dag.children(v)) next.push_back({dag.node_name(c), {c, true}});
        for (int p : dag.parents(v)) next.push_back({dag.node_name(p), {p, false}});
        std::sort(next.begin(), next.end());
        for (const auto& [name, step] : next) {
            (void)name;
            const auto [w, fwd] = step;
            if (on_trail[w]) continue;
            trail.push_back(w);
            trail_fwd.push_back(fwd);
            on_trail[w] = true;
            extend(w);
            on_trail[w] = false;
            trail_fwd.pop_back();
            trail.pop_back();
        }
    };
    extend(xi);
    return out;
}

PathClassification classify_path(const Path& path, const Dag& dag,
                                 const std::set<std::string>& given) {
    if (path.nodes.size() < 2 || path.forward.size() + 1 != path.nodes.size()) {
        throw DagError("malformed path");
    }
    std::vector<int> idx;
    for (const auto& name : path.nodes) idx.push_back(dag.node_index(name));
    {
        auto sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw DagError("path repeats a node: " + path.to_string());
        }
    }
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        const bool ok = path.forward[i] ? dag.has_edge(idx[i], idx[i + 1])
                                        : dag.has_edge(idx[i + 1], idx[i]);
        if (!ok) throw DagError("path step not present in DAG: " + path.to_string());
    }
    if (given.count(path.nodes.front()) || given.count(path.nodes.back())) {
        throw DagError("conditioning set contains a path endpoint");
    }

    std::set<int> given_idx;
    for (const auto& g : given) given_idx.insert(dag.node_index(g));
    auto collider_activated = [&](int v) {
        if (given_idx.count(v)) return true;
        for (int d : dag.descendants(v)) {
            if (given_idx.count(d)) return true;
        }
        return false;
    };

    PathClassification result;
    result.kind = path.forward.front() ? PathKind::Causal : PathKind::Backdoor;
    result.status = PathStatus::Open;
    for (std::size_t i = 1; i + 1 < idx.size(); ++i) {
        const bool is_collider = path.forward[i - 1] && !path.forward[i];
        if (is_collider) {
            if (!collider_activated(idx[i])) {
                result.status = PathStatus::Closed;
                result.blockers.push_back(path.nodes[i]);
            }
        } else if (given_idx.count(idx[i])) {
            result.status = PathStatus::Closed;
            result.blockers.push_back(path.nodes[i]);
        }
    }
    return result;
}

std::vector<Path> backdoor_paths(const Dag& dag, const std::string& x, const std::string& y) {
    std::vector<Path> out;
    for (auto& p : enumerate_paths(dag, x, y)) {
        if (!p.forward.front()) out.push_back(std::move(p));
    }
    return out;
}

bool d_separated(const Dag& dag, const std::string& x, const std::string& y,
                 const std::set<std::string>& given) {
    const int xi = dag.node_index(x);
    const int yi = dag.node_index(y);
    if (xi == yi) throw DagError("d-separation requires distinct nodes");
    if (given.count(x) || given.count(y)) {
        throw DagError("conditioning set contains a query node");
    }

    std::vector<bool> in_z(dag.node_count(), false);
    for (const auto& g : given) in_z[dag.node_index(g)] = true;
    // Colliders are traversable iff they are in Z or have a descendant in Z,
    // i.e. iff they are ancestors of Z (or Z itself).
    std::vector<bool> anc_z(dag.node_count(), false);
    for (int v = 0; v < dag.node_count(); ++v) {
        if (!in_z[v]) continue;
        anc_z[v] = true;
        for (int a : dag.ancestors(v)) anc_z[a] = true;
    }

    // Active-trail reachability; state = (node, arrived-from-parent?).
    constexpr int kFromChild = 0;
    constexpr int kFromParent = 1;
    std::vector<std::array<bool, 2>> seen(dag.node_count(), {false, false});
    std::deque<std::pair<int, int>> queue;
    queue.emplace_back(xi, kFromChild);
    while (!queue.empty()) {
        auto [v, dir] = queue.front();
        queue.pop_front();
        if (seen[v][dir]) continue;
        seen[v][dir] = true;
        if (v == yi) return false;

        auto push = [&](int w, int d) {
            if (!seen[w][d]) queue.emplace_back(w, d);
        };
        if (dir == kFromChild) {
            if (!in_z[v]) {
                for (int p : dag.parents(v)) push(p, kFromChild);
                for (int c : dag.children(v)) push(c, kFromParent);
            }
        } else {
            if (!in_z[v]) {
                for (int c : dag.children(v)) push(c, kFromParent);
            }
            if (anc_z[v]) {
                for (int p : dag.parents(v)) push(p, kFromChild);
            }
        }
    }
    return true;
}

namespace {

// Visits index-subsets of `pool` in (size, lexicographic) order until `fn`
// returns true; returns whether any subset was accepted.
bool first_subset(const std::vector<int>& pool,
                  const std::function<bool(const std::vector<int>&)>& fn) {
    const int n = static_cast<int>(pool.size());
    std::vector<int> subset;
    std::function<bool(int, int)> rec = [&](int start, int remaining) -> bool {
        if (remaining == 0) return fn(subset);
        for (int i = start; i <= n - remaining; ++i) {
            subset.push_back(pool[i]);
            if (rec(i + 1, remaining - 1)) return true;
            subset.pop_back();
        }
        return false;
    };
    for (int size = 0; size <= n; ++size) {
        if (rec(0, size)) return true;
    }
    return false;
}

}  // namespace

std::vector<CondIndep> implied_independencies(const Dag& dag, bool testable_only) {
    // Candidate pools sorted by name so the size-order scan breaks ties
    // lexicographically.
    std::vector<int> by_name(dag.node_count());
    for (int i = 0; i < dag.node_count(); ++i) by_name[i] = i;
    std::sort(by_name.begin(), by_name.end(),
              [&](int a, int b) { return dag.node_name(a) < dag.node_name(b); });

    std::vector<CondIndep> out;
    for (int a = 0; a < dag.node_count(); ++a) {
        for (int b = a + 1; b < dag.node_count(); ++b) {
            if (dag.has_edge(a, b) || dag.has_edge(b, a)) continue;
            if (testable_only && (dag.is_latent(a) || dag.is_latent(b))) continue;
            std::vector<int> pool;
            for (int v : by_name) {
                if (v != a && v != b) pool.push_back(v);
            }
            const std::string& na = dag.node_name(a);
            const std::string& nb = dag.node_name(b);
            std::vector<std::string> found;
            bool any = first_subset(pool, [&](const std::vector<int>& z) {
                std::set<std::string> zn;
                for (int v : z) zn.insert(dag.node_name(v));
                if (!d_separated(dag, na, nb, zn)) return false;
                found.assign(zn.begin(), zn.end());
                return true;
            });
            if (!any) continue;
            if (testable_only) {
                bool latent_in_z = false;
                for (const auto& g : found) {
                    if (dag.is_latent(g)) latent_in_z = true;
                }
                if (latent_in_z) continue;
            }
            out.push_back(CondIndep::make(na, nb, found));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

AdjustmentReport adjustment_sets(const Dag& dag, const std::string& x, const std::string& y) {
    const int xi = dag.node_index(x);
    const int yi = dag.node_index(y);
    if (xi == yi) throw DagError("treatment and outcome must be distinct");

    std::vector<bool> excluded(dag.node_count(), false);
    excluded[xi] = excluded[yi] = true;
    for (int d : dag.descendants(xi)) excluded[d] = true;

    std::vector<int> candidates;
    for (int v = 0; v < dag.node_count(); ++v) {
        if (!excluded[v] && !dag.is_latent(v)) candidates.push_back(v);
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](int a, int b) { return dag.node_name(a) < dag.node_name(b); });
    if (candidates.size() > 20) {
        throw DagError("adjustment-set enumeration refuses more than 20 candidate nodes (got " +
                       std::to_string(candidates.size()) + ")");
    }

    const auto backdoors = backdoor_paths(dag, x, y);
    auto closes_all = [&](const std::set<std::string>& z) {
        for (const auto& p : backdoors) {
            if (classify_path(p, dag, z).status == PathStatus::Open) return false;
        }
        return true;
    };

    AdjustmentReport report;
    const int n = static_cast<int>(candidates.size());
    for (int size = 0; size <= n; ++size) {
        std::vector<int> subset;
        std::function<void(int, int)> rec = [&](int start, int remaining) {
            if (remaining == 0) {
                std::set<std::string> z;
                for (int v : subset) z.insert(dag.node_name(v));
                if (closes_all(z)) {
                    report.all_valid.emplace_back(z.begin(), z.end());
                }
                return;
            }
            for (int i = start; i <= n - remaining; ++i) {
                subset.push_back(candidates[i]);
                rec(i + 1, remaining - 1);
                subset.pop_back();
            }
        };
        rec(0, size);
    }

    for (const auto& s : report.all_valid) {
        bool minimal = true;
        for (const auto& t : report.all_valid) {
            if (t.size() < s.size() &&
                std::includes(s.begin(), s.end(), t.begin(), t.end())) {
                minimal = false;
                break;
            }
        }
        if (minimal) report.minimal.push_back(s);
    }
    return report;
}

}  // namespace dagfit
