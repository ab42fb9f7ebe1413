#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "taxograph/encoder.hpp"
#include "taxograph/graph.hpp"

namespace taxograph {

// Clusters at one level. Overlap is only legal at level 1.
struct ClusterSet {
    int level = 1;
    std::vector<std::vector<int>> clusters;  // each sorted; list sorted by smallest member
    bool overlap_allowed = false;

    int size() const { return static_cast<int>(clusters.size()); }
};

namespace detail {

inline void canonicalize(ClusterSet& cs) {
    for (auto& c : cs.clusters) std::sort(c.begin(), c.end());
    std::sort(cs.clusters.begin(), cs.clusters.end());
}

inline bool strict_subset(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() >= b.size()) return false;
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace detail

// Level-1 soft clustering. Candidate of u gathers every scored partner that
// beats u in (density, id) lexicographic order with probability above p_tau;
// strict subsets and singletons are discarded, equal sets deduplicated.
// Uncovered nodes attach to the cluster holding their strongest-probability
// partner (lexicographically smallest such cluster) when that partner is
// covered, and become singleton clusters otherwise.
inline ClusterSet soft_cluster_level1(const LevelGraph& g, const PairProbTable& probs,
                                      const std::vector<double>& densities, double p_tau) {
    if (g.size() == 0) throw std::invalid_argument("soft_cluster_level1: empty graph");
    if (static_cast<int>(densities.size()) != g.size())
        throw std::invalid_argument("soft_cluster_level1: densities misaligned");
    const int n = g.size();
    std::vector<std::vector<int>> scope(n);
    for (const auto& [key, p] : probs.values) {
        scope[key.first].push_back(key.second);
        scope[key.second].push_back(key.first);
    }

    std::vector<std::vector<int>> candidates(n);
    for (int u = 0; u < n; ++u) {
        auto& c = candidates[u];
        c.push_back(u);
        for (int v : scope[u]) {
            const bool denser = densities[v] > densities[u] || (densities[v] == densities[u] && v > u);
            if (denser && probs.at(u, v) > p_tau) c.push_back(v);
        }
        std::sort(c.begin(), c.end());
    }

    std::vector<std::vector<int>> kept;
    for (int u = 0; u < n; ++u) {
        if (candidates[u].size() <= 1) continue;
        bool subset = false;
        for (int v = 0; v < n && !subset; ++v)
            if (v != u && detail::strict_subset(candidates[u], candidates[v])) subset = true;
        if (!subset) kept.push_back(candidates[u]);
    }
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());

    std::vector<bool> covered(n, false);
    for (const auto& c : kept)
        for (int v : c) covered[v] = true;

    std::vector<std::vector<int>> extras;
    std::vector<std::vector<int>> attachments(kept.size());
    for (int u = 0; u < n; ++u) {
        if (covered[u]) continue;
        int best = -1;
        double best_p = -1.0;
        for (int v : scope[u]) {
            const double p = probs.at(u, v);
            if (p > best_p || (p == best_p && v < best)) {
                best = v;
                best_p = p;
            }
        }
        bool attached = false;
        if (best >= 0 && covered[best]) {
            for (size_t c = 0; c < kept.size(); ++c) {
                if (std::binary_search(kept[c].begin(), kept[c].end(), best)) {
                    attachments[c].push_back(u);  // kept is sorted, first hit is lexicographically smallest
                    attached = true;
                    break;
                }
            }
        }
        if (!attached) extras.push_back({u});
    }
    for (size_t c = 0; c < kept.size(); ++c)
        for (int u : attachments[c]) kept[c].push_back(u);

    ClusterSet out;
    out.level = g.level;
    out.overlap_allowed = true;
    out.clusters = std::move(kept);
    for (auto& e : extras) out.clusters.push_back(std::move(e));
    detail::canonicalize(out);
    return out;
}

// Hard clustering for levels >= 2: every node links to its strongest partner
// (ties toward the smaller id) and connected components of the link set form
// the clusters. pair_fallback supplies scores for nodes the table does not
// cover (the neighbors-scope fallback to all pairs).
inline ClusterSet hard_cluster(const LevelGraph& g, const PairProbTable& probs,
                               const std::function<double(int, int)>& pair_fallback = nullptr) {
    const int n = g.size();
    if (n == 0) throw std::invalid_argument("hard_cluster: empty graph");
    ClusterSet out;
    out.level = g.level;
    out.overlap_allowed = false;
    if (n == 1) {
        out.clusters = {{0}};
        return out;
    }
    std::vector<std::vector<int>> scope(n);
    for (const auto& [key, p] : probs.values) {
        scope[key.first].push_back(key.second);
        scope[key.second].push_back(key.first);
    }
    std::vector<std::vector<int>> link(n);
    for (int u = 0; u < n; ++u) {
        int best = -1;
        double best_p = -1.0;
        if (scope[u].empty()) {
            if (!pair_fallback)
                throw std::runtime_error("hard_cluster: node " + std::to_string(u) +
                                         " has no scored partner and no fallback");
            for (int v = 0; v < n; ++v) {
                if (v == u) continue;
                const double p = pair_fallback(u, v);
                if (p > best_p || (p == best_p && v < best)) {
                    best = v;
                    best_p = p;
                }
            }
        } else {
            std::sort(scope[u].begin(), scope[u].end());
            for (int v : scope[u]) {
                const double p = probs.at(u, v);
                if (p > best_p || (p == best_p && v < best)) {
                    best = v;
                    best_p = p;
                }
            }
        }
        link[u].push_back(best);
        link[best].push_back(u);
    }
    // components by breadth-first traversal over the link lists
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    for (int s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<int> stack{s};
        comp[s] = ncomp;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v : link[u])
                if (comp[v] < 0) {
                    comp[v] = ncomp;
                    stack.push_back(v);
                }
        }
        ++ncomp;
    }
    out.clusters.assign(ncomp, {});
    for (int u = 0; u < n; ++u) out.clusters[comp[u]].push_back(u);
    detail::canonicalize(out);
    return out;
}

// Hyper-edges: clusters are connected iff some level edge crosses them.
// Shared members alone do not connect overlapping clusters.
inline std::vector<std::pair<int, int>> lift_edges(const LevelGraph& g, const ClusterSet& clusters) {
    const int n = g.size();
    std::vector<std::vector<int>> containing(n);
    for (int c = 0; c < clusters.size(); ++c)
        for (int v : clusters.clusters[c]) containing[v].push_back(c);
    std::set<std::pair<int, int>> out;
    for (const auto& [u, v] : g.edges) {
        for (int cu : containing[u])
            for (int cv : containing[v]) {
                if (cu == cv) continue;
                out.emplace(std::min(cu, cv), std::max(cu, cv));
            }
    }
    return {out.begin(), out.end()};
}

// Next-level features: member mean plus the highest-density member's
// embedding (ties toward the smaller id).
inline Matrix aggregate(const ClusterSet& clusters, const NodeEmbeddings& h, const std::vector<double>& densities,
                        std::vector<int>* representatives = nullptr) {
    const int d = h.cols();
    Matrix out(clusters.size(), d);
    if (representatives) representatives->assign(clusters.size(), -1);
    for (int c = 0; c < clusters.size(); ++c) {
        const auto& mem = clusters.clusters[c];
        if (mem.empty()) throw std::invalid_argument("aggregate: empty cluster");
        int rep = mem[0];
        for (int z : mem) {
            if (densities[z] > densities[rep]) rep = z;
            const auto row = h.row(z);
            for (int j = 0; j < d; ++j) out(c, j) += row[j];
        }
        const double inv = 1.0 / static_cast<double>(mem.size());
        const auto rrow = h.row(rep);
        for (int j = 0; j < d; ++j) out(c, j) = out(c, j) * inv + rrow[j];
        if (representatives) (*representatives)[c] = rep;
    }
    return out;
}

// Optional scoring override for the hierarchy driver: given the level graph
// and two node indices, return a symmetrized same-cluster probability.
using PairProbOracle = std::function<double(const LevelGraph&, int, int)>;

struct BuildConfig {
    double p_tau = 0.5;
    Scope scope = Scope::neighbors;
    int root_size = 3;
    int max_levels = 4;
    PairProbOracle oracle;  // replaces the trained scorer when set
};

struct Hierarchy {
    std::vector<LevelGraph> levels;
    std::vector<ClusterSet> assignments;            // assignments[l] produced levels[l+1]
    std::vector<std::vector<double>> densities;     // per level; empty for the unscored top
    std::vector<std::string> base_ids;
    BuildConfig config;

    int num_levels() const { return static_cast<int>(levels.size()); }
};

namespace detail {

inline LevelScores score_with_oracle(const LevelGraph& g, const PairProbOracle& oracle, Scope scope) {
    LevelScores s;
    s.h = g.features;  // oracle mode needs no encoder
    if (scope == Scope::all_pairs) {
        for (int u = 0; u < g.size(); ++u)
            for (int v = u + 1; v < g.size(); ++v) s.probs.set(u, v, oracle(g, u, v));
    } else {
        for (const auto& [u, v] : g.edges) s.probs.set(u, v, oracle(g, u, v));
    }
    s.density.resize(g.size());
    for (int u = 0; u < g.size(); ++u) s.density[u] = node_density(g, s.h, s.probs, u);
    return s;
}

inline std::string hyper_node_id(int level, int index) {
    return "L" + std::to_string(level) + "/" + std::to_string(index);
}

}  // namespace detail

// The level-by-level driver: soft clustering at level 1, hard clustering
// above, stopping at root_size nodes, max_levels, or no progress.
inline Hierarchy build_hierarchy(const CitationGraph& graph, const EmbeddingMatrix& x, const EncoderParams& params,
                                 const BuildConfig& config) {
    if (graph.size() == 0) throw std::invalid_argument("build_hierarchy: empty graph");
    Hierarchy hier;
    hier.config = config;
    for (const auto& n : graph.nodes) hier.base_ids.push_back(n.id);
    hier.levels.push_back(init_level_graph(graph, x));

    while (true) {
        const LevelGraph& cur = hier.levels.back();
        if (cur.size() <= config.root_size) break;
        if (cur.level >= config.max_levels) break;

        LevelScores scores = config.oracle ? detail::score_with_oracle(cur, config.oracle, config.scope)
                                           : score_level(cur, params, config.scope);
        ClusterSet clusters;
        if (cur.level == 1) {
            clusters = soft_cluster_level1(cur, scores.probs, scores.density, config.p_tau);
        } else {
            std::function<double(int, int)> fallback;
            if (config.oracle) {
                fallback = [&](int u, int v) { return config.oracle(cur, u, v); };
            } else {
                fallback = [&](int u, int v) { return symmetrized_pair_prob(scores.h, u, v, params, cur.level); };
            }
            clusters = hard_cluster(cur, scores.probs, fallback);
        }
        if (clusters.size() == cur.size()) {
            hier.densities.push_back(std::move(scores.density));
            break;  // no progress; retain the last level
        }

        LevelGraph next;
        next.level = cur.level + 1;
        next.features = aggregate(clusters, scores.h, scores.density);
        next.members.resize(clusters.size());
        for (int c = 0; c < clusters.size(); ++c) {
            next.node_ids.push_back(detail::hyper_node_id(next.level, c));
            std::set<int> mem;
            for (int v : clusters.clusters[c]) mem.insert(cur.members[v].begin(), cur.members[v].end());
            next.members[c].assign(mem.begin(), mem.end());
        }
        next.edges = lift_edges(cur, clusters);
        next.finalize_edges();

        hier.densities.push_back(std::move(scores.density));
        hier.assignments.push_back(std::move(clusters));
        hier.levels.push_back(std::move(next));
    }
    while (hier.densities.size() < hier.levels.size()) hier.densities.emplace_back();
    return hier;
}

// ---------------------------------------------------------------------------
// Hierarchy dump (stable JSON schema, clusters sorted by smallest member id)
// ---------------------------------------------------------------------------

inline nlohmann::json hierarchy_to_json(const Hierarchy& h) {
    nlohmann::json j;
    j["version"] = 1;
    j["base_ids"] = h.base_ids;
    j["config"] = {{"p_tau", h.config.p_tau},
                   {"scope", h.config.scope == Scope::all_pairs ? "all_pairs" : "neighbors"},
                   {"root_size", h.config.root_size},
                   {"max_levels", h.config.max_levels}};
    nlohmann::json levels = nlohmann::json::array();
    for (size_t l = 0; l < h.levels.size(); ++l) {
        const auto& g = h.levels[l];
        nlohmann::json jl;
        jl["level"] = g.level;
        jl["node_ids"] = g.node_ids;
        nlohmann::json edges = nlohmann::json::array();
        for (const auto& [u, v] : g.edges) edges.push_back({u, v});
        jl["edges"] = edges;
        jl["members"] = g.members;
        jl["densities"] = l < h.densities.size() ? h.densities[l] : std::vector<double>{};
        nlohmann::json feats = nlohmann::json::array();
        for (int i = 0; i < g.features.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < g.features.cols(); ++c) row.push_back(g.features(i, c));
            feats.push_back(row);
        }
        jl["features"] = feats;
        levels.push_back(jl);
    }
    j["levels"] = levels;
    nlohmann::json assigns = nlohmann::json::array();
    for (const auto& cs : h.assignments) {
        nlohmann::json jc;
        jc["level"] = cs.level;
        jc["overlap_allowed"] = cs.overlap_allowed;
        jc["clusters"] = cs.clusters;
        assigns.push_back(jc);
    }
    j["assignments"] = assigns;
    return j;
}

inline void save_hierarchy(const Hierarchy& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write hierarchy file: " + path);
    f << hierarchy_to_json(h).dump(2) << '\n';
}

inline Hierarchy load_hierarchy(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open hierarchy file: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (j.value("version", 0) != 1) throw std::runtime_error("hierarchy file: unsupported version");
    Hierarchy h;
    h.base_ids = j.at("base_ids").get<std::vector<std::string>>();
    const auto& jc = j.at("config");
    h.config.p_tau = jc.at("p_tau").get<double>();
    h.config.scope = jc.at("scope").get<std::string>() == "all_pairs" ? Scope::all_pairs : Scope::neighbors;
    h.config.root_size = jc.at("root_size").get<int>();
    h.config.max_levels = jc.at("max_levels").get<int>();
    for (const auto& jl : j.at("levels")) {
        LevelGraph g;
        g.level = jl.at("level").get<int>();
        g.node_ids = jl.at("node_ids").get<std::vector<std::string>>();
        for (const auto& e : jl.at("edges")) g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        g.members = jl.at("members").get<std::vector<std::vector<int>>>();
        const auto feats = jl.at("features").get<std::vector<std::vector<double>>>();
        if (!feats.empty()) {
            g.features = Matrix(static_cast<int>(feats.size()), static_cast<int>(feats[0].size()));
            for (size_t i = 0; i < feats.size(); ++i)
                for (size_t c = 0; c < feats[i].size(); ++c) g.features(static_cast<int>(i), static_cast<int>(c)) = feats[i][c];
        }
        g.finalize_edges();
        h.levels.push_back(std::move(g));
        h.densities.push_back(jl.at("densities").get<std::vector<double>>());
    }
    for (const auto& ja : j.at("assignments")) {
        ClusterSet cs;
        cs.level = ja.at("level").get<int>();
        cs.overlap_allowed = ja.at("overlap_allowed").get<bool>();
        cs.clusters = ja.at("clusters").get<std::vector<std::vector<int>>>();
        h.assignments.push_back(std::move(cs));
    }
    return h;
}

}  // namespace taxograph
