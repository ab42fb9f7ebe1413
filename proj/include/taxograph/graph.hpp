#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "taxograph/matrix.hpp"

namespace taxograph {

struct PaperNode {
    std::string id;
    std::string title;
    std::string abstract_text;
};

// Which text fields feed the offline embedder.
enum class TextFields { title_and_abstract, title_only, abstract_only };

inline std::string node_text(const PaperNode& n, TextFields fields = TextFields::title_and_abstract) {
    switch (fields) {
        case TextFields::title_only: return n.title;
        case TextFields::abstract_only: return n.abstract_text;
        default: break;
    }
    if (n.title.empty()) return n.abstract_text;
    if (n.abstract_text.empty()) return n.title;
    return n.title + " " + n.abstract_text;
}

// Directed citation graph. Edges are (citing, cited) index pairs, validated,
// self-loop free and deduplicated after ingestion.
struct CitationGraph {
    std::vector<PaperNode> nodes;
    std::vector<std::pair<int, int>> edges;
    std::unordered_map<std::string, int> index;

    int size() const { return static_cast<int>(nodes.size()); }

    int index_of(const std::string& id) const {
        auto it = index.find(id);
        if (it == index.end()) throw std::runtime_error("unknown node id: " + id);
        return it->second;
    }

    void rebuild_index() {
        index.clear();
        for (int i = 0; i < size(); ++i) {
            if (!index.emplace(nodes[i].id, i).second)
                throw std::runtime_error("duplicate node id: " + nodes[i].id);
        }
    }
};

struct IngestStats {
    int self_loops_dropped = 0;
    int duplicate_edges_dropped = 0;
    int embedding_rows_ignored = 0;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace detail

// Nodes file: one record per line, "id<TAB>title<TAB>abstract".
// Edges file: one record per line, "citing_id<TAB>cited_id".
inline CitationGraph load_citation_graph(const std::string& nodes_path, const std::string& edges_path,
                                         IngestStats* stats = nullptr) {
    std::ifstream nf(nodes_path);
    if (!nf) throw std::runtime_error("cannot open nodes file: " + nodes_path);
    CitationGraph g;
    std::string line;
    int lineno = 0;
    while (std::getline(nf, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 3)
            throw std::runtime_error(nodes_path + ":" + std::to_string(lineno) +
                                     ": expected 3 tab-separated fields, got " + std::to_string(fields.size()));
        PaperNode n{fields[0], fields[1], fields[2]};
        if (n.id.empty())
            throw std::runtime_error(nodes_path + ":" + std::to_string(lineno) + ": empty node id");
        if (n.title.empty() && n.abstract_text.empty())
            throw std::runtime_error(nodes_path + ":" + std::to_string(lineno) + ": node '" + n.id +
                                     "' has neither title nor abstract");
        g.nodes.push_back(std::move(n));
    }
    g.rebuild_index();

    std::ifstream ef(edges_path);
    if (!ef) throw std::runtime_error("cannot open edges file: " + edges_path);
    std::set<std::pair<int, int>> seen;
    IngestStats local;
    lineno = 0;
    while (std::getline(ef, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 2)
            throw std::runtime_error(edges_path + ":" + std::to_string(lineno) +
                                     ": expected 2 tab-separated fields, got " + std::to_string(fields.size()));
        auto src = g.index.find(fields[0]);
        auto dst = g.index.find(fields[1]);
        if (src == g.index.end())
            throw std::runtime_error(edges_path + ":" + std::to_string(lineno) + ": dangling edge endpoint '" +
                                     fields[0] + "'");
        if (dst == g.index.end())
            throw std::runtime_error(edges_path + ":" + std::to_string(lineno) + ": dangling edge endpoint '" +
                                     fields[1] + "'");
        if (src->second == dst->second) {
            ++local.self_loops_dropped;
            continue;
        }
        if (!seen.emplace(src->second, dst->second).second) {
            ++local.duplicate_edges_dropped;
            continue;
        }
    }
    g.edges.assign(seen.begin(), seen.end());
    if (stats) *stats = local;
    return g;
}

inline void save_citation_graph(const CitationGraph& g, const std::string& nodes_path,
                                const std::string& edges_path) {
    std::ofstream nf(nodes_path);
    if (!nf) throw std::runtime_error("cannot write nodes file: " + nodes_path);
    for (const auto& n : g.nodes) nf << n.id << '\t' << n.title << '\t' << n.abstract_text << '\n';
    std::ofstream ef(edges_path);
    if (!ef) throw std::runtime_error("cannot write edges file: " + edges_path);
    for (const auto& [u, v] : g.edges) ef << g.nodes[u].id << '\t' << g.nodes[v].id << '\n';
}

using EmbeddingMatrix = Matrix;

// Embeddings file: one record per line, "id<TAB>v1 v2 v3 ...".
// Rows are reordered to graph node order; rows for unknown ids are skipped.
inline EmbeddingMatrix load_embeddings(const std::string& path, const CitationGraph& graph,
                                       IngestStats* stats = nullptr) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open embeddings file: " + path);
    std::string line;
    int lineno = 0;
    int dim = -1;
    std::vector<std::vector<double>> rows(graph.size());
    std::vector<bool> have(graph.size(), false);
    int ignored = 0;
    while (std::getline(f, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'id<TAB>values'");
        const std::string id = line.substr(0, tab);
        auto it = graph.index.find(id);
        if (it == graph.index.end()) {
            ++ignored;
            continue;
        }
        std::istringstream vs(line.substr(tab + 1));
        std::vector<double> row;
        double v;
        while (vs >> v) {
            if (!std::isfinite(v))
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": non-finite value for '" + id + "'");
            row.push_back(v);
        }
        if (dim < 0) dim = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != dim)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": dimension mismatch for '" + id +
                                     "' (got " + std::to_string(row.size()) + ", expected " + std::to_string(dim) + ")");
        rows[it->second] = std::move(row);
        have[it->second] = true;
    }
    if (dim < 2) throw std::runtime_error(path + ": embedding dimension must be >= 2");
    for (int i = 0; i < graph.size(); ++i)
        if (!have[i]) throw std::runtime_error(path + ": missing embedding for node id '" + graph.nodes[i].id + "'");
    Matrix m(graph.size(), dim);
    for (int i = 0; i < graph.size(); ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = rows[i][j];
    if (stats) stats->embedding_rows_ignored = ignored;
    return m;
}

inline void save_embeddings(const EmbeddingMatrix& x, const CitationGraph& graph, const std::string& path) {
    if (x.rows() != graph.size()) throw std::invalid_argument("save_embeddings: row count mismatch");
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write embeddings file: " + path);
    f.precision(17);
    for (int i = 0; i < x.rows(); ++i) {
        f << graph.nodes[i].id << '\t';
        for (int j = 0; j < x.cols(); ++j) {
            if (j) f << ' ';
            f << x(i, j);
        }
        f << '\n';
    }
}

namespace detail {

inline uint64_t fnv1a64(const std::string& s, uint64_t seed) {
    uint64_t h = 1469598103934665603ULL ^ (seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace detail

// Deterministic offline substitute for a language-model embedder: seeded
// hashed bag-of-tokens, L2-normalized per row.
inline EmbeddingMatrix fallback_embed(const CitationGraph& graph, int dim, uint64_t seed,
                                      TextFields fields = TextFields::title_and_abstract) {
    if (dim < 2) throw std::invalid_argument("fallback_embed: dim must be >= 2");
    Matrix m(graph.size(), dim);
    for (int i = 0; i < graph.size(); ++i) {
        const std::string text = node_text(graph.nodes[i], fields);
        auto tokens = detail::tokenize(text);
        if (tokens.empty())
            throw std::runtime_error("fallback_embed: node '" + graph.nodes[i].id + "' has no text to embed");
        for (const auto& t : tokens) {
            const int bucket = static_cast<int>(detail::fnv1a64(t, seed) % static_cast<uint64_t>(dim));
            m(i, bucket) += 1.0;
        }
        const double n = norm2(m.row(i));
        for (int j = 0; j < dim; ++j) m(i, j) /= n;
    }
    return m;
}

// Level-l (hyper-)graph: undirected edges, per-node features, and the set of
// base papers each node coarsens to (singletons at level 1).
struct LevelGraph {
    int level = 1;
    std::vector<std::string> node_ids;
    std::vector<std::pair<int, int>> edges;  // undirected, stored u < v, sorted, unique
    Matrix features;
    std::vector<std::vector<int>> members;  // base node indices, sorted
    std::vector<std::vector<int>> adj;      // derived from edges, sorted

    int size() const { return static_cast<int>(node_ids.size()); }

    void finalize_edges() {
        for (auto& e : edges)
            if (e.first > e.second) std::swap(e.first, e.second);
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        adj.assign(node_ids.size(), {});
        for (const auto& [u, v] : edges) {
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        for (auto& a : adj) std::sort(a.begin(), a.end());
    }

    int index_of(const std::string& id) const {
        auto it = std::find(node_ids.begin(), node_ids.end(), id);
        if (it == node_ids.end()) throw std::runtime_error("unknown node id: " + id);
        return static_cast<int>(it - node_ids.begin());
    }
};

// Level-1 graph: citation edges folded to their undirected view, singleton
// membership, features row-aligned with the citation graph.
inline LevelGraph init_level_graph(const CitationGraph& graph, const EmbeddingMatrix& x) {
    if (x.rows() != graph.size()) throw std::invalid_argument("init_level_graph: embeddings misaligned with graph");
    LevelGraph lg;
    lg.level = 1;
    lg.node_ids.reserve(graph.nodes.size());
    for (const auto& n : graph.nodes) lg.node_ids.push_back(n.id);
    lg.features = x;
    lg.members.resize(graph.size());
    for (int i = 0; i < graph.size(); ++i) lg.members[i] = {i};
    lg.edges.reserve(graph.edges.size());
    for (const auto& [u, v] : graph.edges) lg.edges.emplace_back(u, v);
    lg.finalize_edges();
    return lg;
}

// Undirected neighborhood of node u, excluding u itself.
inline const std::vector<int>& neighbors(const LevelGraph& lg, int u) {
    if (u < 0 || u >= lg.size()) throw std::out_of_range("neighbors: node index out of range");
    return lg.adj[u];
}

inline std::vector<std::string> neighbors(const LevelGraph& lg, const std::string& id) {
    const int u = lg.index_of(id);
    std::vector<std::string> out;
    for (int v : lg.adj[u]) out.push_back(lg.node_ids[v]);
    return out;
}

}  // namespace taxograph
