#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taxograph/encoder.hpp"
#include "taxograph/graph.hpp"

namespace taxograph {

// Per level, cluster ids per base paper. Level 1 may assign several ids to a
// paper; higher levels must assign exactly one.
struct GoldHierarchyLabels {
    std::vector<std::vector<std::vector<int>>> assign;  // [level][node] -> sorted cluster ids

    int num_levels() const { return static_cast<int>(assign.size()); }
    int num_nodes() const { return assign.empty() ? 0 : static_cast<int>(assign[0].size()); }

    bool same_cluster(int level, int u, int v) const {
        const auto& a = assign[level][u];
        const auto& b = assign[level][v];
        for (int x : a)
            if (std::binary_search(b.begin(), b.end(), x)) return true;
        return false;
    }

    void validate() const {
        for (int l = 0; l < num_levels(); ++l) {
            if (static_cast<int>(assign[l].size()) != num_nodes())
                throw std::runtime_error("labels: level " + std::to_string(l + 1) + " covers a different node count");
            for (size_t u = 0; u < assign[l].size(); ++u) {
                if (assign[l][u].empty())
                    throw std::runtime_error("labels: node " + std::to_string(u) + " unlabeled at level " +
                                             std::to_string(l + 1));
                if (l >= 1 && assign[l][u].size() != 1)
                    throw std::runtime_error("labels: node " + std::to_string(u) + " has multiple clusters at level " +
                                             std::to_string(l + 1) + " (only level 1 may overlap)");
            }
        }
    }
};

// Labels file: "level<TAB>paper_id<TAB>cluster_id[,cluster_id...]" per line.
inline GoldHierarchyLabels load_labels(const std::string& path, const CitationGraph& graph) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open labels file: " + path);
    std::map<int, std::vector<std::vector<int>>> by_level;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 3)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'level<TAB>id<TAB>clusters'");
        const int level = std::stoi(fields[0]);
        if (level < 1) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": level must be >= 1");
        const int node = graph.index_of(fields[1]);
        auto& lv = by_level[level];
        if (lv.empty()) lv.resize(graph.size());
        std::vector<int>& ids = lv[node];
        std::string cur;
        for (char c : fields[2] + ",") {
            if (c == ',') {
                if (!cur.empty()) ids.push_back(std::stoi(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    }
    GoldHierarchyLabels out;
    int expect = 1;
    for (auto& [level, lv] : by_level) {
        if (level != expect)
            throw std::runtime_error(path + ": levels must be contiguous from 1, missing level " +
                                     std::to_string(expect));
        ++expect;
        out.assign.push_back(std::move(lv));
    }
    out.validate();
    return out;
}

inline void save_labels(const GoldHierarchyLabels& labels, const CitationGraph& graph, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write labels file: " + path);
    for (int l = 0; l < labels.num_levels(); ++l)
        for (int u = 0; u < labels.num_nodes(); ++u) {
            f << (l + 1) << '\t' << graph.nodes[u].id << '\t';
            const auto& ids = labels.assign[l][u];
            for (size_t k = 0; k < ids.size(); ++k) {
                if (k) f << ',';
                f << ids[k];
            }
            f << '\n';
        }
}

struct TrainConfig {
    double alpha = 1.0;               // contrastive weight
    double tau = 0.1;                 // contrastive temperature
    std::vector<double> delta;        // per-level weights; empty = all 1
    double lambda = 1.0;              // joint objective weight
    double p_tau = 0.5;
    double learning_rate = 0.02;
    int epochs = 500;
    uint64_t seed = 7;
    int patience = 10;
    double val_fraction = 0.1;

    double delta_for(int level) const {
        if (delta.empty()) return 1.0;
        const int i = std::min<int>(level - 1, static_cast<int>(delta.size()) - 1);
        return delta[std::max(i, 0)];
    }

    void validate() const {
        if (alpha < 0) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
        if (tau <= 0) throw std::invalid_argument("TrainConfig: tau must be > 0");
        if (lambda < 0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
        for (double d : delta)
            if (d < 0) throw std::invalid_argument("TrainConfig: delta weights must be >= 0");
    }
};

// One supervised instance at some level: hyper-node pair and a binary label.
struct SupervisedPair {
    int u = 0;
    int v = 0;
    double q = 0.0;
};

constexpr double kProbClamp = 1e-12;

inline double bce(double p, double q) {
    p = std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
    return -(q * std::log(p) + (1.0 - q) * std::log(1.0 - p));
}

// Per-level mean binary cross-entropy over supervised pairs, summed across
// levels. Levels with no pairs contribute 0.
inline double cluster_loss(const std::vector<std::vector<SupervisedPair>>& pairs_per_level,
                           const std::vector<PairProbTable>& probs_per_level) {
    if (pairs_per_level.size() != probs_per_level.size())
        throw std::invalid_argument("cluster_loss: level count mismatch");
    double total = 0.0;
    for (size_t l = 0; l < pairs_per_level.size(); ++l) {
        const auto& pairs = pairs_per_level[l];
        if (pairs.empty()) continue;
        double acc = 0.0;
        for (const auto& sp : pairs) acc += bce(probs_per_level[l].at(sp.u, sp.v), sp.q);
        total += acc / static_cast<double>(pairs.size());
    }
    return total;
}

// Positive sets per level per node: same-cluster partners (any shared id).
inline std::vector<std::vector<std::vector<int>>> positives_from_labels(const GoldHierarchyLabels& labels) {
    const int n = labels.num_nodes();
    std::vector<std::vector<std::vector<int>>> out(labels.num_levels());
    for (int l = 0; l < labels.num_levels(); ++l) {
        out[l].resize(n);
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v)
                if (v != u && labels.same_cluster(l, u, v)) out[l][u].push_back(v);
    }
    return out;
}

// Hierarchical multi-level contrastive loss over base-level embeddings.
// sim is cosine; nodes with no positives at a level contribute 0 there.
inline double multilevel_contrastive_loss(const NodeEmbeddings& h, const std::vector<std::vector<std::vector<int>>>& positives,
                            const TrainConfig& cfg) {
    const int n = h.rows();
    if (n < 2) throw std::invalid_argument("multilevel_contrastive_loss: need at least 2 nodes");
    cfg.validate();
    const int num_levels = static_cast<int>(positives.size());
    if (num_levels == 0) return 0.0;
    // pairwise cosines once
    Matrix c(n, n);
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            const double cv = cosine(h.row(u), h.row(v));
            c(u, v) = cv;
            c(v, u) = cv;
        }
    // log-denominators: logsumexp over v != u of c_uv / tau
    std::vector<double> logden(n);
    for (int u = 0; u < n; ++u) {
        double mx = -1e300;
        for (int v = 0; v < n; ++v)
            if (v != u) mx = std::max(mx, c(u, v) / cfg.tau);
        double s = 0.0;
        for (int v = 0; v < n; ++v)
            if (v != u) s += std::exp(c(u, v) / cfg.tau - mx);
        logden[u] = mx + std::log(s);
    }
    double total = 0.0;
    for (int l = 0; l < num_levels; ++l) {
        const double dl = cfg.delta_for(l + 1);
        for (int u = 0; u < n; ++u) {
            const auto& pos = positives[l][u];
            if (pos.empty()) continue;
            double acc = 0.0;
            for (int k : pos) acc += c(u, k) / cfg.tau - logden[u];
            total += -dl * acc / static_cast<double>(pos.size());
        }
    }
    return total / static_cast<double>(num_levels);
}

// Combined pre-training objective.
inline double combined_clustering_loss(const std::vector<std::vector<SupervisedPair>>& pairs_per_level,
                             const std::vector<PairProbTable>& probs_per_level, const NodeEmbeddings& h,
                             const std::vector<std::vector<std::vector<int>>>& positives, const TrainConfig& cfg) {
    return cluster_loss(pairs_per_level, probs_per_level) + cfg.alpha * multilevel_contrastive_loss(h, positives, cfg);
}

// Sum of generated-token log-probabilities over all clusters; unavailable
// when any cluster lacks token scores.
inline std::optional<double> generation_loss(
    const std::vector<std::optional<std::vector<double>>>& token_logprobs_per_cluster) {
    double total = 0.0;
    for (const auto& lp : token_logprobs_per_cluster) {
        if (!lp.has_value()) return std::nullopt;
        for (double v : *lp) total += v;
    }
    return total;
}

inline std::optional<double> joint_objective(std::optional<double> gen, double clustering, double lambda) {
    if (!gen.has_value()) return std::nullopt;
    return *gen + lambda * clustering;
}

}  // namespace taxograph
