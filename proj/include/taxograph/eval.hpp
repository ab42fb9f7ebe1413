#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxograph/cluster.hpp"
#include "taxograph/losses.hpp"
#include "taxograph/matrix.hpp"

namespace taxograph {

// Fraction of unordered node pairs on which prediction and gold agree about
// same-cluster membership; overlap uses the any-shared-cluster rule.
inline double pairwise_accuracy(const ClusterSet& pred, const std::vector<std::vector<int>>& gold) {
    const int n = static_cast<int>(gold.size());
    std::vector<std::vector<int>> pred_of(n);
    for (int c = 0; c < pred.size(); ++c)
        for (int v : pred.clusters[c]) {
            if (v < 0 || v >= n) throw std::invalid_argument("pairwise_accuracy: node universe mismatch");
            pred_of[v].push_back(c);
        }
    for (int v = 0; v < n; ++v) {
        if (pred_of[v].empty()) throw std::invalid_argument("pairwise_accuracy: node universe mismatch");
        std::sort(pred_of[v].begin(), pred_of[v].end());
    }
    auto shares = [](const std::vector<int>& a, const std::vector<int>& b) {
        for (int x : a)
            if (std::binary_search(b.begin(), b.end(), x)) return true;
        return false;
    };
    if (n < 2) return 1.0;
    long long agree = 0, total = 0;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            const bool p = shares(pred_of[u], pred_of[v]);
            const bool g = shares(gold[u], gold[v]);
            agree += (p == g);
            ++total;
        }
    return static_cast<double>(agree) / static_cast<double>(total);
}

// Lloyd iteration with seeded farthest-first initialization.
inline ClusterSet kmeans_baseline(const Matrix& x, int k, uint64_t seed, int max_iters = 100, double tol = 1e-6) {
    const int n = x.rows();
    if (k < 1 || k > n) throw std::invalid_argument("kmeans: k out of range");
    RngStream rng(seed);
    const int d = x.cols();

    auto dist2 = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            const double t = a[j] - b[j];
            s += t * t;
        }
        return s;
    };

    // farthest-first: random first center, then maximize distance to the set
    std::vector<int> center_idx{rng.uniform_int(n)};
    std::vector<double> min_d2(n, 0.0);
    for (int i = 0; i < n; ++i) min_d2[i] = dist2(x.row(i), x.row(center_idx[0]));
    while (static_cast<int>(center_idx.size()) < k) {
        int far = 0;
        for (int i = 1; i < n; ++i)
            if (min_d2[i] > min_d2[far]) far = i;
        center_idx.push_back(far);
        for (int i = 0; i < n; ++i) min_d2[i] = std::min(min_d2[i], dist2(x.row(i), x.row(far)));
    }
    Matrix centers(k, d);
    for (int c = 0; c < k; ++c)
        for (int j = 0; j < d; ++j) centers(c, j) = x(center_idx[c], j);

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = dist2(x.row(i), centers.row(0));
            for (int c = 1; c < k; ++c) {
                const double dd = dist2(x.row(i), centers.row(c));
                if (dd < bd) {
                    bd = dd;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        Matrix next(k, d);
        std::vector<int> count(k, 0);
        for (int i = 0; i < n; ++i) {
            ++count[assign[i]];
            for (int j = 0; j < d; ++j) next(assign[i], j) += x(i, j);
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (count[c] == 0) continue;  // empty cluster keeps its centroid
            for (int j = 0; j < d; ++j) {
                next(c, j) /= count[c];
                shift = std::max(shift, std::abs(next(c, j) - centers(c, j)));
                centers(c, j) = next(c, j);
            }
        }
        if (!changed || shift < tol) break;
    }

    ClusterSet out;
    out.level = 1;
    out.overlap_allowed = false;
    out.clusters.assign(k, {});
    for (int i = 0; i < n; ++i) out.clusters[assign[i]].push_back(i);
    out.clusters.erase(std::remove_if(out.clusters.begin(), out.clusters.end(),
                                      [](const std::vector<int>& c) { return c.empty(); }),
                       out.clusters.end());
    detail::canonicalize(out);
    return out;
}

struct EvalRow {
    int level = 0;
    double model_accuracy = 0.0;
    double kmeans_accuracy = 0.0;
    int gold_clusters = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double model_average = 0.0;
    double kmeans_average = 0.0;
    uint64_t seed = 0;
    std::string metric = "pairwise same-cluster accuracy";
    int num_papers = 0;

    void finalize() {
        model_average = kmeans_average = 0.0;
        for (const auto& r : rows) {
            if (r.model_accuracy < 0.0 || r.model_accuracy > 1.0 || r.kmeans_accuracy < 0.0 ||
                r.kmeans_accuracy > 1.0)
                throw std::runtime_error("EvalReport: accuracy out of [0, 1]");
            model_average += r.model_accuracy;
            kmeans_average += r.kmeans_accuracy;
        }
        if (!rows.empty()) {
            model_average /= static_cast<double>(rows.size());
            kmeans_average /= static_cast<double>(rows.size());
        }
    }
};

// Clusters of base papers predicted at hierarchy level `level` (1-based
// assignment level): each cluster's base membership, as a ClusterSet over
// the paper universe.
inline ClusterSet base_clusters_at_level(const Hierarchy& h, int level) {
    if (level < 1 || level > static_cast<int>(h.assignments.size()))
        throw std::out_of_range("base_clusters_at_level: no assignment at level " + std::to_string(level));
    const auto& cs = h.assignments[level - 1];
    const auto& g = h.levels[level - 1];
    ClusterSet out;
    out.level = level;
    out.overlap_allowed = cs.overlap_allowed;
    for (const auto& cluster : cs.clusters) {
        std::set<int> mem;
        for (int v : cluster) mem.insert(g.members[v].begin(), g.members[v].end());
        out.clusters.emplace_back(mem.begin(), mem.end());
    }
    detail::canonicalize(out);
    return out;
}

inline EvalReport evaluate_hierarchy(const Hierarchy& h, const GoldHierarchyLabels& gold, const Matrix& x,
                                     uint64_t seed) {
    EvalReport report;
    report.seed = seed;
    report.num_papers = gold.num_nodes();
    const int levels = std::min<int>(static_cast<int>(h.assignments.size()), gold.num_levels());
    for (int l = 1; l <= levels; ++l) {
        EvalRow row;
        row.level = l;
        std::set<int> ids;
        for (int u = 0; u < gold.num_nodes(); ++u)
            for (int id : gold.assign[l - 1][u]) ids.insert(id);
        row.gold_clusters = static_cast<int>(ids.size());
        row.model_accuracy = pairwise_accuracy(base_clusters_at_level(h, l), gold.assign[l - 1]);
        row.kmeans_accuracy =
            pairwise_accuracy(kmeans_baseline(x, row.gold_clusters, seed), gold.assign[l - 1]);
        report.rows.push_back(row);
    }
    report.finalize();
    return report;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["metric"] = r.metric;
    j["seed"] = r.seed;
    j["num_papers"] = r.num_papers;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"level", row.level},
                        {"model_accuracy", row.model_accuracy},
                        {"kmeans_accuracy", row.kmeans_accuracy},
                        {"gold_clusters", row.gold_clusters}});
    j["levels"] = rows;
    j["model_average"] = r.model_average;
    j["kmeans_average"] = r.kmeans_average;
    return j;
}

inline void save_eval_report(const EvalReport& r, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write eval report: " + path);
    f << eval_report_to_json(r).dump(2) << '\n';
}

}  // namespace taxograph
