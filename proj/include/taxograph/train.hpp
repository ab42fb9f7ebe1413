#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxograph/encoder.hpp"
#include "taxograph/graph.hpp"
#include "taxograph/cluster.hpp"
#include "taxograph/losses.hpp"

namespace taxograph {

// ---------------------------------------------------------------------------
// Teacher-forced training structures
//
// Pre-training supervises pair scores level by level. Level-l hyper-nodes are
// the gold clusters of label level l-1, so the level structure is fixed by
// the labels while features flow through the encoder and the aggregation.
// A base edge (u, v) supervises the score of the hyper-nodes containing u and
// v at each level; pairs that collapse into one hyper-node are skipped.
// ---------------------------------------------------------------------------

struct LevelPlan {
    int level = 1;                                // 1-based hierarchy level
    int n = 0;                                    // node count at this level
    std::vector<std::vector<int>> nbrs;           // attention supports for the encoder
    std::vector<std::vector<int>> adj;            // plain adjacency (density)
    std::vector<SupervisedPair> pairs;            // supervised instances
    std::vector<int> train_idx, val_idx;          // split over `pairs`
    std::vector<std::pair<int, int>> pair_list;   // unordered pairs to score (edges + supervised)
    std::map<std::pair<int, int>, int> pair_pos;  // pair -> index into pair_list
    std::vector<std::vector<int>> next_clusters;  // grouping into the next level (empty at top)
};

struct TrainingPlan {
    std::vector<LevelPlan> levels;
    std::vector<std::vector<std::vector<int>>> positives;  // contrastive positives per label level
    Matrix base_features;
};

namespace detail {

inline void add_pair(LevelPlan& lp, int u, int v) {
    if (u == v) return;
    const auto key = PairProbTable::key(u, v);
    if (lp.pair_pos.emplace(key, static_cast<int>(lp.pair_list.size())).second) lp.pair_list.push_back(key);
}

inline int majority_label(const std::vector<int>& base_members, const std::vector<std::vector<int>>& assign_level) {
    std::map<int, int> counts;
    for (int u : base_members) counts[assign_level[u][0]]++;
    int best = -1, best_count = -1;
    for (const auto& [id, c] : counts)
        if (c > best_count) {
            best = id;
            best_count = c;
        }
    return best;
}

}  // namespace detail

inline TrainingPlan build_training_plan(const CitationGraph& graph, const Matrix& x,
                                        const GoldHierarchyLabels& labels) {
    labels.validate();
    if (labels.num_nodes() != graph.size()) throw std::invalid_argument("training plan: labels/graph size mismatch");
    if (x.rows() != graph.size()) throw std::invalid_argument("training plan: embeddings misaligned");
    TrainingPlan plan;
    plan.base_features = x;
    plan.positives = positives_from_labels(labels);

    // undirected base edges
    std::set<std::pair<int, int>> base_edges;
    for (const auto& [u, v] : graph.edges) base_edges.emplace(std::min(u, v), std::max(u, v));

    const int num_label_levels = labels.num_levels();
    // containment of each base node at each graph level (level index 0 = base)
    std::vector<std::vector<std::vector<int>>> contain(num_label_levels);
    std::vector<std::vector<std::vector<int>>> base_members;  // per graph level >= 1: node -> base nodes
    std::vector<std::vector<std::pair<int, int>>> level_edges(num_label_levels);

    contain[0].assign(graph.size(), {});
    for (int u = 0; u < graph.size(); ++u) contain[0][u] = {u};
    level_edges[0].assign(base_edges.begin(), base_edges.end());

    std::vector<int> level_sizes(num_label_levels);
    level_sizes[0] = graph.size();

    for (int gi = 1; gi < num_label_levels; ++gi) {
        // nodes = gold clusters at label level gi
        std::set<int> ids;
        for (int u = 0; u < graph.size(); ++u)
            for (int id : labels.assign[gi - 1][u]) ids.insert(id);
        std::map<int, int> id_to_node;
        for (int id : ids) id_to_node.emplace(id, static_cast<int>(id_to_node.size()));
        level_sizes[gi] = static_cast<int>(id_to_node.size());
        contain[gi].assign(graph.size(), {});
        for (int u = 0; u < graph.size(); ++u)
            for (int id : labels.assign[gi - 1][u]) contain[gi][u].push_back(id_to_node.at(id));
        std::vector<std::vector<int>> bm(id_to_node.size());
        for (int u = 0; u < graph.size(); ++u)
            for (int node : contain[gi][u]) bm[node].push_back(u);
        base_members.push_back(bm);
        // lifted edges through base containment
        std::set<std::pair<int, int>> le;
        for (const auto& [u, v] : base_edges)
            for (int a : contain[gi][u])
                for (int b : contain[gi][v])
                    if (a != b) le.emplace(std::min(a, b), std::max(a, b));
        level_edges[gi].assign(le.begin(), le.end());
    }

    for (int gi = 0; gi < num_label_levels; ++gi) {
        LevelPlan lp;
        lp.level = gi + 1;
        lp.n = level_sizes[gi];
        lp.adj.assign(lp.n, {});
        for (const auto& [u, v] : level_edges[gi]) {
            lp.adj[u].push_back(v);
            lp.adj[v].push_back(u);
            detail::add_pair(lp, u, v);
        }
        for (auto& a : lp.adj) std::sort(a.begin(), a.end());
        lp.nbrs.assign(lp.n, {});
        for (int u = 0; u < lp.n; ++u) {
            if (lp.adj[u].empty())
                lp.nbrs[u].push_back(u);
            else
                lp.nbrs[u] = lp.adj[u];
        }
        // supervised instances: base edges mapped to this level, label level gi+1
        for (const auto& [u, v] : base_edges) {
            const double q = labels.same_cluster(gi, u, v) ? 1.0 : 0.0;
            for (int a : contain[gi][u])
                for (int b : contain[gi][v]) {
                    if (a == b) continue;
                    lp.pairs.push_back({std::min(a, b), std::max(a, b), q});
                    detail::add_pair(lp, a, b);
                }
        }
        // grouping into the next level
        if (gi + 1 < num_label_levels) {
            lp.next_clusters.assign(level_sizes[gi + 1], {});
            if (gi == 0) {
                for (int u = 0; u < graph.size(); ++u)
                    for (int node : contain[1][u]) lp.next_clusters[node].push_back(u);
            } else {
                // map distinct cluster ids of the next label level to node indices
                std::set<int> ids;
                for (int u = 0; u < graph.size(); ++u)
                    for (int id : labels.assign[gi][u]) ids.insert(id);
                std::map<int, int> id_to_node;
                for (int id : ids) id_to_node.emplace(id, static_cast<int>(id_to_node.size()));
                for (int node = 0; node < level_sizes[gi]; ++node) {
                    const int parent_id = detail::majority_label(base_members[gi - 1][node], labels.assign[gi]);
                    lp.next_clusters[id_to_node.at(parent_id)].push_back(node);
                }
            }
            for (auto& c : lp.next_clusters) {
                std::sort(c.begin(), c.end());
                c.erase(std::unique(c.begin(), c.end()), c.end());
            }
        }
        plan.levels.push_back(std::move(lp));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Forward/backward through the teacher-forced hierarchy
// ---------------------------------------------------------------------------

struct LossParts {
    double total = 0.0;
    double cluster = 0.0;
    double contrastive = 0.0;
    double val_bce = 0.0;  // mean BCE on held-out pairs, summed over levels
};

struct LevelRuntime {
    Matrix features;
    EncodeTrace trace;
    Matrix h;
    std::vector<ScorerCache> cache_fwd, cache_rev;
    std::vector<double> p_sym;
    std::vector<double> density;
};

struct ForwardState {
    std::vector<LevelRuntime> levels;
    LossParts parts;
};

namespace detail {

inline double clamped(double p) { return std::min(1.0 - kProbClamp, std::max(kProbClamp, p)); }

// dL/d(cosine matrix) for the contrastive term; also returns the loss value.
inline double contrastive_with_grad(const Matrix& h, const std::vector<std::vector<std::vector<int>>>& positives,
                                 const TrainConfig& cfg, Matrix* d_h) {
    const int n = h.rows();
    const int num_levels = static_cast<int>(positives.size());
    if (num_levels == 0 || n < 2) return 0.0;
    Matrix c(n, n);
    std::vector<double> norms(n);
    for (int u = 0; u < n; ++u) norms[u] = norm2(h.row(u));
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            const double cv =
                (norms[u] == 0.0 || norms[v] == 0.0) ? 0.0 : dot(h.row(u), h.row(v)) / (norms[u] * norms[v]);
            c(u, v) = cv;
            c(v, u) = cv;
        }
    std::vector<double> logden(n);
    Matrix softmax(n, n);
    for (int u = 0; u < n; ++u) {
        double mx = -1e300;
        for (int v = 0; v < n; ++v)
            if (v != u) mx = std::max(mx, c(u, v) / cfg.tau);
        double s = 0.0;
        for (int v = 0; v < n; ++v)
            if (v != u) s += std::exp(c(u, v) / cfg.tau - mx);
        logden[u] = mx + std::log(s);
        if (d_h)
            for (int v = 0; v < n; ++v)
                if (v != u) softmax(u, v) = std::exp(c(u, v) / cfg.tau - logden[u]);
    }
    double total = 0.0;
    Matrix d_c;
    if (d_h) d_c = Matrix(n, n);
    for (int l = 0; l < num_levels; ++l) {
        const double dl = cfg.delta_for(l + 1);
        for (int u = 0; u < n; ++u) {
            const auto& pos = positives[l][u];
            if (pos.empty()) continue;
            const double inv = 1.0 / static_cast<double>(pos.size());
            double acc = 0.0;
            for (int k : pos) acc += c(u, k) / cfg.tau - logden[u];
            total += -dl * acc * inv;
            if (d_h) {
                for (int v = 0; v < n; ++v)
                    if (v != u) d_c(u, v) += dl / cfg.tau * softmax(u, v);
                for (int k : pos) d_c(u, k) -= dl / cfg.tau * inv;
            }
        }
    }
    const double scale = 1.0 / static_cast<double>(num_levels);
    total *= scale;
    if (d_h) {
        for (int u = 0; u < n; ++u) {
            if (norms[u] == 0.0) continue;
            for (int v = 0; v < n; ++v) {
                if (v == u || norms[v] == 0.0) continue;
                const double g = d_c(u, v) * scale;
                if (g == 0.0) continue;
                const auto hu = h.row(u);
                const auto hv = h.row(v);
                const double inv_uv = 1.0 / (norms[u] * norms[v]);
                const double cu2 = c(u, v) / (norms[u] * norms[u]);
                const double cv2 = c(u, v) / (norms[v] * norms[v]);
                for (int j = 0; j < h.cols(); ++j) {
                    (*d_h)(u, j) += g * (hv[j] * inv_uv - cu2 * hu[j]);
                    (*d_h)(v, j) += g * (hu[j] * inv_uv - cv2 * hv[j]);
                }
            }
        }
    }
    return total;
}

}  // namespace detail

// Full forward pass; when `grads` is given, runs the matching backward pass.
inline ForwardState training_forward(const TrainingPlan& plan, const EncoderParams& params, const TrainConfig& cfg,
                                      EncoderGrads* grads, bool use_split = true) {
    const int num_levels = static_cast<int>(plan.levels.size());
    ForwardState st;
    st.levels.resize(num_levels);
    Matrix features = plan.base_features;
    for (int gi = 0; gi < num_levels; ++gi) {
        const auto& lp = plan.levels[gi];
        auto& rt = st.levels[gi];
        rt.features = std::move(features);
        rt.h = encode_forward(lp.nbrs, rt.features, params, grads ? &rt.trace : nullptr);
        const auto& scorer = params.scorer_for_level(lp.level);
        const size_t np = lp.pair_list.size();
        rt.p_sym.resize(np);
        if (grads) {
            rt.cache_fwd.resize(np);
            rt.cache_rev.resize(np);
        }
        for (size_t i = 0; i < np; ++i) {
            const auto [u, v] = lp.pair_list[i];
            const double pf = scorer_forward(scorer, rt.h.row(u), rt.h.row(v), params.act_slope,
                                             grads ? &rt.cache_fwd[i] : nullptr);
            const double pr = scorer_forward(scorer, rt.h.row(v), rt.h.row(u), params.act_slope,
                                             grads ? &rt.cache_rev[i] : nullptr);
            rt.p_sym[i] = 0.5 * (pf + pr);
        }
        rt.density.assign(lp.n, 0.0);
        for (int u = 0; u < lp.n; ++u) {
            if (lp.adj[u].empty()) continue;
            double acc = 0.0;
            for (int k : lp.adj[u]) acc += rt.p_sym[lp.pair_pos.at(PairProbTable::key(u, k))] * cosine(rt.h.row(u), rt.h.row(k));
            rt.density[u] = acc / static_cast<double>(lp.adj[u].size());
        }
        if (gi + 1 < num_levels) {
            ClusterSet cs;
            cs.level = lp.level;
            cs.clusters = lp.next_clusters;
            features = aggregate(cs, rt.h, rt.density);
        }
    }

    // losses over the supervised split
    std::vector<std::vector<double>> d_p(num_levels);
    for (int gi = 0; gi < num_levels; ++gi) {
        const auto& lp = plan.levels[gi];
        auto& rt = st.levels[gi];
        d_p[gi].assign(lp.pair_list.size(), 0.0);
        const std::vector<int>* train = &lp.train_idx;
        std::vector<int> all_idx;
        if (!use_split) {
            all_idx.resize(lp.pairs.size());
            std::iota(all_idx.begin(), all_idx.end(), 0);
            train = &all_idx;
        }
        if (!train->empty()) {
            const double inv = 1.0 / static_cast<double>(train->size());
            double acc = 0.0;
            for (int idx : *train) {
                const auto& sp = lp.pairs[idx];
                const int pos = lp.pair_pos.at(PairProbTable::key(sp.u, sp.v));
                const double p = detail::clamped(rt.p_sym[pos]);
                acc += bce(rt.p_sym[pos], sp.q);
                if (grads && rt.p_sym[pos] > kProbClamp && rt.p_sym[pos] < 1.0 - kProbClamp)
                    d_p[gi][pos] += inv * (p - sp.q) / (p * (1.0 - p));
            }
            st.parts.cluster += acc * inv;
        }
        if (use_split && !lp.val_idx.empty()) {
            double acc = 0.0;
            for (int idx : lp.val_idx) {
                const auto& sp = lp.pairs[idx];
                acc += bce(rt.p_sym[lp.pair_pos.at(PairProbTable::key(sp.u, sp.v))], sp.q);
            }
            st.parts.val_bce += acc / static_cast<double>(lp.val_idx.size());
        }
    }

    Matrix d_h0;
    if (grads) d_h0 = Matrix(st.levels[0].h.rows(), st.levels[0].h.cols());
    st.parts.contrastive = detail::contrastive_with_grad(st.levels[0].h, plan.positives, cfg, grads ? &d_h0 : nullptr);
    st.parts.total = st.parts.cluster + cfg.alpha * st.parts.contrastive;

    if (!grads) return st;

    // backward, top level down
    Matrix d_h_next;  // gradient flowing into the previous level via aggregation
    for (int gi = num_levels - 1; gi >= 0; --gi) {
        const auto& lp = plan.levels[gi];
        auto& rt = st.levels[gi];
        Matrix d_h(rt.h.rows(), rt.h.cols());
        if (gi == 0)
            for (size_t i = 0; i < d_h.data().size(); ++i) d_h.data()[i] += cfg.alpha * d_h0.data()[i];
        if (gi + 1 < num_levels) {
            // aggregation backward: mean over members plus the representative
            const auto& clusters = lp.next_clusters;
            // recompute representatives the same way aggregate() does
            for (size_t c = 0; c < clusters.size(); ++c) {
                const auto& mem = clusters[c];
                int rep = mem[0];
                for (int z : mem)
                    if (rt.density[z] > rt.density[rep]) rep = z;
                const double inv = 1.0 / static_cast<double>(mem.size());
                for (int j = 0; j < d_h.cols(); ++j) {
                    const double g = d_h_next(static_cast<int>(c), j);
                    for (int z : mem) d_h(z, j) += g * inv;
                    d_h(rep, j) += g;
                }
            }
        }
        // scorer backward
        const auto& scorer = params.scorer_for_level(lp.level);
        auto scorer_grad_index = params.scorers.size() == 1
                                     ? 0
                                     : std::min<size_t>(static_cast<size_t>(std::max(lp.level - 1, 0)),
                                                        params.scorers.size() - 1);
        for (size_t i = 0; i < lp.pair_list.size(); ++i) {
            const double g = d_p[gi][i];
            if (g == 0.0) continue;
            const auto [u, v] = lp.pair_list[i];
            scorer_backward(scorer, rt.cache_fwd[i], params.act_slope, 0.5 * g, grads->scorers[scorer_grad_index],
                            d_h.row(u), d_h.row(v));
            scorer_backward(scorer, rt.cache_rev[i], params.act_slope, 0.5 * g, grads->scorers[scorer_grad_index],
                            d_h.row(v), d_h.row(u));
        }
        d_h_next = encode_backward(lp.nbrs, params, rt.trace, d_h, *grads);
    }
    return st;
}

// Scalar objective + gradient closure over the full teacher-forced pipeline.
inline std::function<double(EncoderParams&, EncoderGrads*)> make_training_objective(const CitationGraph& graph,
                                                                                     const Matrix& x,
                                                                                     const GoldHierarchyLabels& labels,
                                                                                     const TrainConfig& cfg) {
    auto plan = std::make_shared<TrainingPlan>(build_training_plan(graph, x, labels));
    const TrainConfig config = cfg;
    return [plan, config](EncoderParams& params, EncoderGrads* grads) {
        return training_forward(*plan, params, config, grads, /*use_split=*/false).parts.total;
    };
}

// ---------------------------------------------------------------------------
// Training loop (full-batch Adam with early stopping on held-out pairs)
// ---------------------------------------------------------------------------

struct EpochStats {
    int epoch = 0;
    double total = 0.0;
    double cluster = 0.0;
    double contrastive = 0.0;
    double val = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> trace;
    int best_epoch = -1;
    double best_val = 0.0;
    int val_pairs = 0;
    double val_accuracy = 0.0;
    int epochs_run = 0;
};

struct EncoderArch {
    int hidden_dim = 64;
    int num_layers = 2;
    int num_heads = 4;
    int scorer_hidden = 64;
    int num_scorers = 1;
};

struct TrainResult {
    EncoderParams params;
    TrainReport report;
};

inline TrainResult train_clustering(const CitationGraph& graph, const Matrix& x, const GoldHierarchyLabels& labels,
                                    const TrainConfig& cfg, const EncoderArch& arch = {}) {
    cfg.validate();
    TrainingPlan plan = build_training_plan(graph, x, labels);

    // seeded validation split per level
    RngStream split_rng(cfg.seed ^ 0xa5a5a5a5ULL);
    int val_total = 0;
    for (auto& lp : plan.levels) {
        const int m = static_cast<int>(lp.pairs.size());
        std::vector<int> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        int nval = m >= 5 ? static_cast<int>(std::floor(cfg.val_fraction * m)) : 0;
        for (int i = m - 1; i > 0; --i) std::swap(idx[i], idx[split_rng.uniform_int(i + 1)]);
        lp.val_idx.assign(idx.begin(), idx.begin() + nval);
        lp.train_idx.assign(idx.begin() + nval, idx.end());
        std::sort(lp.val_idx.begin(), lp.val_idx.end());
        std::sort(lp.train_idx.begin(), lp.train_idx.end());
        val_total += nval;
    }

    TrainResult result;
    result.params = EncoderParams::init(x.cols(), arch.hidden_dim, arch.num_layers, arch.num_heads,
                                        arch.scorer_hidden, cfg.seed, arch.num_scorers);
    EncoderParams best = result.params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    auto coords = param_coords(result.params);
    std::vector<double> m1(coords.size(), 0.0), m2(coords.size(), 0.0);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    auto metric_of = [&](const LossParts& p) { return val_total > 0 ? p.val_bce : p.total; };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EncoderGrads grads = EncoderGrads::zeros_like(result.params);
        ForwardState st = training_forward(plan, result.params, cfg, &grads);
        if (!std::isfinite(st.parts.total) || !std::isfinite(st.parts.val_bce))
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
        const double metric = metric_of(st.parts);
        result.report.trace.push_back({epoch, st.parts.total, st.parts.cluster, st.parts.contrastive, st.parts.val_bce});
        if (metric < best_val) {
            best_val = metric;
            best_epoch = epoch;
            best = result.params;
        }
        if (epoch - best_epoch > cfg.patience) break;
        // Adam step
        auto g = grad_coords(grads);
        const double t = static_cast<double>(epoch + 1);
        const double bc1 = 1.0 - std::pow(beta1, t), bc2 = 1.0 - std::pow(beta2, t);
        for (size_t i = 0; i < coords.size(); ++i) {
            m1[i] = beta1 * m1[i] + (1.0 - beta1) * (*g[i]);
            m2[i] = beta2 * m2[i] + (1.0 - beta2) * (*g[i]) * (*g[i]);
            *coords[i] -= cfg.learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + adam_eps);
        }
        result.report.epochs_run = epoch + 1;
    }
    // consider the final parameters too
    if (cfg.epochs > 0) {
        ForwardState st = training_forward(plan, result.params, cfg, nullptr);
        if (std::isfinite(metric_of(st.parts)) && metric_of(st.parts) < best_val) {
            best_val = metric_of(st.parts);
            best_epoch = static_cast<int>(result.report.trace.size());
            best = result.params;
        }
    }
    result.params = best;
    result.report.best_epoch = best_epoch;
    result.report.best_val = best_val;
    result.report.val_pairs = val_total;

    // held-out pair accuracy at the returned parameters
    if (val_total > 0) {
        ForwardState st = training_forward(plan, result.params, cfg, nullptr);
        int correct = 0;
        for (size_t gi = 0; gi < plan.levels.size(); ++gi) {
            const auto& lp = plan.levels[gi];
            for (int idx : lp.val_idx) {
                const auto& sp = lp.pairs[idx];
                const double p = st.levels[gi].p_sym[lp.pair_pos.at(PairProbTable::key(sp.u, sp.v))];
                if ((p > 0.5) == (sp.q > 0.5)) ++correct;
            }
        }
        result.report.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_total);
    }
    return result;
}

inline nlohmann::json train_report_to_json(const TrainReport& r) {
    nlohmann::json j;
    j["best_epoch"] = r.best_epoch;
    j["best_val"] = r.best_val;
    j["val_pairs"] = r.val_pairs;
    j["val_accuracy"] = r.val_accuracy;
    j["epochs_run"] = r.epochs_run;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : r.trace)
        rows.push_back({{"epoch", e.epoch}, {"total", e.total}, {"cluster", e.cluster}, {"contrastive", e.contrastive},
                        {"val", e.val}});
    j["trace"] = rows;
    return j;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

struct GradCheckReport {
    double max_rel_err = 0.0;
    int checked = 0;
    int worst_coord = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central differences on a seeded coordinate sample against the analytic
// gradient. Relative error uses a small denominator floor so coordinates with
// near-zero gradients are judged by absolute error.
inline GradCheckReport grad_check(const std::function<double(EncoderParams&, EncoderGrads*)>& loss_fn,
                                  EncoderParams params, double eps, int sample_size, uint64_t seed = 0) {
    if (eps <= 0) throw std::invalid_argument("grad_check: eps must be > 0");
    GradCheckReport report;
    if (sample_size <= 0) return report;
    EncoderGrads grads = EncoderGrads::zeros_like(params);
    loss_fn(params, &grads);
    auto coords = param_coords(params);
    auto gvals = grad_coords(grads);
    std::vector<int> idx(coords.size());
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng(seed);
    for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(static_cast<int>(i))]);
    const int count = std::min<int>(sample_size, static_cast<int>(coords.size()));
    for (int k = 0; k < count; ++k) {
        const int i = idx[k];
        const double saved = *coords[i];
        *coords[i] = saved + eps;
        const double fp = loss_fn(params, nullptr);
        *coords[i] = saved - eps;
        const double fm = loss_fn(params, nullptr);
        *coords[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("grad_check: non-finite loss at probe point");
        const double numeric = (fp - fm) / (2.0 * eps);
        const double analytic = *gvals[i];
        const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-5});
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_coord = i;
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
        ++report.checked;
    }
    return report;
}

}  // namespace taxograph
