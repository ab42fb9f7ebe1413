// Independent reference implementations used only by tests. These rebuild the
// documented rules from scratch (bitmask sets, union-find, dense matrices) so
// they share no code path with the library.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "taxograph/encoder.hpp"
#include "taxograph/matrix.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Soft clustering, brute force over bitmask sets.
// p[u][v] < 0 means the pair is unscored. Returns the final cluster family.
// ---------------------------------------------------------------------------
inline std::set<std::vector<int>> soft_cluster_bruteforce(int n, const std::vector<std::vector<double>>& p,
                                                          const std::vector<double>& d, double p_tau) {
    auto to_vec = [](uint32_t m) {
        std::vector<int> v;
        for (int i = 0; i < 32; ++i)
            if (m & (1u << i)) v.push_back(i);
        return v;
    };

    std::vector<uint32_t> cand(n);
    for (int u = 0; u < n; ++u) {
        uint32_t m = 1u << u;
        for (int v = 0; v < n; ++v) {
            if (v == u || p[u][v] < 0.0) continue;
            const bool denser = d[v] > d[u] || (d[v] == d[u] && v > u);
            if (denser && p[u][v] > p_tau) m |= 1u << v;
        }
        cand[u] = m;
    }

    std::set<uint32_t> kept;
    for (int u = 0; u < n; ++u) {
        if (std::popcount(cand[u]) == 1) continue;
        bool subset = false;
        for (int w = 0; w < n && !subset; ++w)
            if (w != u && cand[u] != cand[w] && (cand[u] & cand[w]) == cand[u]) subset = true;
        if (!subset) kept.insert(cand[u]);
    }

    uint32_t covered = 0;
    for (uint32_t m : kept) covered |= m;

    std::map<uint32_t, uint32_t> attachments;  // original kept mask -> attached nodes
    std::set<std::vector<int>> singletons;
    for (int u = 0; u < n; ++u) {
        if (covered & (1u << u)) continue;
        int best = -1;
        double best_p = -1.0;
        for (int v = 0; v < n; ++v) {
            if (v == u || p[u][v] < 0.0) continue;
            if (p[u][v] > best_p) {
                best = v;
                best_p = p[u][v];
            }
        }
        if (best >= 0 && (covered & (1u << best))) {
            std::vector<int> best_key;
            uint32_t target = 0;
            for (uint32_t m : kept) {
                if (!(m & (1u << best))) continue;
                auto key = to_vec(m);
                if (target == 0 || key < best_key) {
                    best_key = key;
                    target = m;
                }
            }
            attachments[target] |= 1u << u;
        } else {
            singletons.insert({u});
        }
    }

    std::set<std::vector<int>> out = singletons;
    for (uint32_t m : kept) {
        uint32_t full = m;
        auto it = attachments.find(m);
        if (it != attachments.end()) full |= it->second;
        out.insert(to_vec(full));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Hard clustering via union-find over argmax links.
// ---------------------------------------------------------------------------
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

inline std::set<std::vector<int>> hard_cluster_unionfind(int n, const std::vector<std::vector<double>>& p) {
    if (n == 1) return {{0}};
    UnionFind uf(n);
    for (int u = 0; u < n; ++u) {
        int best = -1;
        double best_p = -1.0;
        for (int v = 0; v < n; ++v) {
            if (v == u || p[u][v] < 0.0) continue;
            if (p[u][v] > best_p) {
                best = v;
                best_p = p[u][v];
            }
        }
        uf.unite(u, best);
    }
    std::map<int, std::vector<int>> comps;
    for (int u = 0; u < n; ++u) comps[uf.find(u)].push_back(u);
    std::set<std::vector<int>> out;
    for (auto& [root, mem] : comps) {
        std::sort(mem.begin(), mem.end());
        out.insert(mem);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dense attention oracle: full n x n score matrix, no shifting tricks.
// ---------------------------------------------------------------------------
inline taxograph::Matrix gat_dense_oracle(const std::vector<std::vector<bool>>& adj_with_self,
                                          const taxograph::Matrix& x, const taxograph::EncoderParams& params) {
    using taxograph::Matrix;
    const int n = x.rows();
    Matrix cur = x;
    for (const auto& layer : params.layers) {
        Matrix out(n, layer.out_dim());
        for (int h = 0; h < layer.heads; ++h) {
            Matrix z(n, layer.head_dim);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < layer.head_dim; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < layer.in_dim; ++k) s += cur(i, k) * layer.w[h](k, j);
                    z(i, j) = s;
                }
            for (int u = 0; u < n; ++u) {
                double denom = 0.0;
                std::vector<double> weight(n, 0.0);
                for (int v = 0; v < n; ++v) {
                    if (!adj_with_self[u][v]) continue;
                    double score = 0.0;
                    for (int j = 0; j < layer.head_dim; ++j) score += layer.a_src[h][j] * z(u, j);
                    for (int j = 0; j < layer.head_dim; ++j) score += layer.a_dst[h][j] * z(v, j);
                    const double e = score > 0.0 ? score : params.attn_slope * score;
                    weight[v] = std::exp(e);
                    denom += weight[v];
                }
                for (int v = 0; v < n; ++v) {
                    if (!adj_with_self[u][v]) continue;
                    const double a = weight[v] / denom;
                    for (int j = 0; j < layer.head_dim; ++j) out(u, h * layer.head_dim + j) += a * z(v, j);
                }
            }
        }
        for (int u = 0; u < n; ++u)
            for (int j = 0; j < layer.out_dim(); ++j)
                out(u, j) = out(u, j) > 0.0 ? out(u, j) : params.act_slope * out(u, j);
        cur = out;
    }
    return cur;
}

// Naive two-hidden-layer scorer recomputation.
inline double pair_prob_oracle(const taxograph::ScorerParams& sc, const std::vector<double>& hu,
                               const std::vector<double>& hv, double slope) {
    std::vector<double> x = hu;
    x.insert(x.end(), hv.begin(), hv.end());
    std::vector<std::vector<double>> acts = {x};
    for (int layer = 0; layer < 3; ++layer) {
        const auto& w = sc.w[layer];
        std::vector<double> next(w.cols(), 0.0);
        for (int j = 0; j < w.cols(); ++j) {
            for (int i = 0; i < w.rows(); ++i) next[j] += acts.back()[i] * w(i, j);
            next[j] += sc.b[layer][j];
            if (layer < 2) next[j] = next[j] > 0.0 ? next[j] : slope * next[j];
        }
        acts.push_back(next);
    }
    const double l0 = acts.back()[0], l1 = acts.back()[1];
    return std::exp(l0) / (std::exp(l0) + std::exp(l1));
}

// Scalar contrastive-loss oracle straight from the level/anchor/positive sums.
inline double contrastive_oracle(const taxograph::Matrix& h,
                              const std::vector<std::vector<std::vector<int>>>& positives,
                              const std::vector<double>& delta, double tau) {
    const int n = h.rows();
    auto cos = [&](int a, int b) {
        double num = 0.0, na = 0.0, nb = 0.0;
        for (int j = 0; j < h.cols(); ++j) {
            num += h(a, j) * h(b, j);
            na += h(a, j) * h(a, j);
            nb += h(b, j) * h(b, j);
        }
        if (na == 0.0 || nb == 0.0) return 0.0;
        return num / (std::sqrt(na) * std::sqrt(nb));
    };
    const int levels = static_cast<int>(positives.size());
    double total = 0.0;
    for (int l = 0; l < levels; ++l) {
        for (int u = 0; u < n; ++u) {
            const auto& pos = positives[l][u];
            if (pos.empty()) continue;
            double inner = 0.0;
            for (int k : pos) {
                double denom = 0.0;
                for (int v = 0; v < n; ++v)
                    if (v != u) denom += std::exp(cos(u, v) / tau);
                inner += std::log(std::exp(cos(u, k) / tau) / denom);
            }
            total += -delta[l] / static_cast<double>(pos.size()) * inner;
        }
    }
    return total / static_cast<double>(levels);
}

}  // namespace oracles
