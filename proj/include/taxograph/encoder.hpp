#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "taxograph/graph.hpp"
#include "taxograph/matrix.hpp"

namespace taxograph {

// One multi-head attention layer: per-head linear map W plus split attention
// vectors (a_src for the receiving node, a_dst for the message source).
struct GatLayerParams {
    int in_dim = 0;
    int head_dim = 0;
    int heads = 0;
    std::vector<Matrix> w;                   // heads x (in_dim x head_dim)
    std::vector<std::vector<double>> a_src;  // heads x head_dim
    std::vector<std::vector<double>> a_dst;  // heads x head_dim

    int out_dim() const { return head_dim * heads; }
};

// Pair scorer: [h_u; h_v] -> two hidden layers -> two logits (same, different).
struct ScorerParams {
    std::vector<Matrix> w;               // 3 layers
    std::vector<std::vector<double>> b;  // 3 layers

    int in_dim() const { return w.empty() ? 0 : w[0].rows(); }
};

struct EncoderParams {
    std::vector<GatLayerParams> layers;
    std::vector<ScorerParams> scorers;  // size 1 = shared across levels
    double attn_slope = 0.2;
    double act_slope = 0.2;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

    const ScorerParams& scorer_for_level(int level) const {
        if (scorers.empty()) throw std::runtime_error("EncoderParams: no scorer");
        if (scorers.size() == 1) return scorers[0];
        const int idx = std::min<int>(level - 1, static_cast<int>(scorers.size()) - 1);
        return scorers[std::max(idx, 0)];
    }

    // Seeded unit-variance-scaled initialization. The encoder preserves its
    // input dimension across layers so the same parameters can score every
    // hierarchy level (aggregated features feed back in at the same width).
    static EncoderParams init(int input_dim, int hidden_dim, int num_layers, int num_heads, int scorer_hidden,
                              uint64_t seed, int num_scorers = 1) {
        if (input_dim < 2) throw std::invalid_argument("EncoderParams: input_dim must be >= 2");
        if (num_layers < 1 || num_heads < 1) throw std::invalid_argument("EncoderParams: bad layer/head count");
        if (hidden_dim % num_heads != 0)
            throw std::invalid_argument("EncoderParams: hidden_dim must be divisible by num_heads");
        if (input_dim % num_heads != 0)
            throw std::invalid_argument("EncoderParams: input_dim must be divisible by num_heads");
        RngStream rng(seed);
        EncoderParams p;
        int cur = input_dim;
        for (int l = 0; l < num_layers; ++l) {
            const int out = (l + 1 == num_layers) ? input_dim : hidden_dim;
            GatLayerParams layer;
            layer.in_dim = cur;
            layer.heads = num_heads;
            layer.head_dim = out / num_heads;
            const double wscale = 1.0 / std::sqrt(static_cast<double>(cur));
            const double ascale = 1.0 / std::sqrt(static_cast<double>(layer.head_dim));
            for (int h = 0; h < num_heads; ++h) {
                layer.w.push_back(random_matrix(cur, layer.head_dim, wscale, rng));
                std::vector<double> s(layer.head_dim), d(layer.head_dim);
                for (auto& v : s) v = ascale * rng.gaussian();
                for (auto& v : d) v = ascale * rng.gaussian();
                layer.a_src.push_back(std::move(s));
                layer.a_dst.push_back(std::move(d));
            }
            p.layers.push_back(std::move(layer));
            cur = out;
        }
        for (int s = 0; s < num_scorers; ++s) {
            ScorerParams sc;
            const int in = 2 * cur;
            const int widths[4] = {in, scorer_hidden, scorer_hidden, 2};
            for (int l = 0; l < 3; ++l) {
                sc.w.push_back(random_matrix(widths[l], widths[l + 1], 1.0 / std::sqrt(double(widths[l])), rng));
                sc.b.emplace_back(widths[l + 1], 0.0);
            }
            p.scorers.push_back(std::move(sc));
        }
        return p;
    }
};

// Gradient buffers mirroring EncoderParams shapes.
struct EncoderGrads {
    std::vector<GatLayerParams> layers;
    std::vector<ScorerParams> scorers;

    static EncoderGrads zeros_like(const EncoderParams& p) {
        EncoderGrads g;
        for (const auto& l : p.layers) {
            GatLayerParams z;
            z.in_dim = l.in_dim;
            z.head_dim = l.head_dim;
            z.heads = l.heads;
            for (int h = 0; h < l.heads; ++h) {
                z.w.emplace_back(l.in_dim, l.head_dim);
                z.a_src.emplace_back(l.head_dim, 0.0);
                z.a_dst.emplace_back(l.head_dim, 0.0);
            }
            g.layers.push_back(std::move(z));
        }
        for (const auto& s : p.scorers) {
            ScorerParams z;
            for (size_t l = 0; l < s.w.size(); ++l) {
                z.w.emplace_back(s.w[l].rows(), s.w[l].cols());
                z.b.emplace_back(s.b[l].size(), 0.0);
            }
            g.scorers.push_back(std::move(z));
        }
        return g;
    }
};

// Flat view over every trainable coordinate, used by the optimizer and the
// finite-difference checker.
inline std::vector<double*> param_coords(EncoderParams& p) {
    std::vector<double*> out;
    for (auto& l : p.layers) {
        for (auto& w : l.w)
            for (auto& v : w.data()) out.push_back(&v);
        for (auto& a : l.a_src)
            for (auto& v : a) out.push_back(&v);
        for (auto& a : l.a_dst)
            for (auto& v : a) out.push_back(&v);
    }
    for (auto& s : p.scorers) {
        for (auto& w : s.w)
            for (auto& v : w.data()) out.push_back(&v);
        for (auto& b : s.b)
            for (auto& v : b) out.push_back(&v);
    }
    return out;
}

inline std::vector<const double*> grad_coords(const EncoderGrads& g) {
    std::vector<const double*> out;
    for (const auto& l : g.layers) {
        for (const auto& w : l.w)
            for (const auto& v : w.data()) out.push_back(&v);
        for (const auto& a : l.a_src)
            for (const auto& v : a) out.push_back(&v);
        for (const auto& a : l.a_dst)
            for (const auto& v : a) out.push_back(&v);
    }
    for (const auto& s : g.scorers) {
        for (const auto& w : s.w)
            for (const auto& v : w.data()) out.push_back(&v);
        for (const auto& b : s.b)
            for (const auto& v : b) out.push_back(&v);
    }
    return out;
}

inline std::vector<double*> grad_coords(EncoderGrads& g) {
    std::vector<double*> out;
    for (auto& l : g.layers) {
        for (auto& w : l.w)
            for (auto& v : w.data()) out.push_back(&v);
        for (auto& a : l.a_src)
            for (auto& v : a) out.push_back(&v);
        for (auto& a : l.a_dst)
            for (auto& v : a) out.push_back(&v);
    }
    for (auto& s : g.scorers) {
        for (auto& w : s.w)
            for (auto& v : w.data()) out.push_back(&v);
        for (auto& b : s.b)
            for (auto& v : b) out.push_back(&v);
    }
    return out;
}

using NodeEmbeddings = Matrix;

// ---------------------------------------------------------------------------
// Forward pass with optional trace for backprop
// ---------------------------------------------------------------------------

struct GatHeadCache {
    Matrix z;                               // n x head_dim
    std::vector<std::vector<double>> s;     // per node: raw attention scores over nbr list
    std::vector<std::vector<double>> alpha; // per node: softmax weights over nbr list
};

struct GatLayerCache {
    Matrix input;
    std::vector<GatHeadCache> heads;
    Matrix preact;  // concatenated head outputs, before the nonlinearity
};

struct EncodeTrace {
    std::vector<GatLayerCache> layers;
    Matrix output;
};

namespace detail {

// Attention support per node: the undirected neighborhood, or the node
// itself when isolated. Excluding the self-connection for connected nodes
// keeps supports distinct on dense graphs, where a shared support would
// collapse every output to the same attention-weighted mean.
inline std::vector<std::vector<int>> attention_support(const LevelGraph& g) {
    std::vector<std::vector<int>> out(g.size());
    for (int u = 0; u < g.size(); ++u) {
        if (g.adj[u].empty())
            out[u].push_back(u);
        else
            out[u] = g.adj[u];
    }
    return out;
}

}  // namespace detail

inline Matrix encode_forward(const std::vector<std::vector<int>>& nbrs, const Matrix& x, const EncoderParams& params,
                             EncodeTrace* trace) {
    if (params.layers.empty()) throw std::invalid_argument("encode: no layers");
    if (x.cols() != params.input_dim())
        throw std::invalid_argument("encode: feature dim " + std::to_string(x.cols()) + " != params input dim " +
                                    std::to_string(params.input_dim()));
    const int n = x.rows();
    Matrix cur = x;
    if (trace) trace->layers.clear();
    for (const auto& layer : params.layers) {
        GatLayerCache cache;
        cache.input = cur;
        Matrix preact(n, layer.out_dim());
        for (int h = 0; h < layer.heads; ++h) {
            GatHeadCache hc;
            hc.z = matmul(cur, layer.w[h]);
            hc.s.resize(n);
            hc.alpha.resize(n);
            for (int u = 0; u < n; ++u) {
                const auto& lst = nbrs[u];
                const double src = dot(hc.z.row(u), layer.a_src[h]);
                auto& s = hc.s[u];
                s.resize(lst.size());
                double mx = -1e300;
                for (size_t k = 0; k < lst.size(); ++k) {
                    s[k] = src + dot(hc.z.row(lst[k]), layer.a_dst[h]);
                    const double e = leaky_relu(s[k], params.attn_slope);
                    if (e > mx) mx = e;
                }
                auto& al = hc.alpha[u];
                al.resize(lst.size());
                double denom = 0.0;
                for (size_t k = 0; k < lst.size(); ++k) {
                    al[k] = std::exp(leaky_relu(s[k], params.attn_slope) - mx);
                    denom += al[k];
                }
                for (size_t k = 0; k < lst.size(); ++k) {
                    al[k] /= denom;
                    const auto zr = hc.z.row(lst[k]);
                    for (int j = 0; j < layer.head_dim; ++j) preact(u, h * layer.head_dim + j) += al[k] * zr[j];
                }
            }
            if (trace) cache.heads.push_back(std::move(hc));
        }
        Matrix next(n, layer.out_dim());
        for (int u = 0; u < n; ++u)
            for (int j = 0; j < layer.out_dim(); ++j) next(u, j) = leaky_relu(preact(u, j), params.act_slope);
        if (trace) {
            cache.preact = preact;
            trace->layers.push_back(std::move(cache));
        }
        cur = std::move(next);
    }
    if (trace) trace->output = cur;
    return cur;
}

// Multi-head attention message passing over the undirected edges.
inline NodeEmbeddings encode(const LevelGraph& g, const EncoderParams& params) {
    return encode_forward(detail::attention_support(g), g.features, params, nullptr);
}

// Backward through the whole encoder. d_out is dL/d(output); returns dL/d(input)
// and accumulates parameter gradients.
inline Matrix encode_backward(const std::vector<std::vector<int>>& nbrs, const EncoderParams& params,
                              const EncodeTrace& trace, const Matrix& d_out, EncoderGrads& grads) {
    Matrix d_cur = d_out;
    for (int li = static_cast<int>(params.layers.size()) - 1; li >= 0; --li) {
        const auto& layer = params.layers[li];
        const auto& cache = trace.layers[li];
        const int n = cache.input.rows();
        // through the activation
        Matrix d_pre(n, layer.out_dim());
        for (int u = 0; u < n; ++u)
            for (int j = 0; j < layer.out_dim(); ++j)
                d_pre(u, j) = d_cur(u, j) * leaky_relu_grad(cache.preact(u, j), params.act_slope);
        Matrix d_input(n, layer.in_dim);
        for (int h = 0; h < layer.heads; ++h) {
            const auto& hc = cache.heads[h];
            Matrix d_z(n, layer.head_dim);
            auto& gw = grads.layers[li].w[h];
            auto& gas = grads.layers[li].a_src[h];
            auto& gad = grads.layers[li].a_dst[h];
            for (int u = 0; u < n; ++u) {
                const auto& lst = nbrs[u];
                const auto& al = hc.alpha[u];
                const auto& s = hc.s[u];
                // d alpha, then softmax and attention-score backward
                std::vector<double> d_alpha(lst.size(), 0.0);
                for (size_t k = 0; k < lst.size(); ++k) {
                    const auto zr = hc.z.row(lst[k]);
                    double g = 0.0;
                    for (int j = 0; j < layer.head_dim; ++j) g += d_pre(u, h * layer.head_dim + j) * zr[j];
                    d_alpha[k] = g;
                    for (int j = 0; j < layer.head_dim; ++j)
                        d_z(lst[k], j) += al[k] * d_pre(u, h * layer.head_dim + j);
                }
                double inner = 0.0;
                for (size_t k = 0; k < lst.size(); ++k) inner += al[k] * d_alpha[k];
                double d_src_total = 0.0;
                for (size_t k = 0; k < lst.size(); ++k) {
                    const double d_e = al[k] * (d_alpha[k] - inner);
                    const double d_s = d_e * leaky_relu_grad(s[k], params.attn_slope);
                    d_src_total += d_s;
                    const auto zk = hc.z.row(lst[k]);
                    for (int j = 0; j < layer.head_dim; ++j) {
                        gad[j] += d_s * zk[j];
                        d_z(lst[k], j) += d_s * layer.a_dst[h][j];
                    }
                }
                const auto zu = hc.z.row(u);
                for (int j = 0; j < layer.head_dim; ++j) {
                    gas[j] += d_src_total * zu[j];
                    d_z(u, j) += d_src_total * layer.a_src[h][j];
                }
            }
            add_at_b(gw, cache.input, d_z);
            add_a_bt(d_input, d_z, layer.w[h]);
        }
        d_cur = std::move(d_input);
    }
    return d_cur;
}

// ---------------------------------------------------------------------------
// Pair scorer
// ---------------------------------------------------------------------------

struct ScorerCache {
    std::vector<double> x;        // concatenated input
    std::vector<double> pre1, act1, pre2, act2;
    double logit_same = 0.0, logit_diff = 0.0;
    double p = 0.5;
};

namespace detail {

inline void affine(const Matrix& w, const std::vector<double>& b, const std::vector<double>& in,
                   std::vector<double>& out) {
    out.assign(w.cols(), 0.0);
    for (int i = 0; i < w.rows(); ++i) {
        const double xi = in[i];
        if (xi == 0.0) continue;
        for (int j = 0; j < w.cols(); ++j) out[j] += xi * w(i, j);
    }
    for (int j = 0; j < w.cols(); ++j) out[j] += b[j];
}

}  // namespace detail

inline double scorer_forward(const ScorerParams& sc, std::span<const double> hu, std::span<const double> hv,
                             double slope, ScorerCache* cache) {
    ScorerCache local;
    ScorerCache& c = cache ? *cache : local;
    c.x.assign(hu.begin(), hu.end());
    c.x.insert(c.x.end(), hv.begin(), hv.end());
    if (static_cast<int>(c.x.size()) != sc.in_dim())
        throw std::invalid_argument("pair scorer: embedding dim mismatch");
    detail::affine(sc.w[0], sc.b[0], c.x, c.pre1);
    c.act1.resize(c.pre1.size());
    for (size_t i = 0; i < c.pre1.size(); ++i) c.act1[i] = leaky_relu(c.pre1[i], slope);
    detail::affine(sc.w[1], sc.b[1], c.act1, c.pre2);
    c.act2.resize(c.pre2.size());
    for (size_t i = 0; i < c.pre2.size(); ++i) c.act2[i] = leaky_relu(c.pre2[i], slope);
    std::vector<double> logits;
    detail::affine(sc.w[2], sc.b[2], c.act2, logits);
    c.logit_same = logits[0];
    c.logit_diff = logits[1];
    // two-logit softmax, "same" component; stable form
    const double m = std::max(c.logit_same, c.logit_diff);
    const double es = std::exp(c.logit_same - m), ed = std::exp(c.logit_diff - m);
    c.p = es / (es + ed);
    return c.p;
}

// dL/dp -> accumulate scorer grads and the two embedding gradients.
inline void scorer_backward(const ScorerParams& sc, const ScorerCache& c, double slope, double d_p,
                            ScorerParams& grads, std::span<double> d_hu, std::span<double> d_hv) {
    const double dpd = d_p * c.p * (1.0 - c.p);
    std::vector<double> d_logits = {dpd, -dpd};
    // layer 3
    std::vector<double> d_act2(c.act2.size(), 0.0);
    for (size_t i = 0; i < c.act2.size(); ++i)
        for (int j = 0; j < 2; ++j) {
            grads.w[2](static_cast<int>(i), j) += c.act2[i] * d_logits[j];
            d_act2[i] += sc.w[2](static_cast<int>(i), j) * d_logits[j];
        }
    for (int j = 0; j < 2; ++j) grads.b[2][j] += d_logits[j];
    // layer 2
    std::vector<double> d_pre2(c.pre2.size());
    for (size_t i = 0; i < c.pre2.size(); ++i) d_pre2[i] = d_act2[i] * leaky_relu_grad(c.pre2[i], slope);
    std::vector<double> d_act1(c.act1.size(), 0.0);
    for (size_t i = 0; i < c.act1.size(); ++i)
        for (size_t j = 0; j < d_pre2.size(); ++j) {
            grads.w[1](static_cast<int>(i), static_cast<int>(j)) += c.act1[i] * d_pre2[j];
            d_act1[i] += sc.w[1](static_cast<int>(i), static_cast<int>(j)) * d_pre2[j];
        }
    for (size_t j = 0; j < d_pre2.size(); ++j) grads.b[1][j] += d_pre2[j];
    // layer 1
    std::vector<double> d_pre1(c.pre1.size());
    for (size_t i = 0; i < c.pre1.size(); ++i) d_pre1[i] = d_act1[i] * leaky_relu_grad(c.pre1[i], slope);
    const size_t d = c.x.size() / 2;
    for (size_t i = 0; i < c.x.size(); ++i) {
        double dx = 0.0;
        for (size_t j = 0; j < d_pre1.size(); ++j) {
            grads.w[0](static_cast<int>(i), static_cast<int>(j)) += c.x[i] * d_pre1[j];
            dx += sc.w[0](static_cast<int>(i), static_cast<int>(j)) * d_pre1[j];
        }
        if (i < d)
            d_hu[i] += dx;
        else
            d_hv[i - d] += dx;
    }
    for (size_t j = 0; j < d_pre1.size(); ++j) grads.b[0][j] += d_pre1[j];
}

// P(same cluster) for the ordered pair (u, v).
inline double pair_prob(const NodeEmbeddings& h, int u, int v, const EncoderParams& params, int level = 1) {
    if (u == v) throw std::invalid_argument("pair_prob: u and v must differ");
    return scorer_forward(params.scorer_for_level(level), h.row(u), h.row(v), params.act_slope, nullptr);
}

// Order-free score: mean of both concatenation orders.
inline double symmetrized_pair_prob(const NodeEmbeddings& h, int u, int v, const EncoderParams& params,
                                    int level = 1) {
    return 0.5 * (pair_prob(h, u, v, params, level) + pair_prob(h, v, u, params, level));
}

// ---------------------------------------------------------------------------
// Pair table and density
// ---------------------------------------------------------------------------

// Symmetrized probabilities keyed by unordered pair (min, max).
struct PairProbTable {
    std::map<std::pair<int, int>, double> values;

    static std::pair<int, int> key(int u, int v) { return {std::min(u, v), std::max(u, v)}; }

    bool contains(int u, int v) const { return values.count(key(u, v)) != 0; }

    double at(int u, int v) const {
        auto it = values.find(key(u, v));
        if (it == values.end())
            throw std::runtime_error("PairProbTable: missing pair (" + std::to_string(u) + ", " + std::to_string(v) +
                                     ")");
        return it->second;
    }

    void set(int u, int v, double p) { values[key(u, v)] = p; }
    size_t size() const { return values.size(); }
};

// Similarity-weighted proportion of same-cluster neighbors; 0 for isolated nodes.
inline double node_density(const LevelGraph& g, const NodeEmbeddings& h, const PairProbTable& probs, int u) {
    if (u < 0 || u >= g.size()) throw std::out_of_range("node_density: node index out of range");
    const auto& nbr = g.adj[u];
    if (nbr.empty()) return 0.0;
    double acc = 0.0;
    for (int k : nbr) acc += probs.at(u, k) * cosine(h.row(u), h.row(k));
    return acc / static_cast<double>(nbr.size());
}

enum class Scope { neighbors, all_pairs };

struct LevelScores {
    NodeEmbeddings h;
    PairProbTable probs;
    std::vector<double> density;
};

// One pass producing everything clustering needs at a level.
inline LevelScores score_level(const LevelGraph& g, const EncoderParams& params, Scope scope = Scope::neighbors) {
    LevelScores out;
    out.h = encode(g, params);
    if (scope == Scope::all_pairs) {
        for (int u = 0; u < g.size(); ++u)
            for (int v = u + 1; v < g.size(); ++v)
                out.probs.set(u, v, symmetrized_pair_prob(out.h, u, v, params, g.level));
    } else {
        for (const auto& [u, v] : g.edges) out.probs.set(u, v, symmetrized_pair_prob(out.h, u, v, params, g.level));
    }
    out.density.resize(g.size());
    for (int u = 0; u < g.size(); ++u) out.density[u] = node_density(g, out.h, out.probs, u);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic, version, shape table, little-endian float64 data.
// ---------------------------------------------------------------------------

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");

inline void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

inline double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace detail

inline void save_params(const EncoderParams& p, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write("TXGPARAM", 8);
    detail::put_u32(os, 1);  // version
    detail::put_u32(os, static_cast<uint32_t>(p.layers.size()));
    for (const auto& l : p.layers) {
        detail::put_u32(os, static_cast<uint32_t>(l.in_dim));
        detail::put_u32(os, static_cast<uint32_t>(l.head_dim));
        detail::put_u32(os, static_cast<uint32_t>(l.heads));
    }
    detail::put_u32(os, static_cast<uint32_t>(p.scorers.size()));
    for (const auto& s : p.scorers) {
        detail::put_u32(os, static_cast<uint32_t>(s.w.size()));
        for (const auto& w : s.w) {
            detail::put_u32(os, static_cast<uint32_t>(w.rows()));
            detail::put_u32(os, static_cast<uint32_t>(w.cols()));
        }
    }
    detail::put_f64(os, p.attn_slope);
    detail::put_f64(os, p.act_slope);
    for (const auto& l : p.layers) {
        for (const auto& w : l.w)
            for (double v : w.data()) detail::put_f64(os, v);
        for (const auto& a : l.a_src)
            for (double v : a) detail::put_f64(os, v);
        for (const auto& a : l.a_dst)
            for (double v : a) detail::put_f64(os, v);
    }
    for (const auto& s : p.scorers) {
        for (const auto& w : s.w)
            for (double v : w.data()) detail::put_f64(os, v);
        for (const auto& b : s.b)
            for (double v : b) detail::put_f64(os, v);
    }
}

inline EncoderParams load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "TXGPARAM") throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = detail::get_u32(is);
    if (version != 1) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    EncoderParams p;
    const uint32_t nlayers = detail::get_u32(is);
    for (uint32_t i = 0; i < nlayers; ++i) {
        GatLayerParams l;
        l.in_dim = static_cast<int>(detail::get_u32(is));
        l.head_dim = static_cast<int>(detail::get_u32(is));
        l.heads = static_cast<int>(detail::get_u32(is));
        p.layers.push_back(std::move(l));
    }
    const uint32_t nscorers = detail::get_u32(is);
    std::vector<std::vector<std::pair<int, int>>> scorer_shapes(nscorers);
    for (uint32_t i = 0; i < nscorers; ++i) {
        const uint32_t nmats = detail::get_u32(is);
        for (uint32_t j = 0; j < nmats; ++j) {
            const int r = static_cast<int>(detail::get_u32(is));
            const int c = static_cast<int>(detail::get_u32(is));
            scorer_shapes[i].emplace_back(r, c);
        }
    }
    p.attn_slope = detail::get_f64(is);
    p.act_slope = detail::get_f64(is);
    for (auto& l : p.layers) {
        for (int h = 0; h < l.heads; ++h) {
            Matrix w(l.in_dim, l.head_dim);
            for (auto& v : w.data()) v = detail::get_f64(is);
            l.w.push_back(std::move(w));
        }
        for (int h = 0; h < l.heads; ++h) {
            std::vector<double> a(l.head_dim);
            for (auto& v : a) v = detail::get_f64(is);
            l.a_src.push_back(std::move(a));
        }
        for (int h = 0; h < l.heads; ++h) {
            std::vector<double> a(l.head_dim);
            for (auto& v : a) v = detail::get_f64(is);
            l.a_dst.push_back(std::move(a));
        }
    }
    for (uint32_t i = 0; i < nscorers; ++i) {
        ScorerParams s;
        for (const auto& [r, c] : scorer_shapes[i]) {
            Matrix w(r, c);
            for (auto& v : w.data()) v = detail::get_f64(is);
            s.w.push_back(std::move(w));
            s.b.emplace_back(c, 0.0);
        }
        for (auto& b : s.b)
            for (auto& v : b) v = detail::get_f64(is);
        p.scorers.push_back(std::move(s));
    }
    return p;
}

}  // namespace taxograph
