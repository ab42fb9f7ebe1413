#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "taxograph/graph.hpp"
#include "taxograph/losses.hpp"
#include "taxograph/matrix.hpp"

namespace taxograph {

// Planted two-level partition: level-1 blocks nested into level-2 groups.
// Edge probability depends on the finest shared level: same block, same group
// (different block), or across groups. Block centroids sit on a line with
// group membership interleaved, so embedding proximity alone does not reveal
// the group structure; that signal lives in the edge densities.
struct SynthConfig {
    int blocks = 4;             // level-1 blocks
    int block_size = 15;
    int groups = 2;             // level-2 groups; blocks assigned round-robin
    double intra_prob = 0.9;    // same block
    double group_prob = -1.0;   // same group, different block; < 0 = geometric mean
    double inter_prob = 0.05;   // different group
    double noise_scale = 0.1;
    int dim = 16;
    uint64_t seed = 1;
    double block_spacing = 0.35;

    double effective_group_prob() const {
        return group_prob >= 0.0 ? group_prob : std::sqrt(intra_prob * inter_prob);
    }

    void validate() const {
        if (blocks < 1) throw std::invalid_argument("synth: degenerate config (zero blocks)");
        if (block_size < 1) throw std::invalid_argument("synth: block size must be >= 1");
        if (groups < 1 || groups > blocks) throw std::invalid_argument("synth: groups must be in [1, blocks]");
        if (dim < 2) throw std::invalid_argument("synth: dim must be >= 2");
        for (double p : {intra_prob, effective_group_prob(), inter_prob})
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("synth: probabilities must be in [0, 1]");
        if (noise_scale < 0.0) throw std::invalid_argument("synth: noise scale must be >= 0");
    }
};

struct SynthInstance {
    CitationGraph graph;
    EmbeddingMatrix embeddings;
    GoldHierarchyLabels labels;
};

inline SynthInstance synth_graph(const SynthConfig& cfg) {
    cfg.validate();
    RngStream rng(cfg.seed);
    const int n = cfg.blocks * cfg.block_size;
    SynthInstance out;

    std::vector<int> block_of(n), group_of(n);
    for (int i = 0; i < n; ++i) {
        block_of[i] = i / cfg.block_size;
        group_of[i] = block_of[i] % cfg.groups;
    }

    char idbuf[32];
    for (int i = 0; i < n; ++i) {
        std::snprintf(idbuf, sizeof(idbuf), "p%04d", i);
        PaperNode node;
        node.id = idbuf;
        node.title = "Topic " + std::to_string(block_of[i]) + " study " + std::to_string(i);
        node.abstract_text = "Synthetic abstract about topic" + std::to_string(block_of[i]) + " methods in area" +
                             std::to_string(group_of[i]) + ".";
        out.graph.nodes.push_back(std::move(node));
    }
    out.graph.rebuild_index();

    const double pg = cfg.effective_group_prob();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double p;
            if (block_of[i] == block_of[j])
                p = cfg.intra_prob;
            else if (group_of[i] == group_of[j])
                p = pg;
            else
                p = cfg.inter_prob;
            if (rng.bernoulli(p)) out.graph.edges.emplace_back(j, i);  // newer cites older
        }

    // Block centroids on one axis, offset on a second so rows are never zero.
    out.embeddings = Matrix(n, cfg.dim);
    for (int i = 0; i < n; ++i) {
        out.embeddings(i, 0) = cfg.block_spacing * static_cast<double>(block_of[i]);
        out.embeddings(i, 1) = 1.0;
        for (int j = 0; j < cfg.dim; ++j) out.embeddings(i, j) += cfg.noise_scale * rng.gaussian();
    }

    out.labels.assign.resize(2);
    out.labels.assign[0].resize(n);
    out.labels.assign[1].resize(n);
    for (int i = 0; i < n; ++i) {
        out.labels.assign[0][i] = {block_of[i]};
        out.labels.assign[1][i] = {group_of[i]};
    }
    return out;
}

}  // namespace taxograph
