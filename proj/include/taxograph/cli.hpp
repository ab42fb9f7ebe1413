#pragma once

#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taxograph/client_http.hpp"
#include "taxograph/encoder.hpp"
#include "taxograph/eval.hpp"
#include "taxograph/graph.hpp"
#include "taxograph/cluster.hpp"
#include "taxograph/losses.hpp"
#include "taxograph/synth.hpp"
#include "taxograph/taxonomy.hpp"
#include "taxograph/train.hpp"
#include "taxograph/verbalizer.hpp"

namespace taxograph {

namespace cli_detail {

struct GraphArgs {
    std::string nodes_path, edges_path;

    void attach(CLI::App* cmd) {
        cmd->add_option("--nodes", nodes_path, "nodes file (id<TAB>title<TAB>abstract)")->required();
        cmd->add_option("--edges", edges_path, "edges file (citing<TAB>cited)")->required();
    }

    CitationGraph load(IngestStats* stats = nullptr) const { return load_citation_graph(nodes_path, edges_path, stats); }
};

// Scoring oracle from gold labels: majority label per hyper-node, 0.99 within
// a shared cluster, 0.01 across.
inline PairProbOracle oracle_from_labels(std::shared_ptr<GoldHierarchyLabels> labels) {
    return [labels](const LevelGraph& g, int u, int v) {
        const int l = std::min(g.level, labels->num_levels());
        auto majority = [&](int node) {
            std::map<int, int> counts;
            for (int m : g.members[node])
                for (int id : labels->assign[l - 1][m]) counts[id]++;
            int best = -1, best_count = -1;
            for (const auto& [id, c] : counts)
                if (c > best_count) {
                    best = id;
                    best_count = c;
                }
            return best;
        };
        return majority(u) == majority(v) ? 0.99 : 0.01;
    };
}

}  // namespace cli_detail

// CLI entry point shared by the binary and the tests; returns the exit code.
inline int run_pipeline(const std::vector<std::string>& args) {
    CLI::App app{"citation-graph taxonomy toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI-style key=value file");

    // --- ingest ---
    auto* ingest = app.add_subcommand("ingest", "load and validate a citation graph");
    ingest->configurable()->fallthrough();
    cli_detail::GraphArgs ingest_graph;
    ingest_graph.attach(ingest);
    std::string ingest_out_nodes, ingest_out_edges;
    ingest->add_option("--out-nodes", ingest_out_nodes, "write the normalized nodes file");
    ingest->add_option("--out-edges", ingest_out_edges, "write the normalized edges file");

    // --- embed ---
    auto* embed = app.add_subcommand("embed", "deterministic hashed bag-of-tokens embeddings");
    embed->configurable()->fallthrough();
    cli_detail::GraphArgs embed_graph;
    embed_graph.attach(embed);
    int embed_dim = 32;
    uint64_t embed_seed = 1;
    std::string embed_out, embed_fields = "title+abstract";
    embed->add_option("--dim", embed_dim, "embedding dimension");
    embed->add_option("--seed", embed_seed, "hash seed");
    embed->add_option("--fields", embed_fields, "text fields: title+abstract | title | abstract");
    embed->add_option("--out", embed_out, "output embeddings file")->required();

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate a planted two-level instance");
    synth->configurable()->fallthrough();
    SynthConfig synth_cfg;
    std::string synth_prefix;
    synth->add_option("--blocks", synth_cfg.blocks, "level-1 blocks");
    synth->add_option("--block-size", synth_cfg.block_size, "papers per block");
    synth->add_option("--groups", synth_cfg.groups, "level-2 groups");
    synth->add_option("--intra", synth_cfg.intra_prob, "same-block edge probability");
    synth->add_option("--group-prob", synth_cfg.group_prob, "same-group edge probability (< 0 = geometric mean)");
    synth->add_option("--inter", synth_cfg.inter_prob, "cross-group edge probability");
    synth->add_option("--noise", synth_cfg.noise_scale, "embedding noise scale");
    synth->add_option("--dim", synth_cfg.dim, "embedding dimension");
    synth->add_option("--seed", synth_cfg.seed, "generator seed");
    synth->add_option("--out-prefix", synth_prefix, "output prefix (.nodes/.edges/.embeddings/.labels .tsv)")
        ->required();

    // --- train ---
    auto* train = app.add_subcommand("train", "pre-train the clustering scorer on gold labels");
    train->configurable()->fallthrough();
    cli_detail::GraphArgs train_graph;
    train_graph.attach(train);
    std::string train_emb, train_labels, train_out, train_report_path;
    TrainConfig train_cfg;
    EncoderArch arch;
    train->add_option("--embeddings", train_emb, "embeddings file")->required();
    train->add_option("--labels", train_labels, "gold labels file")->required();
    train->add_option("--out-params", train_out, "output checkpoint")->required();
    train->add_option("--report", train_report_path, "training report JSON");
    train->add_option("--alpha", train_cfg.alpha, "contrastive weight");
    train->add_option("--tau", train_cfg.tau, "contrastive temperature");
    train->add_option("--lambda", train_cfg.lambda, "joint objective weight");
    train->add_option("--lr", train_cfg.learning_rate, "learning rate");
    train->add_option("--epochs", train_cfg.epochs, "max epochs");
    train->add_option("--seed", train_cfg.seed, "init and split seed");
    train->add_option("--patience", train_cfg.patience, "early-stop patience");
    train->add_option("--val-frac", train_cfg.val_fraction, "held-out pair fraction");
    train->add_option("--hidden", arch.hidden_dim, "encoder hidden width");
    train->add_option("--layers", arch.num_layers, "encoder layers");
    train->add_option("--heads", arch.num_heads, "attention heads per layer");
    train->add_option("--scorer-hidden", arch.scorer_hidden, "pair scorer hidden width");

    // --- cluster ---
    auto* cluster = app.add_subcommand("cluster", "build the hierarchy");
    cluster->configurable()->fallthrough();
    cli_detail::GraphArgs cluster_graph;
    cluster_graph.attach(cluster);
    std::string cluster_emb, cluster_params, cluster_oracle_labels, cluster_out, cluster_scope = "neighbors";
    BuildConfig build_cfg;
    cluster->add_option("--embeddings", cluster_emb, "embeddings file")->required();
    cluster->add_option("--params", cluster_params, "trained checkpoint");
    cluster->add_option("--oracle-labels", cluster_oracle_labels, "score from gold labels instead of a checkpoint");
    cluster->add_option("--p-tau", build_cfg.p_tau, "edge connection threshold");
    cluster->add_option("--scope", cluster_scope, "pair scope: neighbors | all_pairs");
    cluster->add_option("--root-size", build_cfg.root_size, "stop when a level has at most this many nodes");
    cluster->add_option("--max-levels", build_cfg.max_levels, "maximum hierarchy depth");
    cluster->add_option("--out", cluster_out, "output hierarchy JSON")->required();

    // --- verbalize ---
    auto* verbalize = app.add_subcommand("verbalize", "label every cluster bottom-up");
    verbalize->configurable()->fallthrough();
    cli_detail::GraphArgs verb_graph;
    verb_graph.attach(verbalize);
    std::string verb_hier, verb_out, verb_instruction, verb_client = "stub";
    VerbalizerOptions verb_opts;
    HttpClientConfig http_cfg;
    verbalize->add_option("--hierarchy", verb_hier, "hierarchy JSON")->required();
    verbalize->add_option("--instruction", verb_instruction, "user topic / guidance")->required();
    verbalize->add_option("--client", verb_client, "generation client: stub | http");
    verbalize->add_option("--out", verb_out, "output labels JSON")->required();
    verbalize->add_option("--budget", verb_opts.budget_chars, "prompt budget in characters");
    verbalize->add_option("--max-label", verb_opts.max_label_chars, "label length cap");
    verbalize->add_option("--transcript", verb_opts.transcript_path, "append-only prompt/response log");
    verbalize->add_option("--endpoint", http_cfg.host, "generation service host");
    verbalize->add_option("--port", http_cfg.port, "generation service port");
    verbalize->add_option("--path", http_cfg.path, "generation service path");
    verbalize->add_option("--timeout", http_cfg.timeout_seconds, "request timeout in seconds");
    verbalize->add_option("--max-tokens", http_cfg.max_tokens, "generation token cap");

    // --- export ---
    auto* exp = app.add_subcommand("export", "assemble and export the taxonomy tree");
    exp->configurable()->fallthrough();
    std::string exp_hier, exp_labels, exp_instruction, exp_out, exp_dot;
    exp->add_option("--hierarchy", exp_hier, "hierarchy JSON")->required();
    exp->add_option("--labels", exp_labels, "labels JSON from verbalize")->required();
    exp->add_option("--instruction", exp_instruction, "root label for multi-topic taxonomies")->required();
    exp->add_option("--out", exp_out, "output taxonomy JSON")->required();
    exp->add_option("--dot", exp_dot, "optional graph-description export");

    // --- eval ---
    auto* eval = app.add_subcommand("eval", "pairwise accuracy against gold labels, with a k-means baseline");
    eval->configurable()->fallthrough();
    cli_detail::GraphArgs eval_graph;
    eval_graph.attach(eval);
    std::string eval_hier, eval_labels, eval_emb, eval_out;
    uint64_t eval_seed = 1;
    eval->add_option("--hierarchy", eval_hier, "hierarchy JSON")->required();
    eval->add_option("--labels", eval_labels, "gold labels file")->required();
    eval->add_option("--embeddings", eval_emb, "embeddings file (k-means baseline input)")->required();
    eval->add_option("--seed", eval_seed, "baseline seed");
    eval->add_option("--out", eval_out, "output report JSON");

    std::vector<std::string> argv_store = {"taxograph"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    argv.reserve(argv_store.size());
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*ingest) {
            IngestStats stats;
            CitationGraph g = ingest_graph.load(&stats);
            std::cout << "nodes: " << g.size() << "\nedges: " << g.edges.size()
                      << "\nself_loops_dropped: " << stats.self_loops_dropped
                      << "\nduplicate_edges_dropped: " << stats.duplicate_edges_dropped << "\n";
            if (!ingest_out_nodes.empty() && !ingest_out_edges.empty())
                save_citation_graph(g, ingest_out_nodes, ingest_out_edges);
        } else if (*embed) {
            CitationGraph g = embed_graph.load();
            TextFields fields = TextFields::title_and_abstract;
            if (embed_fields == "title") fields = TextFields::title_only;
            else if (embed_fields == "abstract") fields = TextFields::abstract_only;
            else if (embed_fields != "title+abstract")
                throw std::runtime_error("unknown --fields value: " + embed_fields);
            save_embeddings(fallback_embed(g, embed_dim, embed_seed, fields), g, embed_out);
            std::cout << "embedded " << g.size() << " nodes at dim " << embed_dim << "\n";
        } else if (*synth) {
            SynthInstance inst = synth_graph(synth_cfg);
            save_citation_graph(inst.graph, synth_prefix + ".nodes.tsv", synth_prefix + ".edges.tsv");
            save_embeddings(inst.embeddings, inst.graph, synth_prefix + ".embeddings.tsv");
            save_labels(inst.labels, inst.graph, synth_prefix + ".labels.tsv");
            std::cout << "synthesized " << inst.graph.size() << " papers, " << inst.graph.edges.size() << " edges\n";
        } else if (*train) {
            CitationGraph g = train_graph.load();
            Matrix x = load_embeddings(train_emb, g);
            GoldHierarchyLabels labels = load_labels(train_labels, g);
            TrainResult result = train_clustering(g, x, labels, train_cfg, arch);
            save_params(result.params, train_out);
            if (!train_report_path.empty()) {
                std::ofstream f(train_report_path);
                if (!f) throw std::runtime_error("cannot write training report: " + train_report_path);
                f << train_report_to_json(result.report).dump(2) << '\n';
            }
            std::cout << "trained " << result.report.epochs_run << " epochs; best epoch " << result.report.best_epoch
                      << ", held-out accuracy " << result.report.val_accuracy << "\n";
        } else if (*cluster) {
            CitationGraph g = cluster_graph.load();
            Matrix x = load_embeddings(cluster_emb, g);
            if (cluster_scope == "all_pairs") build_cfg.scope = Scope::all_pairs;
            else if (cluster_scope != "neighbors")
                throw std::runtime_error("unknown --scope value: " + cluster_scope);
            EncoderParams params;
            if (!cluster_oracle_labels.empty()) {
                auto labels = std::make_shared<GoldHierarchyLabels>(load_labels(cluster_oracle_labels, g));
                build_cfg.oracle = cli_detail::oracle_from_labels(labels);
            } else if (!cluster_params.empty()) {
                params = load_params(cluster_params);
            } else {
                throw std::runtime_error("cluster: need --params or --oracle-labels");
            }
            Hierarchy h = build_hierarchy(g, x, params, build_cfg);
            save_hierarchy(h, cluster_out);
            std::cout << "hierarchy levels: " << h.num_levels();
            for (const auto& a : h.assignments) std::cout << " | level " << a.level << ": " << a.size() << " clusters";
            std::cout << "\n";
        } else if (*verbalize) {
            CitationGraph g = verb_graph.load();
            Hierarchy h = load_hierarchy(verb_hier);
            std::unique_ptr<GenerationClient> client;
            if (verb_client == "stub") client = std::make_unique<StubClient>();
            else if (verb_client == "http") client = std::make_unique<HttpClient>(http_cfg);
            else throw std::runtime_error("unknown --client value: " + verb_client);
            VerbalizeResult result = verbalize_hierarchy(h, g, verb_instruction, *client, verb_opts);
            save_labels_map(result, verb_out);
            if (!result.ok()) {
                std::cerr << "verbalization failed at level " << result.failure->level << " cluster "
                          << result.failure->cluster_index << ": " << result.failure->message << "\n";
                return 1;
            }
            std::cout << "labeled " << result.labels.size() << " clusters\n";
        } else if (*exp) {
            Hierarchy h = load_hierarchy(exp_hier);
            auto labels = load_labels_map(exp_labels);
            TaxonomyTree tree = assemble(h, labels, exp_instruction);
            const auto report = validate(tree);
            if (!report.ok()) {
                for (const auto& v : report.violations)
                    std::cerr << "violation: " << v.kind << " on " << v.node << ": " << v.detail << "\n";
                return 1;
            }
            export_json(tree, exp_out);
            if (!exp_dot.empty()) export_dot(tree, exp_dot);
            std::cout << "taxonomy nodes: " << tree.nodes.size() << ", edges: " << tree.edges.size() << "\n";
        } else if (*eval) {
            CitationGraph g = eval_graph.load();
            Hierarchy h = load_hierarchy(eval_hier);
            GoldHierarchyLabels labels = load_labels(eval_labels, g);
            Matrix x = load_embeddings(eval_emb, g);
            EvalReport report = evaluate_hierarchy(h, labels, x, eval_seed);
            if (!eval_out.empty()) save_eval_report(report, eval_out);
            std::cout << "metric: " << report.metric << "\n";
            for (const auto& row : report.rows)
                std::cout << "level " << row.level << ": model " << row.model_accuracy << ", kmeans "
                          << row.kmeans_accuracy << " (k=" << row.gold_clusters << ")\n";
            std::cout << "average: model " << report.model_average << ", kmeans " << report.kmeans_average << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace taxograph
