#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "taxograph/graph.hpp"
#include "taxograph/cluster.hpp"
#include "taxograph/matrix.hpp"

namespace taxograph {

// Base papers a cluster ultimately contains (union down to level 1).
inline std::vector<std::string> coarsen_members(const Hierarchy& h, int level, int cluster_index) {
    if (level < 1 || level > static_cast<int>(h.assignments.size()))
        throw std::out_of_range("coarsen_members: level out of range");
    const auto& cs = h.assignments[level - 1];
    if (cluster_index < 0 || cluster_index >= cs.size())
        throw std::out_of_range("coarsen_members: cluster index out of range");
    const auto& g = h.levels[level - 1];
    std::set<int> mem;
    for (int v : cs.clusters[cluster_index]) mem.insert(g.members[v].begin(), g.members[v].end());
    std::vector<std::string> out;
    for (int m : mem) out.push_back(h.base_ids[m]);
    std::sort(out.begin(), out.end());
    return out;
}

// Two-layer map from encoder space to the text-embedding space; no output
// nonlinearity.
struct ProjectorParams {
    Matrix w1, w2;
    std::vector<double> b1, b2;
    double slope = 0.2;

    static ProjectorParams init(int in_dim, int hidden, int out_dim, uint64_t seed) {
        ProjectorParams p;
        RngStream rng(seed);
        p.w1 = random_matrix(in_dim, hidden, 1.0 / std::sqrt(double(in_dim)), rng);
        p.w2 = random_matrix(hidden, out_dim, 1.0 / std::sqrt(double(hidden)), rng);
        p.b1.assign(hidden, 0.0);
        p.b2.assign(out_dim, 0.0);
        return p;
    }
};

inline std::vector<double> project_cluster(std::span<const double> embedding, const ProjectorParams& proj) {
    if (static_cast<int>(embedding.size()) != proj.w1.rows())
        throw std::invalid_argument("project_cluster: dimension mismatch");
    std::vector<double> hidden(proj.w1.cols(), 0.0);
    for (int i = 0; i < proj.w1.rows(); ++i)
        for (int j = 0; j < proj.w1.cols(); ++j) hidden[j] += embedding[i] * proj.w1(i, j);
    for (size_t j = 0; j < hidden.size(); ++j) hidden[j] = leaky_relu(hidden[j] + proj.b1[j], proj.slope);
    std::vector<double> out(proj.w2.cols(), 0.0);
    for (int i = 0; i < proj.w2.rows(); ++i)
        for (int j = 0; j < proj.w2.cols(); ++j) out[j] += hidden[i] * proj.w2(i, j);
    for (size_t j = 0; j < out.size(); ++j) out[j] += proj.b2[j];
    return out;
}

struct MemberRecord {
    std::string id;
    std::string title;
    std::string abstract_text;
};

struct PromptBundle {
    std::string instruction;
    int level = 1;
    int cluster_index = 0;
    int cluster_size = 0;               // base papers in the cluster
    std::string representative_id;      // highest-density base member
    std::vector<std::string> child_labels;
    std::vector<MemberRecord> members;  // density-descending, truncated whole-record
    bool truncated = false;
    int budget = 0;
    std::vector<double> projected;      // optional graph-token vector

    // Deterministic serialization; the byte length is what the budget bounds.
    std::string serialize() const {
        std::ostringstream os;
        os << "Instruction: " << instruction << "\n";
        os << "[Level " << level << " cluster " << cluster_index << "; " << cluster_size
           << " papers; representative " << representative_id << "]\n";
        if (!child_labels.empty()) {
            os << "Child topics:\n";
            for (const auto& c : child_labels) os << "- " << c << "\n";
        }
        os << "Papers:\n";
        for (const auto& m : members) {
            os << "- " << m.title;
            if (!m.abstract_text.empty()) os << ": " << m.abstract_text;
            os << "\n";
        }
        os << "Name the single central concept of this cluster.\n";
        return os.str();
    }
};

struct VerbalizerOptions {
    int budget_chars = 4000;
    int max_label_chars = 120;
    int max_attempts = 3;
    int backoff_initial_ms = 100;
    std::string transcript_path;  // append-only JSONL when set
};

// Member texts ordered by descending level-1 density, then id. The
// instruction and child labels are never truncated; member records are
// appended whole until the serialized budget is reached.
inline PromptBundle build_prompt(const Hierarchy& h, const CitationGraph& graph, int level, int cluster_index,
                                 const std::string& instruction, const std::vector<std::string>& child_labels,
                                 int budget_chars) {
    if (instruction.empty()) throw std::invalid_argument("build_prompt: empty instruction");
    PromptBundle b;
    b.instruction = instruction;
    b.level = level;
    b.cluster_index = cluster_index;
    b.child_labels = child_labels;
    b.budget = budget_chars;

    const auto member_ids = coarsen_members(h, level, cluster_index);
    b.cluster_size = static_cast<int>(member_ids.size());
    static const std::vector<double> no_density;
    const auto& base_density = h.densities.empty() ? no_density : h.densities[0];
    std::vector<int> order;
    for (const auto& id : member_ids) order.push_back(graph.index_of(id));
    std::sort(order.begin(), order.end(), [&](int a, int c) {
        const double da = a < static_cast<int>(base_density.size()) ? base_density[a] : 0.0;
        const double dc = c < static_cast<int>(base_density.size()) ? base_density[c] : 0.0;
        if (da != dc) return da > dc;
        return a < c;
    });
    b.representative_id = graph.nodes[order.front()].id;

    if (static_cast<int>(b.serialize().size()) > budget_chars)
        throw std::runtime_error("build_prompt: budget too small for instruction and child labels");
    for (int idx : order) {
        const auto& n = graph.nodes[idx];
        PromptBundle probe = b;
        probe.members.push_back({n.id, n.title, n.abstract_text});
        if (static_cast<int>(probe.serialize().size()) > budget_chars) {
            b.truncated = true;
            break;
        }
        b.members.push_back({n.id, n.title, n.abstract_text});
    }
    return b;
}

struct ConceptLabel {
    std::string text;
    std::string source;  // "client" or "stub"
    std::optional<std::vector<double>> token_logprobs;
};

struct GenerationResponse {
    std::string text;
    std::optional<std::vector<double>> token_logprobs;
    bool transient_failure = false;  // retryable
    std::string error;
};

class GenerationClient {
  public:
    virtual ~GenerationClient() = default;
    virtual GenerationResponse generate(const PromptBundle& bundle) = 0;
    virtual std::string name() const = 0;
};

// Deterministic offline generator: scores member-text terms by term frequency
// weighted with smoothed inverse document frequency across the bundle's
// member records and joins the top 3 (ties broken alphabetically).
class StubClient : public GenerationClient {
  public:
    static std::vector<std::pair<std::string, double>> term_scores(const PromptBundle& bundle) {
        const int n = static_cast<int>(bundle.members.size());
        std::map<std::string, int> tf;
        std::map<std::string, int> df;
        for (const auto& m : bundle.members) {
            auto tokens = detail::tokenize(m.title + " " + m.abstract_text);
            std::set<std::string> seen;
            for (auto& t : tokens) {
                ++tf[t];
                seen.insert(t);
            }
            for (const auto& t : seen) ++df[t];
        }
        std::vector<std::pair<std::string, double>> scored;
        for (const auto& [term, count] : tf) {
            const double idf = std::log((1.0 + n) / (1.0 + df[term])) + 1.0;
            scored.emplace_back(term, count * idf);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        return scored;
    }

    GenerationResponse generate(const PromptBundle& bundle) override {
        auto scored = term_scores(bundle);
        if (scored.empty()) return {.text = "", .error = "no scorable terms"};
        std::string label;
        for (size_t i = 0; i < scored.size() && i < 3; ++i) {
            if (i) label += " ";
            label += scored[i].first;
        }
        return {.text = label};
    }

    std::string name() const override { return "stub"; }
};

namespace detail {

inline void append_transcript(const std::string& path, int level, int cluster, const std::string& prompt,
                              const std::string& response, const std::string& source) {
    if (path.empty()) return;
    std::ofstream f(path, std::ios::app);
    if (!f) throw std::runtime_error("cannot append transcript: " + path);
    nlohmann::json j = {{"level", level}, {"cluster", cluster}, {"prompt", prompt}, {"response", response},
                        {"source", source}};
    f << j.dump() << '\n';
}

inline std::string first_line_trimmed(const std::string& s, int max_chars) {
    size_t start = 0;
    while (start < s.size()) {
        size_t end = s.find('\n', start);
        if (end == std::string::npos) end = s.size();
        std::string line = s.substr(start, end - start);
        const auto b = line.find_first_not_of(" \t\r");
        if (b != std::string::npos) {
            const auto e = line.find_last_not_of(" \t\r");
            line = line.substr(b, e - b + 1);
            if (static_cast<int>(line.size()) > max_chars) line.resize(max_chars);
            return line;
        }
        start = end + 1;
    }
    return "";
}

}  // namespace detail

// One request per node; transient failures retried with exponential backoff.
inline ConceptLabel verbalize_node(const PromptBundle& bundle, GenerationClient& client,
                                   const VerbalizerOptions& opts = {}) {
    GenerationResponse resp;
    for (int attempt = 0; attempt < std::max(1, opts.max_attempts); ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(opts.backoff_initial_ms << (attempt - 1)));
        resp = client.generate(bundle);
        if (resp.error.empty() || !resp.transient_failure) break;
    }
    if (!resp.error.empty())
        throw std::runtime_error("generation failed for level " + std::to_string(bundle.level) + " cluster " +
                                 std::to_string(bundle.cluster_index) + ": " + resp.error);
    detail::append_transcript(opts.transcript_path, bundle.level, bundle.cluster_index, bundle.serialize(), resp.text,
                              client.name());
    ConceptLabel label;
    label.text = detail::first_line_trimmed(resp.text, opts.max_label_chars);
    if (label.text.empty())
        throw std::runtime_error("empty response for level " + std::to_string(bundle.level) + " cluster " +
                                 std::to_string(bundle.cluster_index));
    label.source = client.name();
    label.token_logprobs = resp.token_logprobs;
    return label;
}

struct NodeFailure {
    int level = 0;
    int cluster_index = 0;
    std::string message;
};

struct VerbalizeResult {
    std::map<std::pair<int, int>, ConceptLabel> labels;  // (level, cluster_index)
    std::optional<NodeFailure> failure;

    bool ok() const { return !failure.has_value(); }
};

// Bottom-up labeling: level 1 first, each higher level prompting with its
// children's final labels. On failure the completed labels are preserved.
inline VerbalizeResult verbalize_hierarchy(const Hierarchy& h, const CitationGraph& graph,
                                           const std::string& instruction, GenerationClient& client,
                                           const VerbalizerOptions& opts = {},
                                           const ProjectorParams* projector = nullptr) {
    VerbalizeResult result;
    for (int level = 1; level <= static_cast<int>(h.assignments.size()); ++level) {
        const auto& cs = h.assignments[level - 1];
        for (int c = 0; c < cs.size(); ++c) {
            std::vector<std::string> child_labels;
            if (level >= 2) {
                for (int child : cs.clusters[c]) child_labels.push_back(result.labels.at({level - 1, child}).text);
            }
            try {
                PromptBundle bundle = build_prompt(h, graph, level, c, instruction, child_labels, opts.budget_chars);
                if (projector && level < static_cast<int>(h.levels.size())) {
                    const auto& next = h.levels[level];
                    if (c < next.features.rows() && next.features.cols() == projector->w1.rows())
                        bundle.projected = project_cluster(next.features.row(c), *projector);
                }
                result.labels.emplace(std::make_pair(level, c), verbalize_node(bundle, client, opts));
            } catch (const std::exception& e) {
                result.failure = NodeFailure{level, c, e.what()};
                return result;
            }
        }
    }
    return result;
}

inline void save_labels_map(const VerbalizeResult& r, const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [key, label] : r.labels) {
        nlohmann::json j = {{"level", key.first}, {"cluster", key.second}, {"text", label.text},
                            {"source", label.source}};
        if (label.token_logprobs) j["token_logprobs"] = *label.token_logprobs;
        arr.push_back(j);
    }
    nlohmann::json root = {{"version", 1}, {"labels", arr}};
    if (r.failure) {
        root["failure"] = {{"level", r.failure->level}, {"cluster", r.failure->cluster_index},
                           {"message", r.failure->message}};
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write labels file: " + path);
    f << root.dump(2) << '\n';
}

inline std::map<std::pair<int, int>, ConceptLabel> load_labels_map(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open labels file: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    std::map<std::pair<int, int>, ConceptLabel> out;
    for (const auto& e : j.at("labels")) {
        ConceptLabel label;
        label.text = e.at("text").get<std::string>();
        label.source = e.value("source", "client");
        if (e.contains("token_logprobs")) label.token_logprobs = e.at("token_logprobs").get<std::vector<double>>();
        out.emplace(std::make_pair(e.at("level").get<int>(), e.at("cluster").get<int>()), std::move(label));
    }
    return out;
}

}  // namespace taxograph
