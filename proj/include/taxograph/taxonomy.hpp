#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxograph/cluster.hpp"
#include "taxograph/verbalizer.hpp"

namespace taxograph {

struct TopicNode {
    std::string id;
    int level = 0;
    std::string label;
    std::vector<std::string> members;  // base paper ids, sorted
};

struct TaxonomyTree {
    std::vector<TopicNode> nodes;                     // root first, then level-descending
    std::vector<std::pair<std::string, std::string>> edges;  // parent -> child, sorted
    std::string root;

    const TopicNode* find(const std::string& id) const {
        for (const auto& n : nodes)
            if (n.id == id) return &n;
        return nullptr;
    }
};

namespace detail {

inline std::string topic_id(int level, int index) {
    return "t" + std::to_string(level) + "_" + std::to_string(index);
}

}  // namespace detail

// One topic node per cluster per level; papers are node metadata, not tree
// leaves. A synthetic root labeled with the instruction is added when the top
// level holds more than one cluster.
inline TaxonomyTree assemble(const Hierarchy& h, const std::map<std::pair<int, int>, ConceptLabel>& labels,
                             const std::string& instruction) {
    TaxonomyTree tree;
    const int top = static_cast<int>(h.assignments.size());
    std::map<std::pair<int, int>, TopicNode> topics;
    for (int level = 1; level <= top; ++level) {
        const auto& cs = h.assignments[level - 1];
        for (int c = 0; c < cs.size(); ++c) {
            auto it = labels.find({level, c});
            if (it == labels.end())
                throw std::runtime_error("assemble: missing label for level " + std::to_string(level) + " cluster " +
                                         std::to_string(c));
            TopicNode node;
            node.id = detail::topic_id(level, c);
            node.level = level;
            node.label = it->second.text;
            node.members = coarsen_members(h, level, c);
            topics.emplace(std::make_pair(level, c), std::move(node));
        }
    }
    // parent edges: a level-l node's topic children are the topics of the
    // clusters that became its member hyper-nodes
    for (int level = 2; level <= top; ++level) {
        const auto& cs = h.assignments[level - 1];
        for (int c = 0; c < cs.size(); ++c)
            for (int child : cs.clusters[c])
                tree.edges.emplace_back(detail::topic_id(level, c), detail::topic_id(level - 1, child));
    }

    const int top_count = top >= 1 ? h.assignments[top - 1].size() : 0;
    if (top_count == 1) {
        tree.root = detail::topic_id(top, 0);
    } else {
        TopicNode root;
        root.id = "root";
        root.level = top + 1;
        root.label = instruction.empty() ? "root" : instruction;
        std::set<std::string> all;
        if (top >= 1) {
            for (int c = 0; c < top_count; ++c) {
                const auto mem = coarsen_members(h, top, c);
                all.insert(mem.begin(), mem.end());
                tree.edges.emplace_back("root", detail::topic_id(top, c));
            }
        } else {
            all.insert(h.base_ids.begin(), h.base_ids.end());
        }
        root.members.assign(all.begin(), all.end());
        tree.root = "root";
        tree.nodes.push_back(std::move(root));
    }

    std::vector<std::pair<int, int>> keys;
    for (const auto& [k, _] : topics) keys.push_back(k);
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;  // level descending
        return a.second < b.second;
    });
    for (const auto& k : keys) tree.nodes.push_back(std::move(topics.at(k)));
    std::sort(tree.edges.begin(), tree.edges.end());
    return tree;
}

struct Violation {
    std::string node;
    std::string kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Checks the tree invariants: single root, single parent, level step of one,
// member union consistency, non-empty labels.
inline ValidationReport validate(const TaxonomyTree& tree) {
    ValidationReport report;
    auto flag = [&](const std::string& node, const std::string& kind, const std::string& detail) {
        report.violations.push_back({node, kind, detail});
    };
    std::map<std::string, const TopicNode*> by_id;
    for (const auto& n : tree.nodes) {
        if (!by_id.emplace(n.id, &n).second) flag(n.id, "duplicate-id", "node id appears twice");
        if (n.label.empty()) flag(n.id, "empty-label", "topic label must be non-empty");
        if (n.members.empty()) flag(n.id, "empty-members", "topic has no member papers");
    }
    if (by_id.find(tree.root) == by_id.end()) {
        flag(tree.root, "missing-root", "root id not among nodes");
        return report;
    }
    std::map<std::string, int> parent_count;
    std::map<std::string, std::vector<std::string>> children;
    for (const auto& [p, c] : tree.edges) {
        if (!by_id.count(p) || !by_id.count(c)) {
            flag(p + "->" + c, "dangling-edge", "edge endpoint not among nodes");
            continue;
        }
        parent_count[c]++;
        children[p].push_back(c);
        if (by_id.at(p)->level != by_id.at(c)->level + 1)
            flag(c, "level-step", "parent level must be child level + 1");
    }
    for (const auto& n : tree.nodes) {
        if (n.id == tree.root) {
            if (parent_count.count(n.id)) flag(n.id, "root-parent", "root must have no parent");
            continue;
        }
        const int pc = parent_count.count(n.id) ? parent_count.at(n.id) : 0;
        if (pc != 1) flag(n.id, "single-parent", "expected exactly 1 parent, found " + std::to_string(pc));
    }
    for (const auto& [p, kids] : children) {
        std::set<std::string> uni;
        for (const auto& k : kids) uni.insert(by_id.at(k)->members.begin(), by_id.at(k)->members.end());
        std::set<std::string> own(by_id.at(p)->members.begin(), by_id.at(p)->members.end());
        if (uni != own) flag(p, "member-union", "members must equal the union of child members");
    }
    return report;
}

inline nlohmann::json taxonomy_to_json(const TaxonomyTree& tree) {
    nlohmann::json j;
    j["version"] = 1;
    j["root"] = tree.root;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes)
        nodes.push_back({{"id", n.id}, {"level", n.level}, {"label", n.label}, {"members", n.members}});
    j["nodes"] = nodes;
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [p, c] : tree.edges) edges.push_back({p, c});
    j["edges"] = edges;
    return j;
}

inline void export_json(const TaxonomyTree& tree, const std::string& path) {
    const auto report = validate(tree);
    if (!report.ok())
        throw std::runtime_error("export_json: tree fails validation (" + report.violations.front().kind + " on " +
                                 report.violations.front().node + ")");
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write taxonomy file: " + path);
    f << taxonomy_to_json(tree).dump(2) << '\n';
}

inline TaxonomyTree load_taxonomy(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open taxonomy file: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (j.value("version", 0) != 1) throw std::runtime_error("taxonomy file: unsupported version");
    TaxonomyTree tree;
    tree.root = j.at("root").get<std::string>();
    for (const auto& n : j.at("nodes")) {
        TopicNode node;
        node.id = n.at("id").get<std::string>();
        node.level = n.at("level").get<int>();
        node.label = n.at("label").get<std::string>();
        node.members = n.at("members").get<std::vector<std::string>>();
        std::sort(node.members.begin(), node.members.end());
        tree.nodes.push_back(std::move(node));
    }
    for (const auto& e : j.at("edges")) tree.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    std::sort(tree.edges.begin(), tree.edges.end());
    return tree;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace detail

inline void export_dot(const TaxonomyTree& tree, const std::string& path) {
    const auto report = validate(tree);
    if (!report.ok())
        throw std::runtime_error("export_dot: tree fails validation (" + report.violations.front().kind + " on " +
                                 report.violations.front().node + ")");
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write dot file: " + path);
    f << "digraph taxonomy {\n";
    f << "  rankdir=TB;\n";
    for (const auto& n : tree.nodes)
        f << "  \"" << detail::dot_escape(n.id) << "\" [label=\"" << detail::dot_escape(n.label) << " (n="
          << n.members.size() << ")\"];\n";
    for (const auto& [p, c] : tree.edges)
        f << "  \"" << detail::dot_escape(p) << "\" -> \"" << detail::dot_escape(c) << "\";\n";
    f << "}\n";
}

}  // namespace taxograph
