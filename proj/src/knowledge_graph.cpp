#include "kgeir/knowledge_graph.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "kgeir/error.hpp"

namespace kgeir {

RelationScope scope_of(RelationKind kind) {
    switch (kind) {
        case RelationKind::Subclass:
        case RelationKind::PreKnowledge:
            return RelationScope::Intra;
        case RelationKind::Implement:
        case RelationKind::ApplyToBasic:
            return RelationScope::Inter;
    }
    fail("invalid relation kind");
}

const char* to_string(RelationKind kind) {
    switch (kind) {
        case RelationKind::Subclass: return "Subclass";
        case RelationKind::Implement: return "Implement";
        case RelationKind::PreKnowledge: return "PreKnowledge";
        case RelationKind::ApplyToBasic: return "ApplyToBasic";
    }
    return "?";
}

const char* to_string(ClassLevel level) {
    switch (level) {
        case ClassLevel::Subject: return "Subject";
        case ClassLevel::Basic: return "Basic";
        case ClassLevel::Task: return "Task";
    }
    return "?";
}

bool relation_kind_from_string(const std::string& s, RelationKind& out) {
    if (s == "Subclass") out = RelationKind::Subclass;
    else if (s == "Implement") out = RelationKind::Implement;
    else if (s == "PreKnowledge") out = RelationKind::PreKnowledge;
    else if (s == "ApplyToBasic") out = RelationKind::ApplyToBasic;
    else return false;
    return true;
}

bool class_level_from_string(const std::string& s, ClassLevel& out) {
    if (s == "Subject" || s == "0") out = ClassLevel::Subject;
    else if (s == "Basic" || s == "1") out = ClassLevel::Basic;
    else if (s == "Task" || s == "2") out = ClassLevel::Task;
    else return false;
    return true;
}

int KnowledgeGraph::node_index(const std::string& id) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                                     [](const LearningObject& n, const std::string& v) { return n.id < v; });
    if (it == nodes.end() || it->id != id) return -1;
    return static_cast<int>(it - nodes.begin());
}

KnowledgeGraph build_graph(std::vector<LearningObject> nodes,
                           std::vector<std::tuple<std::string, std::string, RelationKind>> edges) {
    KnowledgeGraph kg;
    std::sort(nodes.begin(), nodes.end(),
              [](const LearningObject& a, const LearningObject& b) { return a.id < b.id; });
    for (size_t i = 1; i < nodes.size(); ++i)
        require(nodes[i].id != nodes[i - 1].id, "duplicate learning object id: " + nodes[i].id);
    kg.nodes = std::move(nodes);

    for (const auto& [from, to, kind] : edges) {
        RelationEdge e;
        e.from = kg.node_index(from);
        e.to = kg.node_index(to);
        require(e.from >= 0, "edge references unknown node: " + from);
        require(e.to >= 0, "edge references unknown node: " + to);
        e.kind = kind;
        e.scope = scope_of(kind);
        const ClassLevel lf = kg.nodes[e.from].class_level;
        const ClassLevel lt = kg.nodes[e.to].class_level;
        if (e.scope == RelationScope::Intra)
            require(lf == lt, std::string(to_string(kind)) + " edge crosses class levels: " + from +
                                  " -> " + to);
        else
            require(lf != lt, std::string(to_string(kind)) + " edge must cross class levels: " +
                                  from + " -> " + to);
        kg.edges.push_back(e);
    }

    kg.out_edges.resize(kg.nodes.size());
    for (size_t i = 0; i < kg.edges.size(); ++i)
        kg.out_edges[kg.edges[i].from].push_back(static_cast<int>(i));
    for (auto& lst : kg.out_edges)
        std::sort(lst.begin(), lst.end(), [&](int x, int y) {
            const auto& ex = kg.edges[x];
            const auto& ey = kg.edges[y];
            if (ex.to != ey.to) return kg.nodes[ex.to].id < kg.nodes[ey.to].id;
            return ex.kind < ey.kind;
        });
    return kg;
}

KnowledgeGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open graph file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(path + ": invalid JSON: " + e.what());
    }
    require(j.contains("nodes") && j["nodes"].is_array(), path + ": missing 'nodes' array");
    require(j.contains("edges") && j["edges"].is_array(), path + ": missing 'edges' array");

    std::vector<LearningObject> nodes;
    for (const auto& n : j["nodes"]) {
        LearningObject lo;
        require(n.contains("id") && n["id"].is_string(), path + ": node without string id");
        lo.id = n["id"].get<std::string>();
        lo.label = n.value("label", lo.id);
        require(n.contains("class_level"), path + ": node " + lo.id + " missing class_level");
        const auto& cl = n["class_level"];
        const std::string cls = cl.is_string() ? cl.get<std::string>()
                                               : std::to_string(cl.get<int>());
        require(class_level_from_string(cls, lo.class_level),
                path + ": node " + lo.id + " has unknown class_level: " + cls);
        nodes.push_back(std::move(lo));
    }

    std::vector<std::tuple<std::string, std::string, RelationKind>> edges;
    for (const auto& e : j["edges"]) {
        require(e.contains("from") && e.contains("to") && e.contains("kind"),
                path + ": edge missing from/to/kind");
        RelationKind kind;
        const std::string ks = e["kind"].get<std::string>();
        require(relation_kind_from_string(ks, kind), path + ": unknown relation kind: " + ks);
        edges.emplace_back(e["from"].get<std::string>(), e["to"].get<std::string>(), kind);
    }
    try {
        return build_graph(std::move(nodes), std::move(edges));
    } catch (const Error& err) {
        fail(path + ": " + err.what());
    }
}

void save_graph(const KnowledgeGraph& kg, const std::string& path) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : kg.nodes)
        j["nodes"].push_back({{"id", n.id}, {"label", n.label}, {"class_level", to_string(n.class_level)}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : kg.edges)
        j["edges"].push_back({{"from", kg.nodes[e.from].id},
                              {"to", kg.nodes[e.to].id},
                              {"kind", to_string(e.kind)}});
    std::ofstream out(path);
    require(out.good(), "cannot write graph file: " + path);
    out << j.dump(2) << '\n';
    require(out.good(), "write failed: " + path);
}

RelationConstraint RelationConstraint::all() {
    RelationConstraint c;
    c.bits = (1u << kRelationKindCount) - 1;
    return c;
}

RelationConstraint RelationConstraint::of(std::initializer_list<RelationKind> kinds) {
    RelationConstraint c;
    for (RelationKind k : kinds) c.bits |= (1u << static_cast<int>(k));
    require(!c.empty(), "relation constraint must allow at least one kind");
    return c;
}

RelationConstraint parse_constraint(const std::string& spec) {
    if (spec == "all" || spec == "unconstrained" || spec.empty()) return RelationConstraint::all();
    RelationConstraint c;
    size_t start = 0;
    while (start <= spec.size()) {
        const size_t comma = spec.find(',', start);
        const std::string tok = spec.substr(start, comma == std::string::npos ? comma : comma - start);
        RelationKind kind;
        require(relation_kind_from_string(tok, kind), "unknown relation kind in constraint: " + tok);
        c.bits |= (1u << static_cast<int>(kind));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    require(!c.empty(), "empty relation constraint");
    return c;
}

std::vector<RelationEdge> get_relations(const KnowledgeGraph& kg, const std::string& kc) {
    const int n = kg.node_index(kc);
    require(n >= 0, "unknown knowledge concept: " + kc);
    std::vector<RelationEdge> out;
    for (int ei : kg.out_edges[n]) out.push_back(kg.edges[ei]);
    return out;  // out_edges are pre-sorted by (target id, kind)
}

namespace {

void dfs_paths(const KnowledgeGraph& kg, RelationConstraint phi, std::vector<int>& path,
               std::vector<char>& on_path, PathSet& out) {
    const int frontier = path.back();
    bool extended = false;
    int prev_to = -1;
    for (int ei : kg.out_edges[frontier]) {
        const RelationEdge& e = kg.edges[ei];
        if (!phi.allows(e.kind) || on_path[e.to]) continue;
        // parallel admissible edges to one node would duplicate the subtree;
        // out_edges are sorted by target so duplicates are adjacent
        if (e.to == prev_to) continue;
        prev_to = e.to;
        extended = true;
        path.push_back(e.to);
        on_path[e.to] = 1;
        dfs_paths(kg, phi, path, on_path, out);
        on_path[e.to] = 0;
        path.pop_back();
    }
    if (!extended) {
        LearningPath p;
        p.nodes = path;
        out.paths.push_back(std::move(p));
    }
}

}  // namespace

PathSet find_all_paths(const KnowledgeGraph& kg, const std::string& target, RelationConstraint phi) {
    const int t = kg.node_index(target);
    require(t >= 0, "unknown target learning object: " + target);
    require(!phi.empty(), "relation constraint must allow at least one kind");
    PathSet out;
    std::vector<int> path{t};
    std::vector<char> on_path(kg.nodes.size(), 0);
    on_path[t] = 1;
    dfs_paths(kg, phi, path, on_path, out);

    // dedupe identical node sequences (parallel edges of different kinds),
    // then order lexicographically by node-id sequence
    auto less = [&](const LearningPath& a, const LearningPath& b) {
        const size_t n = std::min(a.nodes.size(), b.nodes.size());
        for (size_t i = 0; i < n; ++i)
            if (a.nodes[i] != b.nodes[i]) return kg.nodes[a.nodes[i]].id < kg.nodes[b.nodes[i]].id;
        return a.nodes.size() < b.nodes.size();
    };
    std::sort(out.paths.begin(), out.paths.end(), less);
    out.paths.erase(std::unique(out.paths.begin(), out.paths.end(),
                                [](const LearningPath& a, const LearningPath& b) {
                                    return a.nodes == b.nodes;
                                }),
                    out.paths.end());

    out.containing.resize(kg.nodes.size());
    for (size_t i = 0; i < out.paths.size(); ++i)
        for (int node : out.paths[i].nodes) out.containing[node].push_back(static_cast<int>(i));
    return out;
}

PathSet enumerate_all_paths(const KnowledgeGraph& kg, RelationConstraint phi) {
    PathSet out;
    out.containing.resize(kg.nodes.size());
    for (const auto& node : kg.nodes) {
        PathSet per = find_all_paths(kg, node.id, phi);
        for (auto& p : per.paths) {
            for (int n : p.nodes) out.containing[n].push_back(out.n_paths());
            out.paths.push_back(std::move(p));
        }
    }
    return out;
}

int level_in_path(const LearningPath& path, int node) {
    for (size_t i = 0; i < path.nodes.size(); ++i)
        if (path.nodes[i] == node) return static_cast<int>(i);
    fail("knowledge concept not present in path");
}

int level_in_path(const KnowledgeGraph& kg, const LearningPath& path, const std::string& kc) {
    const int n = kg.node_index(kc);
    require(n >= 0, "unknown knowledge concept: " + kc);
    return level_in_path(path, n);
}

}  // namespace kgeir
