#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kgeir {

enum class ClassLevel { Subject = 0, Basic = 1, Task = 2 };
enum class RelationKind { Subclass = 0, Implement = 1, PreKnowledge = 2, ApplyToBasic = 3 };
enum class RelationScope { Intra, Inter };

constexpr int kRelationKindCount = 4;
RelationScope scope_of(RelationKind kind);
const char* to_string(RelationKind kind);
const char* to_string(ClassLevel level);
bool relation_kind_from_string(const std::string& s, RelationKind& out);
bool class_level_from_string(const std::string& s, ClassLevel& out);

struct LearningObject {
    std::string id;
    std::string label;
    ClassLevel class_level = ClassLevel::Basic;
};

struct RelationEdge {
    int from = -1;  // node indices
    int to = -1;
    RelationKind kind = RelationKind::Subclass;
    RelationScope scope = RelationScope::Intra;
};

// Typed, class-leveled learning-object graph. Immutable after load; intra
// edges stay within a class level, inter edges must cross levels.
struct KnowledgeGraph {
    std::vector<LearningObject> nodes;  // sorted by id
    std::vector<RelationEdge> edges;
    std::vector<std::vector<int>> out_edges;  // per node, edge indices sorted by (to-id, kind)

    int n_nodes() const { return static_cast<int>(nodes.size()); }
    int node_index(const std::string& id) const;  // -1 when absent
};

KnowledgeGraph build_graph(std::vector<LearningObject> nodes,
                           std::vector<std::tuple<std::string, std::string, RelationKind>> edges);
KnowledgeGraph load_graph(const std::string& path);
void save_graph(const KnowledgeGraph& kg, const std::string& path);

// The phi of the path extraction: which relation kinds a path may follow.
struct RelationConstraint {
    std::uint8_t bits = 0;

    static RelationConstraint all();
    static RelationConstraint of(std::initializer_list<RelationKind> kinds);
    bool allows(RelationKind kind) const { return bits & (1u << static_cast<int>(kind)); }
    bool empty() const { return bits == 0; }
};

// comma-separated kind names, or "all"/"unconstrained"
RelationConstraint parse_constraint(const std::string& spec);

std::vector<RelationEdge> get_relations(const KnowledgeGraph& kg, const std::string& kc);

struct LearningPath {
    std::vector<int> nodes;  // node indices; position == level in path
};

struct PathSet {
    std::vector<LearningPath> paths;
    std::vector<std::vector<int>> containing;  // node index -> path indices

    int n_paths() const { return static_cast<int>(paths.size()); }
};

// Depth-first enumeration of maximal simple paths from `target`, following
// only edges whose kind is admissible under phi. A path is emitted exactly
// when its frontier node has no admissible unvisited successor; within-path
// revisits are forbidden so enumeration terminates on cyclic graphs.
PathSet find_all_paths(const KnowledgeGraph& kg, const std::string& target,
                       RelationConstraint phi);
// Union over every node as target (the path universe behind f1..f3).
PathSet enumerate_all_paths(const KnowledgeGraph& kg, RelationConstraint phi);

int level_in_path(const LearningPath& path, int node);
int level_in_path(const KnowledgeGraph& kg, const LearningPath& path, const std::string& kc);

}  // namespace kgeir
