#pragma once

// graph.hpp - manipulation graphs, manipulator/world partitions and the
// Add/Merge/Split events emitted for topology changes between steps.

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace skelex {

using NodeSet = std::set<int>;

/// Target id used by Add events whose destination is the world graph.
inline constexpr int kWorldTarget = -1;

/// Undirected graph over object ids. Edges between two manipulators are
/// rejected, which structurally forbids manipulator-only subgraphs.
struct ManipGraph {
    NodeSet nodes;
    std::set<std::pair<int, int>> edges;  // normalized (min, max)

    void add_node(int id) { nodes.insert(id); }
    void add_edge(int a, int b, const NodeSet& manipulators);
    bool has_edge(int a, int b) const;

    /// Connected component containing `start`, over member nodes.
    NodeSet component_of(int start) const;

    /// Maximal connected groups of `subset` in the subgraph induced by it.
    std::vector<NodeSet> connected_groups(const NodeSet& subset) const;

    bool operator==(const ManipGraph&) const = default;
};

/// Node membership per manipulator plus the world remainder. Manipulators
/// sharing a component hold identical node sets.
struct SubgraphPartition {
    ManipGraph graph;
    NodeSet manipulators;
    std::map<int, NodeSet> manipulator_subgraphs;
    NodeSet world;

    bool operator==(const SubgraphPartition&) const = default;
};

enum class EventKind { Add, Merge, Split };

std::string to_string(EventKind k);

struct Event {
    EventKind kind = EventKind::Add;
    int time = 0;
    /// Add: the added nodes G'. Merge/Split: nodes of graph a.
    NodeSet nodes;
    /// Merge/Split: nodes of graph b. Empty for Add.
    NodeSet nodes_b;
    /// Add: manipulator id or kWorldTarget.
    int target = kWorldTarget;
    /// Add: node set of the graph H the nodes were added to (excluding them).
    NodeSet target_nodes;

    bool operator==(const Event&) const = default;
};

SubgraphPartition partition(const ManipGraph& g, const NodeSet& manipulators);

/// True iff some manipulator subgraph differs between the two partitions.
bool step_change(const SubgraphPartition& prev, const SubgraphPartition& next);

/// Events for one transition, ordered Splits, Adds, Merges, each sorted by
/// smallest member id. Throws on node-universe mismatch.
std::vector<Event> diff_events(const SubgraphPartition& prev, const SubgraphPartition& next,
                               int t);

}  // namespace skelex
