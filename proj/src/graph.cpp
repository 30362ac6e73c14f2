#include "skelex/graph.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace skelex {

namespace {

std::pair<int, int> norm_edge(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

int min_id(const NodeSet& s) { return s.empty() ? 0 : *s.begin(); }

}  // namespace

std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::Add: return "add";
        case EventKind::Merge: return "merge";
        case EventKind::Split: return "split";
    }
    return "?";
}

void ManipGraph::add_edge(int a, int b, const NodeSet& manipulators) {
    if (a == b) throw std::invalid_argument("self edge");
    if (manipulators.count(a) && manipulators.count(b)) {
        throw std::invalid_argument("edge between manipulators");
    }
    if (!nodes.count(a) || !nodes.count(b)) throw std::invalid_argument("edge references unknown node");
    edges.insert(norm_edge(a, b));
}

bool ManipGraph::has_edge(int a, int b) const { return edges.count(norm_edge(a, b)) > 0; }

NodeSet ManipGraph::component_of(int start) const {
    NodeSet seen{start};
    std::deque<int> q{start};
    while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (const auto& [a, b] : edges) {
            int v = -1;
            if (a == u) v = b;
            else if (b == u) v = a;
            else continue;
            if (seen.insert(v).second) q.push_back(v);
        }
    }
    return seen;
}

std::vector<NodeSet> ManipGraph::connected_groups(const NodeSet& subset) const {
    std::vector<NodeSet> groups;
    NodeSet remaining = subset;
    while (!remaining.empty()) {
        const int start = *remaining.begin();
        NodeSet comp{start};
        std::deque<int> q{start};
        while (!q.empty()) {
            const int u = q.front();
            q.pop_front();
            for (const auto& [a, b] : edges) {
                int v = -1;
                if (a == u) v = b;
                else if (b == u) v = a;
                else continue;
                if (subset.count(v) && comp.insert(v).second) q.push_back(v);
            }
        }
        groups.push_back(comp);
        for (int n : comp) remaining.erase(n);
    }
    std::sort(groups.begin(), groups.end(),
              [](const NodeSet& a, const NodeSet& b) { return min_id(a) < min_id(b); });
    return groups;
}

SubgraphPartition partition(const ManipGraph& g, const NodeSet& manipulators) {
    for (int m : manipulators) {
        if (!g.nodes.count(m)) throw std::invalid_argument("manipulator not a graph node");
    }
    SubgraphPartition p;
    p.graph = g;
    p.manipulators = manipulators;
    for (int m : manipulators) p.manipulator_subgraphs[m] = g.component_of(m);
    p.world = g.nodes;
    for (const auto& [m, sub] : p.manipulator_subgraphs) {
        (void)m;
        for (int n : sub) p.world.erase(n);
    }
    return p;
}

bool step_change(const SubgraphPartition& prev, const SubgraphPartition& next) {
    return prev.manipulator_subgraphs != next.manipulator_subgraphs;
}

std::vector<Event> diff_events(const SubgraphPartition& prev, const SubgraphPartition& next,
                               int t) {
    if (prev.graph.nodes != next.graph.nodes || prev.manipulators != next.manipulators) {
        throw std::invalid_argument("node universe mismatch");
    }

    std::vector<Event> splits, adds, merges;

    // Distinct next components holding manipulators, keyed by node set.
    std::vector<std::pair<NodeSet, NodeSet>> next_comps;  // (component nodes, its manipulators)
    for (int m : next.manipulators) {
        const NodeSet& comp = next.manipulator_subgraphs.at(m);
        auto it = std::find_if(next_comps.begin(), next_comps.end(),
                               [&](const auto& c) { return c.first == comp; });
        if (it == next_comps.end()) next_comps.push_back({comp, {m}});
        else it->second.insert(m);
    }

    // Adds into manipulator components.
    for (const auto& [comp, comp_manips] : next_comps) {
        NodeSet added;
        for (int n : comp) {
            if (next.manipulators.count(n)) continue;
            bool was_there = false;
            for (int m : comp_manips) {
                if (prev.manipulator_subgraphs.at(m).count(n)) { was_there = true; break; }
            }
            if (!was_there) added.insert(n);
        }
        if (added.empty()) continue;
        NodeSet host = comp;
        for (int n : added) host.erase(n);
        for (const NodeSet& group : next.graph.connected_groups(added)) {
            Event e;
            e.kind = EventKind::Add;
            e.time = t;
            e.nodes = group;
            e.target = *comp_manips.begin();
            e.target_nodes = host;
            adds.push_back(std::move(e));
        }
    }

    // Adds into the world: nodes that left a manipulator subgraph.
    {
        NodeSet added;
        for (int n : next.world) {
            for (const auto& [m, sub] : prev.manipulator_subgraphs) {
                (void)m;
                if (sub.count(n)) { added.insert(n); break; }
            }
        }
        if (!added.empty()) {
            NodeSet host = next.world;
            for (int n : added) host.erase(n);
            for (const NodeSet& group : next.graph.connected_groups(added)) {
                Event e;
                e.kind = EventKind::Add;
                e.time = t;
                e.nodes = group;
                e.target = kWorldTarget;
                e.target_nodes = host;
                adds.push_back(std::move(e));
            }
        }
    }

    // Merges and splits, deduplicated over component set pairs.
    std::set<std::pair<NodeSet, NodeSet>> seen_merge, seen_split;
    for (auto it_m = next.manipulators.begin(); it_m != next.manipulators.end(); ++it_m) {
        for (auto it_n = std::next(it_m); it_n != next.manipulators.end(); ++it_n) {
            const NodeSet& pm = prev.manipulator_subgraphs.at(*it_m);
            const NodeSet& pn = prev.manipulator_subgraphs.at(*it_n);
            const NodeSet& nm = next.manipulator_subgraphs.at(*it_m);
            const NodeSet& nn = next.manipulator_subgraphs.at(*it_n);
            if (pm != pn && nm == nn) {
                auto key = pm < pn ? std::make_pair(pm, pn) : std::make_pair(pn, pm);
                if (seen_merge.insert(key).second) {
                    Event e;
                    e.kind = EventKind::Merge;
                    e.time = t;
                    e.nodes = key.first;
                    e.nodes_b = key.second;
                    merges.push_back(std::move(e));
                }
            } else if (pm == pn && nm != nn) {
                auto key = nm < nn ? std::make_pair(nm, nn) : std::make_pair(nn, nm);
                if (seen_split.insert(key).second) {
                    Event e;
                    e.kind = EventKind::Split;
                    e.time = t;
                    e.nodes = key.first;
                    e.nodes_b = key.second;
                    splits.push_back(std::move(e));
                }
            }
        }
    }

    auto by_min = [](const Event& a, const Event& b) {
        if (min_id(a.nodes) != min_id(b.nodes)) return min_id(a.nodes) < min_id(b.nodes);
        return a.nodes < b.nodes;
    };
    std::sort(splits.begin(), splits.end(), by_min);
    std::sort(adds.begin(), adds.end(), by_min);
    std::sort(merges.begin(), merges.end(), by_min);

    std::vector<Event> out;
    out.reserve(splits.size() + adds.size() + merges.size());
    for (auto& v : {&splits, &adds, &merges}) {
        for (auto& e : *v) out.push_back(std::move(e));
    }
    return out;
}

}  // namespace skelex
