#pragma once

// segmenter.hpp - demonstration segmentation pipeline: sliding-window MI
// signals over object pairs, edge tracking with fitted connectivity models,
// backward edge extension, resting-model end pruning, and sparsification
// into a sequence of manipulation graphs with emitted events.

#include <map>
#include <utility>
#include <vector>

#include "skelex/demo.hpp"
#include "skelex/gaussian.hpp"
#include "skelex/graph.hpp"

namespace skelex {

struct MiSignals {
    std::vector<std::pair<int, int>> pairs;   // object id pairs (min, max)
    std::vector<std::vector<double>> series;  // [pair][t], zero before the first full window
};

/// One connection episode between a pair of objects.
struct EdgeTrack {
    std::pair<int, int> pair{0, 0};
    int raw_start = 0;  // first step with MI above the trigger
    int raw_end = 0;    // last step the connectivity model still held
    int start = 0;      // raw_start propagated back in time
    int end = 0;        // raw_end pruned by the resting models
    ScalarNormal connectivity;  // normal over inter-object distance
    std::vector<std::pair<Pose, Pose>> evidence;
    bool high_variance = false;  // diagnostic: loosely fitted connectivity
};

struct RestModel {
    std::map<int, ScalarNormal> models;
    NodeSet fallback_ids;  // objects (and manipulators) with no resting steps
};

struct SparseStep {
    int time = 0;
    SubgraphPartition part;
};

struct SegmentationResult {
    std::vector<SparseStep> steps;
    std::vector<Event> events;
    std::vector<EdgeTrack> edges;
};

/// Per-pair MI time series on windows [t - window, t]. Pairs of two
/// manipulators are excluded; a window overlapping any invisible step
/// yields exactly zero. Computed in parallel over pairs; bit-identical to
/// mi_signals_serial for any thread count.
MiSignals mi_signals(const Demonstration& demo, const Config& cfg);

/// Single-threaded reference implementation, kept for testing and the
/// benchmark target.
MiSignals mi_signals_serial(const Demonstration& demo, const Config& cfg);

std::vector<EdgeTrack> track_edges(const Demonstration& demo, const MiSignals& signals,
                                   const Config& cfg);

EdgeTrack extend_back(EdgeTrack edge, const Demonstration& demo, const Config& cfg);

RestModel fit_rest_models(const Demonstration& demo, const std::vector<EdgeTrack>& edges);

EdgeTrack prune_end(EdgeTrack edge, const RestModel& rest, const Demonstration& demo,
                    const Config& cfg);

/// Graph of active edges at step t.
ManipGraph graph_at(const Demonstration& demo, const std::vector<EdgeTrack>& edges, int t);

/// Full pipeline. Deterministic: identical demo and config produce
/// identical events.
SegmentationResult segment(const Demonstration& demo, const Config& cfg);

}  // namespace skelex
