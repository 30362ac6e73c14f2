#pragma once

// metrics.hpp - evaluation metrics: Event Detection Success, Segmentation
// Divergence and Structural Accuracy. Event alignment reuses the skeleton
// module's match predicate so metric and extraction semantics stay in sync.

#include <vector>

#include "skelex/graph.hpp"
#include "skelex/skeleton.hpp"
#include "skelex/synthgen.hpp"

namespace skelex {

struct SegReport {
    int eds = 0;     // 1 iff labels form an ordered subsequence of generated
    double sd = 0.0;  // (generated - labeled) / labeled
    std::vector<int> alignment;  // generated index per label, -1 when unmatched
};

struct StepMatch {
    int label = 0;
    int step = -1;  // matched skeleton step index, -1 when unmatched
};

struct SkeletonReport {
    int sa = 0;
    double sd_steps = 0.0;
    bool minimized = false;
    std::vector<StepMatch> matches;
};

int eds(const std::vector<Event>& generated, const std::vector<Event>& labels);

/// Signed, label-normalized event surplus; positive means over-segmentation.
/// Throws on empty labels.
double sd(const std::vector<Event>& generated, const std::vector<Event>& labels);

SegReport segmentation_report(const std::vector<Event>& generated,
                              const std::vector<Event>& labels);

/// SA = 1 iff every labeled step appears in order. References must contain
/// the labeled reference; in minimized mode they must equal it exactly.
SkeletonReport structural_accuracy(const TaskSkeleton& skeleton,
                                   const std::vector<LabelStep>& labels, bool minimized);

}  // namespace skelex
