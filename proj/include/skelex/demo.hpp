#pragma once

// demo.hpp - demonstration data model: per-object pose trajectories with
// visibility flags, object metadata with feature vectors, and the
// segmentation hyperparameters.

#include <string>
#include <vector>

#include "skelex/gaussian.hpp"
#include "skelex/graph.hpp"
#include "skelex/se3.hpp"

namespace skelex {

struct ObjectInfo {
    int id = 0;
    std::string name;
    bool manipulator = false;
    Eigen::VectorXd feature;
};

struct Demonstration {
    std::vector<ObjectInfo> objects;
    std::vector<std::vector<Pose>> poses;    // [object index][t]
    std::vector<std::vector<char>> visible;  // [object index][t]

    int length() const { return poses.empty() ? 0 : static_cast<int>(poses.front().size()); }
    int num_objects() const { return static_cast<int>(objects.size()); }

    int index_of(int id) const;
    const ObjectInfo& info(int id) const;
    NodeSet all_ids() const;
    NodeSet manipulator_ids() const;

    /// Pose of object `id` at step t, falling back to the nearest visible
    /// step (earlier preferred) when occluded.
    Pose pose_at(int id, int t) const;
    bool visible_at(int id, int t) const;

    /// Throws std::invalid_argument when trajectory lengths differ, ids
    /// repeat, or feature vectors disagree in dimension. Renormalizes
    /// features; rejects near-zero norms.
    void validate_and_normalize();
};

/// Segmentation hyperparameters. Defaults follow the evaluation settings:
/// window 8, evidence 3, MI trigger 0.18 nats, edge/rest quantile 0.1,
/// activation fraction 0.5. MI thresholds are interpreted in nats.
struct Config {
    int window = 8;                      // sliding window (window + 1 samples)
    int min_evidence = 3;                // evidence count before an edge activates
    double mi_threshold = 0.18;          // nats
    double edge_threshold = 0.1;         // two-sided quantile of the connectivity model
    double activation_threshold = 0.5;   // fraction of demos, strict >
    double rest_threshold = 0.1;         // upper quantile of the resting model
    int obs_dim = 3;                     // 3 = positions only, 6 = full pose embedding
    bool smoothing = false;              // cubic polynomial pre-smoothing
    int smoothing_window = 7;
    int min_edge_duration = 0;           // optional filter; 0 keeps every edge
    double reg = kCovReg;
    /// Significance level of the Bartlett independence gate applied to
    /// each MI window. The plug-in Gaussian MI of short windows is biased
    /// upward on independent data (about one nat at window 8 for 3-D
    /// observations), so raw thresholding against mi_threshold would
    /// connect noisy static objects. 0 disables the gate.
    double mi_significance = 1e-5;

    void validate() const;
};

/// Cubic Savitzky-Golay smoothing of every visible trajectory segment.
/// Quaternion components are smoothed sign-aligned and renormalized.
Demonstration smooth_trajectories(const Demonstration& demo, int window);

}  // namespace skelex
