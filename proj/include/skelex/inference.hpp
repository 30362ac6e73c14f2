#pragma once

// inference.hpp - turning a fitted task skeleton plus a current scene into
// maximum-likelihood object target poses with grasp/place interpretation.
// Execution stops at target poses ("magic actions"); no robot kinematics.

#include <map>
#include <string>
#include <vector>

#include "skelex/se3.hpp"
#include "skelex/skeleton.hpp"

namespace skelex {

struct SceneObject {
    std::string name;
    bool manipulator = false;
    Eigen::VectorXd feature;
    Pose pose;
    bool visible = true;
};

struct Scene {
    std::vector<SceneObject> objects;
};

struct ActionStep {
    std::string kind;  // "grasp", "place" or "unsupported"
    int object = 0;    // identity of the moved object
    Pose target;
    double loglik = 0.0;
    bool flagged = false;
    std::string note;
};

struct InferenceResult {
    Pose pose;
    double loglik = 0.0;
    bool converged = true;
};

/// Bipartite max-similarity binding of skeleton identities to scene
/// objects, manipulators among themselves. Throws "scene missing required
/// objects" when a pool is too small and "scene mismatch" when the mean
/// similarity of the binding falls below 0.5.
std::map<int, int> bind_scene(const TaskSkeleton& skeleton, const Scene& scene);

/// Maximum-likelihood pose of `object` under the step's distributions,
/// given poses for every reference. Gauss-Newton on the 6D tangent from a
/// precision-weighted fusion of the per-reference means; step norm 1e-8 or
/// 100 iterations.
InferenceResult infer_target_pose(const StepModel& step, int object,
                                  const std::map<int, Pose>& reference_poses);

/// Interpret the skeleton's steps as grasp/place actions against the
/// scene, simulating magic placements along the way.
std::vector<ActionStep> plan(const TaskSkeleton& skeleton, const Scene& scene);

}  // namespace skelex
