#pragma once

// synthgen.hpp - deterministic synthetic demonstration generator with
// ground-truth event labels, edge timings and a minimal structural
// skeleton. Scripts are built from primitives; observation noise perturbs
// what is recorded, never the script, so labels are noise-invariant.

#include <cstdint>
#include <string>
#include <vector>

#include "skelex/demo.hpp"
#include "skelex/graph.hpp"

namespace skelex {

enum class PrimitiveKind { Approach, Grasp, CarryTo, Release, Retreat, Dwell, Bump };

struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Dwell;
    int manipulator = -1;     // roster index
    int object = -1;          // roster index of the manipulated object
    int reference = -1;       // CarryTo: roster index the goal offset is relative to
    Vec3 offset{0, 0, 0};     // CarryTo: mean goal offset in the reference frame
    double offset_stddev = 0.0;  // per-demo goal variation
    int every_k_demos = 1;    // > 1: primitive runs only in demos with d % k == 0
};

enum class Role { Manipulator, Movable, Reference, Distractor };

struct RosterEntry {
    std::string name;
    Role role = Role::Movable;
    Vec3 base_position{0, 0, 0};
    double position_jitter = 0.0;  // per-demo start position variation
};

struct OcclusionSpan {
    int object = 0;  // roster index
    int t0 = 0;
    int t1 = 0;  // inclusive
};

struct TaskTemplate {
    std::vector<RosterEntry> roster;
    std::vector<Primitive> script;
    double noise_pos = 0.0;  // observation noise stddev, meters
    double noise_rot = 0.0;  // radians
    std::vector<OcclusionSpan> occlusions;
    int steps_per_primitive = 50;
    double feature_similarity = 0.95;
    int feature_dim = 16;
};

/// Ground-truth connection interval of one manipulation episode.
struct EdgeTiming {
    int object_a = 0;  // roster ids
    int object_b = 0;
    int start = 0;  // frame control was established
    int end = 0;    // frame the manipulation effectively ended
};

struct LabelStep {
    NodeSet moved;             // roster ids
    int target = kWorldTarget;  // manipulator roster id or kWorldTarget
    NodeSet references;        // for world steps: the scripted goal reference
};

struct GroundTruth {
    std::vector<std::vector<Event>> events;        // per demo, roster-id space
    std::vector<std::vector<EdgeTiming>> timings;  // per demo
    std::vector<LabelStep> skeleton;               // minimal structural model
    int true_reference = -1;  // roster id of the scripted goal reference, if unique
};

struct SynthResult {
    std::vector<Demonstration> demos;
    GroundTruth truth;
};

/// Per-object feature vectors for one demonstration: each roster entry
/// owns a basis direction; cross-demo same-object dots concentrate around
/// `similarity`, cross-object dots stay near zero.
std::vector<Eigen::VectorXd> perturb_features(int roster_size, int dim, double similarity,
                                              std::uint64_t seed);

SynthResult generate(const TaskTemplate& tmpl, int n_demos, std::uint64_t seed);

/// Canned templates used across tests and the acceptance suite.
TaskTemplate pick_place_template(std::uint64_t variant = 0);
TaskTemplate push_template(std::uint64_t variant = 0);
TaskTemplate bimanual_sequential_template(std::uint64_t variant = 0);
/// Pick-place plus a distractor manipulated only in every third demo.
TaskTemplate distractor_template(std::uint64_t variant = 0);
/// Two possible reference objects; `gap` controls the per-demo variance of
/// the goal relative to the false reference (entropy gap in nats is about
/// 3 * ln(sigma_false / sigma_true)).
TaskTemplate two_reference_template(double sigma_true, double sigma_false,
                                    std::uint64_t variant = 0);

}  // namespace skelex
