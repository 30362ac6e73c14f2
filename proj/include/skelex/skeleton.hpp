#pragma once

// skeleton.hpp - fusing per-demonstration event sequences into a minimal
// sequential task model. Events are remapped into the matched identity
// space, rare object activations are filtered out, the shortest sequence
// becomes the reference skeleton, and per-step relative-pose distributions
// are fitted from entropy-selected candidate combinations.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skelex/demo.hpp"
#include "skelex/gaussian.hpp"
#include "skelex/graph.hpp"
#include "skelex/matcher.hpp"
#include "skelex/segmenter.hpp"

namespace skelex {

struct EventSequence {
    int demo_index = 0;         // index into the demo list
    std::vector<Event> events;  // identity-space payloads, ordered by time
};

struct CandidateSet {
    int anchor = 0;  // index into the reference sequence
    /// Per demo in fitting order (reference demo excluded): indices of
    /// matching events in that demo's sequence.
    std::vector<std::vector<int>> per_demo;
    std::vector<int> demo_indices;  // demo index for each per_demo entry
};

/// One relative-pose distribution of a step.
struct RelDist {
    int ref = 0;
    int obj = 0;
    bool obj_in_ref_frame = true;  // true: pose of obj in ref frame, false: ref in obj frame
    Mvn model;
};

struct StepModel {
    NodeSet moved;                // G'
    int target = kWorldTarget;    // manipulator identity or kWorldTarget
    NodeSet anchor_target_nodes;  // H payload of the anchor event
    NodeSet references;           // current references; shrunk by minimization
    std::vector<RelDist> dists;
    std::string action_hint;  // "grasp", "place" or "unsupported"
    bool low_confidence = false;
    bool ambiguous_reference = false;
    int anchor_demo = 0;
    int anchor_time = 0;
    std::vector<int> support;  // demo indices the distributions were fitted from

    Event anchor_event() const;
};

struct IdentityInfo {
    int id = 0;
    std::string name;
    bool manipulator = false;
    Eigen::VectorXd mean_feature;
};

struct TaskSkeleton {
    std::vector<IdentityInfo> identities;
    std::vector<StepModel> steps;
    std::vector<int> training_demos;
    Config config;
    std::uint64_t seed = 0;

    const IdentityInfo* find_identity(int id) const;
};

/// Entropy gap below which minimize_references flags a step as ambiguous.
inline constexpr double kAmbiguityGap = 0.25;

/// Penalty per skeleton step with no matching event in the evaluated demo.
inline constexpr double kMissingStepPenalty = -50.0;

/// Remap event payloads into identity space; unmatched objects are dropped
/// and Add events left with empty payloads disappear.
EventSequence remap_events(const std::vector<Event>& events, int demo_index,
                           const std::map<int, int>& object_to_identity);

/// Identities added to a manipulator graph in strictly more than
/// `alpha_a` of the demonstrations.
NodeSet confirmed_activations(const std::vector<EventSequence>& sequences, double alpha_a);

/// Removes unconfirmed objects from Add payloads and manipulator graphs
/// and returns them to the world payloads. Empty Adds are dropped.
std::vector<EventSequence> filter_by_activations(const std::vector<EventSequence>& sequences,
                                                 const NodeSet& confirmed,
                                                 const NodeSet& manipulator_ids,
                                                 const NodeSet& all_ids);

/// Index of the sequence with the fewest events, ties to the lowest demo index.
int select_reference_sequence(const std::vector<EventSequence>& sequences);

/// Event match predicate. Kinds must agree; Add payloads must match
/// exactly, except world targets where overlapping world graphs suffice;
/// Merge/Split compare their two graphs commutatively.
bool match_events(const Event& anchor, const Event& candidate);

/// World-add payloads reduced to the objects confirmed active at that
/// point of the sequence (activated by an earlier manipulator Add).
std::vector<Event> effective_events(const EventSequence& seq);

std::vector<CandidateSet> collect_candidates(const std::vector<EventSequence>& sequences,
                                             int reference);

struct CombinationChoice {
    std::vector<int> chosen;  // per CandidateSet::demo_indices entry; -1 when empty
    std::vector<RelDist> dists;
    std::vector<int> support;
    bool low_confidence = false;
};

/// Entropy-scored selection over the cross-product of per-demo candidates
/// (greedy beam of width 4 beyond 4096 combinations).
CombinationChoice select_best_combination(const CandidateSet& cands,
                                          const std::vector<EventSequence>& sequences,
                                          const std::vector<Demonstration>& demos,
                                          const std::vector<std::map<int, int>>& identity_to_object);

/// Fit a task skeleton from segmented and matched demonstrations.
TaskSkeleton fit_skeleton_from_events(const std::vector<Demonstration>& demos,
                                      const std::vector<std::vector<Event>>& raw_events,
                                      const Assignment& assignment, const Config& cfg,
                                      std::uint64_t seed = 0);

/// Segment, match and fit in one call.
TaskSkeleton fit_skeleton(const std::vector<Demonstration>& demos, const Config& cfg,
                          std::uint64_t seed = 0);

/// Reduce every world-targeted step to its lowest-entropy reference
/// object; near ties are flagged ambiguous.
TaskSkeleton minimize_references(const TaskSkeleton& skeleton);

/// Sum of step log-densities at the matched event times of `demo`, with
/// kMissingStepPenalty for steps that never match. Throws
/// std::invalid_argument("demo incompatible") when the first step is missing.
double evaluate_likelihood(const TaskSkeleton& skeleton, const Demonstration& demo,
                           double missing_penalty = kMissingStepPenalty);

/// Identity binding between a skeleton and a demonstration's objects
/// (bipartite feature matching; manipulators bound among themselves).
std::map<int, int> bind_identities(const TaskSkeleton& skeleton, const Demonstration& demo);

}  // namespace skelex
