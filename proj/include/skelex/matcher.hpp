#pragma once

// matcher.hpp - re-identification of objects across demonstrations as a
// k-assignment problem over pairwise feature similarities. The score of a
// matched tuple is the sum of log similarities over all demo pairs, so one
// weak pairing cannot be compensated by strong ones. Manipulators and
// ordinary objects are matched in separate pools.

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "skelex/demo.hpp"

namespace skelex {

struct DemoFeatures {
    std::vector<int> ids;
    std::vector<Eigen::VectorXd> features;  // unit norm
    std::vector<char> manipulator;
};

DemoFeatures features_of(const Demonstration& demo);

struct Assignment {
    /// tuples[k][n] = object id chosen in demonstration n for identity k.
    /// Identities are labeled by their demo-0 member and sorted by it.
    std::vector<std::vector<int>> tuples;
    double score = 0.0;  // unclipped sum-of-logs score
};

/// Unclipped score: sum over tuples of sum over demo pairs of
/// log(f_n . f_m); non-positive similarities score -infinity.
double score_assignment(const Assignment& a, const std::vector<DemoFeatures>& demos);

double tuple_score(const std::vector<int>& tuple, const std::vector<DemoFeatures>& demos);

/// Mean pairwise similarity of one tuple (for reporting).
double tuple_mean_similarity(const std::vector<int>& tuple,
                             const std::vector<DemoFeatures>& demos);

/// Globally optimal assignment by full enumeration, manipulators and
/// objects pooled separately. Ties broken by lexicographic tuple order.
/// Throws std::invalid_argument("use heuristic") beyond 1e7 candidates.
Assignment solve_exhaustive(const std::vector<DemoFeatures>& demos);

/// Sequential bipartite seeding plus per-demo optimal extension and one
/// pairwise 2-opt pass. Exact for two demonstrations.
Assignment solve_heuristic(const std::vector<DemoFeatures>& demos);

/// Minimum-cost assignment of each row to a distinct column
/// (rows <= columns). Returns the column picked per row.
std::vector<int> hungarian_min_cost(const Eigen::MatrixXd& cost);

/// Per-demo map from object id to identity id.
std::vector<std::map<int, int>> identity_maps(const Assignment& a);

}  // namespace skelex
