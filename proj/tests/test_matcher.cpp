#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "skelex/matcher.hpp"
#include "skelex/synthgen.hpp"

using namespace skelex;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

DemoFeatures make_demo(const std::vector<Eigen::VectorXd>& feats,
                       const std::vector<char>& manip = {}) {
    DemoFeatures d;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        d.ids.push_back(static_cast<int>(i));
        d.features.push_back(feats[i].normalized());
        d.manipulator.push_back(manip.empty() ? 0 : manip[i]);
    }
    return d;
}

// Independent oracle: enumerate ordered k-selections of each non-base demo
// with std::next_permutation and score directly.
struct OracleResult {
    double score = kNegInf;
    std::vector<std::vector<int>> tuples;
};

double oracle_pair_log(const DemoFeatures& a, int ia, const DemoFeatures& b, int ib) {
    const double dot = a.features[ia].dot(b.features[ib]);
    return dot > 0 ? std::log(dot) : kNegInf;
}

OracleResult oracle_solve(const std::vector<DemoFeatures>& demos) {
    std::size_t k = std::numeric_limits<std::size_t>::max();
    for (const auto& d : demos) k = std::min(k, d.ids.size());
    std::size_t base = 0;
    for (std::size_t n = 0; n < demos.size(); ++n) {
        if (demos[n].ids.size() < demos[base].ids.size()) base = n;
    }

    OracleResult best;
    std::vector<std::vector<int>> chosen(demos.size());

    std::function<void(std::size_t)> rec = [&](std::size_t n) {
        if (n == demos.size()) {
            double score = 0.0;
            for (std::size_t s = 0; s < k; ++s) {
                for (std::size_t a = 0; a < demos.size(); ++a) {
                    for (std::size_t b = a + 1; b < demos.size(); ++b) {
                        score += oracle_pair_log(demos[a], chosen[a][s], demos[b], chosen[b][s]);
                    }
                }
            }
            std::vector<std::vector<int>> tuples(k, std::vector<int>(demos.size()));
            for (std::size_t s = 0; s < k; ++s) {
                for (std::size_t n2 = 0; n2 < demos.size(); ++n2) {
                    tuples[s][n2] = demos[n2].ids[chosen[n2][s]];
                }
            }
            std::sort(tuples.begin(), tuples.end(),
                      [](const auto& x, const auto& y) { return x[0] < y[0]; });
            if (best.tuples.empty() || score > best.score) {
                best.score = score;
                best.tuples = tuples;
            }
            return;
        }
        if (n == base) {
            chosen[n].resize(k);
            std::iota(chosen[n].begin(), chosen[n].end(), 0);
            rec(n + 1);
            return;
        }
        std::vector<int> order(demos[n].ids.size());
        std::iota(order.begin(), order.end(), 0);
        std::set<std::vector<int>> seen;
        do {
            std::vector<int> sel(order.begin(), order.begin() + k);
            if (!seen.insert(sel).second) continue;
            chosen[n] = sel;
            rec(n + 1);
        } while (std::next_permutation(order.begin(), order.end()));
    };
    rec(0);
    return best;
}

std::vector<DemoFeatures> random_instance(std::mt19937_64& rng, int n_demos, int n_objects,
                                          double similarity) {
    std::vector<DemoFeatures> demos;
    std::uniform_int_distribution<std::uint64_t> s(0, 1ULL << 60);
    for (int d = 0; d < n_demos; ++d) {
        demos.push_back(make_demo(perturb_features(n_objects, 12, similarity, s(rng))));
    }
    return demos;
}

}  // namespace

TEST_CASE("score of identical feature pair is zero") {
    const auto f = perturb_features(1, 8, 1.0, 1);
    Assignment a;
    a.tuples = {{0, 0}};
    CHECK(score_assignment(a, {make_demo(f), make_demo(f)}) == 0.0);
}

TEST_CASE("score sums logs over all demo pairs") {
    // three demos, one object, pairwise dots all 0.5
    Eigen::VectorXd f1(3), f2(3), f3(3);
    f1 << 1, 0, 0;
    f2 << 0.5, std::sqrt(3.0) / 2.0, 0;
    f3 << 0.5, std::sqrt(3.0) / 6.0, std::sqrt(6.0) / 3.0;
    REQUIRE(f1.dot(f2) == doctest::Approx(0.5));
    REQUIRE(f1.dot(f3) == doctest::Approx(0.5));
    REQUIRE(f2.dot(f3) == doctest::Approx(0.5));
    Assignment a;
    a.tuples = {{0, 0, 0}};
    const double s = score_assignment(a, {make_demo({f1}), make_demo({f2}), make_demo({f3})});
    CHECK(s == doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-9));
}

TEST_CASE("orthogonal features score negative infinity") {
    Eigen::VectorXd e0 = Eigen::VectorXd::Unit(4, 0);
    Eigen::VectorXd e1 = Eigen::VectorXd::Unit(4, 1);
    Assignment a;
    a.tuples = {{0, 0}};
    CHECK(score_assignment(a, {make_demo({e0}), make_demo({e1})}) == kNegInf);
}

TEST_CASE("exhaustive matches the independent enumeration oracle") {
    std::mt19937_64 rng(101);
    for (int inst = 0; inst < 12; ++inst) {
        const int n_demos = 2 + inst % 2;
        const int n_objects = 3 + inst % 2;
        const auto demos = random_instance(rng, n_demos, n_objects, 0.85);
        const Assignment got = solve_exhaustive(demos);
        const OracleResult want = oracle_solve(demos);
        CHECK(score_assignment(got, demos) == doctest::Approx(want.score).epsilon(1e-9));
    }
}

TEST_CASE("exhaustive on a seeded 3x4 instance equals full enumeration") {
    std::mt19937_64 rng(7);
    const auto demos = random_instance(rng, 3, 4, 0.9);
    const Assignment got = solve_exhaustive(demos);
    const OracleResult want = oracle_solve(demos);
    CHECK(score_assignment(got, demos) == doctest::Approx(want.score).epsilon(1e-9));
    CHECK(got.tuples == want.tuples);
}

TEST_CASE("block-diagonal instance recovers the identity triples") {
    std::vector<DemoFeatures> demos;
    for (int d = 0; d < 3; ++d) {
        demos.push_back(make_demo({Eigen::VectorXd::Unit(3, 0), Eigen::VectorXd::Unit(3, 1),
                                   Eigen::VectorXd::Unit(3, 2)}));
    }
    const Assignment ex = solve_exhaustive(demos);
    CHECK(ex.tuples == std::vector<std::vector<int>>{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}});
    CHECK(score_assignment(ex, demos) == 0.0);
    CHECK(solve_heuristic(demos).tuples == ex.tuples);
}

TEST_CASE("two-demo heuristic is exact") {
    std::mt19937_64 rng(11);
    for (int inst = 0; inst < 25; ++inst) {
        const int n = 2 + inst % 5;
        const auto demos = random_instance(rng, 2, n, 0.8);
        const double h = score_assignment(solve_heuristic(demos), demos);
        const double ex = score_assignment(solve_exhaustive(demos), demos);
        CHECK(h == doctest::Approx(ex).epsilon(1e-9));
    }
}

TEST_CASE("heuristic stays within 2 percent of the oracle") {
    std::mt19937_64 rng(13);
    double ratio_acc = 0.0;
    int count = 0;
    for (int inst = 0; inst < 30; ++inst) {
        const auto demos = random_instance(rng, 2 + inst % 3, 3 + inst % 3, 0.85);
        const double h = score_assignment(solve_heuristic(demos), demos);
        const double ex = score_assignment(solve_exhaustive(demos), demos);
        REQUIRE(std::isfinite(h));
        REQUIRE(h <= ex + 1e-9);
        ratio_acc += (ex == h) ? 1.0 : ex / h;  // both non-positive
        ++count;
    }
    CHECK(ratio_acc / count >= 0.98);
}

TEST_CASE("heuristic avoids -inf pairings when a finite assignment exists") {
    std::mt19937_64 rng(17);
    for (int inst = 0; inst < 20; ++inst) {
        const auto demos = random_instance(rng, 3, 4, 0.7);
        if (!std::isfinite(score_assignment(solve_exhaustive(demos), demos))) continue;
        CHECK(std::isfinite(score_assignment(solve_heuristic(demos), demos)));
    }
}

TEST_CASE("assignments are injective with min-count tuples") {
    std::uniform_int_distribution<std::uint64_t> s(0, 1ULL << 60);
    std::mt19937_64 rng(19);
    for (int inst = 0; inst < 10; ++inst) {
        std::vector<DemoFeatures> demos;
        const std::vector<int> sizes{4, 6, 5};
        for (int d = 0; d < 3; ++d) {
            demos.push_back(make_demo(perturb_features(sizes[d], 12, 0.9, s(rng))));
        }
        const Assignment a = solve_heuristic(demos);
        CHECK(a.tuples.size() == 4);
        for (std::size_t n = 0; n < 3; ++n) {
            std::set<int> used;
            for (const auto& tup : a.tuples) CHECK(used.insert(tup[n]).second);
        }
    }
}

TEST_CASE("optimal score is invariant to demo reordering") {
    std::mt19937_64 rng(23);
    const auto demos = random_instance(rng, 3, 4, 0.85);
    const double base = score_assignment(solve_exhaustive(demos), demos);
    std::vector<DemoFeatures> reordered{demos[2], demos[0], demos[1]};
    CHECK(base ==
          doctest::Approx(score_assignment(solve_exhaustive(reordered), reordered)).epsilon(1e-9));
}

TEST_CASE("manipulators only match manipulators") {
    std::vector<DemoFeatures> demos;
    for (int d = 0; d < 2; ++d) {
        const auto f = perturb_features(4, 12, 0.9, 31 + d);
        std::vector<char> manip(4, 0);
        manip[0] = 1;
        demos.push_back(make_demo(f, manip));
    }
    const Assignment a = solve_heuristic(demos);
    CHECK(a.tuples.size() == 4);
    for (const auto& tup : a.tuples) {
        const bool m0 = demos[0].manipulator[tup[0]] != 0;
        const bool m1 = demos[1].manipulator[tup[1]] != 0;
        CHECK(m0 == m1);
    }
}

TEST_CASE("oversized instances are routed to the heuristic") {
    std::mt19937_64 rng(37);
    const auto demos = random_instance(rng, 4, 8, 0.9);
    CHECK_THROWS_WITH_AS(solve_exhaustive(demos), "use heuristic", std::invalid_argument);
    CHECK_NOTHROW(solve_heuristic(demos));
}

TEST_CASE("hungarian solves random rectangular assignments optimally") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int inst = 0; inst < 40; ++inst) {
        const int rows = 2 + inst % 3;
        const int cols = rows + inst % 3;
        Eigen::MatrixXd cost(rows, cols);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) cost(r, c) = u(rng);
        }
        const auto sol = hungarian_min_cost(cost);
        double got = 0.0;
        std::set<int> used;
        for (int r = 0; r < rows; ++r) {
            REQUIRE(sol[r] >= 0);
            CHECK(used.insert(sol[r]).second);
            got += cost(r, sol[r]);
        }
        std::vector<int> cols_idx(cols);
        std::iota(cols_idx.begin(), cols_idx.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double acc = 0.0;
            for (int r = 0; r < rows; ++r) acc += cost(r, cols_idx[r]);
            best = std::min(best, acc);
        } while (std::next_permutation(cols_idx.begin(), cols_idx.end()));
        CHECK(got == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("identity maps use the demo-0 member as the identity id") {
    Assignment a;
    a.tuples = {{2, 5, 1}, {3, 0, 4}};
    const auto maps = identity_maps(a);
    REQUIRE(maps.size() == 3);
    CHECK(maps[0].at(2) == 2);
    CHECK(maps[1].at(5) == 2);
    CHECK(maps[2].at(1) == 2);
    CHECK(maps[1].at(0) == 3);
}
