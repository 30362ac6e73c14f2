#include <doctest.h>

#include "skelex/io.hpp"
#include "skelex/synthgen.hpp"

using namespace skelex;

TEST_CASE("same template and seed give byte-identical output") {
    const TaskTemplate t = pick_place_template(3);
    const SynthResult a = generate(t, 3, 99);
    const SynthResult b = generate(t, 3, 99);
    for (int d = 0; d < 3; ++d) {
        CHECK(demo_to_json(a.demos[d]).dump() == demo_to_json(b.demos[d]).dump());
        CHECK(events_to_json(a.truth.events[d]).dump() ==
              events_to_json(b.truth.events[d]).dump());
    }
    const SynthResult c = generate(t, 3, 100);
    CHECK(demo_to_json(a.demos[0]).dump() != demo_to_json(c.demos[0]).dump());
}

TEST_CASE("noise-free carried object follows the manipulator exactly") {
    TaskTemplate t = pick_place_template(0);
    t.noise_pos = 0.0;
    const SynthResult r = generate(t, 1, 5);
    const Demonstration& demo = r.demos[0];
    const int m = 0, cup = 1;
    REQUIRE(r.truth.timings[0].size() == 1);
    const EdgeTiming timing = r.truth.timings[0][0];

    // During the carried phase the relative transform is fixed.
    const int grasp_attach = timing.start;
    const Pose rel0 = relative(demo.poses[m][grasp_attach], demo.poses[cup][grasp_attach]);
    for (int t_i = grasp_attach; t_i <= timing.end; ++t_i) {
        const Pose rel = relative(demo.poses[m][t_i], demo.poses[cup][t_i]);
        CHECK((rel.position - rel0.position).norm() < 1e-12);
        CHECK(rotation_distance(rel.rotation, rel0.rotation) < 1e-12);
    }
}

TEST_CASE("labels are invariant to noise level") {
    TaskTemplate clean = pick_place_template(1);
    TaskTemplate noisy = clean;
    noisy.noise_pos = 0.002;
    noisy.noise_rot = 0.002;
    const SynthResult a = generate(clean, 4, 7);
    const SynthResult b = generate(noisy, 4, 7);
    for (int d = 0; d < 4; ++d) {
        CHECK(events_to_json(a.truth.events[d]).dump() ==
              events_to_json(b.truth.events[d]).dump());
    }
    CHECK(labels_to_json(a.truth)["skeleton"].dump() ==
          labels_to_json(b.truth)["skeleton"].dump());
}

TEST_CASE("pick-place labels are a grasp then a world add") {
    const SynthResult r = generate(pick_place_template(0), 1, 11);
    const auto& events = r.truth.events[0];
    REQUIRE(events.size() == 2);
    CHECK(events[0].kind == EventKind::Add);
    CHECK(events[0].target == 0);
    CHECK(events[0].nodes == NodeSet{1});
    CHECK(events[1].target == kWorldTarget);
    CHECK(events[1].nodes == NodeSet{1});
    CHECK(events[0].time < events[1].time);

    REQUIRE(r.truth.skeleton.size() == 2);
    CHECK(r.truth.skeleton[0].target == 0);
    CHECK(r.truth.skeleton[1].target == kWorldTarget);
    CHECK(r.truth.skeleton[1].references == NodeSet{2});
}

TEST_CASE("bump primitives do not change the labels") {
    TaskTemplate t = pick_place_template(2);
    const SynthResult base = generate(t, 1, 13);
    t.script.push_back({PrimitiveKind::Bump, 0, 3, -1, {}, 0.0, 1});
    const SynthResult bumped = generate(t, 1, 13);
    CHECK(events_to_json(base.truth.events[0]).dump() ==
          events_to_json(bumped.truth.events[0]).dump());
    CHECK(base.truth.skeleton.size() == bumped.truth.skeleton.size());
}

TEST_CASE("two-reference template records the true reference") {
    const SynthResult r = generate(two_reference_template(0.002, 0.02, 0), 2, 17);
    CHECK(r.truth.true_reference == 2);
}

TEST_CASE("distractor script runs in every third demo only") {
    const TaskTemplate t = distractor_template(0);
    const SynthResult r = generate(t, 6, 19);
    int with_distractor = 0;
    for (int d = 0; d < 6; ++d) {
        bool seen = false;
        for (const Event& e : r.truth.events[d]) {
            if (e.nodes.count(4)) seen = true;
        }
        if (seen) ++with_distractor;
        CHECK(seen == (d % 3 == 0));
    }
    CHECK(with_distractor == 2);
    // The structural skeleton never contains the distractor.
    for (const LabelStep& s : r.truth.skeleton) CHECK_FALSE(s.moved.count(4));
}

TEST_CASE("inconsistent scripts are rejected with the primitive index") {
    TaskTemplate t = pick_place_template(0);
    t.script.push_back({PrimitiveKind::Grasp, 2, 1, -1, {}, 0.0, 1});  // tray is no manipulator
    CHECK_THROWS_WITH_AS(generate(t, 1, 1),
                         "script primitive 5 manipulator index is not a manipulator",
                         std::invalid_argument);
}

TEST_CASE("perturb_features hits the requested similarity") {
    // similarity 1: identical unit basis vectors
    const auto exact = perturb_features(4, 16, 1.0, 1);
    const auto exact2 = perturb_features(4, 16, 1.0, 2);
    for (int k = 0; k < 4; ++k) {
        CHECK(exact[k].dot(exact2[k]) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(exact[k].norm() == doctest::Approx(1.0).epsilon(1e-12));
    }

    // similarity 0.9: cross-demo same-role dot concentrates near 0.9
    double same_acc = 0.0;
    double cross_max = 0.0;
    const int trials = 250;
    for (int i = 0; i < trials; ++i) {
        const auto a = perturb_features(4, 16, 0.9, 1000 + 2 * i);
        const auto b = perturb_features(4, 16, 0.9, 1001 + 2 * i);
        same_acc += a[0].dot(b[0]);
        for (int r = 0; r < 4; ++r) {
            for (int s = 0; s < 4; ++s) {
                if (r != s) cross_max = std::max(cross_max, std::abs(a[r].dot(b[s])));
            }
        }
    }
    CHECK(std::abs(same_acc / trials - 0.9) < 0.02);
    CHECK(cross_max < 0.3);
}

TEST_CASE("occlusions mark visibility spans") {
    TaskTemplate t = pick_place_template(0);
    t.occlusions.push_back({1, 60, 80});
    const SynthResult r = generate(t, 1, 23);
    for (int f = 60; f <= 80; ++f) CHECK_FALSE(r.demos[0].visible[1][f]);
    CHECK(r.demos[0].visible[1][59]);
    CHECK(r.demos[0].visible[1][81]);
}
