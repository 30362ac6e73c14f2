#include <doctest.h>

#include <random>

#include "skelex/io.hpp"
#include "skelex/metrics.hpp"
#include "skelex/segmenter.hpp"
#include "skelex/synthgen.hpp"

using namespace skelex;

namespace {

Config default_config() { return Config{}; }

// A hand-built demo: objects at fixed positions with optional iid noise.
Demonstration static_demo(int T, double noise, std::uint64_t seed, int objects = 4) {
    Demonstration d;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < objects; ++i) {
        ObjectInfo o;
        o.id = i;
        o.manipulator = i == 0;
        o.feature = Eigen::VectorXd::Unit(objects, i);
        d.objects.push_back(o);
    }
    d.poses.assign(objects, std::vector<Pose>(T));
    d.visible.assign(objects, std::vector<char>(T, 1));
    for (int i = 0; i < objects; ++i) {
        const Vec3 base(0.4 * i, 0.1 * i, 0.0);
        for (int t = 0; t < T; ++t) {
            Pose p;
            p.position = base + Vec3(g(rng), g(rng), g(rng)) * noise;
            d.poses[i][t] = p;
        }
    }
    return d;
}

int index_of_pair(const MiSignals& s, int a, int b) {
    for (std::size_t i = 0; i < s.pairs.size(); ++i) {
        if (s.pairs[i] == std::make_pair(std::min(a, b), std::max(a, b))) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

}  // namespace

TEST_CASE("static noisy scene keeps every MI signal below 0.05") {
    const Demonstration d = static_demo(180, 0.002, 42);
    const MiSignals s = mi_signals(d, default_config());
    double peak = 0.0;
    for (const auto& series : s.series) {
        for (double v : series) peak = std::max(peak, v);
    }
    CHECK(peak < 0.05);
}

TEST_CASE("manipulator pairs are excluded from the signal set") {
    Demonstration d = static_demo(40, 0.0, 1, 4);
    d.objects[1].manipulator = true;
    const MiSignals s = mi_signals(d, default_config());
    CHECK(index_of_pair(s, 0, 1) == -1);
    CHECK(index_of_pair(s, 0, 2) >= 0);
    CHECK(s.pairs.size() == 5);
}

TEST_CASE("carried object shows MI above the trigger during the carry") {
    const SynthResult r = generate(pick_place_template(0), 1, 3);
    const MiSignals s = mi_signals(r.demos[0], default_config());
    const int pair = index_of_pair(s, 0, 1);
    REQUIRE(pair >= 0);
    const EdgeTiming timing = r.truth.timings[0][0];
    // mid-carry window
    const int mid = (timing.end + timing.start) / 2 + 25;
    double peak = 0.0;
    for (int t = timing.start; t <= timing.end + 5 && t < r.demos[0].length(); ++t) {
        peak = std::max(peak, s.series[pair][t]);
    }
    CHECK(peak >= 0.18);
    CHECK(s.series[pair][mid] >= 0.0);
}

TEST_CASE("windows overlapping an occlusion yield exactly zero") {
    TaskTemplate t = pick_place_template(0);
    t.occlusions.push_back({1, 120, 140});
    const SynthResult r = generate(t, 1, 9);
    const Config cfg = default_config();
    const MiSignals s = mi_signals(r.demos[0], cfg);
    const int pair = index_of_pair(s, 0, 1);
    for (int f = 120; f <= 140 + cfg.window && f < r.demos[0].length(); ++f) {
        CHECK(s.series[pair][f] == 0.0);
    }
}

TEST_CASE("demo shorter than the window is rejected") {
    const Demonstration d = static_demo(6, 0.0, 1);
    CHECK_THROWS_WITH_AS(mi_signals(d, default_config()), "demo too short",
                         std::invalid_argument);
}

TEST_CASE("parallel and serial MI signals are bitwise identical") {
    const SynthResult r = generate(push_template(0), 1, 5);
    const MiSignals a = mi_signals(r.demos[0], default_config());
    const MiSignals b = mi_signals_serial(r.demos[0], default_config());
    REQUIRE(a.pairs == b.pairs);
    for (std::size_t p = 0; p < a.series.size(); ++p) {
        REQUIRE(a.series[p].size() == b.series[p].size());
        for (std::size_t t = 0; t < a.series[p].size(); ++t) {
            CHECK(a.series[p][t] == b.series[p][t]);
        }
    }
}

TEST_CASE("a two-step MI spike leaves no edge") {
    Demonstration d = static_demo(60, 0.0, 2, 2);
    MiSignals s;
    s.pairs = {{0, 1}};
    s.series = {std::vector<double>(60, 0.0)};
    s.series[0][20] = 1.0;
    s.series[0][21] = 1.0;  // only two evidence steps < alpha_Z = 3
    const auto edges = track_edges(d, s, default_config());
    CHECK(edges.empty());
}

TEST_CASE("persistent MI produces an active edge with evidence") {
    Demonstration d = static_demo(60, 0.0, 2, 2);
    MiSignals s;
    s.pairs = {{0, 1}};
    s.series = {std::vector<double>(60, 0.0)};
    for (int t = 20; t < 30; ++t) s.series[0][t] = 1.0;
    const auto edges = track_edges(d, s, default_config());
    REQUIRE(edges.size() == 1);
    CHECK(edges[0].raw_start == 20);
    CHECK(static_cast<int>(edges[0].evidence.size()) > default_config().min_evidence);
    // static objects never leave the connectivity support
    CHECK(edges[0].raw_end == 59);
}

TEST_CASE("push scenario yields ordered edge starts") {
    const SynthResult r = generate(push_template(1), 1, 7);
    const Config cfg = default_config();
    const MiSignals s = mi_signals(r.demos[0], cfg);
    auto edges = track_edges(r.demos[0], s, cfg);
    for (auto& e : edges) e = extend_back(std::move(e), r.demos[0], cfg);

    int start_m_box = -1, start_m_block = -1;
    for (const auto& e : edges) {
        if (e.pair == std::make_pair(0, 1) && start_m_box < 0) start_m_box = e.start;
        if (e.pair == std::make_pair(0, 2) && start_m_block < 0) start_m_block = e.start;
    }
    REQUIRE(start_m_box >= 0);
    REQUIRE(start_m_block >= 0);
    CHECK(start_m_box < start_m_block);
}

TEST_CASE("extend_back recovers the grasp moment") {
    const SynthResult r = generate(pick_place_template(0), 1, 11);
    const Config cfg = default_config();
    const SegmentationResult seg = segment(r.demos[0], cfg);
    const EdgeTiming truth = r.truth.timings[0][0];
    bool found = false;
    for (const auto& e : seg.edges) {
        if (e.pair == std::make_pair(0, 1)) {
            CHECK(std::abs(e.start - truth.start) <= 1);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("extend_back stops at a visibility gap") {
    const SynthResult r = generate(pick_place_template(0), 1, 11);
    const Config cfg = default_config();
    const MiSignals s = mi_signals(r.demos[0], cfg);
    auto edges = track_edges(r.demos[0], s, cfg);
    REQUIRE_FALSE(edges.empty());
    EdgeTrack edge = edges[0];
    Demonstration blocked = r.demos[0];
    const int wall = edge.raw_start - 1;
    blocked.visible[0][wall] = 0;
    const EdgeTrack out = extend_back(edge, blocked, cfg);
    CHECK(out.start == edge.raw_start);
}

TEST_CASE("extend_back stops at the connectivity support boundary") {
    const SynthResult r = generate(pick_place_template(2), 1, 13);
    const Config cfg = default_config();
    const MiSignals s = mi_signals(r.demos[0], cfg);
    auto edges = track_edges(r.demos[0], s, cfg);
    REQUIRE_FALSE(edges.empty());
    const EdgeTrack& edge = edges[0];
    const EdgeTrack extended = extend_back(edge, r.demos[0], cfg);

    // Independent oracle: walk back over raw distances against the fitted
    // quantile band.
    const Demonstration& d = r.demos[0];
    const int ia = d.index_of(edge.pair.first);
    const int ib = d.index_of(edge.pair.second);
    int expected = edge.raw_start;
    while (expected > 0) {
        const int prev = expected - 1;
        const double dist = (d.poses[ia][prev].position - d.poses[ib][prev].position).norm();
        if (!d.visible[ia][prev] || !d.visible[ib][prev]) break;
        if (!edge.connectivity.within_two_sided(dist, cfg.edge_threshold)) break;
        expected = prev;
    }
    CHECK(extended.start == expected);
}

TEST_CASE("rest models reflect sensor jitter and pool multiple phases") {
    TaskTemplate t = pick_place_template(0);
    t.noise_pos = 0.001;
    const SynthResult r = generate(t, 1, 15);
    const Config cfg = default_config();
    const MiSignals s = mi_signals(r.demos[0], cfg);
    auto edges = track_edges(r.demos[0], s, cfg);
    for (auto& e : edges) e = extend_back(std::move(e), r.demos[0], cfg);
    const RestModel rest = fit_rest_models(r.demos[0], edges);

    // tray (id 2) is static with 1 mm jitter: mean displacement ~ mm scale
    const ScalarNormal& tray = rest.models.at(2);
    CHECK(tray.mean > 0.0005);
    CHECK(tray.mean < 0.005);

    // the manipulator is never unmanipulated: fallback model
    CHECK(rest.fallback_ids.count(0));

    // the cup rests before the grasp and after the release; its samples
    // must cover both phases (displacement scale also mm)
    const ScalarNormal& cup = rest.models.at(1);
    CHECK_FALSE(rest.fallback_ids.count(1));
    CHECK(cup.mean > 0.0005);
    CHECK(cup.mean < 0.005);
}

TEST_CASE("object manipulated the whole demo gets the fallback model") {
    // carry starts immediately and never releases
    TaskTemplate t;
    t.roster = {
        {"hand", Role::Manipulator, Vec3(0.0, -0.4, 0.3), 0.0},
        {"cup", Role::Movable, Vec3(0.3, 0.0, 0.0), 0.0},
        {"tray", Role::Reference, Vec3(-0.3, 0.2, 0.0), 0.0},
    };
    t.script = {
        {PrimitiveKind::Approach, 0, 1, -1, {}, 0.0, 1},
        {PrimitiveKind::Grasp, 0, 1, -1, {}, 0.0, 1},
        {PrimitiveKind::CarryTo, 0, 1, 2, Vec3(0.0, 0.0, 0.02), 0.0, 1},
    };
    const SynthResult r = generate(t, 1, 17);
    const Config cfg = default_config();
    const MiSignals s = mi_signals(r.demos[0], cfg);
    auto edges = track_edges(r.demos[0], s, cfg);
    for (auto& e : edges) e = extend_back(std::move(e), r.demos[0], cfg);
    const RestModel rest = fit_rest_models(r.demos[0], edges);
    // the cup is inside a manipulator subgraph from its first rest-eligible
    // frame through the end: whether it still collects a few pre-grasp
    // frames depends on the extension, so only the fallback rule for the
    // always-connected manipulator is structural here
    CHECK(rest.fallback_ids.count(0));
}

TEST_CASE("prune_end trims the lingering tail to the carry end") {
    const SynthResult r = generate(pick_place_template(0), 1, 19);
    const SegmentationResult seg = segment(r.demos[0], default_config());
    const EdgeTiming truth = r.truth.timings[0][0];
    bool found = false;
    for (const auto& e : seg.edges) {
        if (e.pair == std::make_pair(0, 1)) {
            CHECK(e.raw_end > truth.end + 10);  // manipulator lingers, raw end is late
            CHECK(std::abs(e.end - truth.end) <= 1);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("prune_end leaves object-object edges untouched") {
    const SynthResult r = generate(push_template(0), 1, 21);
    const Config cfg = default_config();
    const MiSignals s = mi_signals(r.demos[0], cfg);
    auto edges = track_edges(r.demos[0], s, cfg);
    for (auto& e : edges) e = extend_back(std::move(e), r.demos[0], cfg);
    const RestModel rest = fit_rest_models(r.demos[0], edges);
    for (const auto& e : edges) {
        if (e.pair == std::make_pair(1, 2)) {
            const EdgeTrack pruned = prune_end(e, rest, r.demos[0], cfg);
            CHECK(pruned.end == e.raw_end);
        }
    }
}

TEST_CASE("prune_end keeps the end when manipulation stops at contact break") {
    // Hand-built: manipulator and object move together frames 30..60, then
    // the manipulator departs immediately.
    const int T = 100;
    Demonstration d = static_demo(T, 0.0, 1, 3);
    for (int t = 30; t <= 60; ++t) {
        const double u = (t - 29) / 31.0;
        d.poses[0][t].position = Vec3(0.0, 0.0, 0.0) + u * Vec3(0.3, 0.0, 0.0);
        d.poses[1][t].position = d.poses[0][t].position + Vec3(0.0, 0.05, 0.0);
    }
    for (int t = 61; t < T; ++t) {
        const double u = std::min(1.0, (t - 60) / 20.0);
        d.poses[0][t].position = Vec3(0.3, 0.0, 0.0) + u * Vec3(0.0, -0.4, 0.3);
        d.poses[1][t].position = Vec3(0.3, 0.05, 0.0);
    }
    const Config cfg = default_config();
    const SegmentationResult seg = segment(d, cfg);
    // Windows straddling the abrupt departure may re-seed a short trailing
    // ghost edge; the manipulation episode itself is the edge overlapping
    // the joint-motion span.
    const EdgeTrack* episode = nullptr;
    int best_overlap = 0;
    for (const auto& e : seg.edges) {
        if (e.pair != std::make_pair(0, 1)) continue;
        const int overlap = std::min(e.end, 60) - std::max(e.start, 30) + 1;
        if (overlap > best_overlap) {
            best_overlap = overlap;
            episode = &e;
        }
    }
    REQUIRE(episode != nullptr);
    CHECK(episode->end == episode->raw_end);  // nothing to prune
    CHECK(std::abs(episode->end - 60) <= 1);
}

TEST_CASE("segment on a clean pick-place reproduces the labels exactly") {
    const SynthResult r = generate(pick_place_template(0), 1, 23);
    const SegmentationResult seg = segment(r.demos[0], default_config());
    const SegReport rep = segmentation_report(seg.events, r.truth.events[0]);
    CHECK(rep.eds == 1);
    CHECK(rep.sd == 0.0);
}

TEST_CASE("an accidental bump over-segments but keeps the labeled order") {
    TaskTemplate t = pick_place_template(1);
    t.script.push_back({PrimitiveKind::Bump, 0, 3, -1, {}, 0.0, 1});
    const SynthResult r = generate(t, 1, 25);
    const SegmentationResult seg = segment(r.demos[0], default_config());
    const SegReport rep = segmentation_report(seg.events, r.truth.events[0]);
    CHECK(rep.eds == 1);
    CHECK(rep.sd > 0.0);
}

TEST_CASE("edge intervals respect start <= end and sparse steps differ") {
    for (std::uint64_t seed : {31, 32, 33}) {
        const SynthResult r = generate(bimanual_sequential_template(seed), 1, seed);
        const SegmentationResult seg = segment(r.demos[0], default_config());
        for (const auto& e : seg.edges) {
            CHECK(e.start <= e.end);
            CHECK(e.start <= e.raw_start);
            CHECK(e.end <= e.raw_end);
        }
        for (std::size_t s = 1; s < seg.steps.size(); ++s) {
            CHECK(step_change(seg.steps[s - 1].part, seg.steps[s].part));
        }
    }
}

TEST_CASE("segmentation output is byte-identical across runs") {
    TaskTemplate t = pick_place_template(4);
    t.noise_pos = 0.002;
    const SynthResult r = generate(t, 1, 37);
    const SegmentationResult a = segment(r.demos[0], default_config());
    const SegmentationResult b = segment(r.demos[0], default_config());
    CHECK(events_to_json(a.events).dump() == events_to_json(b.events).dump());
}

TEST_CASE("smoothing leaves cubic trajectories unchanged") {
    Demonstration d = static_demo(50, 0.0, 1, 2);
    for (int t = 0; t < 50; ++t) {
        const double x = t / 10.0;
        d.poses[1][t].position = Vec3(0.001 * x * x * x - 0.01 * x * x + 0.1 * x, 0.2, 0.0);
    }
    const Demonstration s = smooth_trajectories(d, 7);
    for (int t = 0; t < 50; ++t) {
        CHECK((s.poses[1][t].position - d.poses[1][t].position).norm() < 1e-9);
    }
}
