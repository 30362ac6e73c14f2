#include "skelex/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "skelex/se3.hpp"

namespace skelex {

namespace {

const Vec3 kGraspOffset{0.0, 0.0, 0.05};

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

Vec3 gauss3(std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec3(n(rng), n(rng), n(rng)) * stddev;
}

struct SimState {
    std::vector<Pose> pose;                    // true pose per roster entry
    std::vector<int> attached_to;              // manipulator roster index or -1
    std::vector<Pose> attach_rel;              // object in manipulator frame
    std::vector<int> pending_start;            // ground-truth edge start per object
    std::vector<int> last_motion_end;          // per manipulator
    std::vector<int> last_carry_end;           // per manipulator
    std::vector<std::vector<Pose>> trajectory; // per entry, per frame
};

void push_frame(SimState& s) {
    for (std::size_t i = 0; i < s.pose.size(); ++i) s.trajectory[i].push_back(s.pose[i]);
}

int current_frame(const SimState& s) {
    return static_cast<int>(s.trajectory.front().size()) - 1;
}

// Move entry `idx` linearly to `target` over `dur` frames; attached objects
// follow their manipulator rigidly.
void move_linear(SimState& s, int idx, const Pose& target, int dur) {
    const Pose start = s.pose[idx];
    for (int k = 0; k < dur; ++k) {
        const double u = static_cast<double>(k + 1) / static_cast<double>(dur);
        Pose p;
        p.position = start.position + u * (target.position - start.position);
        p.rotation = start.rotation.slerp(u, target.rotation);
        s.pose[idx] = p;
        for (std::size_t o = 0; o < s.pose.size(); ++o) {
            if (s.attached_to[o] == idx) s.pose[o] = compose(p, s.attach_rel[o]);
        }
        push_frame(s);
    }
}

void hold_still(SimState& s, int dur) {
    for (int k = 0; k < dur; ++k) push_frame(s);
}

}  // namespace

std::vector<Eigen::VectorXd> perturb_features(int roster_size, int dim, double similarity,
                                              std::uint64_t seed) {
    if (similarity < 0.0 || similarity > 1.0) {
        throw std::invalid_argument("similarity must be in [0,1]");
    }
    dim = std::max(dim, roster_size + 4);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    out.reserve(roster_size);
    for (int k = 0; k < roster_size; ++k) {
        // Perturbations live in the complement of every base axis, keeping
        // cross-object dots near zero while same-object dots stay near the
        // requested similarity.
        Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
        for (int c = roster_size; c < dim; ++c) u(c) = n(rng);
        const double norm = u.norm();
        if (norm > 1e-12) u /= norm;
        Eigen::VectorXd f = std::sqrt(1.0 - similarity) * u;
        f(k) += std::sqrt(similarity);
        out.push_back(f.normalized());
    }
    return out;
}

SynthResult generate(const TaskTemplate& tmpl, int n_demos, std::uint64_t seed) {
    if (tmpl.roster.empty()) throw std::invalid_argument("empty roster");
    if (n_demos < 1) throw std::invalid_argument("need at least one demo");
    const int R = static_cast<int>(tmpl.roster.size());
    for (std::size_t pi = 0; pi < tmpl.script.size(); ++pi) {
        const Primitive& p = tmpl.script[pi];
        auto check = [&](int idx, bool required) {
            if (required && (idx < 0 || idx >= R)) {
                throw std::invalid_argument("script primitive " + std::to_string(pi) +
                                            " references an invalid roster index");
            }
        };
        const bool needs_obj = p.kind == PrimitiveKind::Approach || p.kind == PrimitiveKind::Grasp ||
                               p.kind == PrimitiveKind::CarryTo || p.kind == PrimitiveKind::Bump;
        const bool needs_man = p.kind != PrimitiveKind::Dwell;
        check(p.manipulator, needs_man);
        check(p.object, needs_obj);
        check(p.reference, p.kind == PrimitiveKind::CarryTo);
        if (needs_man && tmpl.roster[p.manipulator].role != Role::Manipulator) {
            throw std::invalid_argument("script primitive " + std::to_string(pi) +
                                        " manipulator index is not a manipulator");
        }
    }

    SynthResult result;
    result.truth.events.resize(n_demos);
    result.truth.timings.resize(n_demos);

    // Minimal structural skeleton from the always-present primitives.
    {
        std::vector<int> carry_ref(R, -1);
        std::vector<NodeSet> held(R);
        NodeSet refs_seen;
        for (const Primitive& p : tmpl.script) {
            if (p.every_k_demos > 1) continue;
            switch (p.kind) {
                case PrimitiveKind::Grasp: {
                    LabelStep step;
                    step.moved = {p.object};
                    step.target = p.manipulator;
                    step.references = {p.manipulator};
                    result.truth.skeleton.push_back(step);
                    held[p.manipulator].insert(p.object);
                    break;
                }
                case PrimitiveKind::CarryTo:
                    carry_ref[p.manipulator] = p.reference;
                    break;
                case PrimitiveKind::Release: {
                    if (held[p.manipulator].empty()) break;
                    LabelStep step;
                    step.moved = held[p.manipulator];
                    step.target = kWorldTarget;
                    if (carry_ref[p.manipulator] >= 0) {
                        step.references = {carry_ref[p.manipulator]};
                        refs_seen.insert(carry_ref[p.manipulator]);
                    }
                    result.truth.skeleton.push_back(step);
                    held[p.manipulator].clear();
                    break;
                }
                default:
                    break;
            }
        }
        if (refs_seen.size() == 1) result.truth.true_reference = *refs_seen.begin();
    }

    const NodeSet manip_ids = [&] {
        NodeSet s;
        for (int i = 0; i < R; ++i) {
            if (tmpl.roster[i].role == Role::Manipulator) s.insert(i);
        }
        return s;
    }();

    for (int d = 0; d < n_demos; ++d) {
        std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(d)));

        SimState s;
        s.pose.resize(R);
        s.attached_to.assign(R, -1);
        s.attach_rel.resize(R);
        s.pending_start.assign(R, 0);
        s.last_motion_end.assign(R, 0);
        s.last_carry_end.assign(R, 0);
        s.trajectory.assign(R, {});

        std::vector<Pose> home(R);
        for (int i = 0; i < R; ++i) {
            Pose p;
            p.position = tmpl.roster[i].base_position +
                         gauss3(rng, tmpl.roster[i].position_jitter);
            s.pose[i] = p;
            home[i] = p;
        }
        push_frame(s);  // frame 0

        auto& events = result.truth.events[d];
        auto& timings = result.truth.timings[d];
        const int dur = tmpl.steps_per_primitive;

        NodeSet world_members;  // non-manipulator ids currently not attached
        for (int i = 0; i < R; ++i) {
            if (!manip_ids.count(i)) world_members.insert(i);
        }

        for (const Primitive& p : tmpl.script) {
            if (p.every_k_demos > 1 && d % p.every_k_demos != 0) continue;
            switch (p.kind) {
                case PrimitiveKind::Approach: {
                    Pose target = s.pose[p.object];
                    target.position += kGraspOffset;
                    target.rotation = s.pose[p.manipulator].rotation;
                    move_linear(s, p.manipulator, target, dur);
                    s.last_motion_end[p.manipulator] = current_frame(s);
                    break;
                }
                case PrimitiveKind::Grasp: {
                    hold_still(s, dur);
                    s.attached_to[p.object] = p.manipulator;
                    s.attach_rel[p.object] = relative(s.pose[p.manipulator], s.pose[p.object]);
                    s.pending_start[p.object] = s.last_motion_end[p.manipulator];

                    Event e;
                    e.kind = EventKind::Add;
                    e.time = s.pending_start[p.object];
                    e.nodes = {p.object};
                    e.target = p.manipulator;
                    e.target_nodes = {p.manipulator};
                    for (int o = 0; o < R; ++o) {
                        if (o != p.object && s.attached_to[o] == p.manipulator) {
                            e.target_nodes.insert(o);
                        }
                    }
                    events.push_back(e);
                    world_members.erase(p.object);
                    break;
                }
                case PrimitiveKind::CarryTo: {
                    const Vec3 goal_offset =
                        p.offset + gauss3(rng, p.offset_stddev);
                    const Vec3 obj_target =
                        s.pose[p.reference].position + goal_offset;
                    std::normal_distribution<double> yaw_n(0.1, 0.03);
                    const Quat rot_final =
                        quat_exp(Vec3(0, 0, yaw_n(rng))) * s.pose[p.manipulator].rotation;
                    Pose m_target;
                    m_target.rotation = rot_final;
                    m_target.position =
                        obj_target - rot_final * s.attach_rel[p.object].position;
                    move_linear(s, p.manipulator, m_target, dur);
                    s.last_motion_end[p.manipulator] = current_frame(s);
                    s.last_carry_end[p.manipulator] = current_frame(s);
                    break;
                }
                case PrimitiveKind::Release: {
                    NodeSet released;
                    for (int o = 0; o < R; ++o) {
                        if (s.attached_to[o] == p.manipulator) released.insert(o);
                    }
                    for (int o : released) {
                        s.attached_to[o] = -1;
                        timings.push_back(EdgeTiming{std::min(p.manipulator, o),
                                                     std::max(p.manipulator, o),
                                                     s.pending_start[o],
                                                     s.last_carry_end[p.manipulator]});
                    }
                    if (!released.empty()) {
                        Event e;
                        e.kind = EventKind::Add;
                        e.time = s.last_carry_end[p.manipulator] + 1;
                        e.nodes = released;
                        e.target = kWorldTarget;
                        e.target_nodes = world_members;
                        events.push_back(e);
                        for (int o : released) world_members.insert(o);
                    }
                    hold_still(s, dur);
                    break;
                }
                case PrimitiveKind::Retreat: {
                    move_linear(s, p.manipulator, home[p.manipulator], dur);
                    s.last_motion_end[p.manipulator] = current_frame(s);
                    break;
                }
                case PrimitiveKind::Dwell:
                    hold_still(s, dur);
                    break;
                case PrimitiveKind::Bump: {
                    // Brief accidental contact: approach, short joint shove,
                    // withdraw. Deliberately unlabeled.
                    const int leg = std::max(dur / 5, 2);
                    const Pose before = s.pose[p.manipulator];
                    Pose at_obj = s.pose[p.object];
                    at_obj.position += kGraspOffset;
                    at_obj.rotation = before.rotation;
                    move_linear(s, p.manipulator, at_obj, 2 * leg);
                    s.attached_to[p.object] = p.manipulator;
                    s.attach_rel[p.object] = relative(s.pose[p.manipulator], s.pose[p.object]);
                    Pose shoved = s.pose[p.manipulator];
                    shoved.position += Vec3(0.03, 0.0, 0.0);
                    move_linear(s, p.manipulator, shoved, leg);
                    s.attached_to[p.object] = -1;
                    move_linear(s, p.manipulator, before, 2 * leg);
                    s.last_motion_end[p.manipulator] = current_frame(s);
                    break;
                }
            }
        }
        hold_still(s, dur);  // settle at the end

        const int T = static_cast<int>(s.trajectory.front().size());
        Demonstration demo;
        const auto feats = perturb_features(R, tmpl.feature_dim, tmpl.feature_similarity,
                                            mix(seed, 0x5eedULL + d));
        for (int i = 0; i < R; ++i) {
            ObjectInfo info;
            info.id = i;
            info.name = tmpl.roster[i].name;
            info.manipulator = manip_ids.count(i) > 0;
            info.feature = feats[i];
            demo.objects.push_back(std::move(info));
        }
        demo.poses.assign(R, {});
        demo.visible.assign(R, std::vector<char>(T, 1));
        for (int i = 0; i < R; ++i) {
            demo.poses[i].reserve(T);
            for (int t = 0; t < T; ++t) {
                Pose obs = s.trajectory[i][t];
                if (tmpl.noise_pos > 0) obs.position += gauss3(rng, tmpl.noise_pos);
                if (tmpl.noise_rot > 0) {
                    obs.rotation = (quat_exp(gauss3(rng, tmpl.noise_rot)) * obs.rotation)
                                       .normalized();
                }
                demo.poses[i].push_back(obs);
            }
        }
        for (const OcclusionSpan& span : tmpl.occlusions) {
            for (int t = std::max(0, span.t0); t <= std::min(T - 1, span.t1); ++t) {
                demo.visible[span.object][t] = 0;
            }
        }
        demo.validate_and_normalize();
        result.demos.push_back(std::move(demo));
    }
    return result;
}

namespace {

// Deterministic scene layout variations.
Vec3 variant_shift(std::uint64_t variant, int slot) {
    std::mt19937_64 rng(mix(variant, 0xabcdULL + slot));
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    return Vec3(u(rng), u(rng), 0.0);
}

}  // namespace

TaskTemplate pick_place_template(std::uint64_t variant) {
    TaskTemplate t;
    t.roster = {
        {"hand", Role::Manipulator, Vec3(0.0, -0.4, 0.3), 0.01},
        {"cup", Role::Movable, Vec3(0.3, 0.0, 0.0) + variant_shift(variant, 0), 0.01},
        {"tray", Role::Reference, Vec3(-0.3, 0.2, 0.0) + variant_shift(variant, 1), 0.01},
        {"table", Role::Reference, Vec3(0.0, 0.6, -0.05), 0.0},
    };
    t.script = {
        {PrimitiveKind::Approach, 0, 1, -1, {}, 0.0, 1},
        {PrimitiveKind::Grasp, 0, 1, -1, {}, 0.0, 1},
        {PrimitiveKind::CarryTo, 0, 1, 2, Vec3(0.0, 0.0, 0.02), 0.004, 1},
        {PrimitiveKind::Release, 0, -1, -1, {}, 0.0, 1},
        {PrimitiveKind::Retreat, 0, -1, -1, {}, 0.0, 1},
    };
    return t;
}

TaskTemplate push_template(std::uint64_t variant) {
    TaskTemplate t;
    t.roster = {
        {"hand", Role::Manipulator, Vec3(0.0, -0.4, 0.3), 0.01},
        {"box", Role::Movable, Vec3(0.25, 0.0, 0.0) + variant_shift(variant, 0), 0.01},
        {"block", Role::Movable, Vec3(0.45, 0.0, 0.0) + variant_shift(variant, 1), 0.005},
        {"corner", Role::Reference, Vec3(0.8, 0.3, 0.0), 0.0},
    };
    t.script = {
        {PrimitiveKind::Approach, 0, 1, -1, {}, 0.0, 1},
        {PrimitiveKind::Grasp, 0, 1, -1, {}, 0.0, 1},
        // bring the box against the block
        {PrimitiveKind::CarryTo, 0, 1, 2, Vec3(-0.06, 0.0, 0.0), 0.0, 1},
        {PrimitiveKind::Grasp, 0, 2, -1, {}, 0.0, 1},
        // push both toward the corner
        {PrimitiveKind::CarryTo, 0, 1, 3, Vec3(-0.12, 0.0, 0.02), 0.004, 1},
        {PrimitiveKind::Release, 0, -1, -1, {}, 0.0, 1},
        {PrimitiveKind::Retreat, 0, -1, -1, {}, 0.0, 1},
    };
    return t;
}

TaskTemplate bimanual_sequential_template(std::uint64_t variant) {
    TaskTemplate t;
    t.roster = {
        {"left", Role::Manipulator, Vec3(-0.5, -0.4, 0.3), 0.01},
        {"right", Role::Manipulator, Vec3(0.5, -0.4, 0.3), 0.01},
        {"cup", Role::Movable, Vec3(-0.3, 0.0, 0.0) + variant_shift(variant, 0), 0.01},
        {"plate", Role::Movable, Vec3(0.3, 0.0, 0.0) + variant_shift(variant, 1), 0.01},
        {"tray", Role::Reference, Vec3(0.0, 0.4, 0.0) + variant_shift(variant, 2), 0.01},
    };
    t.script = {
        {PrimitiveKind::Approach, 0, 2, -1, {}, 0.0, 1},
        {PrimitiveKind::Grasp, 0, 2, -1, {}, 0.0, 1},
        {PrimitiveKind::CarryTo, 0, 2, 4, Vec3(-0.05, 0.0, 0.02), 0.004, 1},
        {PrimitiveKind::Release, 0, -1, -1, {}, 0.0, 1},
        {PrimitiveKind::Retreat, 0, -1, -1, {}, 0.0, 1},
        {PrimitiveKind::Approach, 1, 3, -1, {}, 0.0, 1},
        {PrimitiveKind::Grasp, 1, 3, -1, {}, 0.0, 1},
        {PrimitiveKind::CarryTo, 1, 3, 4, Vec3(0.05, 0.0, 0.02), 0.004, 1},
        {PrimitiveKind::Release, 1, -1, -1, {}, 0.0, 1},
        {PrimitiveKind::Retreat, 1, -1, -1, {}, 0.0, 1},
    };
    return t;
}

TaskTemplate distractor_template(std::uint64_t variant) {
    TaskTemplate t = pick_place_template(variant);
    t.roster.push_back(
        {"clutter", Role::Distractor, Vec3(0.5, 0.4, 0.0) + variant_shift(variant, 2), 0.01});
    // Occasional accidental manipulation of the distractor (every 3rd demo).
    t.script.push_back({PrimitiveKind::Approach, 0, 4, -1, {}, 0.0, 3});
    t.script.push_back({PrimitiveKind::Grasp, 0, 4, -1, {}, 0.0, 3});
    t.script.push_back({PrimitiveKind::CarryTo, 0, 4, 3, Vec3(0.1, -0.1, 0.02), 0.004, 3});
    t.script.push_back({PrimitiveKind::Release, 0, -1, -1, {}, 0.0, 3});
    t.script.push_back({PrimitiveKind::Retreat, 0, -1, -1, {}, 0.0, 3});
    return t;
}

TaskTemplate two_reference_template(double sigma_true, double sigma_false,
                                    std::uint64_t variant) {
    TaskTemplate t;
    t.roster = {
        {"hand", Role::Manipulator, Vec3(0.0, -0.4, 0.3), 0.01},
        {"cup", Role::Movable, Vec3(0.3, 0.0, 0.0) + variant_shift(variant, 0), 0.01},
        // The tray itself moves between demos by sigma_false, so goals are
        // tight relative to the tray and loose relative to the table.
        {"tray", Role::Reference, Vec3(-0.3, 0.2, 0.0), sigma_false},
        {"table", Role::Reference, Vec3(0.0, 0.6, -0.05), 0.0},
    };
    t.script = {
        {PrimitiveKind::Approach, 0, 1, -1, {}, 0.0, 1},
        {PrimitiveKind::Grasp, 0, 1, -1, {}, 0.0, 1},
        {PrimitiveKind::CarryTo, 0, 1, 2, Vec3(0.0, 0.0, 0.02), sigma_true, 1},
        {PrimitiveKind::Release, 0, -1, -1, {}, 0.0, 1},
        {PrimitiveKind::Retreat, 0, -1, -1, {}, 0.0, 1},
    };
    return t;
}

}  // namespace skelex
