#include "skelex/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace skelex {

namespace {

constexpr double kSingleSampleVar = 1e-6;

NodeSet remap_set(const NodeSet& s, const std::map<int, int>& m) {
    NodeSet out;
    for (int id : s) {
        auto it = m.find(id);
        if (it != m.end()) out.insert(it->second);
    }
    return out;
}

bool intersects(const NodeSet& a, const NodeSet& b) {
    for (int x : a) {
        if (b.count(x)) return true;
    }
    return false;
}

std::optional<Mvn> fit_from_samples(const std::vector<Eigen::VectorXd>& samples) {
    if (samples.empty()) return std::nullopt;
    if (samples.size() == 1) {
        Mvn m;
        m.mean = samples.front();
        m.covariance =
            Eigen::MatrixXd::Identity(samples.front().size(), samples.front().size()) *
            kSingleSampleVar;
        return m;
    }
    return fit_mvn_adaptive(samples);
}

// Relative pose sample of identity `obj` expressed in the frame of `ref`
// at step t of one demonstration; nullopt when either is not present.
std::optional<Eigen::VectorXd> rel_sample(const Demonstration& demo,
                                          const std::map<int, int>& identity_to_object, int ref,
                                          int obj, int t) {
    auto ri = identity_to_object.find(ref);
    auto oi = identity_to_object.find(obj);
    if (ri == identity_to_object.end() || oi == identity_to_object.end()) return std::nullopt;
    if (demo.index_of(ri->second) < 0 || demo.index_of(oi->second) < 0) return std::nullopt;
    const Pose rel = relative(demo.pose_at(ri->second, t), demo.pose_at(oi->second, t));
    return Eigen::VectorXd(pose_to_vec6(rel));
}

struct Member {
    int demo_index = 0;
    int time = 0;
};

std::vector<RelDist> fit_distributions(const Event& anchor,
                                       const std::vector<Member>& members,
                                       const std::vector<Demonstration>& demos,
                                       const std::vector<std::map<int, int>>& identity_to_object) {
    std::vector<RelDist> dists;
    for (int ref : anchor.target_nodes) {
        for (int obj : anchor.nodes) {
            for (bool dir : {true, false}) {
                std::vector<Eigen::VectorXd> samples;
                for (const Member& m : members) {
                    const auto s = dir ? rel_sample(demos[m.demo_index],
                                                    identity_to_object[m.demo_index], ref, obj,
                                                    m.time)
                                       : rel_sample(demos[m.demo_index],
                                                    identity_to_object[m.demo_index], obj, ref,
                                                    m.time);
                    if (s) samples.push_back(*s);
                }
                if (auto mvn = fit_from_samples(samples)) {
                    dists.push_back(RelDist{ref, obj, dir, std::move(*mvn)});
                }
            }
        }
    }
    return dists;
}

double mean_entropy(const std::vector<RelDist>& dists) {
    if (dists.empty()) return 0.0;
    double s = 0.0;
    for (const auto& d : dists) s += mvn_entropy(d.model);
    return s / static_cast<double>(dists.size());
}

std::string derive_action_hint(const Event& anchor) {
    if (anchor.target == kWorldTarget) return "place";
    if (anchor.target_nodes.size() == 1) return "grasp";
    return "unsupported";
}

}  // namespace

Event StepModel::anchor_event() const {
    Event e;
    e.kind = EventKind::Add;
    e.time = anchor_time;
    e.nodes = moved;
    e.target = target;
    e.target_nodes = anchor_target_nodes;
    return e;
}

const IdentityInfo* TaskSkeleton::find_identity(int id) const {
    for (const auto& i : identities) {
        if (i.id == id) return &i;
    }
    return nullptr;
}

EventSequence remap_events(const std::vector<Event>& events, int demo_index,
                           const std::map<int, int>& object_to_identity) {
    EventSequence seq;
    seq.demo_index = demo_index;
    for (const Event& e : events) {
        Event r = e;
        r.nodes = remap_set(e.nodes, object_to_identity);
        r.nodes_b = remap_set(e.nodes_b, object_to_identity);
        r.target_nodes = remap_set(e.target_nodes, object_to_identity);
        if (e.kind == EventKind::Add) {
            if (r.nodes.empty()) continue;
            if (e.target != kWorldTarget) {
                auto it = object_to_identity.find(e.target);
                if (it == object_to_identity.end()) continue;  // unmatched manipulator
                r.target = it->second;
            }
        } else {
            if (r.nodes.empty() || r.nodes_b.empty()) continue;
        }
        seq.events.push_back(std::move(r));
    }
    return seq;
}

NodeSet confirmed_activations(const std::vector<EventSequence>& sequences, double alpha_a) {
    std::map<int, int> counts;
    for (const auto& seq : sequences) {
        NodeSet seen;
        for (const Event& e : seq.events) {
            if (e.kind != EventKind::Add || e.target == kWorldTarget) continue;
            for (int id : e.nodes) seen.insert(id);
        }
        for (int id : seen) counts[id] += 1;
    }
    NodeSet confirmed;
    const double n = static_cast<double>(sequences.size());
    for (const auto& [id, c] : counts) {
        if (static_cast<double>(c) / n > alpha_a) confirmed.insert(id);
    }
    return confirmed;
}

std::vector<EventSequence> filter_by_activations(const std::vector<EventSequence>& sequences,
                                                 const NodeSet& confirmed,
                                                 const NodeSet& manipulator_ids,
                                                 const NodeSet& all_ids) {
    NodeSet unconfirmed;
    for (int id : all_ids) {
        if (!manipulator_ids.count(id) && !confirmed.count(id)) unconfirmed.insert(id);
    }

    std::vector<EventSequence> out;
    out.reserve(sequences.size());
    for (const auto& seq : sequences) {
        EventSequence f;
        f.demo_index = seq.demo_index;
        for (const Event& e : seq.events) {
            Event r = e;
            if (e.kind == EventKind::Add) {
                NodeSet nodes;
                for (int id : e.nodes) {
                    if (confirmed.count(id)) nodes.insert(id);
                }
                if (nodes.empty()) continue;
                r.nodes = std::move(nodes);
                if (e.target == kWorldTarget) {
                    // unconfirmed objects live in the world graph
                    for (int id : unconfirmed) {
                        if (!r.nodes.count(id)) r.target_nodes.insert(id);
                    }
                } else {
                    for (int id : unconfirmed) r.target_nodes.erase(id);
                }
            } else {
                for (int id : unconfirmed) {
                    r.nodes.erase(id);
                    r.nodes_b.erase(id);
                }
                if (r.nodes.empty() || r.nodes_b.empty()) continue;
            }
            f.events.push_back(std::move(r));
        }
        out.push_back(std::move(f));
    }
    return out;
}

int select_reference_sequence(const std::vector<EventSequence>& sequences) {
    if (sequences.size() < 2) throw std::invalid_argument("need at least two sequences");
    int best = 0;
    for (int i = 1; i < static_cast<int>(sequences.size()); ++i) {
        if (sequences[i].events.size() < sequences[best].events.size()) best = i;
    }
    return best;
}

bool match_events(const Event& anchor, const Event& candidate) {
    if (anchor.kind != candidate.kind) return false;
    if (anchor.kind == EventKind::Add) {
        const bool a_world = anchor.target == kWorldTarget;
        const bool c_world = candidate.target == kWorldTarget;
        if (a_world != c_world) return false;
        if (anchor.nodes != candidate.nodes) return false;
        if (a_world) return intersects(anchor.target_nodes, candidate.target_nodes);
        return anchor.target_nodes == candidate.target_nodes;
    }
    // Merge and Split are commutative in their graph arguments.
    return (anchor.nodes == candidate.nodes && anchor.nodes_b == candidate.nodes_b) ||
           (anchor.nodes == candidate.nodes_b && anchor.nodes_b == candidate.nodes);
}

std::vector<Event> effective_events(const EventSequence& seq) {
    std::vector<Event> out;
    out.reserve(seq.events.size());
    NodeSet active;
    for (const Event& e : seq.events) {
        Event r = e;
        if (e.kind == EventKind::Add) {
            if (e.target == kWorldTarget) {
                NodeSet kept;
                for (int id : e.nodes) {
                    if (active.count(id)) kept.insert(id);
                }
                r.nodes = kept;
                for (int id : kept) active.erase(id);
            } else {
                for (int id : e.nodes) active.insert(id);
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<CandidateSet> collect_candidates(const std::vector<EventSequence>& sequences,
                                             int reference) {
    std::vector<std::vector<Event>> eff;
    eff.reserve(sequences.size());
    for (const auto& s : sequences) eff.push_back(effective_events(s));

    std::vector<CandidateSet> out;
    const auto& ref_events = eff[reference];
    for (int i = 0; i < static_cast<int>(ref_events.size()); ++i) {
        CandidateSet cs;
        cs.anchor = i;
        for (int n = 0; n < static_cast<int>(sequences.size()); ++n) {
            if (n == reference) continue;
            cs.demo_indices.push_back(sequences[n].demo_index);
            std::vector<int> matches;
            for (int j = 0; j < static_cast<int>(eff[n].size()); ++j) {
                if (match_events(ref_events[i], eff[n][j])) matches.push_back(j);
            }
            cs.per_demo.push_back(std::move(matches));
        }
        out.push_back(std::move(cs));
    }
    return out;
}

CombinationChoice select_best_combination(
    const CandidateSet& cands, const std::vector<EventSequence>& sequences,
    const std::vector<Demonstration>& demos,
    const std::vector<std::map<int, int>>& identity_to_object) {
    // Sequence lookup by demo index, and the anchor event itself.
    std::map<int, const EventSequence*> by_demo;
    for (const auto& s : sequences) by_demo[s.demo_index] = &s;

    int ref_seq = -1;
    for (int n = 0; n < static_cast<int>(sequences.size()); ++n) {
        bool listed = false;
        for (int d : cands.demo_indices) {
            if (d == sequences[n].demo_index) { listed = true; break; }
        }
        if (!listed) { ref_seq = n; break; }
    }
    if (ref_seq < 0) throw std::logic_error("candidate set covers every sequence");

    const std::vector<Event> ref_eff = effective_events(sequences[ref_seq]);
    const Event& anchor = ref_eff[cands.anchor];
    const Member anchor_member{sequences[ref_seq].demo_index, anchor.time};

    // Demos that actually offer candidates.
    std::vector<int> active_slots;
    double total = 1.0;
    for (std::size_t s = 0; s < cands.per_demo.size(); ++s) {
        if (!cands.per_demo[s].empty()) {
            active_slots.push_back(static_cast<int>(s));
            total *= static_cast<double>(cands.per_demo[s].size());
        }
    }

    std::vector<std::vector<int>> combos;  // candidate index per active slot
    if (active_slots.empty()) {
        combos.push_back({});
    } else if (total <= 4096.0) {
        std::vector<int> cur(active_slots.size(), 0);
        while (true) {
            std::vector<int> combo(active_slots.size());
            for (std::size_t s = 0; s < active_slots.size(); ++s) {
                combo[s] = cands.per_demo[active_slots[s]][cur[s]];
            }
            combos.push_back(std::move(combo));
            int pos = static_cast<int>(active_slots.size()) - 1;
            while (pos >= 0) {
                if (++cur[pos] < static_cast<int>(cands.per_demo[active_slots[pos]].size())) break;
                cur[pos] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    } else {
        // Greedy beam (width 4) on mean entropy of the partially fitted step.
        std::vector<std::vector<int>> beam{{}};
        for (std::size_t s = 0; s < active_slots.size(); ++s) {
            std::vector<std::pair<double, std::vector<int>>> scored;
            for (const auto& partial : beam) {
                for (int cand : cands.per_demo[active_slots[s]]) {
                    std::vector<int> ext = partial;
                    ext.push_back(cand);
                    std::vector<Member> members{anchor_member};
                    for (std::size_t p = 0; p < ext.size(); ++p) {
                        const int demo = cands.demo_indices[active_slots[p]];
                        members.push_back(
                            Member{demo, effective_events(*by_demo.at(demo))[ext[p]].time});
                    }
                    const auto dists =
                        fit_distributions(anchor, members, demos, identity_to_object);
                    scored.emplace_back(mean_entropy(dists), std::move(ext));
                }
            }
            std::stable_sort(scored.begin(), scored.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            beam.clear();
            for (std::size_t b = 0; b < std::min<std::size_t>(4, scored.size()); ++b) {
                beam.push_back(std::move(scored[b].second));
            }
        }
        combos = std::move(beam);
    }

    // Fit every combination and gather entropy statistics across the set.
    struct Fitted {
        std::vector<int> combo;
        std::vector<RelDist> dists;
        std::vector<int> support;
    };
    std::vector<Fitted> fitted;
    std::vector<double> entropies;
    for (const auto& combo : combos) {
        Fitted f;
        f.combo = combo;
        std::vector<Member> members{anchor_member};
        f.support.push_back(anchor_member.demo_index);
        for (std::size_t s = 0; s < combo.size(); ++s) {
            const int demo = cands.demo_indices[active_slots[s]];
            const auto eff = effective_events(*by_demo.at(demo));
            members.push_back(Member{demo, eff[combo[s]].time});
            f.support.push_back(demo);
        }
        f.dists = fit_distributions(anchor, members, demos, identity_to_object);
        for (const auto& d : f.dists) entropies.push_back(mvn_entropy(d.model));
        fitted.push_back(std::move(f));
    }

    double mean_s = 0.0, var_s = 0.0;
    if (!entropies.empty()) {
        for (double e : entropies) mean_s += e;
        mean_s /= static_cast<double>(entropies.size());
        for (double e : entropies) var_s += (e - mean_s) * (e - mean_s);
        var_s /= static_cast<double>(entropies.size());
    }
    var_s = std::max(var_s, 1e-12);

    // Deviations above the mean are clamped to zero, so only tighter than
    // average distributions lower the probability; pick the minimum.
    int best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(fitted.size()); ++i) {
        double score = normal_pdf(0.0, 0.0, var_s);
        if (!fitted[i].dists.empty()) {
            double acc = 0.0;
            for (const auto& d : fitted[i].dists) {
                const double dev = std::min(mvn_entropy(d.model) - mean_s, 0.0);
                acc += normal_pdf(dev, 0.0, var_s);
            }
            score = acc / static_cast<double>(fitted[i].dists.size());
        }
        if (score < best_score) {
            best_score = score;
            best = i;
        }
    }

    CombinationChoice choice;
    choice.chosen.assign(cands.per_demo.size(), -1);
    for (std::size_t s = 0; s < active_slots.size(); ++s) {
        choice.chosen[active_slots[s]] = fitted[best].combo[s];
    }
    choice.dists = std::move(fitted[best].dists);
    choice.support = std::move(fitted[best].support);
    choice.low_confidence = choice.support.size() < 2;
    return choice;
}

TaskSkeleton fit_skeleton_from_events(const std::vector<Demonstration>& demos,
                                      const std::vector<std::vector<Event>>& raw_events,
                                      const Assignment& assignment, const Config& cfg,
                                      std::uint64_t seed) {
    if (demos.size() < 2) throw std::invalid_argument("need at least two demonstrations");
    if (raw_events.size() != demos.size()) {
        throw std::invalid_argument("event list count does not match demo count");
    }

    const auto object_maps = identity_maps(assignment);

    TaskSkeleton skel;
    skel.config = cfg;
    skel.seed = seed;
    for (int n = 0; n < static_cast<int>(demos.size()); ++n) skel.training_demos.push_back(n);

    // Identity table with mean features.
    NodeSet manipulator_identities, all_identities;
    for (const auto& tup : assignment.tuples) {
        IdentityInfo info;
        info.id = tup[0];
        const ObjectInfo& first = demos[0].info(tup[0]);
        info.name = first.name;
        info.manipulator = first.manipulator;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(first.feature.size());
        for (std::size_t n = 0; n < tup.size(); ++n) mean += demos[n].info(tup[n]).feature;
        const double norm = mean.norm();
        info.mean_feature = norm > 1e-12 ? Eigen::VectorXd(mean / norm) : first.feature;
        all_identities.insert(info.id);
        if (info.manipulator) manipulator_identities.insert(info.id);
        skel.identities.push_back(std::move(info));
    }

    std::vector<EventSequence> sequences;
    for (int n = 0; n < static_cast<int>(demos.size()); ++n) {
        sequences.push_back(remap_events(raw_events[n], n, object_maps[n]));
    }

    const NodeSet confirmed = confirmed_activations(sequences, cfg.activation_threshold);
    if (confirmed.empty()) throw std::invalid_argument("no task content");
    const auto filtered =
        filter_by_activations(sequences, confirmed, manipulator_identities, all_identities);

    const int ref = select_reference_sequence(filtered);
    const auto candidates = collect_candidates(filtered, ref);
    const auto ref_eff = effective_events(filtered[ref]);

    std::vector<std::map<int, int>> identity_to_object(demos.size());
    for (const auto& tup : assignment.tuples) {
        for (std::size_t n = 0; n < tup.size(); ++n) identity_to_object[n][tup[0]] = tup[n];
    }

    for (const auto& cs : candidates) {
        const Event& anchor = ref_eff[cs.anchor];
        if (anchor.kind != EventKind::Add || anchor.nodes.empty()) continue;

        const auto choice = select_best_combination(cs, filtered, demos, identity_to_object);

        StepModel step;
        step.moved = anchor.nodes;
        step.target = anchor.target;
        step.anchor_target_nodes = anchor.target_nodes;
        step.references = anchor.target_nodes;
        step.dists = choice.dists;
        step.action_hint = derive_action_hint(anchor);
        step.low_confidence = choice.low_confidence;
        step.anchor_demo = filtered[ref].demo_index;
        step.anchor_time = anchor.time;
        step.support = choice.support;
        skel.steps.push_back(std::move(step));
    }
    return skel;
}

TaskSkeleton fit_skeleton(const std::vector<Demonstration>& demos, const Config& cfg,
                          std::uint64_t seed) {
    if (demos.size() < 2) throw std::invalid_argument("need at least two demonstrations");

    std::vector<std::vector<Event>> events(demos.size());
    const int n = static_cast<int>(demos.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        events[i] = segment(demos[i], cfg).events;
    }

    std::vector<DemoFeatures> features;
    features.reserve(demos.size());
    for (const auto& d : demos) features.push_back(features_of(d));
    const Assignment assignment = solve_heuristic(features);

    return fit_skeleton_from_events(demos, events, assignment, cfg, seed);
}

TaskSkeleton minimize_references(const TaskSkeleton& skeleton) {
    TaskSkeleton out = skeleton;
    for (StepModel& step : out.steps) {
        if (step.target != kWorldTarget || step.references.size() <= 1) continue;

        // Mean entropy of the obj-in-ref-frame distributions per reference.
        std::vector<std::pair<int, double>> scores;
        for (int ref : step.references) {
            double acc = 0.0;
            int count = 0;
            for (const auto& d : step.dists) {
                if (d.ref == ref && d.obj_in_ref_frame) {
                    acc += mvn_entropy(d.model);
                    ++count;
                }
            }
            if (count > 0) scores.emplace_back(ref, acc / count);
        }
        if (scores.empty()) continue;

        auto best = scores.front();
        double second = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < scores.size(); ++i) {
            if (scores[i].second < best.second) {
                second = best.second;
                best = scores[i];
            } else {
                second = std::min(second, scores[i].second);
            }
        }
        step.ambiguous_reference =
            scores.size() > 1 && (second - best.second) <= kAmbiguityGap;
        step.references = {best.first};
        std::erase_if(step.dists, [&](const RelDist& d) { return d.ref != best.first; });
    }
    return out;
}

std::map<int, int> bind_identities(const TaskSkeleton& skeleton, const Demonstration& demo) {
    DemoFeatures lhs;
    for (const auto& i : skeleton.identities) {
        lhs.ids.push_back(i.id);
        lhs.features.push_back(i.mean_feature);
        lhs.manipulator.push_back(i.manipulator ? 1 : 0);
    }
    const DemoFeatures rhs = features_of(demo);
    const Assignment a = solve_heuristic({lhs, rhs});
    std::map<int, int> binding;
    for (const auto& tup : a.tuples) binding[tup[0]] = tup[1];
    return binding;
}

double evaluate_likelihood(const TaskSkeleton& skeleton, const Demonstration& demo,
                           double missing_penalty) {
    const auto binding = bind_identities(skeleton, demo);
    std::map<int, int> object_to_identity;
    for (const auto& [identity, object] : binding) object_to_identity[object] = identity;

    const SegmentationResult seg = segment(demo, skeleton.config);
    const EventSequence seq = remap_events(seg.events, 0, object_to_identity);
    const std::vector<Event> eff = effective_events(seq);

    double total = 0.0;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < skeleton.steps.size(); ++k) {
        const StepModel& step = skeleton.steps[k];
        const Event anchor = step.anchor_event();
        std::size_t found = eff.size();
        for (std::size_t j = pos; j < eff.size(); ++j) {
            if (match_events(anchor, eff[j])) {
                found = j;
                break;
            }
        }
        if (found == eff.size()) {
            if (k == 0) throw std::invalid_argument("demo incompatible");
            total += missing_penalty;
            continue;
        }
        pos = found + 1;
        const int t = eff[found].time;
        for (const auto& d : step.dists) {
            auto ri = binding.find(d.ref);
            auto oi = binding.find(d.obj);
            if (ri == binding.end() || oi == binding.end()) {
                total += missing_penalty;
                continue;
            }
            const int a = d.obj_in_ref_frame ? ri->second : oi->second;
            const int b = d.obj_in_ref_frame ? oi->second : ri->second;
            const Pose rel = relative(demo.pose_at(a, t), demo.pose_at(b, t));
            total += mvn_logpdf(d.model, pose_to_vec6(rel));
        }
    }
    return total;
}

}  // namespace skelex
