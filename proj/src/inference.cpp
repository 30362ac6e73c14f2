#include "skelex/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "skelex/matcher.hpp"

namespace skelex {

namespace {

// Distributions of `step` that constrain the pose of `object`.
struct Term {
    const RelDist* dist;
    Pose ref_pose;
};

std::vector<Term> collect_terms(const StepModel& step, int object,
                                const std::map<int, Pose>& reference_poses) {
    std::vector<Term> terms;
    for (const auto& d : step.dists) {
        if (d.obj != object) continue;
        if (!step.references.count(d.ref)) continue;
        auto it = reference_poses.find(d.ref);
        if (it == reference_poses.end()) throw std::invalid_argument("reference pose missing");
        terms.push_back(Term{&d, it->second});
    }
    return terms;
}

Eigen::VectorXd term_obs(const Term& term, const Pose& object_pose) {
    const Pose rel = term.dist->obj_in_ref_frame ? relative(term.ref_pose, object_pose)
                                                 : relative(object_pose, term.ref_pose);
    return pose_to_vec6(rel);
}

double total_loglik(const std::vector<Term>& terms, const Pose& object_pose) {
    double s = 0.0;
    for (const auto& t : terms) s += mvn_logpdf(t.dist->model, term_obs(t, object_pose));
    return s;
}

Pose apply_tangent(const Pose& p, const Vec6& delta) {
    Pose out;
    out.position = p.position + delta.head<3>();
    out.rotation = (quat_exp(delta.tail<3>()) * p.rotation).normalized();
    return out;
}

// Precision-weighted fusion of the pose each term's mean implies.
Pose fuse_means(const std::vector<Term>& terms) {
    Vec3 pos_acc = Vec3::Zero();
    double w_acc = 0.0;
    Eigen::Vector4d quat_acc = Eigen::Vector4d::Zero();
    Quat first = Quat::Identity();
    bool have_first = false;

    for (const auto& t : terms) {
        const Pose mean_rel = vec6_to_pose(Vec6(t.dist->model.mean));
        const Pose candidate = t.dist->obj_in_ref_frame
                                   ? compose(t.ref_pose, mean_rel)
                                   : compose(t.ref_pose, inverse(mean_rel));
        const double w = 1.0 / std::max(t.dist->model.covariance.trace(), 1e-12);
        pos_acc += w * candidate.position;
        w_acc += w;
        Quat q = candidate.rotation;
        if (!have_first) {
            first = q;
            have_first = true;
        } else if (q.coeffs().dot(first.coeffs()) < 0) {
            q.coeffs() = -q.coeffs();
        }
        quat_acc += w * q.coeffs();
    }

    Pose fused;
    if (w_acc > 0.0) {
        fused.position = pos_acc / w_acc;
        const double n = quat_acc.norm();
        if (n > 1e-12) fused.rotation = Quat(quat_acc / n);
    }
    return fused;
}

}  // namespace

std::map<int, int> bind_scene(const TaskSkeleton& skeleton, const Scene& scene) {
    std::size_t need_m = 0, need_o = 0, have_m = 0, have_o = 0;
    for (const auto& i : skeleton.identities) (i.manipulator ? need_m : need_o) += 1;
    for (const auto& o : scene.objects) (o.manipulator ? have_m : have_o) += 1;
    if (have_m < need_m || have_o < need_o) {
        throw std::invalid_argument("scene missing required objects");
    }

    DemoFeatures lhs, rhs;
    for (const auto& i : skeleton.identities) {
        lhs.ids.push_back(i.id);
        lhs.features.push_back(i.mean_feature);
        lhs.manipulator.push_back(i.manipulator ? 1 : 0);
    }
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        rhs.ids.push_back(static_cast<int>(k));
        rhs.features.push_back(scene.objects[k].feature.normalized());
        rhs.manipulator.push_back(scene.objects[k].manipulator ? 1 : 0);
    }

    const Assignment a = solve_heuristic({lhs, rhs});
    std::map<int, int> binding;
    double sim = 0.0;
    for (const auto& tup : a.tuples) {
        binding[tup[0]] = tup[1];
        const IdentityInfo* info = skeleton.find_identity(tup[0]);
        sim += info->mean_feature.dot(rhs.features[tup[1]]);
    }
    if (!a.tuples.empty()) sim /= static_cast<double>(a.tuples.size());
    if (sim < 0.5) throw std::invalid_argument("scene mismatch");
    return binding;
}

InferenceResult infer_target_pose(const StepModel& step, int object,
                                  const std::map<int, Pose>& reference_poses) {
    const std::vector<Term> terms = collect_terms(step, object, reference_poses);
    if (terms.empty()) throw std::invalid_argument("step has no distributions for object");

    Pose pose = fuse_means(terms);
    double best_ll = total_loglik(terms, pose);
    Pose best_pose = pose;
    bool converged = false;

    // Residual dimensions: 6 per term, whitened by Cholesky factors.
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
    llts.reserve(terms.size());
    for (const auto& t : terms) {
        llts.emplace_back(t.dist->model.covariance);
        if (llts.back().info() != Eigen::Success) {
            throw std::domain_error("singular covariance");
        }
    }

    auto residuals = [&](const Pose& p) {
        Eigen::VectorXd r(6 * terms.size());
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const Eigen::VectorXd diff = term_obs(terms[i], p) - terms[i].dist->model.mean;
            r.segment<6>(6 * i) = llts[i].matrixL().solve(diff);
        }
        return r;
    };

    const double h = 1e-6;
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::VectorXd r0 = residuals(pose);
        Eigen::MatrixXd J(r0.size(), 6);
        for (int c = 0; c < 6; ++c) {
            Vec6 dp = Vec6::Zero();
            dp(c) = h;
            Vec6 dm = Vec6::Zero();
            dm(c) = -h;
            J.col(c) = (residuals(apply_tangent(pose, dp)) - residuals(apply_tangent(pose, dm))) /
                       (2.0 * h);
        }
        Eigen::Matrix<double, 6, 6> JtJ = J.transpose() * J;
        JtJ.diagonal().array() += 1e-12;
        const Vec6 delta = JtJ.ldlt().solve(-J.transpose() * r0);

        // Backtrack if the full step does not improve the likelihood.
        double scale = 1.0;
        Pose next = pose;
        double next_ll = -std::numeric_limits<double>::infinity();
        for (int bt = 0; bt < 25; ++bt) {
            const Pose trial = apply_tangent(pose, Vec6(scale * delta));
            const double ll = total_loglik(terms, trial);
            if (ll > best_ll - 1e-15) {
                next = trial;
                next_ll = ll;
                break;
            }
            scale *= 0.5;
        }
        if (!std::isfinite(next_ll)) break;

        pose = next;
        if (next_ll > best_ll) {
            best_ll = next_ll;
            best_pose = pose;
        }
        if ((scale * delta).norm() < 1e-8) {
            converged = true;
            break;
        }
    }

    return InferenceResult{best_pose, best_ll, converged};
}

std::vector<ActionStep> plan(const TaskSkeleton& skeleton, const Scene& scene) {
    const auto binding = bind_scene(skeleton, scene);

    // Simulated poses, updated by magic placements.
    std::map<int, Pose> sim_pose;
    std::map<int, bool> sim_visible;
    for (const auto& [identity, idx] : binding) {
        sim_pose[identity] = scene.objects[idx].pose;
        sim_visible[identity] = scene.objects[idx].visible;
    }

    std::map<int, int> held_by;           // object identity -> manipulator identity
    std::map<int, int> held_count;        // manipulator identity -> held objects

    std::vector<ActionStep> actions;
    for (const StepModel& step : skeleton.steps) {
        for (int object : step.moved) {
            ActionStep act;
            act.object = object;

            if (step.action_hint == "grasp") {
                const int manip = step.target;
                // Manipulator target: the object's pose composed with the
                // mean manipulator-in-object-frame transform.
                const Mvn* m_in_o = nullptr;
                const Mvn* o_in_m = nullptr;
                for (const auto& d : step.dists) {
                    if (d.obj != object || d.ref != manip) continue;
                    (d.obj_in_ref_frame ? o_in_m : m_in_o) = &d.model;
                }
                if (!m_in_o && !o_in_m) {
                    act.kind = "unsupported";
                    act.flagged = true;
                    act.note = "no grasp distribution";
                    actions.push_back(std::move(act));
                    continue;
                }
                const Pose obj_pose = sim_pose.at(object);
                const Pose rel = m_in_o ? vec6_to_pose(Vec6(m_in_o->mean))
                                        : inverse(vec6_to_pose(Vec6(o_in_m->mean)));
                act.kind = "grasp";
                act.target = compose(obj_pose, rel);
                double ll = 0.0;
                if (m_in_o) ll += mvn_logpdf(*m_in_o, pose_to_vec6(rel));
                if (o_in_m) ll += mvn_logpdf(*o_in_m, pose_to_vec6(inverse(rel)));
                act.loglik = ll;
                held_by[object] = manip;
                held_count[manip] += 1;
                actions.push_back(std::move(act));
            } else if (step.action_hint == "place") {
                std::map<int, Pose> ref_poses;
                for (int ref : step.references) {
                    auto it = sim_pose.find(ref);
                    if (it == sim_pose.end()) {
                        throw std::invalid_argument("reference object not bound");
                    }
                    if (!sim_visible.at(ref)) {
                        throw std::invalid_argument("reference object not visible");
                    }
                    ref_poses[ref] = it->second;
                }
                const InferenceResult res = infer_target_pose(step, object, ref_poses);
                act.kind = "place";
                act.target = res.pose;
                act.loglik = res.loglik;
                act.flagged = !res.converged;
                if (!res.converged) act.note = "optimizer did not converge";
                auto holder = held_by.find(object);
                if (holder != held_by.end()) {
                    held_count[holder->second] -= 1;
                    if (held_count[holder->second] != 0) {
                        act.flagged = true;
                        act.note = "manipulator not free after placement";
                    }
                    held_by.erase(holder);
                }
                sim_pose[object] = res.pose;
                actions.push_back(std::move(act));
            } else {
                act.kind = "unsupported";
                act.flagged = true;
                act.note = "unsupported manipulation type";
                actions.push_back(std::move(act));
            }
        }
    }
    return actions;
}

}  // namespace skelex
