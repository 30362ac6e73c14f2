#include "skelex/metrics.hpp"

#include <stdexcept>

namespace skelex {

SegReport segmentation_report(const std::vector<Event>& generated,
                              const std::vector<Event>& labels) {
    if (labels.empty()) throw std::invalid_argument("empty label sequence");
    SegReport rep;
    rep.alignment.assign(labels.size(), -1);
    std::size_t pos = 0;
    bool all = true;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        bool found = false;
        for (std::size_t j = pos; j < generated.size(); ++j) {
            if (match_events(labels[k], generated[j])) {
                rep.alignment[k] = static_cast<int>(j);
                pos = j + 1;
                found = true;
                break;
            }
        }
        if (!found) all = false;
    }
    rep.eds = all ? 1 : 0;
    rep.sd = (static_cast<double>(generated.size()) - static_cast<double>(labels.size())) /
             static_cast<double>(labels.size());
    return rep;
}

int eds(const std::vector<Event>& generated, const std::vector<Event>& labels) {
    return segmentation_report(generated, labels).eds;
}

double sd(const std::vector<Event>& generated, const std::vector<Event>& labels) {
    return segmentation_report(generated, labels).sd;
}

namespace {

bool step_matches(const StepModel& step, const LabelStep& label, bool minimized) {
    if (step.moved != label.moved) return false;
    const bool label_world = label.target == kWorldTarget;
    const bool step_world = step.target == kWorldTarget;
    if (label_world != step_world) return false;
    if (!label_world && step.target != label.target) return false;
    if (label.references.empty()) return true;
    if (minimized) return step.references == label.references;
    for (int r : label.references) {
        if (!step.references.count(r)) return false;
    }
    return true;
}

}  // namespace

SkeletonReport structural_accuracy(const TaskSkeleton& skeleton,
                                   const std::vector<LabelStep>& labels, bool minimized) {
    if (labels.empty()) throw std::invalid_argument("empty label skeleton");
    SkeletonReport rep;
    rep.minimized = minimized;
    std::size_t pos = 0;
    bool all = true;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        StepMatch m;
        m.label = static_cast<int>(k);
        for (std::size_t j = pos; j < skeleton.steps.size(); ++j) {
            if (step_matches(skeleton.steps[j], labels[k], minimized)) {
                m.step = static_cast<int>(j);
                pos = j + 1;
                break;
            }
        }
        if (m.step < 0) all = false;
        rep.matches.push_back(m);
    }
    rep.sa = all ? 1 : 0;
    rep.sd_steps =
        (static_cast<double>(skeleton.steps.size()) - static_cast<double>(labels.size())) /
        static_cast<double>(labels.size());
    return rep;
}

}  // namespace skelex
