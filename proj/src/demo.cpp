#include "skelex/demo.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace skelex {

int Demonstration::index_of(int id) const {
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (objects[i].id == id) return static_cast<int>(i);
    }
    return -1;
}

const ObjectInfo& Demonstration::info(int id) const {
    const int i = index_of(id);
    if (i < 0) throw std::invalid_argument("unknown object id");
    return objects[i];
}

NodeSet Demonstration::all_ids() const {
    NodeSet s;
    for (const auto& o : objects) s.insert(o.id);
    return s;
}

NodeSet Demonstration::manipulator_ids() const {
    NodeSet s;
    for (const auto& o : objects) {
        if (o.manipulator) s.insert(o.id);
    }
    return s;
}

bool Demonstration::visible_at(int id, int t) const {
    const int i = index_of(id);
    if (i < 0) throw std::invalid_argument("unknown object id");
    return visible[i][t] != 0;
}

Pose Demonstration::pose_at(int id, int t) const {
    const int i = index_of(id);
    if (i < 0) throw std::invalid_argument("unknown object id");
    const int n = length();
    t = std::clamp(t, 0, n - 1);
    if (visible[i][t]) return poses[i][t];
    for (int back = t - 1; back >= 0; --back) {
        if (visible[i][back]) return poses[i][back];
    }
    for (int fwd = t + 1; fwd < n; ++fwd) {
        if (visible[i][fwd]) return poses[i][fwd];
    }
    return poses[i][t];  // never visible; raw value is all we have
}

void Demonstration::validate_and_normalize() {
    if (objects.empty()) throw std::invalid_argument("demonstration has no objects");
    if (poses.size() != objects.size() || visible.size() != objects.size()) {
        throw std::invalid_argument("trajectory count does not match object count");
    }
    std::set<int> ids;
    for (const auto& o : objects) {
        if (!ids.insert(o.id).second) throw std::invalid_argument("duplicate object id");
    }
    const std::size_t T = poses.front().size();
    if (T == 0) throw std::invalid_argument("empty trajectories");
    const Eigen::Index fdim = objects.front().feature.size();
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (poses[i].size() != T || visible[i].size() != T) {
            throw std::invalid_argument("trajectory length mismatch");
        }
        if (objects[i].feature.size() != fdim) {
            throw std::invalid_argument("feature dimension mismatch");
        }
        if (fdim > 0) {
            const double n = objects[i].feature.norm();
            if (n < 1e-6) throw std::invalid_argument("feature vector has near-zero norm");
            objects[i].feature /= n;
        }
        for (const Pose& p : poses[i]) {
            if (!pose_valid(p)) throw std::invalid_argument("invalid pose in trajectory");
        }
    }
}

void Config::validate() const {
    if (window < 3) throw std::invalid_argument("window must be >= 3");
    if (min_evidence < 1) throw std::invalid_argument("min_evidence must be positive");
    if (mi_threshold <= 0 || edge_threshold <= 0 || rest_threshold <= 0) {
        throw std::invalid_argument("thresholds must be positive");
    }
    if (edge_threshold >= 1 || rest_threshold >= 1) {
        throw std::invalid_argument("quantile thresholds must be < 1");
    }
    if (activation_threshold <= 0 || activation_threshold >= 1) {
        throw std::invalid_argument("activation_threshold must be in (0,1)");
    }
    if (obs_dim != 3 && obs_dim != 6) throw std::invalid_argument("obs_dim must be 3 or 6");
    if (smoothing && (smoothing_window < 5 || smoothing_window % 2 == 0)) {
        throw std::invalid_argument("smoothing window must be odd and >= 5");
    }
    if (min_edge_duration < 0) throw std::invalid_argument("min_edge_duration must be >= 0");
    if (mi_significance < 0 || mi_significance > 0.5) {
        throw std::invalid_argument("mi_significance must be in [0, 0.5]");
    }
}

namespace {

// Hat matrix of the cubic least-squares fit over a window of 2h+1 points.
// Interior samples use the center row; the first and last windows supply
// the boundary rows, so cubic signals pass through unchanged everywhere.
Eigen::MatrixXd sg_cubic_hat(int half) {
    const int n = 2 * half + 1;
    Eigen::MatrixXd A(n, 4);
    for (int i = 0; i < n; ++i) {
        const double x = i - half;
        A(i, 0) = 1.0;
        A(i, 1) = x;
        A(i, 2) = x * x;
        A(i, 3) = x * x * x;
    }
    return A * (A.transpose() * A).ldlt().solve(A.transpose());
}

std::vector<double> smooth_series(const std::vector<double>& x, const Eigen::MatrixXd& hat,
                                  int half) {
    const int n = static_cast<int>(x.size());
    const int w = 2 * half + 1;
    std::vector<double> out(n);
    for (int t = 0; t < n; ++t) {
        int base, row;
        if (t < half) {
            base = 0;
            row = t;
        } else if (t >= n - half) {
            base = n - w;
            row = t - base;
        } else {
            base = t - half;
            row = half;
        }
        double acc = 0.0;
        for (int j = 0; j < w; ++j) acc += hat(row, j) * x[base + j];
        out[t] = acc;
    }
    return out;
}

}  // namespace

Demonstration smooth_trajectories(const Demonstration& demo, int window) {
    if (window < 5 || window % 2 == 0) throw std::invalid_argument("smoothing window must be odd and >= 5");
    const int half = window / 2;
    const Eigen::MatrixXd hat = sg_cubic_hat(half);
    Demonstration out = demo;
    const int T = demo.length();
    if (T < window) return out;

    for (int i = 0; i < demo.num_objects(); ++i) {
        // Smooth only fully visible demos per-channel; occluded segments are
        // left untouched to avoid bridging gaps with fabricated data.
        bool all_visible = true;
        for (char v : demo.visible[i]) {
            if (!v) { all_visible = false; break; }
        }
        if (!all_visible) continue;

        std::vector<std::vector<double>> ch(7, std::vector<double>(T));
        for (int t = 0; t < T; ++t) {
            const Pose& p = demo.poses[i][t];
            Quat q = p.rotation;
            if (t > 0) {
                // sign-align with previous sample before smoothing components
                const Quat& prev = out.poses[i][t - 1].rotation;
                if (q.coeffs().dot(prev.coeffs()) < 0) q.coeffs() = -q.coeffs();
            }
            out.poses[i][t].rotation = q;
            ch[0][t] = p.position.x();
            ch[1][t] = p.position.y();
            ch[2][t] = p.position.z();
            ch[3][t] = q.w();
            ch[4][t] = q.x();
            ch[5][t] = q.y();
            ch[6][t] = q.z();
        }
        for (auto& c : ch) c = smooth_series(c, hat, half);
        for (int t = 0; t < T; ++t) {
            out.poses[i][t].position = Vec3(ch[0][t], ch[1][t], ch[2][t]);
            Quat q(ch[3][t], ch[4][t], ch[5][t], ch[6][t]);
            const double n = q.norm();
            out.poses[i][t].rotation = n > 1e-9 ? Quat(q.coeffs() / n) : demo.poses[i][t].rotation;
        }
    }
    return out;
}

}  // namespace skelex
