#include "skelex/se3.hpp"

#include <cmath>
#include <stdexcept>

namespace skelex {

bool pose_valid(const Pose& p) {
    if (!p.position.allFinite()) return false;
    const double n = p.rotation.norm();
    return std::isfinite(n) && std::abs(n - 1.0) <= 1e-6;
}

Vec3 quat_log(const Quat& q_in) {
    Quat q = q_in.normalized();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();  // shortest arc
    const Vec3 v = q.vec();
    const double s = v.norm();
    const double w = q.w();
    if (s < 1e-12) {
        // angle ~ 2*s/w; first-order series keeps the map smooth at identity
        return v * (2.0 / std::max(w, 1e-12));
    }
    const double angle = 2.0 * std::atan2(s, w);
    return v * (angle / s);
}

Quat quat_exp(const Vec3& w) {
    const double angle = w.norm();
    if (angle < 1e-12) {
        Quat q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
        return q.normalized();
    }
    const double half = 0.5 * angle;
    const Vec3 axis = w / angle;
    const double s = std::sin(half);
    return Quat(std::cos(half), axis.x() * s, axis.y() * s, axis.z() * s);
}

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.position = a.position + a.rotation * b.position;
    out.rotation = (a.rotation * b.rotation).normalized();
    return out;
}

Pose inverse(const Pose& p) {
    Pose out;
    out.rotation = p.rotation.conjugate();
    out.position = -(out.rotation * p.position);
    return out;
}

Pose relative(const Pose& a, const Pose& b) { return compose(inverse(a), b); }

Vec6 pose_to_vec6(const Pose& p) {
    Vec6 v;
    v.head<3>() = p.position;
    v.tail<3>() = quat_log(p.rotation);
    return v;
}

Pose vec6_to_pose(const Vec6& v) {
    Pose p;
    p.position = v.head<3>();
    p.rotation = quat_exp(v.tail<3>());
    return p;
}

double rotation_distance(const Quat& a, const Quat& b) {
    return quat_log(a.conjugate() * b).norm();
}

}  // namespace skelex
