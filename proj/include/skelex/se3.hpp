#pragma once

// se3.hpp - rigid-body poses and the 6D embedding used throughout skelex.
//
// A pose is a position plus a unit quaternion. Trajectory statistics are
// computed on the embedding f(T) = <p, log(R)> in R^6: translation copied
// verbatim, rotation replaced by its axis-angle log vector with angle in
// [0, pi]. The quaternion double cover is resolved by forcing w >= 0
// before taking the log.

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace skelex {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Quat = Eigen::Quaterniond;

struct Pose {
    Vec3 position{Vec3::Zero()};
    Quat rotation{Quat::Identity()};  // (w, x, y, z)

    static Pose identity() { return Pose{}; }
};

/// True when the position is finite and the quaternion norm is within 1e-6 of 1.
bool pose_valid(const Pose& p);

/// Axis-angle log vector of a unit quaternion, shortest arc (|angle| <= pi).
Vec3 quat_log(const Quat& q);

/// Inverse of quat_log.
Quat quat_exp(const Vec3& w);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// b expressed in the frame of a, i.e. a^-1 * b.
Pose relative(const Pose& a, const Pose& b);

Vec6 pose_to_vec6(const Pose& p);
Pose vec6_to_pose(const Vec6& v);

/// Angle of the relative rotation between two quaternions, in [0, pi].
double rotation_distance(const Quat& a, const Quat& b);

}  // namespace skelex
