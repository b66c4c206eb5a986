#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace graphik {

using Transform = Eigen::Matrix4d;

// The single degree/radian choke point. Angles are degrees everywhere outside
// trigonometric evaluation.
constexpr double deg_to_rad(double deg) noexcept { return deg * (std::numbers::pi / 180.0); }
constexpr double rad_to_deg(double rad) noexcept { return rad * (180.0 / std::numbers::pi); }

/// Wrap an angle in degrees into [0, 360).
double wrap_360(double deg) noexcept;
/// Wrap an angle in degrees into (-180, 180].
double wrap_180(double deg) noexcept;

/// One Denavit-Hartenberg row. Lengths in cm, angles in degrees.
struct DHJoint {
    double theta_off = 0.0;
    double a = 0.0;
    double d = 0.0;
    double alpha = 0.0;
    double theta_min = 0.0;
    double theta_max = 360.0;

    /// Translational magnitude of the link; at most one of a, d is nonzero
    /// in the generated families.
    [[nodiscard]] double length() const noexcept { return a + d; }

    friend bool operator==(const DHJoint&, const DHJoint&) = default;
};

struct ManipulatorConfig {
    std::vector<DHJoint> joints;

    [[nodiscard]] int dof() const noexcept { return static_cast<int>(joints.size()); }
    /// Sum of a_i + d_i over the chain; upper bound on end-effector reach.
    [[nodiscard]] double total_length() const noexcept;

    friend bool operator==(const ManipulatorConfig&, const ManipulatorConfig&) = default;
};

struct Pose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();     ///< x, y, z in cm
    Eigen::Vector3d orientation = Eigen::Vector3d::Zero();  ///< Phi, Theta, Psi in degrees

    [[nodiscard]] std::array<double, 6> as_array() const noexcept {
        return {position.x(), position.y(), position.z(),
                orientation.x(), orientation.y(), orientation.z()};
    }
};

struct FkResult {
    Pose pose;
    /// Cumulative frames T_0^i for i = 1..dof; the last one is the end effector.
    std::vector<Transform> frames;
};

/// Standard DH transform Rot_z(theta + theta_off) Trans_z(d) Trans_x(a) Rot_x(alpha).
Transform dh_matrix(const DHJoint& joint, double theta_deg);

/// End-effector pose and cumulative joint frames for joint angles in degrees.
FkResult forward_kinematics(const ManipulatorConfig& config, std::span<const double> theta_deg);

// Euler convention: extrinsic X-Y-Z (roll, pitch, yaw), i.e.
// R = Rot_z(Psi) * Rot_y(Theta) * Rot_x(Phi). At |Theta| = 90 the yaw is
// pinned to 0 and the whole rotation about the vertical goes into Phi.

/// Roll/pitch/yaw in degrees, each in (-180, 180]. Throws std::invalid_argument
/// if R is not orthonormal within 1e-6 (Frobenius norm of R^T R - I).
Eigen::Vector3d euler_from_rotation(const Eigen::Matrix3d& rotation);
Eigen::Matrix3d rotation_from_euler(const Eigen::Vector3d& euler_deg);

enum class CollisionVerdict { free, ground, self };

std::string to_string(CollisionVerdict verdict);

/// Link capsule radius in cm.
inline constexpr double kLinkRadius = 2.0;

/// Closest distance between segments [p0, p1] and [q0, q1].
double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                        const Eigen::Vector3d& q0, const Eigen::Vector3d& q1);

/// Links are capsules around the segments between consecutive joint origins,
/// starting at the world origin. The base column is exempt from the ground
/// test; adjacent links never collide with each other.
CollisionVerdict check_collision(const ManipulatorConfig& config, std::span<const Transform> frames);

void to_json(nlohmann::json& j, const DHJoint& joint);
void from_json(const nlohmann::json& j, DHJoint& joint);
void to_json(nlohmann::json& j, const ManipulatorConfig& config);
void from_json(const nlohmann::json& j, ManipulatorConfig& config);

ManipulatorConfig load_config(const std::string& path);
void save_config(const ManipulatorConfig& config, const std::string& path);

}  // namespace graphik
