#include "graphik/kinematics.hpp"

#include "graphik/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace graphik {

double wrap_360(double deg) noexcept {
    double w = std::fmod(deg, 360.0);
    if (w < 0.0) w += 360.0;
    // fmod of a tiny negative number can round back up to exactly 360.
    if (w >= 360.0) w = 0.0;
    return w + 0.0;
}

double wrap_180(double deg) noexcept {
    double w = std::fmod(deg, 360.0);
    if (w <= -180.0) w += 360.0;
    if (w > 180.0) w -= 360.0;
    return w + 0.0;
}

double ManipulatorConfig::total_length() const noexcept {
    double sum = 0.0;
    for (const auto& j : joints) sum += j.length();
    return sum;
}

Transform dh_matrix(const DHJoint& joint, double theta_deg) {
    if (!std::isfinite(theta_deg) || !std::isfinite(joint.theta_off) || !std::isfinite(joint.a) ||
        !std::isfinite(joint.d) || !std::isfinite(joint.alpha)) {
        throw std::invalid_argument("dh_matrix: non-finite joint parameter or angle");
    }
    const double theta = deg_to_rad(theta_deg + joint.theta_off);
    const double alpha = deg_to_rad(joint.alpha);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double ca = std::cos(alpha), sa = std::sin(alpha);

    Transform m;
    m << ct, -st * ca,  st * sa, joint.a * ct,
         st,  ct * ca, -ct * sa, joint.a * st,
        0.0,       sa,       ca, joint.d,
        0.0,      0.0,      0.0, 1.0;
    return m;
}

FkResult forward_kinematics(const ManipulatorConfig& config, std::span<const double> theta_deg) {
    if (static_cast<int>(theta_deg.size()) != config.dof()) {
        std::ostringstream msg;
        msg << "forward_kinematics: expected " << config.dof() << " joint angles, got "
            << theta_deg.size();
        throw std::invalid_argument(msg.str());
    }
    FkResult out;
    out.frames.reserve(theta_deg.size());
    Transform t = Transform::Identity();
    for (std::size_t i = 0; i < theta_deg.size(); ++i) {
        t = t * dh_matrix(config.joints[i], theta_deg[i]);
        out.frames.push_back(t);
    }
    out.pose.position = t.block<3, 1>(0, 3);
    out.pose.orientation = euler_from_rotation(t.block<3, 3>(0, 0));
    return out;
}

Eigen::Vector3d euler_from_rotation(const Eigen::Matrix3d& r) {
    if (!r.allFinite()) throw std::invalid_argument("euler_from_rotation: non-finite matrix");
    const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
    if (ortho > 1e-6) {
        std::ostringstream msg;
        msg << "euler_from_rotation: matrix is not orthonormal (|R^T R - I|_F = " << ortho << ")";
        throw std::invalid_argument(msg.str());
    }

    double roll = 0.0, pitch = 0.0, yaw = 0.0;
    const double cos_pitch = std::hypot(r(0, 0), r(1, 0));
    if (cos_pitch > 1e-12) {
        pitch = std::atan2(-r(2, 0), cos_pitch);
        roll = std::atan2(r(2, 1), r(2, 2));
        yaw = std::atan2(r(1, 0), r(0, 0));
    } else if (r(2, 0) < 0.0) {
        // Theta = +90: R = Ry(90) Rx(Phi) with Psi = 0.
        pitch = std::numbers::pi / 2.0;
        roll = std::atan2(r(0, 1), r(1, 1));
    } else {
        // Theta = -90.
        pitch = -std::numbers::pi / 2.0;
        roll = std::atan2(-r(0, 1), r(1, 1));
    }
    return {wrap_180(rad_to_deg(roll)), wrap_180(rad_to_deg(pitch)), wrap_180(rad_to_deg(yaw))};
}

Eigen::Matrix3d rotation_from_euler(const Eigen::Vector3d& euler_deg) {
    const Eigen::AngleAxisd rx(deg_to_rad(euler_deg.x()), Eigen::Vector3d::UnitX());
    const Eigen::AngleAxisd ry(deg_to_rad(euler_deg.y()), Eigen::Vector3d::UnitY());
    const Eigen::AngleAxisd rz(deg_to_rad(euler_deg.z()), Eigen::Vector3d::UnitZ());
    return (rz * ry * rx).toRotationMatrix();
}

std::string to_string(CollisionVerdict verdict) {
    switch (verdict) {
        case CollisionVerdict::free: return "collision-free";
        case CollisionVerdict::ground: return "ground-collision";
        case CollisionVerdict::self: return "self-collision";
    }
    return "unknown";
}

double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                        const Eigen::Vector3d& q0, const Eigen::Vector3d& q1) {
    const Eigen::Vector3d d1 = p1 - p0;
    const Eigen::Vector3d d2 = q1 - q0;
    const Eigen::Vector3d r = p0 - q0;
    const double a = d1.squaredNorm();
    const double e = d2.squaredNorm();
    const double f = d2.dot(r);
    constexpr double eps = 1e-18;

    double s = 0.0, t = 0.0;
    if (a <= eps && e <= eps) return r.norm();
    if (a <= eps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= eps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

CollisionVerdict check_collision(const ManipulatorConfig& config, std::span<const Transform> frames) {
    const std::size_t links = std::min(frames.size(), config.joints.size());
    std::vector<Eigen::Vector3d> origins;
    origins.reserve(links + 1);
    origins.emplace_back(Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < links; ++i) origins.emplace_back(frames[i].block<3, 1>(0, 3));

    // Link k spans origins[k] -> origins[k + 1]; link 0 is the base column.
    for (std::size_t k = 1; k < links; ++k) {
        if (origins[k].z() < 0.0 || origins[k + 1].z() < 0.0) return CollisionVerdict::ground;
    }
    const double clearance = 2.0 * kLinkRadius;
    for (std::size_t i = 0; i < links; ++i) {
        for (std::size_t j = i + 2; j < links; ++j) {
            if (segment_distance(origins[i], origins[i + 1], origins[j], origins[j + 1]) < clearance) {
                return CollisionVerdict::self;
            }
        }
    }
    return CollisionVerdict::free;
}

void to_json(nlohmann::json& j, const DHJoint& joint) {
    j = nlohmann::json{{"theta_range", {joint.theta_min, joint.theta_max}},
                       {"theta_off", joint.theta_off},
                       {"a", joint.a},
                       {"d", joint.d},
                       {"alpha", joint.alpha}};
}

void from_json(const nlohmann::json& j, DHJoint& joint) {
    joint = DHJoint{};
    if (j.contains("theta_range")) {
        const auto& range = j.at("theta_range");
        if (!range.is_array() || range.size() != 2) {
            throw std::invalid_argument("theta_range must be a two-element array");
        }
        joint.theta_min = range[0].get<double>();
        joint.theta_max = range[1].get<double>();
    }
    joint.theta_off = j.value("theta_off", 0.0);
    joint.a = j.value("a", 0.0);
    joint.d = j.value("d", 0.0);
    joint.alpha = j.value("alpha", 0.0);
    if (joint.a < 0.0 || joint.d < 0.0) throw std::invalid_argument("DH lengths a, d must be >= 0");
}

void to_json(nlohmann::json& j, const ManipulatorConfig& config) {
    j = nlohmann::json{{"dof", config.dof()}, {"joints", config.joints}};
}

void from_json(const nlohmann::json& j, ManipulatorConfig& config) {
    config.joints = j.at("joints").get<std::vector<DHJoint>>();
    if (j.contains("dof") && j.at("dof").get<int>() != config.dof()) {
        throw std::invalid_argument("config: dof field disagrees with number of joints");
    }
    if (config.joints.empty()) throw std::invalid_argument("config: no joints");
}

ManipulatorConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    try {
        return nlohmann::json::parse(in).get<ManipulatorConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed config file " + path + ": " + e.what());
    }
}

void save_config(const ManipulatorConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file " + path);
    out << nlohmann::json(config).dump(2) << '\n';
}

}  // namespace graphik
