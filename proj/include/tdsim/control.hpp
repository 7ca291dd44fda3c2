#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "tdsim/graph.hpp"

namespace tdsim::ctl {

struct PidGains {
  double K1 = 0.0;  // rate gain
  double K2 = 0.0;  // angle gain
  double K3 = 0.0;  // integral gain
};

/// M = M0 + K1 w + K2 phi + K3 * integral(phi dt). The caller owns the
/// integrator state; it is advanced by phi*dt before the output is formed.
double pid_momentum(const PidGains& g, double& integrator, double phi, double omega, double M0,
                    double dt);

struct Wheel {
  double JF = 0.0;
  Vec3 axis = Vec3::UnitX();
  double Omega = 0.0;
};

/// H_gyro = sum JF * Omega * axis.
Vec3 wheel_momentum(const std::vector<Wheel>& wheels);

struct DesatConfig {
  double H_min = 0.0;      // switch-on threshold (N m s)
  double theta_min = 0.0;  // minimum angle between H and B (rad)
  double k_m = 0.0;        // gain (1/s)
};

/// Commanded magnetic dipole m = k_m (H x B)/|B|^2, or nothing when the loop
/// switches off (|H| < H_min or angle(H,B) < theta_min). The resulting torque
/// m x B equals -k_m * H_perp, the component of H perpendicular to B.
std::optional<Vec3> desaturation_dipole(const Vec3& H, const Vec3& B, const DesatConfig& cfg);

/// M = m x B.
Vec3 magnetic_torque(const Vec3& m, const Vec3& B);

// Scenario components.

/// Discrete PID: the integral accumulates once per major step.
std::unique_ptr<Component> pid(std::string id, const PidGains& gains, bool vec,
                               std::string phi_binding, std::string omega_binding,
                               std::optional<std::string> M0_binding = {});
std::unique_ptr<Component> wheel_momentum_component(std::string id, std::vector<double> JF,
                                                    std::vector<Vec3> axes,
                                                    std::vector<std::string> omega_bindings);
std::unique_ptr<Component> desat(std::string id, const DesatConfig& cfg, std::string H_binding,
                                 std::string B_binding);
std::unique_ptr<Component> magtorque(std::string id, std::string m_binding,
                                     std::string B_binding);
/// Engine torques u_i = -axis_i . T so that the wheel reactions sum to T.
std::unique_ptr<Component> wheel_alloc(std::string id, std::vector<Vec3> axes,
                                       std::string torque_binding);

}  // namespace tdsim::ctl
