#pragma once

#include <memory>
#include <string>

#include "tdsim/graph.hpp"

namespace tdsim::env {

// Default constants, overridable in every scenario.
inline constexpr double kEarthMu = 3.986004418e14;      // m^3/s^2
inline constexpr double kEarthRadius = 6.371e6;         // m
inline constexpr double kEquatorB0 = 3.12e-5;           // T
inline constexpr double kEarthSpin = 7.2921159e-5;      // rad/s
inline constexpr double kRho400 = 3.8e-12;              // kg/m^3 at 400 km
inline constexpr double kAtmScaleHeight = 59e3;         // m
inline constexpr double kAtmRefAltitude = 400e3;        // m

struct GravityModel {
  double mu = kEarthMu;
};

/// g = -mu r / |r|^3; singular at r = 0.
Vec3 gravity(const GravityModel& model, const Vec3& r);

struct DipoleField {
  double B0 = kEquatorB0;
  double R_ref = kEarthRadius;
  Vec3 axis = Vec3::UnitZ();
};

/// B = (B0 R_ref^3/|r|^3) (3 (m.rhat) rhat - m).
Vec3 dipole_B(const DipoleField& field, const Vec3& r);

struct Atmosphere {
  double rho0 = kRho400;
  double h0 = kAtmRefAltitude;
  double H = kAtmScaleHeight;
};

/// rho = rho0 exp(-(h - h0)/H).
double density(const Atmosphere& atm, double h);

/// a = -1/2 rho (CdA/m) |v| v; free-molecular closure over the visible area.
Vec3 drag_accel(double rho, const Vec3& v, double CdA_over_m);

struct EarthRotation {
  double omega_e = kEarthSpin;
};

/// Earth-fixed frame pose at time t: rotation omega_e t about world z.
LocalPose greenwich_pose(const EarthRotation& rot, double t);

// Scenario components.
std::unique_ptr<Component> gravity_field(std::string id, const GravityModel& model,
                                         std::string host, bool covariant = true);
std::unique_ptr<Component> dipole_field_component(std::string id, const DipoleField& field,
                                                  std::string host, bool covariant = true);
/// Outputs the local density at a frame's position; altitude measured from
/// the host frame origin minus R_earth.
std::unique_ptr<Component> atmosphere_sensor(std::string id, const Atmosphere& atm,
                                             double R_earth, std::string frame_id,
                                             std::string host = "world");
std::unique_ptr<Component> drag(std::string id, double CdA_over_m, std::string rho_binding,
                                std::string v_binding);

}  // namespace tdsim::env
