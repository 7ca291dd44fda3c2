#include "tdsim/environment.hpp"

#include <cmath>

#include "tdsim/components.hpp"

namespace tdsim::env {

Vec3 gravity(const GravityModel& model, const Vec3& r) {
  const double n = r.norm();
  if (n == 0.0) throw NumericError("gravity evaluated at the center singularity");
  return (-model.mu / (n * n * n)) * r;
}

Vec3 dipole_B(const DipoleField& field, const Vec3& r) {
  const double n = r.norm();
  if (n == 0.0) throw NumericError("dipole field evaluated at the center singularity");
  const Vec3 rhat = r / n;
  const double scale = field.B0 * std::pow(field.R_ref / n, 3);
  return scale * (3.0 * field.axis.dot(rhat) * rhat - field.axis);
}

double density(const Atmosphere& atm, double h) {
  return atm.rho0 * std::exp(-(h - atm.h0) / atm.H);
}

Vec3 drag_accel(double rho, const Vec3& v, double CdA_over_m) {
  if (CdA_over_m < 0) throw ValidationError("drag: CdA/m must be >= 0");
  return -0.5 * rho * CdA_over_m * v.norm() * v;
}

LocalPose greenwich_pose(const EarthRotation& rot, double t) {
  LocalPose p;
  p.q = Quat(Eigen::AngleAxisd(rot.omega_e * t, Vec3::UnitZ()));
  p.w = Vec3(0, 0, rot.omega_e);
  return p;
}

std::unique_ptr<Component> gravity_field(std::string id, const GravityModel& model,
                                         std::string host, bool covariant) {
  std::string fid = id;
  auto c = std::make_unique<comp::FuncComponent>(
      std::move(id), "env.gravity", [fid, model, host, covariant](EvalContext& ctx) {
        VectorField f;
        f.host_frame = host;
        f.covariant = covariant;
        f.eval_local = [model](const Vec3& rho) { return gravity(model, rho); };
        ctx.provide_field(fid, std::move(f));
      });
  if (host != "world") c->declare_order_dep(host);
  return c;
}

std::unique_ptr<Component> dipole_field_component(std::string id, const DipoleField& field,
                                                  std::string host, bool covariant) {
  if (std::abs(field.axis.norm() - 1.0) > 1e-9)
    throw ValidationError("dipole: axis must be a unit vector");
  if (!(field.B0 > 0)) throw ValidationError("dipole: B0 must be > 0");
  std::string fid = id;
  auto c = std::make_unique<comp::FuncComponent>(
      std::move(id), "env.dipole", [fid, field, host, covariant](EvalContext& ctx) {
        VectorField f;
        f.host_frame = host;
        f.covariant = covariant;
        f.eval_local = [field](const Vec3& rho) { return dipole_B(field, rho); };
        ctx.provide_field(fid, std::move(f));
      });
  if (host != "world") c->declare_order_dep(host);
  return c;
}

std::unique_ptr<Component> atmosphere_sensor(std::string id, const Atmosphere& atm,
                                             double R_earth, std::string frame_id,
                                             std::string host) {
  auto c = std::make_unique<comp::FuncComponent>(
      std::move(id), "env.atmosphere", [atm, R_earth, frame_id, host](EvalContext& ctx) {
        const Vec3 pos = ctx.frames().world_pose(frame_id).r;
        const Vec3 center = ctx.frames().world_pose(host).r;
        ctx.out(0, density(atm, (pos - center).norm() - R_earth));
      });
  c->declare_output("rho", ValueTag::Scalar);
  if (frame_id != "world") c->declare_order_dep(frame_id);
  if (host != "world") c->declare_order_dep(host);
  return c;
}

std::unique_ptr<Component> drag(std::string id, double CdA_over_m, std::string rho_binding,
                                std::string v_binding) {
  if (CdA_over_m < 0) throw ValidationError("drag: CdA/m must be >= 0");
  auto c = std::make_unique<comp::FuncComponent>(
      std::move(id), "env.drag", [CdA_over_m](EvalContext& ctx) {
        ctx.out(0, drag_accel(ctx.in(0).as_scalar(), ctx.in(1).as_vec3(), CdA_over_m));
      });
  c->declare_input("rho", ValueTag::Scalar, rho_binding);
  c->declare_input("v", ValueTag::Vec3, v_binding);
  c->declare_output("a", ValueTag::Vec3);
  return c;
}

}  // namespace tdsim::env
