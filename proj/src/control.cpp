#include "tdsim/control.hpp"

#include <cmath>

#include "tdsim/components.hpp"

namespace tdsim::ctl {

double pid_momentum(const PidGains& g, double& integrator, double phi, double omega, double M0,
                    double dt) {
  if (!(dt > 0)) throw ValidationError("pid: dt must be > 0");
  integrator += phi * dt;
  return M0 + g.K1 * omega + g.K2 * phi + g.K3 * integrator;
}

Vec3 wheel_momentum(const std::vector<Wheel>& wheels) {
  Vec3 h = Vec3::Zero();
  for (const Wheel& w : wheels) h += w.JF * w.Omega * w.axis;
  return h;
}

std::optional<Vec3> desaturation_dipole(const Vec3& H, const Vec3& B, const DesatConfig& cfg) {
  const double b = B.norm();
  if (b == 0.0) throw NumericError("desaturation: zero magnetic induction");
  const double h = H.norm();
  if (h < cfg.H_min) return std::nullopt;
  // angle(H, B) folded to [0, pi/2]: an anti-parallel B is just as useless
  const double c = h > 0 ? std::abs(H.dot(B)) / (h * b) : 1.0;
  if (std::acos(std::min(1.0, c)) < cfg.theta_min) return std::nullopt;
  return Vec3(cfg.k_m / (b * b) * H.cross(B));
}

Vec3 magnetic_torque(const Vec3& m, const Vec3& B) { return m.cross(B); }

namespace {

class PidComponent : public Component {
 public:
  PidComponent(std::string id, const PidGains& gains, bool vec, const std::string& phi_binding,
               const std::string& omega_binding, std::optional<std::string> M0_binding)
      : Component(std::move(id)), gains_(gains), vec_(vec), has_m0_(M0_binding.has_value()) {
    const ValueTag tag = vec ? ValueTag::Vec3 : ValueTag::Scalar;
    add_input("phi", tag, phi_binding, /*state_update=*/true);
    add_input("omega", tag, omega_binding, /*state_update=*/true);
    if (has_m0_) add_input("M0", tag, *M0_binding, /*state_update=*/true);
    add_output("M", tag);
    reset();
  }
  std::string_view kind() const override { return "ctl.pid"; }
  bool discrete() const override { return true; }
  void reset() override {
    integ_.setZero();
    held_.setZero();
  }
  void eval(EvalContext& ctx) override {
    if (vec_)
      ctx.out(0, Vec3(held_));
    else
      ctx.out(0, held_.x());
  }
  void update(EvalContext& ctx, double dt) override {
    Vec3 phi, omega, m0 = Vec3::Zero();
    if (vec_) {
      phi = ctx.in(0).as_vec3();
      omega = ctx.in(1).as_vec3();
      if (has_m0_) m0 = ctx.in(2).as_vec3();
    } else {
      phi = Vec3(ctx.in(0).as_scalar(), 0, 0);
      omega = Vec3(ctx.in(1).as_scalar(), 0, 0);
      if (has_m0_) m0.x() = ctx.in(2).as_scalar();
    }
    for (int i = 0; i < 3; ++i)
      held_[i] = pid_momentum(gains_, integ_[i], phi[i], omega[i], m0[i], dt);
  }

 private:
  PidGains gains_;
  bool vec_;
  bool has_m0_;
  Vec3 integ_ = Vec3::Zero();
  Vec3 held_ = Vec3::Zero();
};

}  // namespace

std::unique_ptr<Component> pid(std::string id, const PidGains& gains, bool vec,
                               std::string phi_binding, std::string omega_binding,
                               std::optional<std::string> M0_binding) {
  return std::make_unique<PidComponent>(std::move(id), gains, vec, phi_binding, omega_binding,
                                        std::move(M0_binding));
}

std::unique_ptr<Component> wheel_momentum_component(std::string id, std::vector<double> JF,
                                                    std::vector<Vec3> axes,
                                                    std::vector<std::string> omega_bindings) {
  const std::size_t n = JF.size();
  if (axes.size() != n || omega_bindings.size() != n)
    throw ValidationError("wheel momentum: JF/axes/bindings must have equal length");
  for (const Vec3& e : axes)
    if (std::abs(e.norm() - 1.0) > 1e-9)
      throw ValidationError("wheel momentum: axes must be unit vectors");
  auto c = std::make_unique<comp::FuncComponent>(
      std::move(id), "ctl.wheelmom", [JF, axes](EvalContext& ctx) {
        std::vector<Wheel> ws(JF.size());
        for (std::size_t i = 0; i < JF.size(); ++i)
          ws[i] = {JF[i], axes[i], ctx.in(i).as_scalar()};
        ctx.out(0, wheel_momentum(ws));
      });
  for (std::size_t i = 0; i < n; ++i)
    c->declare_input("Omega" + std::to_string(i + 1), ValueTag::Scalar, omega_bindings[i]);
  c->declare_output("H", ValueTag::Vec3);
  return c;
}

std::unique_ptr<Component> desat(std::string id, const DesatConfig& cfg, std::string H_binding,
                                 std::string B_binding) {
  if (cfg.H_min < 0 || cfg.theta_min < 0 || cfg.theta_min >= M_PI_2 || !(cfg.k_m > 0))
    throw ValidationError("desat: bad thresholds");
  auto c = std::make_unique<comp::FuncComponent>(std::move(id), "ctl.desat",
                                                 [cfg](EvalContext& ctx) {
        const auto m = desaturation_dipole(ctx.in(0).as_vec3(), ctx.in(1).as_vec3(), cfg);
        ctx.out(0, m.value_or(Vec3::Zero()));
        ctx.out(1, m ? 1.0 : 0.0);
      });
  c->declare_input("H", ValueTag::Vec3, H_binding);
  c->declare_input("B", ValueTag::Vec3, B_binding);
  c->declare_output("m", ValueTag::Vec3);
  c->declare_output("on", ValueTag::Scalar);
  return c;
}

std::unique_ptr<Component> magtorque(std::string id, std::string m_binding,
                                     std::string B_binding) {
  auto c = std::make_unique<comp::FuncComponent>(std::move(id), "ctl.magtorque",
                                                 [](EvalContext& ctx) {
        ctx.out(0, magnetic_torque(ctx.in(0).as_vec3(), ctx.in(1).as_vec3()));
      });
  c->declare_input("m", ValueTag::Vec3, m_binding);
  c->declare_input("B", ValueTag::Vec3, B_binding);
  c->declare_output("M", ValueTag::Vec3);
  return c;
}

std::unique_ptr<Component> wheel_alloc(std::string id, std::vector<Vec3> axes,
                                       std::string torque_binding) {
  auto c = std::make_unique<comp::FuncComponent>(std::move(id), "ctl.wheel_alloc",
                                                 [axes](EvalContext& ctx) {
        const Vec3& T = ctx.in(0).as_vec3();
        for (std::size_t i = 0; i < axes.size(); ++i) ctx.out(i, -axes[i].dot(T));
      });
  c->declare_input("T", ValueTag::Vec3, torque_binding);
  for (std::size_t i = 0; i < axes.size(); ++i)
    c->declare_output("u" + std::to_string(i + 1), ValueTag::Scalar);
  return c;
}

}  // namespace tdsim::ctl
