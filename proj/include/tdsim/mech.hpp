#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdsim/graph.hpp"

namespace tdsim::mech {

/// Attachment pose on a module, in module axes.
struct Place {
  Vec3 rho = Vec3::Zero();
  Quat q = Quat::Identity();
};

/// One damped harmonic of an elastic console: A q'' + eps q' + c q = Q with
/// Q the participation-weighted connection load. phi_t/phi_r couple the mode
/// to connection force/moment and displace the connection point.
struct Harmonic {
  double A = 1.0;
  double eps = 0.0;
  double c = 0.0;
  Vec3 phi_t = Vec3::Zero();
  Vec3 phi_r = Vec3::Zero();
  double q0 = 0.0;
  double qd0 = 0.0;
};

struct WheelSpec {
  double JF = 0.0;
  Vec3 axis = Vec3::UnitX();
  double Omega0 = 0.0;
};

enum class ModuleType { Rigid, Console, Flywheel };

/// Mechanical building block. J is the full inertia about the origin (= CoM)
/// in module axes, wheel axial inertia included for flywheel modules.
struct ModuleSpec {
  std::string name;
  ModuleType type = ModuleType::Rigid;
  double m = 1.0;
  Mat3 J = Mat3::Identity();
  std::vector<Place> places;
  std::vector<Harmonic> harmonics;  // console only
  WheelSpec wheel;                  // flywheel only

  int dof() const {
    if (type == ModuleType::Console) return static_cast<int>(harmonics.size());
    return type == ModuleType::Flywheel ? 1 : 0;
  }
};

struct LinkSpec {
  int module_a = 0;
  int place_a = 0;
  int module_b = 0;
  int place_b = 0;
};

/// Tree of modules joined at places. Module 0 is the root; every other
/// module's initial pose is derived by walking the links so that linked
/// places coincide (using the translational modal displacement of consoles).
struct AggregateSpec {
  std::vector<ModuleSpec> modules;
  std::vector<LinkSpec> links;
  Vec3 r0 = Vec3::Zero();
  Quat q0 = Quat::Identity();
  Vec3 v0 = Vec3::Zero();
  Vec3 w0 = Vec3::Zero();
};

/// Kinematic state of one module: world position/velocity, module-to-world
/// quaternion, world angular velocity, generalized coordinates and rates.
struct ModuleState {
  Vec3 r = Vec3::Zero();
  Quat q = Quat::Identity();
  VecX qgen;
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
  VecX qdot;
};

/// World-axis loads applied to a module from outside the aggregate.
struct ModuleExternal {
  Vec3 accel = Vec3::Zero();   // uniform acceleration (gravity and the like)
  Vec3 force = Vec3::Zero();   // at the CoM
  Vec3 torque = Vec3::Zero();  // about the CoM
  double wheel_torque = 0.0;   // flywheel engine torque
};

/// Acceleration-level coefficient forms of one module, all in world axes.
/// Connection-place kinematics, per place i:
///   a_place[i]     = bias_lin[i] + P_lin[i]*Vdot + Q_lin[i]*wdot + R_lin[i]*qddot
///   alpha_place[i] = bias_ang[i] + P_ang[i]*Vdot + Q_ang[i]*wdot + R_ang[i]*qddot
/// Module dynamics under connection loads (F_i, M_i):
///   Vdot  = a_v + sum_i (D_v[i] F_i + E_v[i] M_i)
///   wdot  = a_w + sum_i (D_w[i] F_i + E_w[i] M_i)
///   qddot = a_q + sum_i (K[i] F_i + L[i] M_i)
struct ModuleCoefficients {
  std::vector<Vec3> bias_lin, bias_ang;
  std::vector<Mat3> P_lin, Q_lin, P_ang, Q_ang;
  std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> R_lin, R_ang;
  Vec3 a_v = Vec3::Zero();
  Vec3 a_w = Vec3::Zero();
  VecX a_q;
  std::vector<Mat3> D_v, E_v, D_w, E_w;
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> K, L;
};

ModuleCoefficients module_coefficients(const ModuleSpec& spec, const ModuleState& state,
                                       const ModuleExternal& ext);

/// Load on side A of a link, exerted by side B, in world axes; side B
/// receives the opposite load by construction.
struct LinkLoad {
  Vec3 F = Vec3::Zero();
  Vec3 M = Vec3::Zero();
};

struct SolveResult {
  std::vector<Vec3> vdot, wdot;
  std::vector<VecX> qddot;
  std::vector<LinkLoad> loads;
};

/// Assembled aggregate: validates the spec, owns the state layout, solves the
/// linear-in-accelerations system each derivative call.
class Aggregate {
 public:
  explicit Aggregate(AggregateSpec spec);

  const AggregateSpec& spec() const { return spec_; }
  int module_count() const { return static_cast<int>(spec_.modules.size()); }
  int state_size() const { return state_size_; }
  int module_state_offset(int module) const { return offsets_[module]; }

  void initial_state(std::span<double> x) const;
  ModuleState unpack_module(std::span<const double> x, int module) const;
  std::vector<ModuleState> unpack(std::span<const double> x) const;
  void pack_module(const ModuleState& s, std::span<double> x, int module) const;

  // Eigen-vector conveniences over the span interface.
  VecX initial_state() const {
    VecX x = VecX::Zero(state_size_);
    initial_state(std::span<double>(x.data(), static_cast<std::size_t>(x.size())));
    return x;
  }
  ModuleState unpack_module(const VecX& x, int module) const {
    return unpack_module(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                         module);
  }
  std::vector<ModuleState> unpack(const VecX& x) const {
    return unpack(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }
  VecX derivative(const VecX& x, const std::vector<ModuleExternal>& ext) const {
    VecX dx = VecX::Zero(state_size_);
    derivative(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), ext,
               std::span<double>(dx.data(), static_cast<std::size_t>(dx.size())));
    return dx;
  }
  void normalize_quaternions(VecX& x) const {
    normalize_quaternions(std::span<double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  /// Module accelerations and link loads for the given states and external
  /// loads. Throws NumericError("inconsistent aggregate ...") on a singular
  /// system.
  SolveResult assemble_and_solve(const std::vector<ModuleState>& states,
                                 const std::vector<ModuleExternal>& ext) const;

  void derivative(std::span<const double> x, const std::vector<ModuleExternal>& ext,
                  std::span<double> dx) const;
  void normalize_quaternions(std::span<double> x) const;

  Vec3 linear_momentum(const std::vector<ModuleState>& states) const;
  /// About the world origin; includes flywheel relative spin.
  Vec3 angular_momentum(const std::vector<ModuleState>& states) const;
  /// Kinetic plus modal strain energy.
  double energy(const std::vector<ModuleState>& states) const;

 private:
  AggregateSpec spec_;
  std::vector<int> offsets_;       // state offset per module
  std::vector<int> unknown_off_;   // acceleration-unknown offset per module
  std::vector<Mat3> J_inv_;        // module axes
  std::vector<Mat3> J_eff_inv_;    // flywheel carrier inertia inverse
  int state_size_ = 0;
  int unknowns_ = 0;
  mutable MatX A_;
  mutable VecX b_;
};

/// Port bindings of the aggregate component; keys are module names.
struct AggregateBindings {
  std::optional<std::string> accel;
  std::map<std::string, std::string> force;
  std::map<std::string, std::string> torque;
  std::map<std::string, std::string> wheel_torque;
};

/// Graph component wrapping an Aggregate. Outputs per module: r/q/v/w plus
/// the attitude rotation vector phi; flywheels add Omega, consoles add their
/// modal coordinates and rates. Registers each module as frame "<id>/<name>".
std::unique_ptr<Component> aggregate_component(std::string id, AggregateSpec spec,
                                               AggregateBindings bindings = {});

}  // namespace tdsim::mech
