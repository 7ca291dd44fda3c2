#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>

#include "tdsim/graph.hpp"
#include "tdsim/series.hpp"

namespace tdsim::comp {

/// Stateless component defined by a plain function over the context.
/// Most of the component vocabulary is built from these.
class FuncComponent : public Component {
 public:
  using Fn = std::function<void(EvalContext&)>;
  FuncComponent(std::string id, std::string kind, Fn fn)
      : Component(std::move(id)), kind_(std::move(kind)), fn_(std::move(fn)) {}

  void declare_input(const std::string& name, ValueTag tag, const std::string& binding) {
    add_input(name, tag, binding);
  }
  void declare_output(const std::string& name, ValueTag tag) { add_output(name, tag); }
  void declare_order_dep(const std::string& id) { add_order_dep(id); }
  void set_provided_frames(std::vector<std::string> f) { frames_ = std::move(f); }

  std::string_view kind() const override { return kind_; }
  std::vector<std::string> provided_frames() const override { return frames_; }
  void eval(EvalContext& ctx) override { fn_(ctx); }

 private:
  std::string kind_;
  Fn fn_;
  std::vector<std::string> frames_;
};

// --- arithmetic -------------------------------------------------------------

std::unique_ptr<Component> constant(std::string id, Value v);
std::unique_ptr<Component> sum(std::string id, std::vector<std::string> bindings,
                               bool vec = false);
std::unique_ptr<Component> gain(std::string id, double k, std::string in, bool vec = false);
std::unique_ptr<Component> product(std::string id, std::vector<std::string> bindings);
std::unique_ptr<Component> vec3_pack(std::string id, std::string x, std::string y, std::string z);
std::unique_ptr<Component> vec3_unpack(std::string id, std::string in);
std::unique_ptr<Component> vec3_cross(std::string id, std::string a, std::string b);
std::unique_ptr<Component> vec3_dot(std::string id, std::string a, std::string b);
std::unique_ptr<Component> vec3_norm(std::string id, std::string in);
std::unique_ptr<Component> vec3_scale(std::string id, std::string in, std::string k);

// --- signals & plants -------------------------------------------------------

/// x' = dot; scalar or 3-vector depending on x0.
std::unique_ptr<Component> integrator(std::string id, Value x0, std::string dot_binding);
/// Linear interpolation into a recorded series; queries outside the recorded
/// span abort the run.
std::unique_ptr<Component> playback(std::string id, std::shared_ptr<const SeriesTable> table,
                                    std::string channel);
/// C * sin(a t + b t^2); instantaneous frequency a + 2 b t.
std::unique_ptr<Component> chirp_source(std::string id, double amplitude, double a, double b);
/// (num2 s^2 + num1 s + num0) / (den2 s^2 + den1 s + den0), den2 != 0.
std::unique_ptr<Component> biquad(std::string id, std::array<double, 3> num,
                                  std::array<double, 3> den, std::string u_binding);

// --- frames, fields, sensing -----------------------------------------------

struct FrameInputs {
  std::optional<std::string> r, q, v, w;
};

/// Reference frame with static pose parameters, any of which can instead be
/// driven by bound ports. Outputs its resolved world pose.
std::unique_ptr<Component> frame(std::string id, std::string parent, LocalPose pose,
                                 FrameInputs inputs = {});
/// Earth-fixed frame: rotation omega_e * t about world z.
std::unique_ptr<Component> greenwich_frame(std::string id, double omega_e);

/// Point-charge field E = k rho / |rho|^3 attached to a host frame.
std::unique_ptr<Component> electrostatic_field_component(std::string id, double k,
                                                         std::string host, bool covariant);
/// Field whose current vector (in host axes) is supplied by a bound port;
/// the building block for splitting field math across expression components.
std::unique_ptr<Component> input_field(std::string id, std::string host, bool covariant,
                                       std::string v_binding);
/// Samples a field with a frame; covariant fields land in sensor axes.
std::unique_ptr<Component> sensor(std::string id, std::string field_id, std::string frame_id);
/// Relative kinematics of frame b observed from frame a.
std::unique_ptr<Component> relative_component(std::string id, std::string frame_a,
                                              std::string frame_b);
/// Point mass: r' = v, v' = accel_gain * E with E a bound field sample.
std::unique_ptr<Component> ball(std::string id, double accel_gain, const Vec3& r0, const Vec3& v0,
                                std::string field_binding);

}  // namespace tdsim::comp
