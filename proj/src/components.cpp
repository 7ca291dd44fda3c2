#include "tdsim/components.hpp"

#include <cmath>

namespace tdsim::comp {

namespace {

Value scale_value(const Value& v, double k) {
  if (v.tag() == ValueTag::Vec3) return Value(Vec3(k * v.as_vec3()));
  return Value(k * v.as_scalar());
}

Value add_values(const Value& a, const Value& b) {
  if (a.tag() == ValueTag::Vec3) return Value(Vec3(a.as_vec3() + b.as_vec3()));
  return Value(a.as_scalar() + b.as_scalar());
}

}  // namespace

std::unique_ptr<Component> constant(std::string id, Value v) {
  auto c = std::make_unique<FuncComponent>(std::move(id), "const",
                                           [v](EvalContext& ctx) { ctx.out(0, v); });
  c->declare_output("out", v.tag());
  return c;
}

std::unique_ptr<Component> sum(std::string id, std::vector<std::string> bindings, bool vec) {
  auto c = std::make_unique<FuncComponent>(std::move(id), "sum", [vec](EvalContext& ctx) {
    Value acc = vec ? Value(Vec3(Vec3::Zero())) : Value(0.0);
    for (std::size_t i = 0; i < ctx.input_count(); ++i) acc = add_values(acc, ctx.in(i));
    ctx.out(0, acc);
  });
  const ValueTag tag = vec ? ValueTag::Vec3 : ValueTag::Scalar;
  for (std::size_t i = 0; i < bindings.size(); ++i)
    c->declare_input("in" + std::to_string(i + 1), tag, bindings[i]);
  c->declare_output("out", tag);
  return c;
}

std::unique_ptr<Component> gain(std::string id, double k, std::string in, bool vec) {
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "gain", [k](EvalContext& ctx) { ctx.out(0, scale_value(ctx.in(0), k)); });
  const ValueTag tag = vec ? ValueTag::Vec3 : ValueTag::Scalar;
  c->declare_input("in", tag, in);
  c->declare_output("out", tag);
  return c;
}

std::unique_ptr<Component> product(std::string id, std::vector<std::string> bindings) {
  auto c = std::make_unique<FuncComponent>(std::move(id), "product", [](EvalContext& ctx) {
    double acc = 1.0;
    for (std::size_t i = 0; i < ctx.input_count(); ++i) acc *= ctx.in(i).as_scalar();
    ctx.out(0, acc);
  });
  for (std::size_t i = 0; i < bindings.size(); ++i)
    c->declare_input("in" + std::to_string(i + 1), ValueTag::Scalar, bindings[i]);
  c->declare_output("out", ValueTag::Scalar);
  return c;
}

std::unique_ptr<Component> vec3_pack(std::string id, std::string x, std::string y, std::string z) {
  auto c = std::make_unique<FuncComponent>(std::move(id), "vec3.pack", [](EvalContext& ctx) {
    ctx.out(0, Vec3(ctx.in(0).as_scalar(), ctx.in(1).as_scalar(), ctx.in(2).as_scalar()));
  });
  c->declare_input("x", ValueTag::Scalar, x);
  c->declare_input("y", ValueTag::Scalar, y);
  c->declare_input("z", ValueTag::Scalar, z);
  c->declare_output("out", ValueTag::Vec3);
  return c;
}

std::unique_ptr<Component> vec3_unpack(std::string id, std::string in) {
  auto c = std::make_unique<FuncComponent>(std::move(id), "vec3.unpack", [](EvalContext& ctx) {
    const Vec3& v = ctx.in(0).as_vec3();
    ctx.out(0, v.x());
    ctx.out(1, v.y());
    ctx.out(2, v.z());
  });
  c->declare_input("in", ValueTag::Vec3, in);
  c->declare_output("x", ValueTag::Scalar);
  c->declare_output("y", ValueTag::Scalar);
  c->declare_output("z", ValueTag::Scalar);
  return c;
}

std::unique_ptr<Component> vec3_cross(std::string id, std::string a, std::string b) {
  auto c = std::make_unique<FuncComponent>(std::move(id), "vec3.cross", [](EvalContext& ctx) {
    ctx.out(0, Vec3(ctx.in(0).as_vec3().cross(ctx.in(1).as_vec3())));
  });
  c->declare_input("a", ValueTag::Vec3, a);
  c->declare_input("b", ValueTag::Vec3, b);
  c->declare_output("out", ValueTag::Vec3);
  return c;
}

std::unique_ptr<Component> vec3_dot(std::string id, std::string a, std::string b) {
  auto c = std::make_unique<FuncComponent>(std::move(id), "vec3.dot", [](EvalContext& ctx) {
    ctx.out(0, ctx.in(0).as_vec3().dot(ctx.in(1).as_vec3()));
  });
  c->declare_input("a", ValueTag::Vec3, a);
  c->declare_input("b", ValueTag::Vec3, b);
  c->declare_output("out", ValueTag::Scalar);
  return c;
}

std::unique_ptr<Component> vec3_norm(std::string id, std::string in) {
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "vec3.norm", [](EvalContext& ctx) { ctx.out(0, ctx.in(0).as_vec3().norm()); });
  c->declare_input("in", ValueTag::Vec3, in);
  c->declare_output("out", ValueTag::Scalar);
  return c;
}

std::unique_ptr<Component> vec3_scale(std::string id, std::string in, std::string k) {
  auto c = std::make_unique<FuncComponent>(std::move(id), "vec3.scale", [](EvalContext& ctx) {
    ctx.out(0, Vec3(ctx.in(1).as_scalar() * ctx.in(0).as_vec3()));
  });
  c->declare_input("in", ValueTag::Vec3, in);
  c->declare_input("k", ValueTag::Scalar, k);
  c->declare_output("out", ValueTag::Vec3);
  return c;
}

namespace {

class IntegratorComponent : public Component {
 public:
  IntegratorComponent(std::string id, Value x0, const std::string& dot_binding)
      : Component(std::move(id)), x0_(std::move(x0)) {
    if (x0_.tag() != ValueTag::Scalar && x0_.tag() != ValueTag::Vec3)
      throw ValidationError("integrator: x0 must be scalar or 3-vector");
    add_input("dot", x0_.tag(), dot_binding, /*state_update=*/true);
    add_output("x", x0_.tag());
  }
  std::string_view kind() const override { return "integrator"; }
  int state_size() const override { return x0_.tag() == ValueTag::Vec3 ? 3 : 1; }
  void init_state(std::span<double> x) const override {
    if (x0_.tag() == ValueTag::Vec3) {
      const Vec3& v = x0_.as_vec3();
      x[0] = v.x();
      x[1] = v.y();
      x[2] = v.z();
    } else {
      x[0] = x0_.as_scalar();
    }
  }
  void eval(EvalContext& ctx) override {
    auto s = ctx.state();
    if (x0_.tag() == ValueTag::Vec3)
      ctx.out(0, Vec3(s[0], s[1], s[2]));
    else
      ctx.out(0, s[0]);
  }
  void derivative(EvalContext& ctx, std::span<double> dx) override {
    const Value& d = ctx.in(0);
    if (x0_.tag() == ValueTag::Vec3) {
      const Vec3& v = d.as_vec3();
      dx[0] = v.x();
      dx[1] = v.y();
      dx[2] = v.z();
    } else {
      dx[0] = d.as_scalar();
    }
  }

 private:
  Value x0_;
};

class BiquadComponent : public Component {
 public:
  BiquadComponent(std::string id, std::array<double, 3> num, std::array<double, 3> den,
                  const std::string& u_binding)
      : Component(std::move(id)), num_(num), den_(den) {
    if (den_[2] == 0.0) throw ValidationError("biquad: den s^2 coefficient must be nonzero");
    add_input("u", ValueTag::Scalar, u_binding);  // direct: y has feedthrough
    add_output("y", ValueTag::Scalar);
  }
  std::string_view kind() const override { return "biquad"; }
  int state_size() const override { return 2; }
  void eval(EvalContext& ctx) override {
    const double u = ctx.in(0).as_scalar();
    auto s = ctx.state();
    const double xdd = (u - den_[1] * s[1] - den_[0] * s[0]) / den_[2];
    ctx.out(0, num_[2] * xdd + num_[1] * s[1] + num_[0] * s[0]);
  }
  void derivative(EvalContext& ctx, std::span<double> dx) override {
    const double u = ctx.in(0).as_scalar();
    auto s = ctx.state();
    dx[0] = s[1];
    dx[1] = (u - den_[1] * s[1] - den_[0] * s[0]) / den_[2];
  }

 private:
  std::array<double, 3> num_, den_;  // index = s power
};

class BallComponent : public Component {
 public:
  BallComponent(std::string id, double accel_gain, const Vec3& r0, const Vec3& v0,
                const std::string& field_binding)
      : Component(std::move(id)), a_(accel_gain), r0_(r0), v0_(v0) {
    add_input("E", ValueTag::Vec3, field_binding, /*state_update=*/true);
    add_output("r", ValueTag::Vec3);
    add_output("v", ValueTag::Vec3);
  }
  std::string_view kind() const override { return "ball"; }
  int state_size() const override { return 6; }
  void init_state(std::span<double> x) const override {
    Eigen::Map<Vec3>(x.data()) = r0_;
    Eigen::Map<Vec3>(x.data() + 3) = v0_;
  }
  void eval(EvalContext& ctx) override {
    auto s = ctx.state();
    ctx.out(0, Vec3(s[0], s[1], s[2]));
    ctx.out(1, Vec3(s[3], s[4], s[5]));
  }
  void derivative(EvalContext& ctx, std::span<double> dx) override {
    auto s = ctx.state();
    const Vec3& field = ctx.in(0).as_vec3();
    Eigen::Map<Vec3>(dx.data()) = Vec3(s[3], s[4], s[5]);
    Eigen::Map<Vec3>(dx.data() + 3) = a_ * field;
  }

 private:
  double a_;
  Vec3 r0_, v0_;
};

}  // namespace

std::unique_ptr<Component> integrator(std::string id, Value x0, std::string dot_binding) {
  return std::make_unique<IntegratorComponent>(std::move(id), std::move(x0), dot_binding);
}

std::unique_ptr<Component> playback(std::string id, std::shared_ptr<const SeriesTable> table,
                                    std::string channel) {
  if (!table) throw ValidationError("playback: missing table");
  if (!table->has_channel(channel))
    throw ValidationError("playback: unknown channel '" + channel + "'");
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "series.playback",
      [table, channel](EvalContext& ctx) { ctx.out(0, table->playback(channel, ctx.t())); });
  c->declare_output("y", ValueTag::Scalar);
  return c;
}

std::unique_ptr<Component> chirp_source(std::string id, double amplitude, double a, double b) {
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "sysid.chirp", [amplitude, a, b](EvalContext& ctx) {
        const double t = ctx.t();
        ctx.out(0, amplitude * std::sin(a * t + b * t * t));
      });
  c->declare_output("y", ValueTag::Scalar);
  return c;
}

std::unique_ptr<Component> biquad(std::string id, std::array<double, 3> num,
                                  std::array<double, 3> den, std::string u_binding) {
  return std::make_unique<BiquadComponent>(std::move(id), num, den, u_binding);
}

std::unique_ptr<Component> frame(std::string id, std::string parent, LocalPose pose,
                                 FrameInputs inputs) {
  std::string fid = id;
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "frame", [fid, parent, pose, inputs](EvalContext& ctx) {
        LocalPose p = pose;
        std::size_t i = 0;
        if (inputs.r) p.r = ctx.in(i++).as_vec3();
        if (inputs.q) p.q = ctx.in(i++).as_quat();
        if (inputs.v) p.v = ctx.in(i++).as_vec3();
        if (inputs.w) p.w = ctx.in(i++).as_vec3();
        ctx.frames().add(fid, parent, p);
        const WorldPose& wp = ctx.frames().world_pose(fid);
        ctx.out(0, wp.r);
        ctx.out(1, wp.q);
        ctx.out(2, wp.v);
        ctx.out(3, wp.w);
      });
  if (inputs.r) c->declare_input("r", ValueTag::Vec3, *inputs.r);
  if (inputs.q) c->declare_input("q", ValueTag::Quat, *inputs.q);
  if (inputs.v) c->declare_input("v", ValueTag::Vec3, *inputs.v);
  if (inputs.w) c->declare_input("w", ValueTag::Vec3, *inputs.w);
  c->declare_output("r", ValueTag::Vec3);
  c->declare_output("q", ValueTag::Quat);
  c->declare_output("v", ValueTag::Vec3);
  c->declare_output("w", ValueTag::Vec3);
  if (parent != "world") c->declare_order_dep(parent);
  c->set_provided_frames({fid});
  return c;
}

std::unique_ptr<Component> greenwich_frame(std::string id, double omega_e) {
  std::string fid = id;
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "frame.greenwich", [fid, omega_e](EvalContext& ctx) {
        LocalPose p;
        p.q = Quat(Eigen::AngleAxisd(omega_e * ctx.t(), Vec3::UnitZ()));
        p.w = Vec3(0, 0, omega_e);
        ctx.frames().add(fid, "world", p);
        const WorldPose& wp = ctx.frames().world_pose(fid);
        ctx.out(0, wp.r);
        ctx.out(1, wp.q);
        ctx.out(2, wp.v);
        ctx.out(3, wp.w);
      });
  c->declare_output("r", ValueTag::Vec3);
  c->declare_output("q", ValueTag::Quat);
  c->declare_output("v", ValueTag::Vec3);
  c->declare_output("w", ValueTag::Vec3);
  c->set_provided_frames({fid});
  return c;
}

std::unique_ptr<Component> electrostatic_field_component(std::string id, double k,
                                                         std::string host, bool covariant) {
  std::string fid = id;
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "field.electrostatic", [fid, k, host, covariant](EvalContext& ctx) {
        VectorField f;
        f.host_frame = host;
        f.covariant = covariant;
        f.eval_local = [k](const Vec3& rho) { return electrostatic_field(k, rho); };
        ctx.provide_field(fid, std::move(f));
      });
  if (host != "world") c->declare_order_dep(host);
  return c;
}

std::unique_ptr<Component> input_field(std::string id, std::string host, bool covariant,
                                       std::string v_binding) {
  std::string fid = id;
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "field.input", [fid, host, covariant](EvalContext& ctx) {
        const Vec3 v = ctx.in(0).as_vec3();
        VectorField f;
        f.host_frame = host;
        f.covariant = covariant;
        f.eval_local = [v](const Vec3&) { return v; };
        ctx.provide_field(fid, std::move(f));
      });
  c->declare_input("v", ValueTag::Vec3, v_binding);
  if (host != "world") c->declare_order_dep(host);
  return c;
}

std::unique_ptr<Component> sensor(std::string id, std::string field_id, std::string frame_id) {
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "sensor", [field_id, frame_id](EvalContext& ctx) {
        const WorldPose& pose = ctx.frames().world_pose(frame_id);
        ctx.out(0, sense(ctx.field(field_id), ctx.frames(), pose));
      });
  c->declare_output("out", ValueTag::Vec3);
  c->declare_order_dep(field_id);
  if (frame_id != "world") c->declare_order_dep(frame_id);
  return c;
}

std::unique_ptr<Component> relative_component(std::string id, std::string frame_a,
                                              std::string frame_b) {
  auto c = std::make_unique<FuncComponent>(
      std::move(id), "relative", [frame_a, frame_b](EvalContext& ctx) {
        const RelativeState rel =
            relative(ctx.frames().world_pose(frame_a), ctx.frames().world_pose(frame_b));
        ctx.out(0, rel.distance);
        ctx.out(1, rel.r);
        ctx.out(2, rel.v);
        ctx.out(3, rel.q);
      });
  c->declare_output("dist", ValueTag::Scalar);
  c->declare_output("r", ValueTag::Vec3);
  c->declare_output("v", ValueTag::Vec3);
  c->declare_output("q", ValueTag::Quat);
  if (frame_a != "world") c->declare_order_dep(frame_a);
  if (frame_b != "world") c->declare_order_dep(frame_b);
  return c;
}

std::unique_ptr<Component> ball(std::string id, double accel_gain, const Vec3& r0, const Vec3& v0,
                                std::string field_binding) {
  return std::make_unique<BallComponent>(std::move(id), accel_gain, r0, v0, field_binding);
}

}  // namespace tdsim::comp
