#include "tdsim/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "tdsim/components.hpp"
#include "tdsim/control.hpp"
#include "tdsim/environment.hpp"
#include "tdsim/mech.hpp"
#include "tdsim/starnav.hpp"

namespace tdsim {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ValidationError("scenario: " + where + ": " + what);
}

double num(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where, "expected a number");
  return j.get<double>();
}

Vec3 vec3_of(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) bad(where, "expected [x, y, z]");
  return {num(j[0], where), num(j[1], where), num(j[2], where)};
}

Quat quat_of(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) bad(where, "expected [w, x, y, z]");
  Quat q(num(j[0], where), num(j[1], where), num(j[2], where), num(j[3], where));
  if (std::abs(q.norm() - 1.0) > 1e-9) bad(where, "quaternion must have unit norm");
  return q.normalized();
}

Mat3 inertia_of(const json& j, const std::string& where) {
  if (j.is_array() && j.size() == 3 && j[0].is_number())
    return Vec3(num(j[0], where), num(j[1], where), num(j[2], where)).asDiagonal();
  if (j.is_array() && j.size() == 3 && j[0].is_array()) {
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      if (!j[r].is_array() || j[r].size() != 3) bad(where, "expected 3x3 matrix");
      for (int c = 0; c < 3; ++c) m(r, c) = num(j[r][c], where);
    }
    return m;
  }
  bad(where, "expected [Jx, Jy, Jz] or a 3x3 matrix");
}

struct Ctx {
  const json& params;
  const json& inputs;
  std::string id;
  std::string base_dir;

  std::string where(const std::string& field) const { return "component '" + id + "'." + field; }

  bool has(const std::string& key) const { return params.contains(key); }
  double get_num(const std::string& key, std::optional<double> def = {}) const {
    if (!params.contains(key)) {
      if (def) return *def;
      bad(where(key), "missing required parameter");
    }
    return num(params.at(key), where(key));
  }
  bool get_bool(const std::string& key, bool def) const {
    if (!params.contains(key)) return def;
    if (!params.at(key).is_boolean()) bad(where(key), "expected a boolean");
    return params.at(key).get<bool>();
  }
  std::string get_str(const std::string& key, std::optional<std::string> def = {}) const {
    if (!params.contains(key)) {
      if (def) return *def;
      bad(where(key), "missing required parameter");
    }
    if (!params.at(key).is_string()) bad(where(key), "expected a string");
    return params.at(key).get<std::string>();
  }
  Vec3 get_vec3(const std::string& key, std::optional<Vec3> def = {}) const {
    if (!params.contains(key)) {
      if (def) return *def;
      bad(where(key), "missing required parameter");
    }
    return vec3_of(params.at(key), where(key));
  }
  Quat get_quat(const std::string& key, const Quat& def) const {
    if (!params.contains(key)) return def;
    return quat_of(params.at(key), where(key));
  }

  std::string binding(const std::string& port) const {
    if (!inputs.contains(port)) bad("component '" + id + "'", "missing input '" + port + "'");
    if (!inputs.at(port).is_string()) bad(where(port), "input bindings must be strings");
    return inputs.at(port).get<std::string>();
  }
  std::optional<std::string> opt_binding(const std::string& port) const {
    if (!inputs.contains(port)) return std::nullopt;
    return binding(port);
  }
  std::string resolve_path(const std::string& rel) const {
    std::filesystem::path p(rel);
    if (p.is_absolute()) return rel;
    return (std::filesystem::path(base_dir) / p).string();
  }
};

std::unique_ptr<Component> make_const(Ctx& c) {
  if (!c.has("value")) bad(c.where("value"), "missing required parameter");
  const json& v = c.params.at("value");
  if (v.is_number()) return comp::constant(c.id, Value(v.get<double>()));
  if (v.is_array() && v.size() == 3) return comp::constant(c.id, Value(vec3_of(v, c.where("value"))));
  if (v.is_array() && v.size() == 4) return comp::constant(c.id, Value(quat_of(v, c.where("value"))));
  bad(c.where("value"), "expected number, [x,y,z] or [w,x,y,z]");
}

std::vector<std::string> all_bindings(const Ctx& c) {
  std::vector<std::string> out;
  for (const auto& [port, b] : c.inputs.items()) {
    (void)port;
    if (!b.is_string()) bad(c.where(port), "input bindings must be strings");
    out.push_back(b.get<std::string>());
  }
  return out;
}

std::unique_ptr<Component> make_playback(Ctx& c) {
  std::shared_ptr<SeriesTable> table;
  std::string channel = c.get_str("channel", std::string("y"));
  if (c.has("file")) {
    table = std::make_shared<SeriesTable>(
        SeriesTable::read_csv_file(c.resolve_path(c.get_str("file")),
                                   c.get_str("time_column", std::string("t"))));
  } else {
    if (!c.has("times") || !c.has("values")) bad(c.where("times"), "need times+values or file");
    std::vector<double> times, values;
    for (const auto& t : c.params.at("times")) times.push_back(num(t, c.where("times")));
    for (const auto& v : c.params.at("values")) values.push_back(num(v, c.where("values")));
    table = std::make_shared<SeriesTable>(times);
    table->add_channel(channel, values);
  }
  return comp::playback(c.id, table, channel);
}

std::unique_ptr<Component> make_aggregate(Ctx& c) {
  mech::AggregateSpec spec;
  spec.r0 = c.get_vec3("r0", Vec3::Zero());
  spec.q0 = c.get_quat("q0", Quat::Identity());
  spec.v0 = c.get_vec3("v0", Vec3::Zero());
  spec.w0 = c.get_vec3("w0", Vec3::Zero());
  if (!c.has("modules")) bad(c.where("modules"), "missing required parameter");
  for (const json& jm : c.params.at("modules")) {
    mech::ModuleSpec m;
    if (!jm.contains("name")) bad(c.where("modules"), "module needs a name");
    m.name = jm.at("name").get<std::string>();
    const std::string where = c.where("modules." + m.name);
    const std::string type = jm.value("type", "rigid");
    if (type == "rigid")
      m.type = mech::ModuleType::Rigid;
    else if (type == "console")
      m.type = mech::ModuleType::Console;
    else if (type == "flywheel")
      m.type = mech::ModuleType::Flywheel;
    else
      bad(where, "unknown module type '" + type + "'");
    m.m = jm.contains("m") ? num(jm.at("m"), where) : 1.0;
    if (jm.contains("J")) m.J = inertia_of(jm.at("J"), where);
    if (jm.contains("places")) {
      for (const json& jp : jm.at("places")) {
        mech::Place p;
        if (jp.contains("rho")) p.rho = vec3_of(jp.at("rho"), where);
        if (jp.contains("q")) p.q = quat_of(jp.at("q"), where);
        m.places.push_back(p);
      }
    }
    if (jm.contains("harmonics")) {
      for (const json& jh : jm.at("harmonics")) {
        mech::Harmonic h;
        h.A = jh.value("A", 1.0);
        h.eps = jh.value("eps", 0.0);
        h.c = jh.value("c", 0.0);
        if (jh.contains("phi_t")) h.phi_t = vec3_of(jh.at("phi_t"), where);
        if (jh.contains("phi_r")) h.phi_r = vec3_of(jh.at("phi_r"), where);
        h.q0 = jh.value("q0", 0.0);
        h.qd0 = jh.value("qd0", 0.0);
        m.harmonics.push_back(h);
      }
    }
    if (jm.contains("wheel")) {
      const json& jw = jm.at("wheel");
      m.wheel.JF = jw.value("JF", 0.0);
      if (jw.contains("axis")) m.wheel.axis = vec3_of(jw.at("axis"), where);
      m.wheel.Omega0 = jw.value("Omega0", 0.0);
    }
    spec.modules.push_back(std::move(m));
  }
  auto module_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < spec.modules.size(); ++i)
      if (spec.modules[i].name == name) return static_cast<int>(i);
    bad(c.where("links"), "unknown module '" + name + "'");
  };
  if (c.has("links")) {
    for (const json& jl : c.params.at("links")) {
      if (!jl.is_array() || jl.size() != 2 || !jl[0].is_array() || jl[0].size() != 2)
        bad(c.where("links"), "expected [[\"moduleA\", placeA], [\"moduleB\", placeB]]");
      mech::LinkSpec l;
      l.module_a = module_index(jl[0][0].get<std::string>());
      l.place_a = jl[0][1].get<int>();
      l.module_b = module_index(jl[1][0].get<std::string>());
      l.place_b = jl[1][1].get<int>();
      spec.links.push_back(l);
    }
  }

  mech::AggregateBindings bindings;
  for (const auto& [port, b] : c.inputs.items()) {
    if (!b.is_string()) bad(c.where(port), "input bindings must be strings");
    const std::string bind = b.get<std::string>();
    if (port == "accel") {
      bindings.accel = bind;
    } else if (port.rfind("u_", 0) == 0) {
      bindings.wheel_torque[port.substr(2)] = bind;
    } else if (port.rfind("F_", 0) == 0) {
      bindings.force[port.substr(2)] = bind;
    } else if (port.rfind("M_", 0) == 0) {
      bindings.torque[port.substr(2)] = bind;
    } else {
      bad(c.where(port), "unknown aggregate input");
    }
  }
  return mech::aggregate_component(c.id, std::move(spec), std::move(bindings));
}

std::unique_ptr<Component> make_tracker(Ctx& c) {
  nav::TrackerConfig cfg;
  const double ra0 = c.get_num("ra0");
  const double de0 = c.get_num("de0");
  const double ra_span = c.get_num("ra_span");
  const double de_span = c.get_num("de_span");
  cfg.window = {ra0 - 0.5 * ra_span, ra0 + 0.5 * ra_span, de0 - 0.5 * de_span,
                de0 + 0.5 * de_span, c.get_num("mag_min", 9.0)};
  cfg.plate_scale = c.get_num("plate_scale", 50.0);
  cfg.image_w = static_cast<int>(c.get_num("image_w", 256));
  cfg.image_h = static_cast<int>(c.get_num("image_h", 256));
  cfg.period = c.get_num("period", 5.0);
  cfg.min_pixels = static_cast<int>(c.get_num("min_pixels", 9));
  cfg.threshold = static_cast<int>(c.get_num("threshold", 128));
  auto catalog = nav::load_catalog(c.resolve_path(c.get_str("catalog")));
  return nav::star_tracker(c.id, std::move(catalog), cfg, c.get_str("frame"));
}

std::unique_ptr<Component> make_component(const std::string& kind, Ctx& c) {
  // arithmetic
  if (kind == "const") return make_const(c);
  if (kind == "sum") return comp::sum(c.id, all_bindings(c), c.get_bool("vec", false));
  if (kind == "gain")
    return comp::gain(c.id, c.get_num("k"), c.binding("in"), c.get_bool("vec", false));
  if (kind == "product") return comp::product(c.id, all_bindings(c));
  if (kind == "vec3.pack")
    return comp::vec3_pack(c.id, c.binding("x"), c.binding("y"), c.binding("z"));
  if (kind == "vec3.unpack") return comp::vec3_unpack(c.id, c.binding("in"));
  if (kind == "vec3.cross") return comp::vec3_cross(c.id, c.binding("a"), c.binding("b"));
  if (kind == "vec3.dot") return comp::vec3_dot(c.id, c.binding("a"), c.binding("b"));
  if (kind == "vec3.norm") return comp::vec3_norm(c.id, c.binding("in"));
  if (kind == "vec3.scale") return comp::vec3_scale(c.id, c.binding("in"), c.binding("k"));
  // signals and plants
  if (kind == "integrator") {
    if (!c.has("x0")) bad(c.where("x0"), "missing required parameter");
    const json& x0 = c.params.at("x0");
    Value v = x0.is_array() ? Value(vec3_of(x0, c.where("x0"))) : Value(num(x0, c.where("x0")));
    return comp::integrator(c.id, v, c.binding("dot"));
  }
  if (kind == "series.playback") return make_playback(c);
  if (kind == "sysid.chirp")
    return comp::chirp_source(c.id, c.get_num("C", 1.0), c.get_num("a", 0.0), c.get_num("b", 0.0));
  if (kind == "sysid.biquad") {
    auto arr = [&](const char* key) {
      const json& j = c.params.at(key);
      if (!j.is_array() || j.size() != 3) bad(c.where(key), "expected [c2, c1, c0]");
      // serialized high power first
      return std::array<double, 3>{num(j[2], c.where(key)), num(j[1], c.where(key)),
                                   num(j[0], c.where(key))};
    };
    if (!c.has("num") || !c.has("den")) bad(c.where("num"), "need num and den");
    return comp::biquad(c.id, arr("num"), arr("den"), c.binding("u"));
  }
  // frames, fields, sensing
  if (kind == "frame") {
    LocalPose pose;
    pose.r = c.get_vec3("r", Vec3::Zero());
    pose.q = c.get_quat("q", Quat::Identity());
    pose.v = c.get_vec3("v", Vec3::Zero());
    pose.w = c.get_vec3("w", Vec3::Zero());
    comp::FrameInputs in;
    in.r = c.opt_binding("r");
    in.q = c.opt_binding("q");
    in.v = c.opt_binding("v");
    in.w = c.opt_binding("w");
    return comp::frame(c.id, c.get_str("parent", std::string("world")), pose, in);
  }
  if (kind == "frame.greenwich")
    return comp::greenwich_frame(c.id, c.get_num("omega_e", env::kEarthSpin));
  if (kind == "field.electrostatic")
    return comp::electrostatic_field_component(c.id, c.get_num("k", 1.0),
                                               c.get_str("host", std::string("world")),
                                               c.get_bool("covariant", true));
  if (kind == "field.input")
    return comp::input_field(c.id, c.get_str("host", std::string("world")),
                             c.get_bool("covariant", true), c.binding("v"));
  if (kind == "sensor") return comp::sensor(c.id, c.get_str("field"), c.get_str("frame"));
  if (kind == "relative") return comp::relative_component(c.id, c.get_str("a"), c.get_str("b"));
  if (kind == "ball")
    return comp::ball(c.id, c.get_num("a", 1.0), c.get_vec3("r0", Vec3::Zero()),
                      c.get_vec3("v0", Vec3::Zero()), c.binding("E"));
  // environment
  if (kind == "env.gravity")
    return env::gravity_field(c.id, {c.get_num("mu", env::kEarthMu)},
                              c.get_str("host", std::string("world")),
                              c.get_bool("covariant", true));
  if (kind == "env.dipole")
    return env::dipole_field_component(
        c.id,
        {c.get_num("B0", env::kEquatorB0), c.get_num("R_ref", env::kEarthRadius),
         c.get_vec3("axis", Vec3::UnitZ())},
        c.get_str("host", std::string("world")), c.get_bool("covariant", true));
  if (kind == "env.atmosphere")
    return env::atmosphere_sensor(
        c.id,
        {c.get_num("rho0", env::kRho400), c.get_num("h0", env::kAtmRefAltitude),
         c.get_num("H", env::kAtmScaleHeight)},
        c.get_num("R_earth", env::kEarthRadius), c.get_str("frame"),
        c.get_str("host", std::string("world")));
  if (kind == "env.drag")
    return env::drag(c.id, c.get_num("CdA_over_m"), c.binding("rho"), c.binding("v"));
  // mechanics
  if (kind == "mech.aggregate") return make_aggregate(c);
  // control
  if (kind == "ctl.pid")
    return ctl::pid(c.id, {c.get_num("K1", 0.0), c.get_num("K2", 0.0), c.get_num("K3", 0.0)},
                    c.get_bool("vec", false), c.binding("phi"), c.binding("omega"),
                    c.opt_binding("M0"));
  if (kind == "ctl.wheelmom") {
    std::vector<double> JF;
    std::vector<Vec3> axes;
    std::vector<std::string> bindings;
    if (!c.has("wheels")) bad(c.where("wheels"), "missing required parameter");
    int i = 0;
    for (const json& jw : c.params.at("wheels")) {
      JF.push_back(num(jw.at("JF"), c.where("wheels")));
      axes.push_back(vec3_of(jw.at("axis"), c.where("wheels")));
      bindings.push_back(c.binding("Omega" + std::to_string(++i)));
    }
    return ctl::wheel_momentum_component(c.id, JF, axes, bindings);
  }
  if (kind == "ctl.desat")
    return ctl::desat(
        c.id,
        {c.get_num("H_min", 0.0), c.get_num("theta_min", 0.0), c.get_num("k_m", 1.0)},
        c.binding("H"), c.binding("B"));
  if (kind == "ctl.magtorque") return ctl::magtorque(c.id, c.binding("m"), c.binding("B"));
  if (kind == "ctl.wheel_alloc") {
    std::vector<Vec3> axes;
    if (!c.has("axes")) bad(c.where("axes"), "missing required parameter");
    for (const json& ja : c.params.at("axes")) axes.push_back(vec3_of(ja, c.where("axes")));
    return ctl::wheel_alloc(c.id, axes, c.binding("T"));
  }
  // navigation
  if (kind == "nav.startracker") return make_tracker(c);

  throw ValidationError("scenario: unknown component kind '" + kind + "'");
}

}  // namespace

Scenario parse_scenario(const std::string& json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario: JSON parse error: ") + e.what());
  }
  if (!root.is_object() || !root.contains("components"))
    throw ValidationError("scenario: top level must be an object with a components array");

  Scenario out;
  static const json empty_obj = json::object();
  for (const json& jc : root.at("components")) {
    if (!jc.contains("id") || !jc.contains("kind"))
      throw ValidationError("scenario: every component needs id and kind");
    const std::string id = jc.at("id").get<std::string>();
    const std::string kind = jc.at("kind").get<std::string>();
    const json& params = jc.contains("params") ? jc.at("params") : empty_obj;
    const json& inputs = jc.contains("inputs") ? jc.at("inputs") : empty_obj;
    Ctx ctx{params, inputs, id, base_dir};
    out.graph.add(make_component(kind, ctx));
  }
  if (root.contains("sim")) {
    const json& js = root.at("sim");
    out.sim.dt = js.value("dt", 0.0);
    out.sim.t_end = js.value("t_end", 0.0);
    if (js.contains("record"))
      for (const json& r : js.at("record")) out.sim.record.push_back(r.get<std::string>());
  }
  return out;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("scenario: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_scenario(text, std::filesystem::path(path).parent_path().string());
}

}  // namespace tdsim
