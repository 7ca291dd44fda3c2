#include "tdsim/frames.hpp"

namespace tdsim {

WorldPose compose(const WorldPose& parent, const LocalPose& child) {
  WorldPose out;
  const Vec3 offset = parent.q * child.r;
  out.q = (parent.q * child.q).normalized();
  out.r = parent.r + offset;
  out.v = parent.v + parent.w.cross(offset) + parent.q * child.v;
  out.w = parent.w + out.q * child.w;
  return out;
}

RelativeState relative(const WorldPose& a, const WorldPose& b) {
  RelativeState out;
  const Quat inv = a.q.conjugate();
  const Vec3 d = b.r - a.r;
  out.r = inv * d;
  out.v = inv * (b.v - a.v - a.w.cross(d));
  out.q = (inv * b.q).normalized();
  out.distance = out.r.norm();
  return out;
}

void FrameTree::clear() { entries_.clear(); }

void FrameTree::add(const std::string& id, const std::string& parent, const LocalPose& pose) {
  if (id == "world") throw ValidationError("frame id 'world' is reserved");
  Entry e;
  e.parent = parent;
  e.local = pose;
  entries_[id] = std::move(e);
}

void FrameTree::add_world(const std::string& id, const WorldPose& pose) {
  if (id == "world") throw ValidationError("frame id 'world' is reserved");
  Entry e;
  e.resolved = true;
  e.world = pose;
  entries_[id] = std::move(e);
}

bool FrameTree::has(const std::string& id) const {
  return id == "world" || entries_.count(id) > 0;
}

const WorldPose& FrameTree::world_pose(const std::string& id) const { return resolve(id, 0); }

const WorldPose& FrameTree::resolve(const std::string& id, int depth) const {
  if (id == "world") return identity_;
  if (depth > static_cast<int>(entries_.size()))
    throw ValidationError("frame '" + id + "': cyclic parentage");
  auto it = entries_.find(id);
  if (it == entries_.end()) throw ValidationError("unknown frame '" + id + "'");
  const Entry& e = it->second;
  if (!e.world) {
    const WorldPose& parent = resolve(e.parent, depth + 1);
    e.world = compose(parent, e.local);
  }
  return *e.world;
}

Vec3 field_at(const VectorField& field, const FrameTree& frames, const Vec3& position_world) {
  const WorldPose& host = frames.world_pose(field.host_frame);
  const Vec3 local = host.q.conjugate() * (position_world - host.r);
  const Vec3 value_local = field.eval_local(local);
  if (!value_local.allFinite())
    throw NumericError("field on frame '" + field.host_frame + "': non-finite value");
  return host.q * value_local;
}

Vec3 sense(const VectorField& field, const FrameTree& frames, const WorldPose& sensor) {
  const Vec3 world = field_at(field, frames, sensor.r);
  if (!field.covariant) return world;
  return sensor.q.conjugate() * world;
}

Vec3 electrostatic_field(double k, const Vec3& r) {
  const double n = r.norm();
  if (n == 0.0) throw NumericError("electrostatic field evaluated at the charge singularity");
  return (k / (n * n * n)) * r;
}

}  // namespace tdsim
