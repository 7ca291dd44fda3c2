#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tdsim/common.hpp"

namespace tdsim {

/// Pose of a frame relative to its parent. Position and velocity are in
/// parent axes; q maps child coordinates to parent coordinates (scalar-first
/// in serialized form); angular velocity is in the frame's own axes.
struct LocalPose {
  Vec3 r = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
};

/// Fully resolved pose: position/velocity in world axes, q maps frame
/// coordinates to world coordinates, angular velocity in world axes.
struct WorldPose {
  Vec3 r = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
};

WorldPose compose(const WorldPose& parent, const LocalPose& child);

/// Relative kinematics of frame b observed from frame a, expressed in a's axes.
struct RelativeState {
  double distance = 0.0;
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Quat q = Quat::Identity();
};

RelativeState relative(const WorldPose& a, const WorldPose& b);

/// Registry of frames for one evaluation instant. Frames are registered with
/// their parent and local pose; world poses are resolved lazily with
/// memoization. "world" is the implicit identity root.
class FrameTree {
 public:
  void clear();
  void add(const std::string& id, const std::string& parent, const LocalPose& pose);
  /// Register an already-resolved pose (used by aggregates).
  void add_world(const std::string& id, const WorldPose& pose);
  bool has(const std::string& id) const;
  const WorldPose& world_pose(const std::string& id) const;

 private:
  struct Entry {
    std::string parent;
    LocalPose local;
    bool resolved = false;
    mutable std::optional<WorldPose> world;
  };
  const WorldPose& resolve(const std::string& id, int depth) const;
  std::map<std::string, Entry> entries_;
  WorldPose identity_;
};

/// A 3-D vector field attached to a host frame. `eval_local` receives the
/// query point in host-frame coordinates and returns the field vector in
/// host-frame axes. A covariant field is re-expressed in the axes of the
/// sensor that samples it; a non-covariant one keeps its world components
/// whatever the sensor orientation.
struct VectorField {
  std::string host_frame = "world";
  bool covariant = true;
  std::function<Vec3(const Vec3&)> eval_local;
};

/// Field vector at a world position, in world axes.
Vec3 field_at(const VectorField& field, const FrameTree& frames, const Vec3& position_world);

/// Sample a field with a sensor frame: covariant fields are projected onto
/// the sensor axes, non-covariant fields are returned as raw world components.
Vec3 sense(const VectorField& field, const FrameTree& frames, const WorldPose& sensor);

/// E = k r / |r|^3 for offset r from the charge. |r| = 0 is singular.
Vec3 electrostatic_field(double k, const Vec3& r);

}  // namespace tdsim
