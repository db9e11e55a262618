#pragma once

#include <string>

#include "gsnav/json_util.hpp"
#include "gsnav/scene.hpp"

namespace gsnav::scene {

/// Scene fixture format: a JSON array of
///   {"mu": [x,y,z], "rot_quat": [w,x,y,z], "semi_axes": [a,b,c]}
/// with semi-axes already confidence-scaled.
inline Scene load_scene_json(const std::string& path) {
  const Json j = load_json(path);
  if (!j.is_array()) fail(ErrorCode::kSchema, path + ": expected top-level array");
  std::vector<GaussianRecord> unused;
  Scene s;
  s.ellipsoids.reserve(j.size());
  int idx = 0;
  for (const Json& je : j) {
    const std::string where = path + ": ellipsoid " + std::to_string(idx++);
    Ellipsoid e;
    e.mu = json_to_vec3(require_field(je, "mu", where), where + ".mu");
    const Json& q = require_field(je, "rot_quat", where);
    if (!q.is_array() || q.size() != 4)
      fail(ErrorCode::kSchema, where + ".rot_quat: expected [w, x, y, z]");
    e.rot = quat_to_rot(Vec4(q[0].get<double>(), q[1].get<double>(),
                             q[2].get<double>(), q[3].get<double>()));
    e.semi_axes =
        json_to_vec3(require_field(je, "semi_axes", where), where + ".semi_axes");
    if (!(e.semi_axes.minCoeff() > 0.0))
      fail(ErrorCode::kSchema, where + ".semi_axes: must be positive");
    s.ellipsoids.push_back(e);
  }
  recompute_bounds(s);
  return s;
}

inline void save_scene_json(const Scene& s, const std::string& path) {
  Json arr = Json::array();
  for (const Ellipsoid& e : s.ellipsoids) {
    Json je;
    je["mu"] = vec3_to_json(e.mu);
    const Vec4 q = rot_to_quat(e.rot);
    je["rot_quat"] = Json::array({q[0], q[1], q[2], q[3]});
    je["semi_axes"] = vec3_to_json(e.semi_axes);
    arr.push_back(std::move(je));
  }
  save_json(arr, path);
}

}  // namespace gsnav::scene
