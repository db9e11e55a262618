#pragma once

// Umbrella header for the whole library.

#include "gsnav/collide.hpp"
#include "gsnav/corridor.hpp"
#include "gsnav/error.hpp"
#include "gsnav/json_util.hpp"
#include "gsnav/kdtree.hpp"
#include "gsnav/locgeo.hpp"
#include "gsnav/math.hpp"
#include "gsnav/oracle.hpp"
#include "gsnav/planner.hpp"
#include "gsnav/ply.hpp"
#include "gsnav/qp.hpp"
#include "gsnav/rng.hpp"
#include "gsnav/scene.hpp"
#include "gsnav/scene_json.hpp"
#include "gsnav/spline.hpp"
#include "gsnav/synthetic.hpp"
#include "gsnav/voxgrid.hpp"
