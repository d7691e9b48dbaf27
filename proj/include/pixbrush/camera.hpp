#pragma once

#include "pixbrush/rng.hpp"
#include "pixbrush/vec.hpp"

namespace pixbrush {

struct CameraPose {
  double elevation_deg = 0.0;  // in [-90, 150]; 0 is the equator
  double azimuth_deg = 0.0;
  double radius = 1.25;
  Vec3 target;                 // origin for normalized meshes
  double fov_deg = 45.0;       // vertical field of view
};

// Per-iteration view sampling ranges. Elevation defaults to [0,60];
// overhead-dominant shapes can widen it to [0,150].
struct ViewConfig {
  double elevation_min = 0.0;
  double elevation_max = 60.0;
  double azimuth_min = 0.0;
  double azimuth_max = 360.0;
  double radius_min = 1.0;
  double radius_max = 1.5;
  double fov_deg = 45.0;
};

// Orthonormal camera frame derived from a pose. forward points from the
// eye toward the target.
struct CameraBasis {
  Vec3 eye;
  Vec3 right;
  Vec3 up;
  Vec3 forward;
};

CameraBasis camera_basis(const CameraPose& pose);

// Draws elevation, azimuth, radius (in that order) uniformly from the
// configured ranges. Degenerate ranges (lo == hi) yield the fixed value.
// Throws on inverted ranges or non-positive radius.
CameraPose sample_camera(Rng& rng, const ViewConfig& config);

}  // namespace pixbrush
