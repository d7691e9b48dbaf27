#include "pixbrush/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace pixbrush {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg_to_rad(double deg) { return deg * kPi / 180.0; }

}  // namespace

CameraBasis camera_basis(const CameraPose& pose) {
  if (!(pose.radius > 0.0)) {
    throw std::invalid_argument("camera radius must be positive");
  }
  const double el = deg_to_rad(pose.elevation_deg);
  const double az = deg_to_rad(pose.azimuth_deg);
  // Azimuth 0 places the eye on +z; elevation rotates it toward +y.
  const Vec3 dir{std::cos(el) * std::sin(az), std::sin(el),
                 std::cos(el) * std::cos(az)};

  CameraBasis basis;
  basis.eye = pose.target + dir * pose.radius;
  basis.forward = normalized(pose.target - basis.eye);

  Vec3 world_up{0.0, 1.0, 0.0};
  if (std::abs(dot(basis.forward, world_up)) > 1.0 - 1e-9) {
    // Looking straight along +-y; pick a stable fallback.
    world_up = Vec3{0.0, 0.0, -1.0};
  }
  basis.right = normalized(cross(basis.forward, world_up));
  basis.up = cross(basis.right, basis.forward);
  return basis;
}

CameraPose sample_camera(Rng& rng, const ViewConfig& config) {
  if (config.elevation_min > config.elevation_max ||
      config.azimuth_min > config.azimuth_max ||
      config.radius_min > config.radius_max) {
    throw std::invalid_argument("view range is empty (min exceeds max)");
  }
  if (!(config.radius_min > 0.0)) {
    throw std::invalid_argument("view radius range must be positive");
  }
  CameraPose pose;
  pose.elevation_deg = rng.uniform(config.elevation_min, config.elevation_max);
  pose.azimuth_deg = rng.uniform(config.azimuth_min, config.azimuth_max);
  pose.radius = rng.uniform(config.radius_min, config.radius_max);
  pose.target = Vec3{0.0, 0.0, 0.0};
  pose.fov_deg = config.fov_deg;
  return pose;
}

}  // namespace pixbrush
