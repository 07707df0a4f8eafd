#ifndef INSITU_GEOMETRY_HPP
#define INSITU_GEOMETRY_HPP

#include "insitu/core.hpp"

namespace insitu {

/// Baffled rectangular sample centred at the origin in the z = 0 plane, a
/// monopole source above it and two microphones on the z axis.
struct ScenarioGeometry {
  double lx = 0.6;               // [m]
  double ly = 0.6;               // [m]
  double source_distance = 1.2;  // |r_q| from the sample centre [m]
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;    // 0 = source on the normal
  double mic_z1 = 0.01;          // [m]
  double mic_z2 = 0.03;          // [m]

  void validate() const;

  Vec3 source() const;
  /// Mirror of the source in the baffle plane.
  Vec3 image_source() const;
  Vec3 mic1() const { return {0.0, 0.0, mic_z1}; }
  Vec3 mic2() const { return {0.0, 0.0, mic_z2}; }
};

}  // namespace insitu

#endif  // INSITU_GEOMETRY_HPP
