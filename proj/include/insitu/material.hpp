#ifndef INSITU_MATERIAL_HPP
#define INSITU_MATERIAL_HPP

#include "insitu/core.hpp"

#include <vector>

namespace insitu {

/// Porous layer on a rigid backing.
struct MaterialParams {
  double sigma = 0.0;      // flow resistivity [kN s/m^4]
  double thickness = 0.0;  // [m]

  void validate() const;
};

/// Dimensionless Miki frequency variable f / sigma with sigma in kN s/m^4
/// (equivalently 10^3 f / sigma in N s/m^4).
double miki_zeta(double f_hz, double sigma_kns);

/// Characteristic impedance Zc [Pa s/m] and complex wavenumber kp [rad/m] of
/// the porous medium. Im(Zc) < 0 and Im(kp) < 0 for the e^{-jkr} convention.
struct CharacteristicProperties {
  ComplexSpectrum zc;
  ComplexSpectrum kp;
};

CharacteristicProperties miki_characteristics(const FrequencyGrid& grid,
                                              const MaterialParams& mat,
                                              const AirProperties& air);

/// Surface impedance per frequency. A frequency whose layer cotangent has a
/// pole is flagged rigid instead of carrying an infinite value; its `value`
/// entry is then meaningless and the admittance is exactly zero.
struct ImpedanceSpectrum {
  ComplexSpectrum value;
  std::vector<bool> rigid;

  Index size() const { return value.size(); }
  bool is_rigid(Index i) const { return rigid[static_cast<std::size_t>(i)]; }

  /// rho0 c0 / Zs, zero where rigid.
  Complex normalized_admittance(Index i, const AirProperties& air) const {
    return is_rigid(i) ? Complex{} : air.characteristic_impedance() / value[i];
  }

  /// Every frequency rigid (sound-hard sample).
  static ImpedanceSpectrum rigid_surface(Index size);
};

/// Surface impedance of a locally reacting rigid-backed layer for a plane wave
/// arriving at elevation `theta_deg` (0 = normal incidence), using the
/// refraction angle asin((k0/kp) sin theta) on the principal branch.
ImpedanceSpectrum surface_impedance(const FrequencyGrid& grid, const MaterialParams& mat,
                                    const AirProperties& air, double theta_deg);

/// Plane-interface reflection coefficient (Zs cos(theta) - rho0 c0) /
/// (Zs cos(theta) + rho0 c0); rigid frequencies map to exactly 1.
ComplexSpectrum reference_reflection(const ImpedanceSpectrum& zs, double theta_deg,
                                     const AirProperties& air);

/// alpha = 1 - |R|^2, unclamped.
template <typename Derived>
RealSpectrum absorption_from_reflection(const Eigen::MatrixBase<Derived>& r) {
  return (1.0 - r.cwiseAbs2().array()).matrix();
}

/// Infinite-sample absorption for a layer at elevation theta.
RealSpectrum reference_absorption(const FrequencyGrid& grid, const MaterialParams& mat,
                                  const AirProperties& air, double theta_deg);

}  // namespace insitu

#endif  // INSITU_MATERIAL_HPP
