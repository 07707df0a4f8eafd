#include "insitu/material.hpp"

#include <cmath>
#include <stdexcept>

namespace insitu {
namespace {

// cot(z) through the decaying exponential, so thick or highly resistive
// layers (|Im z| in the thousands) do not overflow cos/sin.
struct Cotangent {
  Complex value;
  bool pole;
};

Cotangent stable_cot(Complex z) {
  const bool lower = z.imag() < 0.0;
  const Complex e = std::exp((lower ? -2.0 : 2.0) * kJ * z);  // |e| <= 1
  const Complex den = lower ? 1.0 - e : e - 1.0;
  if (den == Complex{}) return {Complex{}, true};
  const Complex value = kJ * (lower ? 1.0 + e : e + 1.0) / den;
  const bool finite = std::isfinite(value.real()) && std::isfinite(value.imag());
  return {finite ? value : Complex{}, !finite};
}

}  // namespace

void MaterialParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::domain_error("flow resistivity must be positive");
  }
  if (!(thickness > 0.0) || !std::isfinite(thickness)) {
    throw std::domain_error("layer thickness must be positive");
  }
}

double miki_zeta(double f_hz, double sigma_kns) {
  if (!(f_hz > 0.0) || !(sigma_kns > 0.0)) {
    throw std::domain_error("miki_zeta requires positive frequency and flow resistivity");
  }
  return f_hz / sigma_kns;
}

CharacteristicProperties miki_characteristics(const FrequencyGrid& grid,
                                              const MaterialParams& mat,
                                              const AirProperties& air) {
  mat.validate();
  air.validate();
  const Index n = grid.size();
  CharacteristicProperties out{ComplexSpectrum(n), ComplexSpectrum(n)};
  const double z0 = air.characteristic_impedance();
  for (Index i = 0; i < n; ++i) {
    const double zeta = miki_zeta(grid[i], mat.sigma);
    const double a = std::pow(zeta, -0.632);
    const double b = std::pow(zeta, -0.618);
    out.zc[i] = z0 * Complex(1.0 + 5.50 * a, -8.43 * a);
    out.kp[i] = grid.wavenumber(i, air) * Complex(1.0 + 7.81 * b, -11.41 * b);
  }
  return out;
}

ImpedanceSpectrum ImpedanceSpectrum::rigid_surface(Index size) {
  return {ComplexSpectrum::Zero(size), std::vector<bool>(static_cast<std::size_t>(size), true)};
}

ImpedanceSpectrum surface_impedance(const FrequencyGrid& grid, const MaterialParams& mat,
                                    const AirProperties& air, double theta_deg) {
  if (!(theta_deg >= 0.0 && theta_deg < 90.0)) {
    throw std::domain_error("elevation must lie in [0, 90) degrees");
  }
  const auto props = miki_characteristics(grid, mat, air);
  const double sin_theta = std::sin(deg2rad(theta_deg));
  const Index n = grid.size();
  ImpedanceSpectrum zs{ComplexSpectrum(n), std::vector<bool>(static_cast<std::size_t>(n), false)};
  for (Index i = 0; i < n; ++i) {
    Complex cos_t{1.0, 0.0};
    if (theta_deg != 0.0) {
      const Complex theta_t = std::asin(grid.wavenumber(i, air) / props.kp[i] * sin_theta);
      cos_t = std::cos(theta_t);
    }
    const auto cot = stable_cot(props.kp[i] * mat.thickness * cos_t);
    const Complex value = -kJ * props.zc[i] / cos_t * cot.value;
    if (cot.pole || !std::isfinite(value.real()) || !std::isfinite(value.imag())) {
      zs.rigid[static_cast<std::size_t>(i)] = true;
      zs.value[i] = Complex{};
    } else {
      zs.value[i] = value;
    }
  }
  return zs;
}

ComplexSpectrum reference_reflection(const ImpedanceSpectrum& zs, double theta_deg,
                                     const AirProperties& air) {
  const double cos_theta = std::cos(deg2rad(theta_deg));
  const double z0 = air.characteristic_impedance();
  ComplexSpectrum r(zs.size());
  for (Index i = 0; i < zs.size(); ++i) {
    if (zs.is_rigid(i)) {
      r[i] = 1.0;
    } else {
      const Complex zc = zs.value[i] * cos_theta;
      r[i] = (zc - z0) / (zc + z0);
    }
  }
  return r;
}

RealSpectrum reference_absorption(const FrequencyGrid& grid, const MaterialParams& mat,
                                  const AirProperties& air, double theta_deg) {
  return absorption_from_reflection(
      reference_reflection(surface_impedance(grid, mat, air, theta_deg), theta_deg, air));
}

}  // namespace insitu
