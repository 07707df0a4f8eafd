#ifndef INSITU_TWOMIC_HPP
#define INSITU_TWOMIC_HPP

#include "insitu/core.hpp"
#include "insitu/geometry.hpp"

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace insitu {

enum class EstimateMethod { traditional, network, reference };

std::string_view to_string(EstimateMethod m);

struct TransferSpectrum {
  ComplexSpectrum h12;
  std::optional<ComplexSpectrum> hc;
};

struct AbsorptionSpectrum {
  RealSpectrum alpha;
  EstimateMethod method = EstimateMethod::traditional;
  std::vector<Index> flagged;
};

/// H12 / Hc. Throws listing every frequency where |Hc| < 1e-12.
ComplexSpectrum calibrate(const ComplexSpectrum& h12_raw, const ComplexSpectrum& hc,
                          const FrequencyGrid& grid);

/// Linear interpolation of the real and imaginary parts onto `target`.
/// Target frequencies that coincide with a measured node are copied exactly.
ComplexSpectrum regrid(const Eigen::VectorXd& measured_hz, const ComplexSpectrum& measured,
                       const FrequencyGrid& target);

/// Centred moving average over `window` samples (offsets -window/2 ..
/// window - 1 - window/2), shrinking at the ends.
RealSpectrum moving_average(const RealSpectrum& x, int window);

/// `passes` moving averages applied to the real and imaginary parts.
ComplexSpectrum smooth(const ComplexSpectrum& h, int window = 20, int passes = 2);

struct ReflectionEstimate {
  ComplexSpectrum r;
  std::vector<Index> flagged;  // vanishing denominator, value interpolated
};

/// Spherical-wave two-microphone reflection coefficient from H12 with the
/// specular image source (infinite-sample assumption).
ReflectionEstimate reflection_two_mic(const ComplexSpectrum& h12, const ScenarioGeometry& geom,
                                      const FrequencyGrid& grid, const AirProperties& air);

/// 1 - |R|^2 of reflection_two_mic; no clamping.
AbsorptionSpectrum absorption_two_mic(const ComplexSpectrum& h12, const ScenarioGeometry& geom,
                                      const FrequencyGrid& grid, const AirProperties& air);

/// A transfer function as measured, at its own frequency resolution.
struct MeasuredTransfer {
  Eigen::VectorXd hz;
  ComplexSpectrum h12;
  std::optional<ComplexSpectrum> hc;
};

/// CSV with header columns frequency_hz, re_h12, im_h12 and optionally
/// re_hc, im_hc (any order).
MeasuredTransfer read_measured_csv(const std::filesystem::path& path, char delimiter = ',');

/// Calibration (when Hc is present), regridding and smoothing.
TransferSpectrum condition_measurement(const MeasuredTransfer& m, const FrequencyGrid& grid,
                                       int window = 20, int passes = 2);

}  // namespace insitu

#endif  // INSITU_TWOMIC_HPP
