#ifndef INSITU_VERIFICATION_HPP
#define INSITU_VERIFICATION_HPP

#include "insitu/config.hpp"
#include "insitu/green_cache.hpp"

#include <string>
#include <vector>

namespace insitu {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double tolerance = 0.0;  // pass bound for `value`
  std::string detail;
  double seconds = 0.0;
};

/// 0.6 m x 0.6 m glass-wool sample (54.7 kN s/m^4, 20 mm), source 1.21 m
/// above its centre.
ScenarioConfig reference_scenario();

/// Rigid sample: receiver pressures against the direct + image field.
CheckResult verify_rigid_limit(int threads = 1, double elements_per_wavelength = 4.0,
                               const GreenCache* cache = nullptr);
/// Known reflection coefficients recovered from a synthetic spherical-wave
/// field.
CheckResult verify_round_trip();
/// Analytic against central-difference gradients on the miniature network,
/// worst relative error over parameter slots.
CheckResult verify_gradient(std::uint64_t seed = 7);
/// Largest relative change of H12 when the element size of the reference
/// scenario is halved (6 to 12 elements per wavelength).
CheckResult verify_mesh_convergence(int threads = 1, const GreenCache* cache = nullptr);

struct EdgeEffect {
  int sign_changes = 0;
  double min_alpha_below_500 = 0.0;
};
EdgeEffect edge_effect(const RealSpectrum& alpha_two_mic, const RealSpectrum& alpha_reference,
                       const FrequencyGrid& grid);
/// Sign structure of the two-microphone error on the reference scenario.
CheckResult verify_edge_effect(int threads = 1, const GreenCache* cache = nullptr);

std::vector<std::string> verification_suites();
CheckResult run_check(const std::string& suite, int threads, const GreenCache* cache);

}  // namespace insitu

#endif  // INSITU_VERIFICATION_HPP
