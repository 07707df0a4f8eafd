#ifndef INSITU_CORE_HPP
#define INSITU_CORE_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace insitu {

using Complex = std::complex<double>;
using Index = Eigen::Index;

/// One complex value per grid frequency.
using ComplexSpectrum = Eigen::VectorXcd;
/// One real value per grid frequency.
using RealSpectrum = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

inline constexpr Complex kJ{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

/// Degrees to radians.
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }

struct AirProperties {
  double c0 = 343.0;    // m/s
  double rho0 = 1.21;   // kg/m^3

  double characteristic_impedance() const { return rho0 * c0; }
  void validate() const;
};

/// Ordered set of analysis frequencies in Hz.
class FrequencyGrid {
 public:
  explicit FrequencyGrid(Eigen::VectorXd hz);

  /// 190 points from 100 Hz in 10 Hz steps (last point 1990 Hz).
  static FrequencyGrid standard();
  /// Inclusive arithmetic progression start:step:stop.
  static FrequencyGrid linear(double start, double step, double stop);

  Index size() const { return hz_.size(); }
  const Eigen::VectorXd& hz() const { return hz_; }
  double operator[](Index i) const { return hz_[i]; }
  double max() const { return hz_[hz_.size() - 1]; }

  double wavenumber(Index i, const AirProperties& air) const {
    return 2.0 * kPi * hz_[i] / air.c0;
  }
  Eigen::VectorXd wavenumbers(const AirProperties& air) const;

  bool operator==(const FrequencyGrid& other) const { return hz_ == other.hz_; }

 private:
  Eigen::VectorXd hz_;
};

/// 64-bit FNV-1a; used for cache keys and config hashes.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t size);
  Fnv1a& value(double v) { return bytes(&v, sizeof v); }
  Fnv1a& value(std::int64_t v) { return bytes(&v, sizeof v); }
  Fnv1a& text(std::string_view s) { return bytes(s.data(), s.size()); }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work is split
/// into contiguous chunks, so results written to distinct slots are
/// independent of the thread count.
void parallel_for(Index count, int threads, const std::function<void(Index)>& body);

/// CRC-32 (zlib polynomial).
std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed = 0);

}  // namespace insitu

#endif  // INSITU_CORE_HPP
