#include "insitu/core.hpp"

#include <algorithm>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace insitu {

void AirProperties::validate() const {
  if (!(c0 > 0.0) || !(rho0 > 0.0)) {
    throw std::invalid_argument("air properties must be positive (c0, rho0)");
  }
}

FrequencyGrid::FrequencyGrid(Eigen::VectorXd hz) : hz_(std::move(hz)) {
  if (hz_.size() == 0) throw std::invalid_argument("frequency grid is empty");
  for (Index i = 0; i < hz_.size(); ++i) {
    if (!(hz_[i] > 0.0) || !std::isfinite(hz_[i])) {
      throw std::invalid_argument("frequency grid entries must be positive and finite");
    }
    if (i > 0 && !(hz_[i] > hz_[i - 1])) {
      throw std::invalid_argument("frequency grid must be strictly increasing");
    }
  }
}

// 190 points, 100 Hz ... 1990 Hz: the half-open range [100, 2000) in 10 Hz steps.
FrequencyGrid FrequencyGrid::standard() { return linear(100.0, 10.0, 1990.0); }

FrequencyGrid FrequencyGrid::linear(double start, double step, double stop) {
  if (!(step > 0.0) || stop < start) throw std::invalid_argument("invalid grid range");
  const auto count = static_cast<Index>(std::floor((stop - start) / step + 1e-9)) + 1;
  Eigen::VectorXd hz(count);
  for (Index i = 0; i < count; ++i) hz[i] = start + step * static_cast<double>(i);
  return FrequencyGrid(std::move(hz));
}

Eigen::VectorXd FrequencyGrid::wavenumbers(const AirProperties& air) const {
  return hz_ * (2.0 * kPi / air.c0);
}

Fnv1a& Fnv1a::bytes(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 0x100000001b3ULL;
  }
  return *this;
}

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

void parallel_for(Index count, int threads, const std::function<void(Index)>& body) {
  if (count <= 0) return;
  const Index workers = std::clamp<Index>(threads <= 0 ? 1 : threads, 1, count);
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    const Index begin = count * w / workers;
    const Index end = count * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (Index i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed) {
  uLong crc = seed;
  const auto* p = static_cast<const Bytef*>(data);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace insitu
