#ifndef INSITU_GREEN_CACHE_HPP
#define INSITU_GREEN_CACHE_HPP

#include "insitu/bem.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>

namespace insitu {

class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk store of collocation kernel tables.
///
/// Layout: `<root>/<key>/f<index>.bin`, one record per grid frequency, where
/// `<key>` is GreenMatrixSet::key(). Each record is little-endian:
///
///     offset  size  field
///          0     8  magic "INSGREEN"
///          8     4  u32 format version (1)
///         12     4  u32 nx
///         16     4  u32 ny
///         20     4  u32 frequency index
///         24     8  u64 N = nx * ny (element count)
///         32     8  f64 frequency [Hz]
///         40     8  f64 wavenumber [rad/m]
///         48     8  f64 element size dx [m]
///         56     8  f64 element size dy [m]
///         64     4  u32 quadrature order
///         68     4  u32 CRC-32 of the payload
///         72        payload: nx * ny complex values (f64 re, f64 im),
///                   column-major (x offset fastest)
///
/// The payload is the generator table of the N x N matrix; see GreenMatrixSet.
class GreenCache {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;
  static constexpr std::size_t kHeaderSize = 72;

  explicit GreenCache(std::filesystem::path root);

  /// Root taken from $INSITU_CACHE_DIR, else `fallback`.
  static GreenCache from_environment(const std::filesystem::path& fallback);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path directory_for(const std::string& key) const { return root_ / key; }

  /// nullopt when any record is missing; CacheError when a record is corrupt.
  std::optional<GreenMatrixSet> load(const BemMesh& mesh, const FrequencyGrid& grid,
                                     const AirProperties& air,
                                     const QuadratureOptions& quad) const;
  void store(const GreenMatrixSet& set) const;

  /// Loads, or assembles and stores. `assembled` reports which happened.
  GreenMatrixSet get_or_assemble(const BemMesh& mesh, const FrequencyGrid& grid,
                                 const AirProperties& air, const QuadratureOptions& quad,
                                 int threads = 1, bool* assembled = nullptr) const;

 private:
  std::filesystem::path root_;
};

}  // namespace insitu

#endif  // INSITU_GREEN_CACHE_HPP
