#include "insitu/green_cache.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace insitu {

static_assert(std::endian::native == std::endian::little, "cache records are little-endian");

namespace {

constexpr char kMagic[8] = {'I', 'N', 'S', 'G', 'R', 'E', 'E', 'N'};

template <typename T>
void put(std::string& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof value);
}

template <typename T>
T get(const std::string& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof value);
  return value;
}

std::filesystem::path record_path(const std::filesystem::path& dir, Index f) {
  std::ostringstream name;
  name << 'f' << f << ".bin";
  return dir / name.str();
}

}  // namespace

GreenCache::GreenCache(std::filesystem::path root) : root_(std::move(root)) {}

GreenCache GreenCache::from_environment(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("INSITU_CACHE_DIR"); env && *env) return GreenCache(env);
  return GreenCache(fallback);
}

std::optional<GreenMatrixSet> GreenCache::load(const BemMesh& mesh, const FrequencyGrid& grid,
                                               const AirProperties& air,
                                               const QuadratureOptions& quad) const {
  const auto dir = directory_for(GreenMatrixSet::key_for(mesh, grid, air, quad));
  std::vector<Eigen::MatrixXcd> tables;
  tables.reserve(static_cast<std::size_t>(grid.size()));
  const std::size_t payload = static_cast<std::size_t>(mesh.size()) * 2 * sizeof(double);
  for (Index f = 0; f < grid.size(); ++f) {
    const auto path = record_path(dir, f);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto fail = [&](const char* what) {
      return CacheError("corrupt cache record " + path.string() + ": " + what);
    };
    if (buf.size() != kHeaderSize + payload) throw fail("size");
    if (std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) throw fail("magic");
    if (get<std::uint32_t>(buf, 8) != kFormatVersion) throw fail("version");
    if (get<std::uint32_t>(buf, 12) != static_cast<std::uint32_t>(mesh.nx) ||
        get<std::uint32_t>(buf, 16) != static_cast<std::uint32_t>(mesh.ny) ||
        get<std::uint32_t>(buf, 20) != static_cast<std::uint32_t>(f) ||
        get<std::uint64_t>(buf, 24) != static_cast<std::uint64_t>(mesh.size()) ||
        get<double>(buf, 32) != grid[f]) {
      throw fail("header mismatch");
    }
    if (get<std::uint32_t>(buf, 68) != crc32(buf.data() + kHeaderSize, payload)) throw fail("checksum");
    Eigen::MatrixXcd t(mesh.nx, mesh.ny);
    std::memcpy(t.data(), buf.data() + kHeaderSize, payload);
    tables.push_back(std::move(t));
  }
  return GreenMatrixSet(mesh, grid, air, quad, std::move(tables));
}

void GreenCache::store(const GreenMatrixSet& set) const {
  const auto dir = directory_for(set.key());
  std::filesystem::create_directories(dir);
  const auto& mesh = set.mesh();
  const std::size_t payload = static_cast<std::size_t>(mesh.size()) * 2 * sizeof(double);
  for (Index f = 0; f < set.grid().size(); ++f) {
    std::string buf(kHeaderSize + payload, '\0');
    std::memcpy(buf.data(), kMagic, sizeof kMagic);
    put<std::uint32_t>(buf, 8, kFormatVersion);
    put<std::uint32_t>(buf, 12, static_cast<std::uint32_t>(mesh.nx));
    put<std::uint32_t>(buf, 16, static_cast<std::uint32_t>(mesh.ny));
    put<std::uint32_t>(buf, 20, static_cast<std::uint32_t>(f));
    put<std::uint64_t>(buf, 24, static_cast<std::uint64_t>(mesh.size()));
    put<double>(buf, 32, set.grid()[f]);
    put<double>(buf, 40, set.grid().wavenumber(f, set.air()));
    put<double>(buf, 48, mesh.dx());
    put<double>(buf, 56, mesh.dy());
    put<std::uint32_t>(buf, 64, static_cast<std::uint32_t>(set.quadrature().order));
    std::memcpy(buf.data() + kHeaderSize, set.kernel_table(f).data(), payload);
    put<std::uint32_t>(buf, 68, crc32(buf.data() + kHeaderSize, payload));

    const auto path = record_path(dir, f);
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      if (!out) throw CacheError("failed to write cache record " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }
}

GreenMatrixSet GreenCache::get_or_assemble(const BemMesh& mesh, const FrequencyGrid& grid,
                                           const AirProperties& air,
                                           const QuadratureOptions& quad, int threads,
                                           bool* assembled) const {
  try {
    if (auto hit = load(mesh, grid, air, quad)) {
      if (assembled) *assembled = false;
      return std::move(*hit);
    }
  } catch (const CacheError& e) {
    std::cerr << "warning: " << e.what() << "; reassembling\n";
  }
  auto set = assemble_green_matrices(mesh, grid, air, quad, threads);
  store(set);
  if (assembled) *assembled = true;
  return set;
}

}  // namespace insitu
