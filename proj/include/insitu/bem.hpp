#ifndef INSITU_BEM_HPP
#define INSITU_BEM_HPP

#include "insitu/core.hpp"
#include "insitu/geometry.hpp"
#include "insitu/material.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace insitu {

/// Uniform grid of nx * ny rectangular elements tiling
/// [-lx/2, lx/2] x [-ly/2, ly/2] at z = 0. Element n = iy * nx + ix.
struct BemMesh {
  double lx = 0.0;
  double ly = 0.0;
  int nx = 0;
  int ny = 0;

  double dx() const { return lx / nx; }
  double dy() const { return ly / ny; }
  Index size() const { return static_cast<Index>(nx) * ny; }
  Index index(int ix, int iy) const { return static_cast<Index>(iy) * nx + ix; }
  Vec3 centroid(Index n) const;
  bool operator==(const BemMesh&) const = default;
};

/// Mesh with near-square elements whose edges do not exceed
/// c0 / (f_max * elements_per_wavelength).
BemMesh build_mesh(double lx, double ly, double elements_per_wavelength, double f_max,
                   const AirProperties& air);

struct QuadratureOptions {
  int order = 6;  // points per axis; 6 x 6 = 36 per element
  /// Elements closer than near_ratio * edge to the observation point are split
  /// into subcells no larger than distance / near_ratio. Zero disables.
  double near_ratio = 2.0;
  int max_split = 64;
};

/// Integral of e^{-jkr} / (4 pi r) over a rectangle centred at `centre`
/// (in the z = 0 plane) with sides (a, b), observed from `point`. The point
/// must not lie on the rectangle unless it is the centroid, for which use
/// self_integral.
Complex element_integral(const Vec3& point, const Eigen::Vector2d& centre, double a, double b,
                         double k, const QuadratureOptions& opts);

/// Same integral observed from the element's own centroid: the static part is
/// the closed-form rectangle potential, the bounded remainder
/// (e^{-jkr} - 1) / (4 pi r) is integrated in polar coordinates about the
/// centroid with a fixed 24-point angular rule.
Complex self_integral(double a, double b, double k, const QuadratureOptions& opts = {});

/// Collocation matrices G[i][n] = int_{S_n} e^{-jk r_i} / (4 pi r_i) dS for
/// every grid frequency. On a uniform mesh G[i][n] depends only on the
/// absolute index offset (|dix|, |diy|), so each frequency is stored as an
/// nx-by-ny generator table and expanded on demand.
class GreenMatrixSet {
 public:
  GreenMatrixSet(BemMesh mesh, FrequencyGrid grid, AirProperties air, QuadratureOptions quad,
                 std::vector<Eigen::MatrixXcd> tables);

  const BemMesh& mesh() const { return mesh_; }
  const FrequencyGrid& grid() const { return grid_; }
  const AirProperties& air() const { return air_; }
  const QuadratureOptions& quadrature() const { return quad_; }

  const Eigen::MatrixXcd& kernel_table(Index f) const { return tables_[static_cast<std::size_t>(f)]; }
  Complex entry(Index f, Index i, Index n) const;
  /// Dense N x N matrix for frequency index f.
  Eigen::MatrixXcd matrix(Index f) const;

  /// Hash of everything the matrices depend on (mesh, grid, c0, quadrature).
  std::string key() const { return key_for(mesh_, grid_, air_, quad_); }
  static std::string key_for(const BemMesh& mesh, const FrequencyGrid& grid,
                             const AirProperties& air, const QuadratureOptions& quad);

 private:
  BemMesh mesh_;
  FrequencyGrid grid_;
  AirProperties air_;
  QuadratureOptions quad_;
  std::vector<Eigen::MatrixXcd> tables_;
};

GreenMatrixSet assemble_green_matrices(const BemMesh& mesh, const FrequencyGrid& grid,
                                       const AirProperties& air,
                                       const QuadratureOptions& quad = {}, int threads = 1);

/// Kernel table for a single wavenumber (one GreenMatrixSet frequency slot).
Eigen::MatrixXcd assemble_kernel_table(const BemMesh& mesh, double k,
                                       const QuadratureOptions& quad);

/// Rows of element integrals for field points strictly above the surface,
/// one (points x N) matrix per grid frequency.
std::vector<Eigen::MatrixXcd> assemble_receiver_rows(const BemMesh& mesh,
                                                     std::span<const Vec3> points,
                                                     const FrequencyGrid& grid,
                                                     const AirProperties& air,
                                                     const QuadratureOptions& quad = {});

/// Direct plus image-source field e^{-jkR}/R + e^{-jkR'}/R' (no 1/4pi),
/// returned as (points x frequencies).
Eigen::MatrixXcd incident_field(std::span<const Vec3> points, const Vec3& source,
                                const FrequencyGrid& grid, const AirProperties& air);

struct SurfacePressureField {
  Eigen::MatrixXcd pressure;  // N x F
  Eigen::VectorXd residual;   // |M p - b| / |b| per frequency
};

/// Solves (0.5 I + j k0 (rho0 c0 / Zs) G) p = b at every frequency by dense
/// LU with partial pivoting. Rigid frequencies reduce to p = 2 b.
SurfacePressureField solve_surface_pressure(const GreenMatrixSet& green,
                                            const ImpedanceSpectrum& zs, const Vec3& source,
                                            int threads = 1);

struct ReceiverPressures {
  Eigen::MatrixXcd pressure;  // points x F
};

/// p(r) = incident(r) - j k0 (rho0 c0 / Zs) sum_n p_n G_recv[r][n].
ReceiverPressures field_at_receivers(const std::vector<Eigen::MatrixXcd>& receiver_rows,
                                     const SurfacePressureField& surface,
                                     const ImpedanceSpectrum& zs, const Vec3& source,
                                     std::span<const Vec3> points, const FrequencyGrid& grid,
                                     const AirProperties& air);

class GreenCache;

struct SimulationOptions {
  double elements_per_wavelength = 6.0;
  double mesh_frequency = 2000.0;  // design frequency for the element size
  QuadratureOptions quadrature{};
  int threads = 1;
  bool rigid = false;
  /// Elevation used for Zs in the boundary condition; defaults to the
  /// source elevation.
  std::optional<double> impedance_theta_deg{};
};

struct TransferSimulation {
  ComplexSpectrum h12;
  ComplexSpectrum p1;
  ComplexSpectrum p2;
  std::vector<Index> flagged;  // |p2| below 1e-12 max|p2|
  double max_residual = 0.0;
  BemMesh mesh;
};

/// Receiver pressures and H12 = p1 / p2 for a scenario whose collocation
/// matrices are already available.
TransferSimulation simulate_with_matrices(const GreenMatrixSet& green,
                                          const std::vector<Eigen::MatrixXcd>& receiver_rows,
                                          const ScenarioGeometry& geom,
                                          const ImpedanceSpectrum& zs, int threads = 1);

/// simulate_with_matrices for many scenarios sharing one mesh. Each frequency's
/// matrix is reduced once to Hessenberg form G = Q H Q^H, after which every
/// scenario costs O(N^2); solves whose residual exceeds 1e-10 are redone by
/// dense LU. Results do not depend on the other scenarios in the batch.
std::vector<TransferSimulation> simulate_batch(const GreenMatrixSet& green,
                                               const std::vector<Eigen::MatrixXcd>& receiver_rows,
                                               std::span<const ScenarioGeometry> geoms,
                                               std::span<const ImpedanceSpectrum> zs, int threads = 1);

/// Full chain: mesh, matrices (through `cache` when given), material, solve.
TransferSimulation simulate_transfer_function(const ScenarioGeometry& geom,
                                              const MaterialParams& mat,
                                              const AirProperties& air,
                                              const FrequencyGrid& grid,
                                              const SimulationOptions& opts = {},
                                              const GreenCache* cache = nullptr);

}  // namespace insitu

#endif  // INSITU_BEM_HPP
