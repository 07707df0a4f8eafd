#include "insitu/bem.hpp"

#include "insitu/green_cache.hpp"
#include "insitu/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace insitu {

void ScenarioGeometry::validate() const {
  if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("sample dimensions must be positive");
  if (!(elevation_deg >= 0.0 && elevation_deg < 90.0)) {
    throw std::invalid_argument("source elevation must lie in [0, 90) degrees");
  }
  if (!(source_distance > 0.0)) throw std::invalid_argument("source distance must be positive");
  if (!(mic_z1 > 0.0) || !(mic_z2 > 0.0) || mic_z1 == mic_z2) {
    throw std::invalid_argument("microphone heights must be positive and distinct");
  }
  if (!(source().z() > 0.0)) throw std::invalid_argument("source must lie above the baffle");
}

Vec3 ScenarioGeometry::source() const {
  const double th = deg2rad(elevation_deg);
  const double ph = deg2rad(azimuth_deg);
  return source_distance * Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
}

Vec3 ScenarioGeometry::image_source() const {
  Vec3 s = source();
  s.z() = -s.z();
  return s;
}

Vec3 BemMesh::centroid(Index n) const {
  const auto ix = static_cast<double>(n % nx);
  const auto iy = static_cast<double>(n / nx);
  return {-0.5 * lx + (ix + 0.5) * dx(), -0.5 * ly + (iy + 0.5) * dy(), 0.0};
}

BemMesh build_mesh(double lx, double ly, double elements_per_wavelength, double f_max,
                   const AirProperties& air) {
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw std::invalid_argument("degenerate sample dimensions");
  }
  if (!(elements_per_wavelength > 0.0)) {
    throw std::invalid_argument("elements per wavelength must be positive");
  }
  if (!(f_max > 0.0)) throw std::invalid_argument("mesh design frequency must be positive");
  const double edge = air.c0 / (f_max * elements_per_wavelength);
  // The small slack keeps exact multiples (e.g. 0.2 m / 2.857 cm = 7) from
  // rounding up through floating-point noise.
  const auto count = [edge](double length) {
    return std::max(1, static_cast<int>(std::ceil(length / edge - 1e-9)));
  };
  return {lx, ly, count(lx), count(ly)};
}

namespace {

constexpr double kInvFourPi = 1.0 / (4.0 * kPi);

const QuadratureRule<double>& cached_rule(int order) {
  thread_local int cached_order = -1;
  thread_local QuadratureRule<double> rule;
  if (order != cached_order) {
    rule = gauss_legendre<double>(order);
    cached_order = order;
  }
  return rule;
}

// m x m subcells of order x order Gauss points each.
Complex integrate_rectangle(const Vec3& p, double cx, double cy, double a, double b, double k,
                            int order, int m) {
  const auto& rule = cached_rule(order);
  const double sa = a / m;
  const double sb = b / m;
  const double jac = 0.25 * sa * sb;
  double re = 0.0;
  double im = 0.0;
  for (int u = 0; u < m; ++u) {
    const double ux = cx - 0.5 * a + (u + 0.5) * sa;
    for (int v = 0; v < m; ++v) {
      const double vy = cy - 0.5 * b + (v + 0.5) * sb;
      for (int i = 0; i < order; ++i) {
        const double ddx = ux + 0.5 * sa * rule.nodes[i] - p.x();
        for (int j = 0; j < order; ++j) {
          const double ddy = vy + 0.5 * sb * rule.nodes[j] - p.y();
          const double r = std::sqrt(ddx * ddx + ddy * ddy + p.z() * p.z());
          const double w = rule.weights[i] * rule.weights[j] / r;
          re += w * std::cos(k * r);
          im -= w * std::sin(k * r);
        }
      }
    }
  }
  return Complex(re, im) * (jac * kInvFourPi);
}

}  // namespace

Complex element_integral(const Vec3& point, const Eigen::Vector2d& centre, double a, double b,
                         double k, const QuadratureOptions& opts) {
  const double ox = std::max(0.0, std::abs(point.x() - centre.x()) - 0.5 * a);
  const double oy = std::max(0.0, std::abs(point.y() - centre.y()) - 0.5 * b);
  const double dist = std::sqrt(ox * ox + oy * oy + point.z() * point.z());
  const double edge = std::max(a, b);
  int split = 1;
  if (opts.near_ratio > 0.0 && dist < opts.near_ratio * edge) {
    if (dist == 0.0) throw std::domain_error("observation point lies on the element");
    split = std::clamp(static_cast<int>(std::ceil(opts.near_ratio * edge / dist)), 1, opts.max_split);
  }
  return integrate_rectangle(point, centre.x(), centre.y(), a, b, k, opts.order, split);
}

Complex self_integral(double a, double b, double k, const QuadratureOptions&) {
  const Complex static_part = rectangle_centroid_potential(a, b) * kInvFourPi;
  // Remainder (e^{-jkr} - 1) / r in polar coordinates about the centroid. Per
  // ray of length R the radial integral is R (sin x / x - 1) - 2j sin^2(x/2) / k
  // with x = kR; the angular integral is smooth and done by Gauss-Legendre.
  static const auto rule = gauss_legendre<double>(24);
  const auto triangle = [&](double near, double far) {
    const double span = std::atan2(far, near);
    double re = 0.0;
    double im = 0.0;
    for (Index i = 0; i < rule.nodes.size(); ++i) {
      const double theta = 0.5 * span * (rule.nodes[i] + 1.0);
      const double r = near / std::cos(theta);
      const double x = k * r;
      const double s = std::sin(0.5 * x);
      const double sinc = x > 1e-4 ? std::sin(x) / x - 1.0 : -x * x / 6.0;
      re += rule.weights[i] * r * sinc;
      im -= rule.weights[i] * 2.0 * s * s / k;
    }
    return 0.5 * span * Complex(re, im);
  };
  const double qa = 0.5 * a;
  const double qb = 0.5 * b;
  // Each quadrant splits into two right triangles at the centroid.
  const Complex quadrant = k > 0.0 ? triangle(qa, qb) + triangle(qb, qa) : Complex{};
  return static_part + 4.0 * kInvFourPi * quadrant;
}

GreenMatrixSet::GreenMatrixSet(BemMesh mesh, FrequencyGrid grid, AirProperties air,
                               QuadratureOptions quad, std::vector<Eigen::MatrixXcd> tables)
    : mesh_(mesh), grid_(std::move(grid)), air_(air), quad_(quad), tables_(std::move(tables)) {
  if (static_cast<Index>(tables_.size()) != grid_.size()) {
    throw std::invalid_argument("one kernel table per frequency required");
  }
  for (const auto& t : tables_) {
    if (t.rows() != mesh_.nx || t.cols() != mesh_.ny) {
      throw std::invalid_argument("kernel table shape does not match the mesh");
    }
  }
}

Complex GreenMatrixSet::entry(Index f, Index i, Index n) const {
  const Index nx = mesh_.nx;
  const Index dix = std::abs(i % nx - n % nx);
  const Index diy = std::abs(i / nx - n / nx);
  return tables_[static_cast<std::size_t>(f)](dix, diy);
}

Eigen::MatrixXcd GreenMatrixSet::matrix(Index f) const {
  const auto& t = tables_[static_cast<std::size_t>(f)];
  const Index nx = mesh_.nx;
  const Index ny = mesh_.ny;
  const Index n = mesh_.size();
  Eigen::MatrixXcd g(n, n);
  for (Index jy = 0; jy < ny; ++jy) {
    for (Index jx = 0; jx < nx; ++jx) {
      const Index col = jy * nx + jx;
      for (Index iy = 0; iy < ny; ++iy) {
        const Index diy = std::abs(iy - jy);
        for (Index ix = 0; ix < nx; ++ix) g(iy * nx + ix, col) = t(std::abs(ix - jx), diy);
      }
    }
  }
  return g;
}

std::string GreenMatrixSet::key_for(const BemMesh& mesh, const FrequencyGrid& grid,
                                    const AirProperties& air, const QuadratureOptions& quad) {
  Fnv1a h;
  h.text("green-v2");
  h.value(mesh.lx).value(mesh.ly);
  h.value(static_cast<std::int64_t>(mesh.nx)).value(static_cast<std::int64_t>(mesh.ny));
  h.value(air.c0);
  h.value(static_cast<std::int64_t>(quad.order)).value(quad.near_ratio);
  h.value(static_cast<std::int64_t>(quad.max_split));
  h.value(static_cast<std::int64_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) h.value(grid[i]);
  return h.hex();
}

Eigen::MatrixXcd assemble_kernel_table(const BemMesh& mesh, double k,
                                       const QuadratureOptions& quad) {
  const double a = mesh.dx();
  const double b = mesh.dy();
  Eigen::MatrixXcd table(mesh.nx, mesh.ny);
  const Vec3 origin = Vec3::Zero();
  for (int iy = 0; iy < mesh.ny; ++iy) {
    for (int ix = 0; ix < mesh.nx; ++ix) {
      table(ix, iy) = (ix == 0 && iy == 0)
                          ? self_integral(a, b, k, quad)
                          : element_integral(origin, {ix * a, iy * b}, a, b, k, quad);
    }
  }
  return table;
}

GreenMatrixSet assemble_green_matrices(const BemMesh& mesh, const FrequencyGrid& grid,
                                       const AirProperties& air, const QuadratureOptions& quad,
                                       int threads) {
  std::vector<Eigen::MatrixXcd> tables(static_cast<std::size_t>(grid.size()));
  parallel_for(grid.size(), threads, [&](Index f) {
    tables[static_cast<std::size_t>(f)] = assemble_kernel_table(mesh, grid.wavenumber(f, air), quad);
  });
  return GreenMatrixSet(mesh, grid, air, quad, std::move(tables));
}

std::vector<Eigen::MatrixXcd> assemble_receiver_rows(const BemMesh& mesh,
                                                     std::span<const Vec3> points,
                                                     const FrequencyGrid& grid,
                                                     const AirProperties& air,
                                                     const QuadratureOptions& quad) {
  for (const auto& p : points) {
    if (!(p.z() > 0.0)) throw std::domain_error("receivers must lie strictly above the surface");
  }
  const auto np = static_cast<Index>(points.size());
  std::vector<Eigen::MatrixXcd> rows(static_cast<std::size_t>(grid.size()),
                                     Eigen::MatrixXcd(np, mesh.size()));
  for (Index f = 0; f < grid.size(); ++f) {
    const double k = grid.wavenumber(f, air);
    for (Index r = 0; r < np; ++r) {
      for (Index n = 0; n < mesh.size(); ++n) {
        const Vec3 c = mesh.centroid(n);
        rows[static_cast<std::size_t>(f)](r, n) =
            element_integral(points[static_cast<std::size_t>(r)], c.head<2>(), mesh.dx(), mesh.dy(), k, quad);
      }
    }
  }
  return rows;
}

namespace {

struct SourceDistances {
  Eigen::VectorXd direct;
  Eigen::VectorXd image;
};

SourceDistances source_distances(std::span<const Vec3> points, const Vec3& source) {
  Vec3 image = source;
  image.z() = -image.z();
  const auto n = static_cast<Index>(points.size());
  SourceDistances d{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Index i = 0; i < n; ++i) {
    const Vec3& p = points[static_cast<std::size_t>(i)];
    d.direct[i] = (p - source).norm();
    d.image[i] = (p - image).norm();
    if (d.direct[i] == 0.0) throw std::domain_error("field point coincides with the source");
  }
  return d;
}

Eigen::VectorXcd incident_at(const SourceDistances& d, double k) {
  Eigen::VectorXcd out(d.direct.size());
  for (Index i = 0; i < out.size(); ++i) {
    out[i] = std::polar(1.0 / d.direct[i], -k * d.direct[i]) +
             std::polar(1.0 / d.image[i], -k * d.image[i]);
  }
  return out;
}

std::vector<Vec3> collocation_points(const BemMesh& mesh) {
  std::vector<Vec3> pts(static_cast<std::size_t>(mesh.size()));
  for (Index n = 0; n < mesh.size(); ++n) pts[static_cast<std::size_t>(n)] = mesh.centroid(n);
  return pts;
}

struct FrequencySolution {
  Eigen::VectorXcd p;
  double residual = 0.0;
};

FrequencySolution solve_frequency(const GreenMatrixSet& green, Index f, Complex coupling,
                                  const Eigen::VectorXcd& b) {
  if (coupling == Complex{}) return {2.0 * b, 0.0};
  const Index n = green.mesh().size();
  Eigen::MatrixXcd m = green.matrix(f) * coupling;
  m.diagonal().array() += 0.5;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
  FrequencySolution sol{lu.solve(b), 0.0};
  sol.residual = (m * sol.p - b).norm() / b.norm();
  const double rcond = lu.rcond();
  if (!std::isfinite(sol.residual) || sol.residual > 1e-8 || !(rcond > 1e-15)) {
    std::ostringstream msg;
    msg << "singular boundary system at " << green.grid()[f] << " Hz (N = " << n
        << ", rcond ~ " << rcond << ", residual " << sol.residual << ")";
    throw std::runtime_error(msg.str());
  }
  return sol;
}

Complex coupling_factor(const ImpedanceSpectrum& zs, Index f, double k, const AirProperties& air) {
  return kJ * k * zs.normalized_admittance(f, air);
}

/// G = Q H Q^H, so that (0.5 I + c G) p = b reduces to a Hessenberg system.
class ShiftedSystem {
 public:
  explicit ShiftedSystem(Eigen::MatrixXcd g) : g_(std::move(g)) {
    Eigen::HessenbergDecomposition<Eigen::MatrixXcd> hd(g_);
    h_ = hd.matrixH();
    q_ = hd.matrixQ();
  }

  Eigen::VectorXcd solve(Complex c, const Eigen::VectorXcd& b) const {
    const Index n = h_.rows();
    RowMatrix a = c * h_;
    a.diagonal().array() += 0.5;
    Eigen::VectorXcd z = q_.adjoint() * b;
    for (Index k = 0; k + 1 < n; ++k) {
      const Index w = n - k;
      if (std::abs(a(k + 1, k)) > std::abs(a(k, k))) {
        a.row(k).tail(w).swap(a.row(k + 1).tail(w));
        std::swap(z[k], z[k + 1]);
      }
      const Complex l = a(k + 1, k) / a(k, k);
      a.row(k + 1).tail(w - 1) -= l * a.row(k).tail(w - 1);
      z[k + 1] -= l * z[k];
    }
    a.triangularView<Eigen::Upper>().solveInPlace(z);
    return q_ * z;
  }

  double residual(Complex c, const Eigen::VectorXcd& p, const Eigen::VectorXcd& b) const {
    return (0.5 * p + c * (g_ * p) - b).norm() / b.norm();
  }

 private:
  using RowMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::MatrixXcd g_;
  Eigen::MatrixXcd h_;
  Eigen::MatrixXcd q_;
};

void finalize_transfer(TransferSimulation& sim, const Eigen::VectorXd& residual) {
  sim.max_residual = residual.size() ? residual.maxCoeff() : 0.0;
  sim.h12 = sim.p1.cwiseQuotient(sim.p2);
  const double p2_max = sim.p2.cwiseAbs().maxCoeff();
  for (Index f = 0; f < sim.h12.size(); ++f) {
    if (std::abs(sim.p2[f]) < 1e-12 * p2_max || !std::isfinite(std::abs(sim.h12[f]))) {
      sim.flagged.push_back(f);
      sim.h12[f] = Complex{};
    }
  }
}

}  // namespace

Eigen::MatrixXcd incident_field(std::span<const Vec3> points, const Vec3& source,
                                const FrequencyGrid& grid, const AirProperties& air) {
  for (const auto& p : points) {
    if (p.z() < 0.0) throw std::domain_error("field points must satisfy z >= 0");
  }
  const auto d = source_distances(points, source);
  Eigen::MatrixXcd out(static_cast<Index>(points.size()), grid.size());
  for (Index f = 0; f < grid.size(); ++f) out.col(f) = incident_at(d, grid.wavenumber(f, air));
  return out;
}

SurfacePressureField solve_surface_pressure(const GreenMatrixSet& green,
                                            const ImpedanceSpectrum& zs, const Vec3& source,
                                            int threads) {
  const auto& grid = green.grid();
  if (zs.size() != grid.size()) throw std::invalid_argument("impedance/grid length mismatch");
  const auto pts = collocation_points(green.mesh());
  const auto d = source_distances(pts, source);
  SurfacePressureField out{Eigen::MatrixXcd(green.mesh().size(), grid.size()),
                           Eigen::VectorXd(grid.size())};
  parallel_for(grid.size(), threads, [&](Index f) {
    const double k = grid.wavenumber(f, green.air());
    auto sol = solve_frequency(green, f, coupling_factor(zs, f, k, green.air()), incident_at(d, k));
    out.pressure.col(f) = sol.p;
    out.residual[f] = sol.residual;
  });
  return out;
}

ReceiverPressures field_at_receivers(const std::vector<Eigen::MatrixXcd>& receiver_rows,
                                     const SurfacePressureField& surface,
                                     const ImpedanceSpectrum& zs, const Vec3& source,
                                     std::span<const Vec3> points, const FrequencyGrid& grid,
                                     const AirProperties& air) {
  ReceiverPressures out{incident_field(points, source, grid, air)};
  for (Index f = 0; f < grid.size(); ++f) {
    const Complex c = coupling_factor(zs, f, grid.wavenumber(f, air), air);
    if (c == Complex{}) continue;
    out.pressure.col(f) -= c * (receiver_rows[static_cast<std::size_t>(f)] * surface.pressure.col(f));
  }
  return out;
}

TransferSimulation simulate_with_matrices(const GreenMatrixSet& green,
                                          const std::vector<Eigen::MatrixXcd>& receiver_rows,
                                          const ScenarioGeometry& geom,
                                          const ImpedanceSpectrum& zs, int threads) {
  geom.validate();
  const auto& grid = green.grid();
  const auto& air = green.air();
  if (zs.size() != grid.size()) throw std::invalid_argument("impedance/grid length mismatch");
  const Vec3 source = geom.source();
  const std::vector<Vec3> mics{geom.mic1(), geom.mic2()};
  const auto coll = collocation_points(green.mesh());
  const auto d_coll = source_distances(coll, source);
  const auto d_mics = source_distances(mics, source);

  TransferSimulation sim;
  sim.mesh = green.mesh();
  sim.p1.resize(grid.size());
  sim.p2.resize(grid.size());
  Eigen::VectorXd residual = Eigen::VectorXd::Zero(grid.size());
  parallel_for(grid.size(), threads, [&](Index f) {
    const double k = grid.wavenumber(f, air);
    const Complex c = coupling_factor(zs, f, k, air);
    Eigen::VectorXcd p_mic = incident_at(d_mics, k);
    if (c != Complex{}) {
      const auto sol = solve_frequency(green, f, c, incident_at(d_coll, k));
      p_mic -= c * (receiver_rows[static_cast<std::size_t>(f)] * sol.p);
      residual[f] = sol.residual;
    }
    sim.p1[f] = p_mic[0];
    sim.p2[f] = p_mic[1];
  });
  finalize_transfer(sim, residual);
  return sim;
}

std::vector<TransferSimulation> simulate_batch(const GreenMatrixSet& green,
                                               const std::vector<Eigen::MatrixXcd>& receiver_rows,
                                               std::span<const ScenarioGeometry> geoms,
                                               std::span<const ImpedanceSpectrum> zs, int threads) {
  if (geoms.size() != zs.size()) throw std::invalid_argument("scenario/impedance count mismatch");
  const auto& grid = green.grid();
  const auto& air = green.air();
  const auto coll = collocation_points(green.mesh());
  const std::size_t count = geoms.size();
  std::vector<SourceDistances> d_coll, d_mics;
  std::vector<TransferSimulation> sims(count);
  for (std::size_t s = 0; s < count; ++s) {
    geoms[s].validate();
    if (zs[s].size() != grid.size()) throw std::invalid_argument("impedance/grid length mismatch");
    const Vec3 source = geoms[s].source();
    const std::vector<Vec3> mics{geoms[s].mic1(), geoms[s].mic2()};
    d_coll.push_back(source_distances(coll, source));
    d_mics.push_back(source_distances(mics, source));
    sims[s].mesh = green.mesh();
    sims[s].p1.resize(grid.size());
    sims[s].p2.resize(grid.size());
  }
  Eigen::MatrixXd residual = Eigen::MatrixXd::Zero(grid.size(), static_cast<Index>(count));
  parallel_for(grid.size(), threads, [&](Index f) {
    const double k = grid.wavenumber(f, air);
    const ShiftedSystem system(green.matrix(f));
    for (std::size_t s = 0; s < count; ++s) {
      const Complex c = coupling_factor(zs[s], f, k, air);
      Eigen::VectorXcd p_mic = incident_at(d_mics[s], k);
      if (c != Complex{}) {
        const Eigen::VectorXcd b = incident_at(d_coll[s], k);
        Eigen::VectorXcd p = system.solve(c, b);
        double r = system.residual(c, p, b);
        if (!(r <= 1e-10)) {
          auto sol = solve_frequency(green, f, c, b);
          p = std::move(sol.p);
          r = sol.residual;
        }
        p_mic -= c * (receiver_rows[static_cast<std::size_t>(f)] * p);
        residual(f, static_cast<Index>(s)) = r;
      }
      sims[s].p1[f] = p_mic[0];
      sims[s].p2[f] = p_mic[1];
    }
  });
  for (std::size_t s = 0; s < count; ++s) finalize_transfer(sims[s], residual.col(static_cast<Index>(s)));
  return sims;
}

TransferSimulation simulate_transfer_function(const ScenarioGeometry& geom,
                                              const MaterialParams& mat,
                                              const AirProperties& air,
                                              const FrequencyGrid& grid,
                                              const SimulationOptions& opts,
                                              const GreenCache* cache) {
  geom.validate();
  air.validate();
  const BemMesh mesh = build_mesh(geom.lx, geom.ly, opts.elements_per_wavelength,
                                  opts.mesh_frequency, air);
  const GreenMatrixSet green = cache ? cache->get_or_assemble(mesh, grid, air, opts.quadrature, opts.threads)
                                     : assemble_green_matrices(mesh, grid, air, opts.quadrature, opts.threads);
  const std::vector<Vec3> mics{geom.mic1(), geom.mic2()};
  const auto rows = assemble_receiver_rows(mesh, mics, grid, air, opts.quadrature);
  const ImpedanceSpectrum zs =
      opts.rigid ? ImpedanceSpectrum::rigid_surface(grid.size())
                 : surface_impedance(grid, mat, air, opts.impedance_theta_deg.value_or(geom.elevation_deg));
  return simulate_with_matrices(green, rows, geom, zs, opts.threads);
}

}  // namespace insitu
