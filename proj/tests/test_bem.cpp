#include "insitu/bem.hpp"
#include "insitu/green_cache.hpp"
#include "insitu/twomic.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

using namespace insitu;
using insitu::test::as_complex;
using insitu::test::load_fixture;
using insitu::test::rel_err;

namespace {

FrequencyGrid single(double f) { return FrequencyGrid(Eigen::VectorXd::Constant(1, f)); }

QuadratureOptions accurate() { return {10, 2.0, 64}; }

}  // namespace

TEST(BemMesh, ElementCounts) {
  const AirProperties air;
  const auto m = build_mesh(0.6, 0.6, 6.0, 2000.0, air);
  EXPECT_EQ(m.nx, 21);
  EXPECT_EQ(m.ny, 21);
  const auto coarse = build_mesh(0.6, 0.6, 2.0, 2000.0, air);
  EXPECT_EQ(coarse.nx, 7);
  EXPECT_EQ(coarse.ny, 7);
  const auto rect = build_mesh(0.3, 0.6, 6.0, 2000.0, air);
  EXPECT_EQ(rect.nx, 11);
  EXPECT_EQ(rect.ny, 21);
  EXPECT_LE(m.dx(), air.c0 / (2000.0 * 6.0));
}

TEST(BemMesh, CentroidsTileTheSample) {
  const BemMesh m{0.4, 0.2, 4, 2};
  EXPECT_TRUE(m.centroid(0).isApprox(Vec3(-0.15, -0.05, 0.0)));
  EXPECT_TRUE(m.centroid(m.index(3, 1)).isApprox(Vec3(0.15, 0.05, 0.0)));
  double sx = 0.0;
  for (Index n = 0; n < m.size(); ++n) sx += m.centroid(n).x();
  EXPECT_NEAR(sx, 0.0, 1e-15);
}

TEST(ElementIntegrals, SelfTermMatchesReference) {
  const auto fx = load_fixture("bem_fixtures.json");
  for (const auto& c : fx.at("self")) {
    const Complex v = self_integral(c.at("a"), c.at("b"), c.at("k"), {});
    EXPECT_LT(rel_err(v, as_complex(c.at("value"))), 1e-8) << "a = " << c.at("a");
  }
}

TEST(ElementIntegrals, NearAndFarTermsMatchReference) {
  const auto fx = load_fixture("bem_fixtures.json");
  for (const auto& c : fx.at("element")) {
    const Vec3 p(c.at("point")[0], c.at("point")[1], c.at("point")[2]);
    const Eigen::Vector2d centre(c.at("centre")[0], c.at("centre")[1]);
    const Complex v = element_integral(p, centre, c.at("a"), c.at("b"), c.at("k"), {});
    EXPECT_LT(rel_err(v, as_complex(c.at("value"))), 1e-6) << c.at("point").dump();
  }
}

TEST(ElementIntegrals, FarFieldIsPointSource) {
  const double k = 20.0;
  const double a = 0.001;
  const Vec3 p(1.0, 0.5, 0.3);
  const double r = p.norm();
  const Complex point = a * a * std::exp(-kJ * k * r) / (4.0 * kPi * r);
  EXPECT_LT(rel_err(element_integral(p, {0.0, 0.0}, a, a, k, {}), point), 1e-4);
}

TEST(ElementIntegrals, RejectsPointOnElement) {
  EXPECT_THROW(element_integral({0.01, 0.0, 0.0}, {0.0, 0.0}, 0.04, 0.04, 1.0, {}),
               std::domain_error);
}

TEST(GreenMatrices, SymmetricAndMatchesDirectIntegrals) {
  const AirProperties air;
  const BemMesh mesh{0.2, 0.15, 5, 3};
  const auto grid = single(1200.0);
  const auto g = assemble_green_matrices(mesh, grid, air);
  const auto m = g.matrix(0);
  EXPECT_LT((m - m.transpose()).norm(), 1e-15 * m.norm());
  const double k = grid.wavenumber(0, air);
  const Vec3 p = mesh.centroid(2);
  const Vec3 c = mesh.centroid(13);
  const Complex direct = element_integral(p, c.head<2>(), mesh.dx(), mesh.dy(), k, {});
  EXPECT_LT(rel_err(m(2, 13), direct), 1e-13);
  EXPECT_LT(rel_err(m(4, 4), self_integral(mesh.dx(), mesh.dy(), k, {})), 1e-13);
}

TEST(IncidentField, DirectPlusImage) {
  const AirProperties air;
  const auto grid = FrequencyGrid::linear(100.0, 300.0, 1900.0);
  const Vec3 src(0.3, -0.2, 1.1);
  const std::vector<Vec3> pts{{0.05, 0.1, 0.0}, {0.0, 0.0, 0.02}};
  const auto field = incident_field(pts, src, grid, air);
  for (Index f = 0; f < grid.size(); ++f) {
    const double k = grid.wavenumber(f, air);
    const double r = (pts[0] - src).norm();
    EXPECT_LT(rel_err(field(0, f), 2.0 * std::exp(-kJ * k * r) / r), 1e-14);
    const Vec3 img(src.x(), src.y(), -src.z());
    const double r1 = (pts[1] - src).norm();
    const double r2 = (pts[1] - img).norm();
    EXPECT_LT(rel_err(field(1, f), std::exp(-kJ * k * r1) / r1 + std::exp(-kJ * k * r2) / r2), 1e-14);
  }
  const std::vector<Vec3> below{{0.0, 0.0, -0.01}};
  EXPECT_THROW(incident_field(below, src, grid, air), std::domain_error);
}

TEST(Simulation, SingleElementMatchesReference) {
  const auto fx = load_fixture("bem_fixtures.json").at("single_element");
  const AirProperties air;
  ScenarioGeometry geom;
  geom.lx = fx.at("lx");
  geom.ly = fx.at("ly");
  geom.source_distance = fx.at("source_distance");
  SimulationOptions opts;
  opts.elements_per_wavelength = 1.0;
  opts.mesh_frequency = 1000.0;
  const auto grid = single(fx.at("f_hz"));
  const auto sim = simulate_transfer_function(geom, {fx.at("sigma_kns_m4"), fx.at("d_m")}, air,
                                              grid, opts);
  ASSERT_EQ(sim.mesh.size(), 1);
  EXPECT_LT(sim.max_residual, 1e-10);
  EXPECT_LT(rel_err(sim.p1[0], as_complex(fx.at("p1"))), 1e-7);
  EXPECT_LT(rel_err(sim.p2[0], as_complex(fx.at("p2"))), 1e-7);
  EXPECT_LT(rel_err(sim.h12[0], as_complex(fx.at("h12"))), 1e-7);
}

TEST(Simulation, RigidSampleGivesIncidentField) {
  const AirProperties air;
  const auto grid = FrequencyGrid::standard();
  ScenarioGeometry geom;
  geom.elevation_deg = 20.0;
  SimulationOptions opts;
  opts.elements_per_wavelength = 2.0;
  opts.rigid = true;
  const auto sim = simulate_transfer_function(geom, {}, air, grid, opts);
  const std::vector<Vec3> mics{geom.mic1(), geom.mic2()};
  const auto ref = incident_field(mics, geom.source(), grid, air);
  for (Index f = 0; f < grid.size(); ++f) {
    EXPECT_LT(rel_err(sim.p1[f], ref(0, f)), 1e-12);
    EXPECT_LT(rel_err(sim.p2[f], ref(1, f)), 1e-12);
  }
}

TEST(Simulation, PassiveAbsorberKeepsResidualSmall) {
  const AirProperties air;
  const auto grid = FrequencyGrid::linear(100.0, 100.0, 1900.0);
  ScenarioGeometry geom;
  SimulationOptions opts;
  opts.elements_per_wavelength = 3.0;
  const auto sim = simulate_transfer_function(geom, {54.7, 0.02}, air, grid, opts);
  EXPECT_LT(sim.max_residual, 1e-10);
  EXPECT_TRUE(sim.flagged.empty());
  EXPECT_TRUE(sim.h12.allFinite());
}

TEST(Simulation, BatchMatchesDenseSolves) {
  const AirProperties air;
  const auto grid = FrequencyGrid::linear(100.0, 150.0, 1900.0);
  const auto mesh = build_mesh(0.5, 0.35, 3.0, 2000.0, air);
  const auto green = assemble_green_matrices(mesh, grid, air);
  std::vector<ScenarioGeometry> geoms(3);
  std::vector<ImpedanceSpectrum> zs;
  const std::array<MaterialParams, 3> mats{{{5.0, 0.2}, {54.7, 0.02}, {100.0, 0.005}}};
  for (std::size_t s = 0; s < geoms.size(); ++s) {
    geoms[s].lx = mesh.lx;
    geoms[s].ly = mesh.ly;
    geoms[s].elevation_deg = 30.0 * static_cast<double>(s);
    geoms[s].azimuth_deg = 70.0 * static_cast<double>(s);
    geoms[s].source_distance = 1.2 + 0.3 * static_cast<double>(s);
    zs.push_back(surface_impedance(grid, mats[s], air, geoms[s].elevation_deg));
  }
  zs[2] = ImpedanceSpectrum::rigid_surface(grid.size());
  const auto rows = assemble_receiver_rows(mesh, std::vector<Vec3>{geoms[0].mic1(), geoms[0].mic2()}, grid, air);
  const auto batch = simulate_batch(green, rows, geoms, zs, 2);
  ASSERT_EQ(batch.size(), geoms.size());
  for (std::size_t s = 0; s < geoms.size(); ++s) {
    const auto ref = simulate_with_matrices(green, rows, geoms[s], zs[s]);
    EXPECT_LT(batch[s].max_residual, 1e-12);
    for (Index f = 0; f < grid.size(); ++f) EXPECT_LT(rel_err(batch[s].h12[f], ref.h12[f]), 1e-10);
    const auto alone = simulate_batch(green, rows, std::span(geoms).subspan(s, 1), std::span(zs).subspan(s, 1));
    EXPECT_EQ(std::memcmp(alone[0].h12.data(), batch[s].h12.data(), sizeof(Complex) * grid.size()), 0);
  }
  EXPECT_THROW(simulate_batch(green, rows, geoms, std::span(zs).first(2)), std::invalid_argument);
}

TEST(Simulation, LargeSampleApproachesInfiniteSample) {
  const AirProperties air;
  const auto grid = single(1990.0);
  ScenarioGeometry geom;
  geom.lx = 1.0;
  geom.ly = 1.0;
  const MaterialParams mat{20.0, 0.05};
  SimulationOptions opts;
  opts.elements_per_wavelength = 6.0;
  const auto sim = simulate_transfer_function(geom, mat, air, grid, opts);
  const auto est = absorption_two_mic(sim.h12, geom, grid, air);
  const auto ref = reference_absorption(grid, mat, air, 0.0);
  EXPECT_LT(std::abs(est.alpha[0] - ref[0]), 0.1);
}

TEST(GreenCacheStore, HitIsBitIdentical) {
  insitu::test::TempDir dir("cache");
  const GreenCache cache(dir.path());
  const AirProperties air;
  const BemMesh mesh{0.2, 0.2, 4, 4};
  const auto grid = FrequencyGrid::linear(500.0, 500.0, 1500.0);
  bool assembled = false;
  const auto first = cache.get_or_assemble(mesh, grid, air, {}, 1, &assembled);
  EXPECT_TRUE(assembled);
  const auto second = cache.get_or_assemble(mesh, grid, air, {}, 1, &assembled);
  EXPECT_FALSE(assembled);
  for (Index f = 0; f < grid.size(); ++f) {
    const auto& a = first.kernel_table(f);
    const auto& b = second.kernel_table(f);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(Complex) * a.size()), 0);
  }
  EXPECT_FALSE(cache.load(mesh, grid, air, accurate()).has_value());
}

TEST(GreenCacheStore, DetectsCorruption) {
  insitu::test::TempDir dir("cache");
  const GreenCache cache(dir.path());
  const AirProperties air;
  const BemMesh mesh{0.2, 0.2, 3, 3};
  const auto grid = single(800.0);
  const auto set = cache.get_or_assemble(mesh, grid, air, {});
  const auto file = cache.directory_for(set.key()) / "f0.bin";
  ASSERT_TRUE(std::filesystem::exists(file));
  {
    std::fstream io(file, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(GreenCache::kHeaderSize + 3);
    io.put('\x5a');
  }
  EXPECT_THROW(cache.load(mesh, grid, air, {}), CacheError);
}
