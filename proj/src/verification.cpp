#include "insitu/verification.hpp"

#include "insitu/nn/network.hpp"
#include "insitu/twomic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace insitu {

namespace {

template <typename F>
CheckResult timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = f();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string format(const char* fmt_label, double v) {
  std::ostringstream out;
  out << fmt_label << v;
  return out.str();
}

}  // namespace

ScenarioConfig reference_scenario() {
  ScenarioConfig s;
  s.name = "reference";
  s.geometry = {0.6, 0.6, 1.21, 0.0, 0.0, 0.01, 0.03};
  s.material = {54.7, 0.02};
  return s;
}

CheckResult verify_rigid_limit(int threads, double epw, const GreenCache* cache) {
  return timed([&] {
    const auto sc = reference_scenario();
    const auto grid = FrequencyGrid::standard();
    const AirProperties air;
    SimulationOptions opts;
    opts.elements_per_wavelength = epw;
    opts.threads = threads;
    opts.rigid = true;
    const auto sim = simulate_transfer_function(sc.geometry, sc.material, air, grid, opts, cache);
    const std::vector<Vec3> mics{sc.geometry.mic1(), sc.geometry.mic2()};
    const Eigen::MatrixXcd inc = incident_field(mics, sc.geometry.source(), grid, air);
    double worst = 0.0;
    for (Index f = 0; f < grid.size(); ++f) {
      worst = std::max(worst, std::abs(sim.p1[f] - inc(0, f)) / std::abs(inc(0, f)));
      worst = std::max(worst, std::abs(sim.p2[f] - inc(1, f)) / std::abs(inc(1, f)));
    }
    return CheckResult{"rigid-limit", worst < 1e-10, worst, 1e-10,
                       format("max relative deviation from direct+image field: ", worst)};
  });
}

CheckResult verify_round_trip() {
  return timed([] {
    const auto grid = FrequencyGrid::standard();
    const AirProperties air;
    double worst = 0.0;
    const auto run = [&](const ScenarioGeometry& g, const ComplexSpectrum& r0) {
      const Vec3 s = g.source();
      const Vec3 si = g.image_source();
      ComplexSpectrum h12(grid.size());
      for (Index f = 0; f < grid.size(); ++f) {
        const double k = grid.wavenumber(f, air);
        const auto field = [&](const Vec3& m) {
          const double d = (m - s).norm();
          const double di = (m - si).norm();
          return std::exp(Complex(0.0, -k * d)) / d + r0[f] * std::exp(Complex(0.0, -k * di)) / di;
        };
        h12[f] = field(g.mic1()) / field(g.mic2());
      }
      const auto est = reflection_two_mic(h12, g, grid, air);
      for (Index f = 0; f < grid.size(); ++f) worst = std::max(worst, std::abs(est.r[f] - r0[f]) / std::abs(r0[f]));
    };
    run({0.6, 0.6, 1.21, 0.0, 0.0, 0.01, 0.03}, ComplexSpectrum::Constant(grid.size(), Complex(0.5, 0.2)));
    const ScenarioGeometry oblique{0.6, 0.6, 1.7, 45.0, 30.0, 0.01, 0.03};
    const auto zs = surface_impedance(grid, {54.7, 0.02}, air, oblique.elevation_deg);
    run(oblique, reference_reflection(zs, oblique.elevation_deg, air));
    return CheckResult{"round-trip", worst < 1e-10, worst, 1e-10,
                       format("max relative error of recovered R: ", worst)};
  });
}

CheckResult verify_gradient(std::uint64_t seed) {
  return timed([&] {
    using Net = nn::ResidualNetwork<double>;
    auto net = Net::glorot(nn::NetworkConfig::miniature(), seed);
    Rng rng(derive_seed(seed, "gradient-check"));
    for (const auto& s : net.layout()) {
      if (s.is_weight) continue;
      for (Index i = 0; i < s.size(); ++i) net.parameters()[s.offset + i] = rng.uniform(-0.3, 0.3);
    }
    const auto& cfg = net.config();
    Eigen::MatrixXd x(6, cfg.feature_length());
    Eigen::MatrixXd y(6, cfg.output_length());
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2.0, 2.0);
    for (Index i = 0; i < y.size(); ++i) y.data()[i] = rng.uniform01();
    constexpr double lambda = 1e-3;
    constexpr double h = 1e-5;
    const auto analytic = net.loss_and_gradient(x, y, lambda).gradient;
    Eigen::VectorXd fd(net.parameter_count());
    for (Index i = 0; i < fd.size(); ++i) {
      const double p = net.parameters()[i];
      net.parameters()[i] = p + h;
      const double up = net.loss_and_gradient(x, y, lambda).loss();
      net.parameters()[i] = p - h;
      const double down = net.loss_and_gradient(x, y, lambda).loss();
      net.parameters()[i] = p;
      fd[i] = (up - down) / (2.0 * h);
    }
    double worst = 0.0;
    std::string worst_slot;
    for (const auto& s : net.layout()) {
      const auto a = analytic.segment(s.offset, s.size());
      const auto n = fd.segment(s.offset, s.size());
      const double err = (a - n).norm() / std::max({a.norm(), n.norm(), 1e-300});
      if (err >= worst) {
        worst = err;
        worst_slot = s.name;
      }
    }
    return CheckResult{"gradient-check", worst < 1e-5, worst, 1e-5,
                       format("worst relative error ", worst) + " (" + worst_slot + ")"};
  });
}

CheckResult verify_mesh_convergence(int threads, const GreenCache* cache) {
  return timed([&] {
    const auto sc = reference_scenario();
    const auto grid = FrequencyGrid::standard();
    const AirProperties air;
    SimulationOptions opts;
    opts.threads = threads;
    opts.elements_per_wavelength = 6.0;
    const auto coarse = simulate_transfer_function(sc.geometry, sc.material, air, grid, opts, cache);
    opts.elements_per_wavelength = 12.0;
    const auto fine = simulate_transfer_function(sc.geometry, sc.material, air, grid, opts, cache);
    double worst = 0.0;
    double at = 0.0;
    for (Index f = 0; f < grid.size(); ++f) {
      const double d = std::abs(fine.h12[f] - coarse.h12[f]) / std::abs(fine.h12[f]);
      if (d > worst) {
        worst = d;
        at = grid[f];
      }
    }
    std::ostringstream detail;
    detail << coarse.mesh.nx << "x" << coarse.mesh.ny << " vs " << fine.mesh.nx << "x" << fine.mesh.ny
           << " elements: max relative H12 change " << worst << " at " << at << " Hz";
    return CheckResult{"mesh-convergence", worst < 0.01, worst, 0.01, detail.str()};
  });
}

EdgeEffect edge_effect(const RealSpectrum& alpha_two_mic, const RealSpectrum& alpha_reference,
                       const FrequencyGrid& grid) {
  EdgeEffect e;
  e.min_alpha_below_500 = std::numeric_limits<double>::infinity();
  int last = 0;
  for (Index f = 0; f < grid.size(); ++f) {
    const double d = alpha_two_mic[f] - alpha_reference[f];
    const int sign = (d > 0.0) - (d < 0.0);
    if (sign != 0) {
      if (last != 0 && sign != last) ++e.sign_changes;
      last = sign;
    }
    if (grid[f] < 500.0) e.min_alpha_below_500 = std::min(e.min_alpha_below_500, alpha_two_mic[f]);
  }
  return e;
}

CheckResult verify_edge_effect(int threads, const GreenCache* cache) {
  return timed([&] {
    const auto sc = reference_scenario();
    const auto grid = FrequencyGrid::standard();
    const AirProperties air;
    SimulationOptions opts;
    opts.threads = threads;
    const auto sim = simulate_transfer_function(sc.geometry, sc.material, air, grid, opts, cache);
    const auto est = absorption_two_mic(sim.h12, sc.geometry, grid, air);
    const auto ref = reference_absorption(grid, sc.material, air, 0.0);
    const auto e = edge_effect(est.alpha, ref, grid);
    std::ostringstream detail;
    detail << e.sign_changes << " sign changes of alpha_2mic - alpha_ref, min alpha_2mic below 500 Hz "
           << e.min_alpha_below_500;
    return CheckResult{"edge-effect", e.sign_changes >= 3 && e.min_alpha_below_500 < 0.0,
                       static_cast<double>(e.sign_changes), 3.0, detail.str()};
  });
}

std::vector<std::string> verification_suites() {
  return {"rigid-limit", "round-trip", "gradient-check", "mesh-convergence", "edge-effect"};
}

CheckResult run_check(const std::string& suite, int threads, const GreenCache* cache) {
  if (suite == "rigid-limit") return verify_rigid_limit(threads, 4.0, cache);
  if (suite == "round-trip") return verify_round_trip();
  if (suite == "gradient-check") return verify_gradient();
  if (suite == "mesh-convergence") return verify_mesh_convergence(threads, cache);
  if (suite == "edge-effect") return verify_edge_effect(threads, cache);
  throw std::invalid_argument("unknown verification suite '" + suite + "'");
}

}  // namespace insitu
