#include "insitu/dataset.hpp"
#include "insitu/material.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>

using namespace insitu;
using insitu::test::TempDir;

namespace {

/// Two-sided Kolmogorov-Smirnov statistic against the uniform law on [0, 1].
double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
  }
  return d;
}

/// Critical value at the 1 % level for n = 10^4.
constexpr double kKsCritical = 0.01628;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

GenerationConfig tiny_generation() {
  GenerationConfig cfg;
  cfg.train_base_cases = 2;
  cfg.test_base_cases = 1;
  cfg.draws_per_case = 5;
  cfg.elements_per_wavelength = 1.0;
  cfg.seed = 99;
  return cfg;
}

FrequencyGrid coarse_grid() { return FrequencyGrid::linear(100.0, 100.0, 1900.0); }

DatasetRecord fake_record(int id, Index l, Rng& rng) {
  DatasetRecord r;
  r.re = RealSpectrum::NullaryExpr(l, [&](Index) { return rng.uniform(-3.0, 5.0); });
  r.im = RealSpectrum::NullaryExpr(l, [&](Index) { return rng.uniform(-1.0, 1.0); });
  r.theta_deg = rng.uniform(0.0, 80.0);
  r.label = RealSpectrum::NullaryExpr(l, [&](Index) { return rng.uniform01(); });
  r.provenance.base_case = id / 10;
  r.provenance.draw = id % 10;
  return r;
}

}  // namespace

TEST(ParameterSampling, MarginalsPassKolmogorovSmirnov) {
  const ParameterSpace space;
  Rng rng(2024);
  const int n = 10000;
  std::vector<std::vector<double>> u(7);
  const auto unit = [](double x, const ParameterRange& r) {
    return r.log_uniform ? std::log(x / r.lo) / std::log(r.hi / r.lo) : (x - r.lo) / (r.hi - r.lo);
  };
  for (int i = 0; i < n; ++i) {
    const auto d = sample_parameters(space, rng);
    u[0].push_back(unit(d.lx, space.lx));
    u[1].push_back(unit(d.ly, space.ly));
    u[2].push_back(unit(d.thickness_m * 1e3, space.thickness_mm));
    u[3].push_back(unit(d.sigma, space.sigma));
    u[4].push_back(unit(d.source_distance, space.source_distance));
    u[5].push_back(unit(d.azimuth_deg, space.azimuth_deg));
    u[6].push_back(unit(d.elevation_deg, space.elevation_deg));
  }
  for (std::size_t k = 0; k < u.size(); ++k) {
    EXPECT_GE(*std::min_element(u[k].begin(), u[k].end()), 0.0);
    EXPECT_LE(*std::max_element(u[k].begin(), u[k].end()), 1.0);
    EXPECT_LT(ks_uniform(u[k]), kKsCritical) << "parameter " << k;
  }
}

TEST(ParameterSampling, LogUniformIsNotLinear) {
  const ParameterSpace space;
  Rng rng(5);
  std::vector<double> linear;
  for (int i = 0; i < 10000; ++i) {
    const auto d = sample_parameters(space, rng);
    linear.push_back((d.sigma - space.sigma.lo) / (space.sigma.hi - space.sigma.lo));
  }
  EXPECT_GT(ks_uniform(linear), kKsCritical);
}

TEST(ParameterSpaceConfig, JsonRoundTripAndValidation) {
  ParameterSpace s;
  s.sigma = {10.0, 50.0, false};
  const auto back = ParameterSpace::from_json(s.to_json());
  EXPECT_EQ(back.sigma.lo, 10.0);
  EXPECT_FALSE(back.sigma.log_uniform);
  EXPECT_TRUE(back.thickness_mm.log_uniform);
  s.lx = {1.0, 0.5};
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Splitting, RatioSizesAndStandardization) {
  const Index l = 6;
  Rng rng(1);
  std::vector<DatasetRecord> trainval, test;
  for (int i = 0; i < 2000; ++i) trainval.push_back(fake_record(i, l, rng));
  for (int i = 0; i < 30; ++i) test.push_back(fake_record(5000 + i, l, rng));
  TempDir dir("split");
  const auto grid = FrequencyGrid::linear(100.0, 10.0, 150.0);
  const auto m = split_and_finalize(trainval, test, 0.8, 7, grid, {{"k", 1}}, dir.path());
  EXPECT_EQ(m.train_count, 1600);
  EXPECT_EQ(m.val_count, 400);
  EXPECT_EQ(m.test_count, 30);

  const auto ds = load_dataset(dir.path());
  EXPECT_EQ(ds.grid, grid);
  EXPECT_EQ(ds.stats, Standardization::fit(ds.train.features));
  const auto z = ds.stats.apply(ds.train.features);
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::RowVectorXd sd = ((z.rowwise() - mean).array().square().colwise().mean()).sqrt();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((sd.array() - 1.0).abs().maxCoeff(), 1e-9);

  const auto zv = ds.stats.apply(ds.val.features);
  const Eigen::MatrixXd by_hand =
      (ds.val.features.col(0).array() - ds.stats.mean_re[0]) / ds.stats.std_re[0];
  EXPECT_EQ(zv.col(0), by_hand);
  EXPECT_FALSE(Standardization::fit(ds.val.features) == ds.stats);

  std::set<std::pair<int, int>> ids;
  for (const auto* s : {&ds.train, &ds.val}) {
    for (const auto& p : s->provenance) ids.insert({p.base_case, p.draw});
  }
  EXPECT_EQ(ids.size(), 2000u);
}

TEST(Splitting, ConstantFeatureIsRejected) {
  Rng rng(3);
  std::vector<DatasetRecord> trainval;
  for (int i = 0; i < 10; ++i) {
    trainval.push_back(fake_record(i, 3, rng));
    trainval.back().im[1] = 0.25;
  }
  TempDir dir("split");
  try {
    split_and_finalize(trainval, {}, 0.8, 1, FrequencyGrid::linear(1.0, 1.0, 3.0), {}, dir.path());
    FAIL() << "expected a throw";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("index 4"), std::string::npos) << e.what();
  }
}

TEST(Generation, DeterministicAndReconstructible) {
  TempDir work("gen");
  const GreenCache cache(work.path() / "cache");
  const AirProperties air;
  const auto grid = coarse_grid();
  const ParameterSpace space;
  auto cfg = tiny_generation();
  const auto a = generate_dataset(space, cfg, grid, air, cache, work.path() / "a");
  EXPECT_EQ(a.assemblies, 3);
  EXPECT_EQ(a.manifest.train_count + a.manifest.val_count, 10);
  EXPECT_EQ(a.manifest.test_count, 5);

  cfg.threads = 3;
  const auto b = generate_dataset(space, cfg, grid, air, cache, work.path() / "b");
  EXPECT_EQ(b.assemblies, 0);
  for (const char* f : {"manifest.jsonl", "stats.json", "train_features.f64", "train_labels.f64",
                        "val_features.f64", "test_features.f64", "test_labels.f64"}) {
    EXPECT_EQ(slurp(work.path() / "a" / f), slurp(work.path() / "b" / f)) << f;
  }

  const auto ds = load_dataset(work.path() / "a");
  const Index l = grid.size();
  for (Index row : {Index{0}, ds.test.size() - 1}) {
    const auto& prov = ds.test.provenance[static_cast<std::size_t>(row)];
    EXPECT_NE(prov.base_case, ds.train.provenance[0].base_case);
    const auto rec = reconstruct_record(prov, grid, air, cfg, cache);
    EXPECT_LT((rec.re.transpose() - ds.test.features.row(row).head(l)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((rec.im.transpose() - ds.test.features.row(row).segment(l, l)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(ds.test.features(row, 2 * l), prov.params.elevation_deg);
    const auto label = reference_absorption(grid, prov.material(), air, prov.params.elevation_deg);
    EXPECT_LT((label.transpose() - ds.test.labels.row(row)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_GE(ds.train.labels.minCoeff(), 0.0);
  EXPECT_LE(ds.train.labels.maxCoeff(), 1.0);
}

TEST(Generation, DrawsShareBaseCaseGeometry) {
  TempDir work("gen");
  const GreenCache cache(work.path());
  const AirProperties air;
  const auto grid = FrequencyGrid::linear(500.0, 500.0, 1500.0);
  auto cfg = tiny_generation();
  const auto bases = generate_base_cases(1, 0, false, {}, cfg, grid, air, cache);
  ASSERT_EQ(bases.size(), 1u);
  const auto recs = generate_records(bases[0], 8, {}, grid, air, cache, cfg);
  std::set<ParameterDraw> unique;
  for (const auto& r : recs) {
    EXPECT_EQ(r.provenance.params.lx, bases[0].mesh.lx);
    EXPECT_EQ(r.provenance.params.ly, bases[0].mesh.ly);
    unique.insert(r.provenance.params);
  }
  EXPECT_EQ(unique.size(), recs.size());
}
