#include "insitu/nn/model.hpp"
#include "insitu/nn/network.hpp"
#include "insitu/nn/trainer.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <iterator>

using namespace insitu;
using namespace insitu::nn;
using insitu::test::load_fixture;
using insitu::test::TempDir;

namespace {

Eigen::MatrixXd random_rows(Index rows, Index cols, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Rng rng(seed);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&](Index, Index) { return rng.uniform(lo, hi); });
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Standardization unit_stats(Index l) {
  Standardization s;
  s.mean_re = Eigen::VectorXd::LinSpaced(l, -0.5, 0.5);
  s.std_re = Eigen::VectorXd::Constant(l, 2.0);
  s.mean_im = Eigen::VectorXd::Constant(l, 0.1);
  s.std_im = Eigen::VectorXd::LinSpaced(l, 0.5, 1.5);
  s.mean_theta = 40.0;
  s.std_theta = 23.0;
  return s;
}

}  // namespace

TEST(NetworkLayout, PublishedParameterCount) {
  const auto cfg = NetworkConfig::standard();
  EXPECT_EQ(parameter_count(cfg), 406300);
  EXPECT_EQ(cfg.flatten_size(), 736);
  EXPECT_EQ(cfg.length_at(3), 23);
  EXPECT_NO_THROW(require_parameter_count(cfg, kPublishedParameterCount));
  auto other = cfg;
  other.dense.back() = 200;
  EXPECT_THROW(other.validate(), std::invalid_argument);
  const auto layout = parameter_layout(cfg);
  EXPECT_EQ(layout.front().name, "block1.conv1.weight");
  EXPECT_EQ(layout.back().offset + layout.back().size(), 406300);
}

TEST(NetworkLayout, ConfigJsonRoundTrip) {
  const auto cfg = NetworkConfig::miniature();
  EXPECT_EQ(NetworkConfig::from_json(cfg.to_json()), cfg);
  EXPECT_EQ(parameter_count(cfg), 694);
}

TEST(NetworkForward, MatchesIndependentReference) {
  const auto fx = load_fixture("network_fixture.json");
  ResidualNetwork<double> net(NetworkConfig::miniature());
  ASSERT_EQ(net.parameter_count(), fx.at("parameter_count").get<Index>());
  for (Index i = 0; i < net.parameter_count(); ++i) {
    net.parameters()[i] = 0.3 * std::sin(0.7 * static_cast<double>(i) + 0.1);
  }
  const Index batch = fx.at("batch");
  const Index width = net.config().feature_length();
  Eigen::MatrixXd x(batch, width);
  for (Index b = 0; b < batch; ++b) {
    for (Index j = 0; j < width; ++j) {
      x(b, j) = std::sin(1.3 * static_cast<double>(j) + 0.5 * static_cast<double>(b)) + 0.1 * static_cast<double>(b);
    }
  }
  const auto y = net.forward(x);
  const auto& ref = fx.at("output");
  for (Index b = 0; b < batch; ++b) {
    for (Index j = 0; j < y.cols(); ++j) {
      EXPECT_NEAR(y(b, j), ref[b][j].get<double>(), 1e-12) << b << "," << j;
    }
  }
}

TEST(NetworkForward, ZeroWeightsGiveOneHalf) {
  const ResidualNetwork<double> net(NetworkConfig::standard());
  const auto y = net.forward(random_rows(2, 381, 1));
  EXPECT_EQ(y.rows(), 2);
  EXPECT_EQ(y.cols(), 190);
  EXPECT_TRUE((y.array() == 0.5).all());
}

TEST(NetworkForward, OutputsLieInUnitInterval) {
  const auto net = ResidualNetwork<double>::glorot(NetworkConfig::standard(), 11);
  const auto y = net.forward(random_rows(4, 381, 2, -5.0, 5.0));
  EXPECT_GT(y.minCoeff(), 0.0);
  EXPECT_LT(y.maxCoeff(), 1.0);
}

TEST(NetworkInit, SeededGlorotBounds) {
  const auto cfg = NetworkConfig::standard();
  const auto a = ResidualNetwork<double>::glorot(cfg, 5);
  const auto b = ResidualNetwork<double>::glorot(cfg, 5);
  const auto c = ResidualNetwork<double>::glorot(cfg, 6);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_NE(a.parameters(), c.parameters());
  for (const auto& s : a.layout()) {
    const auto seg = a.parameters().segment(s.offset, s.size());
    if (!s.is_weight) {
      EXPECT_TRUE((seg.array() == 0.0).all()) << s.name;
      continue;
    }
    const bool conv = s.name.rfind("block", 0) == 0;
    const double fan_out = static_cast<double>(conv ? s.rows * cfg.kernel : s.rows);
    const double bound = std::sqrt(6.0 / (static_cast<double>(s.cols) + fan_out));
    EXPECT_LE(seg.cwiseAbs().maxCoeff(), bound) << s.name;
    EXPECT_GT(seg.cwiseAbs().maxCoeff(), 0.9 * bound) << s.name;
  }
}

TEST(NetworkGradient, PenaltyCoversWeightsOnly) {
  auto net = ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 3);
  const auto x = random_rows(5, 33, 4);
  const auto y = random_rows(5, 16, 5, 0.0, 1.0);
  const auto plain = net.loss_and_gradient(x, y, 0.0);
  const auto reg = net.loss_and_gradient(x, y, 0.01);
  EXPECT_EQ(plain.data_loss, reg.data_loss);
  EXPECT_NEAR(reg.penalty, 0.01 * net.weight_norm2(), 1e-15);
  const Eigen::VectorXd diff = reg.gradient - plain.gradient;
  const Eigen::VectorXd expected = 0.02 * net.weight_mask().cwiseProduct(net.parameters());
  EXPECT_LT((diff - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(plain.data_loss, (net.forward(x) - y).squaredNorm() / 80.0, 1e-15);
}

TEST(Trainer, LearningRateSchedule) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(1), 1e-3);
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(10), 1e-3);
  EXPECT_NEAR(cfg.learning_rate_at(11), 9e-4, 1e-18);
  EXPECT_NEAR(cfg.learning_rate_at(20), 3.486784401e-4, 1e-15);
}

TEST(Trainer, ConfigJsonRoundTrip) {
  TrainConfig cfg;
  cfg.max_epochs = 7;
  cfg.decoupled_weight_decay = true;
  const auto back = TrainConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.max_epochs, 7);
  EXPECT_TRUE(back.decoupled_weight_decay);
  EXPECT_FALSE(cfg.to_json().contains("threads"));
}

TEST(Trainer, LearnsAndIsThreadIndependent) {
  const auto x = random_rows(96, 33, 8);
  Eigen::MatrixXd y(96, 16);
  for (Index r = 0; r < 96; ++r) {
    for (Index j = 0; j < 16; ++j) y(r, j) = 0.5 + 0.2 * std::tanh(x(r, j) - 0.3 * x(r, 32));
  }
  const Eigen::MatrixXd tx = x.topRows(64), ty = y.topRows(64);
  const Eigen::MatrixXd vx = x.bottomRows(32), vy = y.bottomRows(32);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  cfg.l2 = 1e-5;

  auto a = ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 1);
  const double before = evaluate_mse(a, vx, vy);
  const auto ha = train(a, tx, ty, vx, vy, cfg);
  EXPECT_LT(ha.epochs.back().train_loss, 0.5 * ha.epochs.front().train_loss);
  EXPECT_LE(ha.best_val_loss, before);
  EXPECT_EQ(evaluate_mse(a, vx, vy), ha.best_val_loss);

  auto b = ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 1);
  train(b, tx, ty, vx, vy, cfg);
  EXPECT_EQ(a.parameters(), b.parameters());

  cfg.threads = 3;
  auto c = ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 1);
  train(c, tx, ty, vx, vy, cfg);
  EXPECT_LT((a.parameters() - c.parameters()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Trainer, EarlyStoppingRestoresBest) {
  const auto x = random_rows(32, 33, 9);
  const auto y = random_rows(32, 16, 10, 0.0, 1.0);
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  cfg.constant_epochs = 200;
  cfg.patience = 3;
  cfg.min_delta = 1.0;
  auto net = ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 2);
  const auto h = train(net, x.topRows(24), y.topRows(24), x.bottomRows(8), y.bottomRows(8), cfg);
  EXPECT_TRUE(h.early_stopped);
  EXPECT_EQ(h.best_epoch, 1);
  EXPECT_EQ(h.epochs.size(), 4u);
  EXPECT_EQ(evaluate_mse(net, x.bottomRows(8), y.bottomRows(8)), h.epochs[0].val_loss);
}

TEST(Trainer, DivergenceIsReported) {
  const auto x = random_rows(16, 33, 11);
  const auto y = random_rows(16, 16, 12, 0.0, 1.0);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.divergence_threshold = 1e-6;
  auto net = ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 2);
  try {
    train(net, x.topRows(8), y.topRows(8), x.bottomRows(8), y.bottomRows(8), cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("batch rows"), std::string::npos);
  }
}

TEST(ModelFile, RoundTripIsBitIdentical) {
  TempDir dir("model");
  const NetworkModel model{ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 21), unit_stats(16)};
  const auto path = dir.path() / "m.bin";
  save_model(path, model);
  const auto back = load_model(path, 16);
  EXPECT_EQ(back.network.config(), model.network.config());
  EXPECT_EQ(back.network.parameters(), model.network.parameters());
  EXPECT_EQ(back.stats, model.stats);
  const auto raw = random_rows(100, 33, 22);
  const Eigen::MatrixXd p0 = model.predict_rows(raw);
  const Eigen::MatrixXd p1 = back.predict_rows(raw);
  EXPECT_EQ(std::memcmp(p0.data(), p1.data(), sizeof(double) * p0.size()), 0);
  save_model(dir.path() / "again.bin", back);
  EXPECT_EQ(slurp(path), slurp(dir.path() / "again.bin"));
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "m.bin.tmp"));
}

TEST(ModelFile, RejectsCorruptionAndWrongGrid) {
  TempDir dir("model");
  const NetworkModel model{ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 21), unit_stats(16)};
  const auto path = dir.path() / "m.bin";
  save_model(path, model);
  EXPECT_THROW(load_model(path, 190), ModelFormatError);
  auto bytes = slurp(path);
  bytes[bytes.size() / 2] ^= 0x01;
  std::ofstream(dir.path() / "bad.bin", std::ios::binary) << bytes;
  EXPECT_THROW(load_model(dir.path() / "bad.bin"), ModelFormatError);
  std::ofstream(dir.path() / "junk.bin", std::ios::binary) << "not a model";
  EXPECT_THROW(load_model(dir.path() / "junk.bin"), ModelFormatError);
}

TEST(ModelPredict, StandardizesRawFeatures) {
  const NetworkModel model{ResidualNetwork<double>::glorot(NetworkConfig::miniature(), 30), unit_stats(16)};
  const auto raw = random_rows(3, 33, 31);
  const Eigen::MatrixXd direct = model.network.forward(model.stats.apply(raw));
  EXPECT_EQ(model.predict_rows(raw), direct);
  ComplexSpectrum h(16);
  for (Index i = 0; i < 16; ++i) h[i] = {raw(1, i), raw(1, 16 + i)};
  const auto spec = predict(model, h, raw(1, 32));
  EXPECT_EQ(spec.method, EstimateMethod::network);
  EXPECT_EQ(spec.alpha.transpose(), direct.row(1));
}
