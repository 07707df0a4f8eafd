#include "insitu/nn/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace insitu::nn {

using nlohmann::json;
using Net = ResidualNetwork<double>;

double TrainConfig::learning_rate_at(int epoch) const {
  if (epoch <= constant_epochs) return learning_rate;
  return learning_rate * std::pow(decay, epoch - constant_epochs);
}

void TrainConfig::validate() const {
  if (max_epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs and batch size must be positive");
  if (!(learning_rate > 0.0) || !(decay > 0.0 && decay <= 1.0)) {
    throw std::invalid_argument("learning rate must be positive and decay in (0, 1]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw std::invalid_argument("invalid Adam hyperparameters");
  }
  if (!(l2 >= 0.0) || patience < 1 || !(min_delta >= 0.0) || threads < 1) {
    throw std::invalid_argument("invalid regularization or stopping settings");
  }
}

json TrainConfig::to_json() const {
  return {{"max_epochs", max_epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"constant_epochs", constant_epochs},
          {"decay", decay},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"l2", l2},
          {"decoupled_weight_decay", decoupled_weight_decay},
          {"patience", patience},
          {"min_delta", min_delta},
          {"restore_best", restore_best},
          {"seed", seed},
          {"divergence_threshold", divergence_threshold}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.constant_epochs = j.value("constant_epochs", c.constant_epochs);
  c.decay = j.value("decay", c.decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.l2 = j.value("l2", c.l2);
  c.decoupled_weight_decay = j.value("decoupled_weight_decay", c.decoupled_weight_decay);
  c.patience = j.value("patience", c.patience);
  c.min_delta = j.value("min_delta", c.min_delta);
  c.restore_best = j.value("restore_best", c.restore_best);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.divergence_threshold = j.value("divergence_threshold", c.divergence_threshold);
  c.validate();
  return c;
}

void TrainingHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,lr,train_loss,val_loss\n" << std::setprecision(17);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.learning_rate << ',' << e.train_loss << ',' << e.val_loss << '\n';
  }
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Index>& rows, std::size_t begin,
                       std::size_t end) {
  Eigen::MatrixXd out(static_cast<Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Index>(i - begin)) = m.row(rows[i]);
  return out;
}

struct Shard {
  Index begin, end;
};

std::vector<Shard> shards_of(Index n, int threads) {
  const Index count = std::max<Index>(1, std::min<Index>(threads, n));
  std::vector<Shard> out;
  for (Index s = 0; s < count; ++s) out.push_back({n * s / count, n * (s + 1) / count});
  return out;
}

}  // namespace

double evaluate_mse(const Net& net, const Eigen::MatrixXd& features, const Eigen::MatrixXd& labels,
                    int threads) {
  if (features.rows() != labels.rows() || features.rows() == 0) {
    throw std::invalid_argument("evaluation set is empty or mismatched");
  }
  constexpr Index chunk = 256;
  const Index chunks = (features.rows() + chunk - 1) / chunk;
  std::vector<double> sums(static_cast<std::size_t>(chunks));
  parallel_for(chunks, threads, [&](Index c) {
    const Index b = c * chunk;
    const Index n = std::min(chunk, features.rows() - b);
    const Eigen::MatrixXd pred = net.forward(features.middleRows(b, n));
    sums[static_cast<std::size_t>(c)] = (pred - labels.middleRows(b, n)).squaredNorm();
  });
  const double total = std::accumulate(sums.begin(), sums.end(), 0.0);
  return total / static_cast<double>(labels.size());
}

TrainingHistory train(Net& net, const Eigen::MatrixXd& train_x, const Eigen::MatrixXd& train_y,
                      const Eigen::MatrixXd& val_x, const Eigen::MatrixXd& val_y,
                      const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& progress) {
  cfg.validate();
  if (train_x.rows() == 0 || val_x.rows() == 0) throw std::invalid_argument("training needs train and validation rows");
  if (train_x.rows() != train_y.rows() || val_x.rows() != val_y.rows()) {
    throw std::invalid_argument("feature/label row counts differ");
  }

  const Index p = net.parameter_count();
  const Eigen::VectorXd mask = net.weight_mask();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
  long step = 0;
  const double coupled = cfg.decoupled_weight_decay ? 0.0 : cfg.l2;

  std::vector<Index> order(static_cast<std::size_t>(train_x.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(cfg.seed);

  TrainingHistory history;
  Eigen::VectorXd best = net.parameters();
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = cfg.learning_rate_at(epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    const std::size_t n = order.size();
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      const Eigen::MatrixXd bx = gather(train_x, order, begin, end);
      const Eigen::MatrixXd by = gather(train_y, order, begin, end);
      const double norm = static_cast<double>(by.size());

      const auto shards = shards_of(bx.rows(), cfg.threads);
      std::vector<Eigen::VectorXd> grads(shards.size());
      std::vector<double> losses(shards.size());
      parallel_for(static_cast<Index>(shards.size()), cfg.threads, [&](Index s) {
        const auto& sh = shards[static_cast<std::size_t>(s)];
        losses[static_cast<std::size_t>(s)] = net.squared_error_gradient(
            bx.middleRows(sh.begin, sh.end - sh.begin), by.middleRows(sh.begin, sh.end - sh.begin), norm,
            grads[static_cast<std::size_t>(s)]);
      });
      Eigen::VectorXd g = grads[0];
      double data_loss = losses[0];
      for (std::size_t s = 1; s < shards.size(); ++s) {
        g += grads[s];
        data_loss += losses[s];
      }
      const double loss = data_loss + coupled * net.weight_norm2();
      if (!std::isfinite(loss) || loss > cfg.divergence_threshold) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", batch " << begin / static_cast<std::size_t>(cfg.batch_size)
            << " (loss " << loss << "); batch rows:";
        for (std::size_t i = begin; i < end; ++i) msg << ' ' << order[i];
        throw TrainingDiverged(msg.str());
      }
      if (coupled > 0.0) g += (2.0 * coupled) * mask.cwiseProduct(net.parameters());

      ++step;
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto& w = net.parameters();
      if (cfg.decoupled_weight_decay && cfg.l2 > 0.0) w -= (lr * cfg.l2) * mask.cwiseProduct(w);
      w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
      loss_sum += data_loss * static_cast<double>(end - begin);
    }

    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(n), evaluate_mse(net, val_x, val_y, cfg.threads)};
    if (!std::isfinite(rec.val_loss) || rec.val_loss > cfg.divergence_threshold) {
      throw TrainingDiverged("validation loss diverged at epoch " + std::to_string(epoch));
    }
    history.epochs.push_back(rec);
    if (progress) progress(rec);

    if (rec.val_loss < best_val - cfg.min_delta) {
      best_val = rec.val_loss;
      best = net.parameters();
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      history.early_stopped = true;
      break;
    }
  }
  history.best_val_loss = best_val;
  if (cfg.restore_best) net.parameters() = best;
  return history;
}

}  // namespace insitu::nn
