#ifndef INSITU_NN_TRAINER_HPP
#define INSITU_NN_TRAINER_HPP

#include "insitu/nn/network.hpp"

#include <filesystem>
#include <functional>
#include <stdexcept>

namespace insitu::nn {

struct TrainConfig {
  int max_epochs = 250;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int constant_epochs = 10;  // epochs at the initial rate before decay
  double decay = 0.9;        // per-epoch multiplier afterwards
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2 = 1e-3;
  /// Apply the penalty as decoupled weight decay instead of inside the loss.
  bool decoupled_weight_decay = false;
  int patience = 20;
  double min_delta = 1e-6;
  bool restore_best = true;
  std::uint64_t seed = 20240602;
  int threads = 1;
  double divergence_threshold = 1e3;

  /// Learning rate of 1-based `epoch`.
  double learning_rate_at(int epoch) const;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // mean data MSE over the epoch's batches
  double val_loss = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;

  /// Columns epoch, lr, train_loss, val_loss.
  void write_csv(const std::filesystem::path& path) const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean squared error of predictions over all rows, evaluated in chunks.
double evaluate_mse(const ResidualNetwork<double>& net, const Eigen::MatrixXd& features,
                    const Eigen::MatrixXd& labels, int threads = 1);

/// Adam on shuffled mini-batches with the configured schedule and early
/// stopping on validation MSE. Features must already be standardized. With
/// threads > 1 each batch is split into fixed contiguous shards whose
/// gradients are summed in shard order.
TrainingHistory train(ResidualNetwork<double>& net, const Eigen::MatrixXd& train_x,
                      const Eigen::MatrixXd& train_y, const Eigen::MatrixXd& val_x,
                      const Eigen::MatrixXd& val_y, const TrainConfig& cfg,
                      const std::function<void(const EpochRecord&)>& progress = {});

}  // namespace insitu::nn

#endif  // INSITU_NN_TRAINER_HPP
