#pragma once

// Optimizers, learning-rate schedules and the checkpointing training loop.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "tsc/data.hpp"
#include "tsc/models.hpp"

namespace tsc::optim {

enum class OptimizerKind { sgd, adam, adadelta };

std::string to_string(OptimizerKind k);

/// Halve-on-plateau rule.
struct Plateau {
  double factor = 0.5;
  std::size_t patience = 50;
  double min_lr = 1e-4;
};

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  layers::LossKind loss = layers::LossKind::cross_entropy;
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double decay = 0.0;
  double validation_fraction = 0.0;  // 0: checkpoint on the training set
  std::optional<Plateau> plateau;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Per-architecture defaults.
TrainConfig default_config(models::Architecture a);

struct TrainHistory {
  std::vector<double> loss;  // reference loss after each epoch
  std::vector<double> lr;    // learning rate of the epoch's last update
  std::size_t best_epoch = 0;  // 1-based
  double best_loss = 0.0;
};

// ---- optimizers -------------------------------------------------------------------

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// One update of every parameter from its accumulated gradient. A
  /// non-finite gradient throws DivergenceError naming the parameter.
  virtual void step(std::span<models::Param* const> params, double lr) = 0;
};

inline constexpr double kAdamBeta1 = 0.9, kAdamBeta2 = 0.999, kAdamEpsilon = 1e-8;
inline constexpr double kAdadeltaRho = 0.95, kAdadeltaEpsilon = 1e-8;

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind);

// ---- learning rate ----------------------------------------------------------------

/// alpha_t = base / (1 + decay * u), u the number of updates so far; the
/// plateau rule scales `base` and never drops it below `min_lr`.
class LearningRate {
 public:
  LearningRate(double initial, double decay, std::optional<Plateau> plateau);
  double current() const;
  void on_update() { ++updates_; }
  void on_epoch_end(double reference_loss);
  std::size_t updates() const { return updates_; }

 private:
  double base_;
  double decay_;
  std::optional<Plateau> plateau_;
  std::size_t updates_ = 0;
  double best_ = 0.0;
  bool seen_ = false;
  std::size_t wait_ = 0;
};

// ---- training ----------------------------------------------------------------------

struct TrainResult {
  models::TrainedModel model;
  TrainHistory history;
};

/// Trains on `fit` and checkpoints on `reference`; returns the parameters of
/// the epoch with the lowest reference loss. `log` receives `epoch,loss,lr`.
TrainResult train(models::ModelSpec spec, const data::Dataset& fit, const data::Dataset& reference,
                  const TrainConfig& config, std::ostream* log = nullptr);

/// As above, with the reference set taken from `config.validation_fraction`.
TrainResult train(models::ModelSpec spec, const data::Dataset& data, const TrainConfig& config,
                  std::ostream* log = nullptr);

/// Mean loss of `net` on `data` in inference mode.
double evaluate_loss(const models::Network& net, const data::Dataset& data, layers::LossKind kind);

/// Full pipeline for one architecture: splitting, window slicing and warping
/// for the sliced models, and the filter-length / pooling grid for mcnn.
TrainResult fit(models::Architecture a, const data::Dataset& train_data, const TrainConfig& config,
                std::ostream* log = nullptr);

}  // namespace tsc::optim
