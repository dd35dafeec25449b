#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "tsc/error.hpp"
#include "tsc/optim.hpp"

namespace tsc::optim {

using models::Architecture;

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(decay >= 0)) throw std::invalid_argument("decay must be non-negative");
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  if (epochs == 0) throw std::invalid_argument("at least one epoch is required");
  if (!(validation_fraction >= 0 && validation_fraction < 1)) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  if (plateau && !(plateau->factor > 0 && plateau->factor < 1)) {
    throw std::invalid_argument("plateau factor must lie in (0, 1)");
  }
}

TrainConfig default_config(Architecture a) {
  using O = OptimizerKind;
  TrainConfig c;
  switch (a) {
    case Architecture::mlp: c = {O::adadelta, {}, 5000, 16, 1.0, 0.0, 0.0, Plateau{}, 0}; break;
    case Architecture::fcn: c = {O::adam, {}, 2000, 16, 0.001, 0.0, 0.0, Plateau{}, 0}; break;
    case Architecture::resnet: c = {O::adam, {}, 1500, 16, 0.001, 0.0, 0.0, Plateau{}, 0}; break;
    case Architecture::encoder: c = {O::adam, {}, 100, 12, 1e-5, 0.0, 0.0, std::nullopt, 0}; break;
    case Architecture::mcnn: c = {O::adam, {}, 200, 256, 0.1, 0.0, 0.2, std::nullopt, 0}; break;
    case Architecture::tlenet: c = {O::adam, {}, 1000, 256, 0.01, 0.005, 0.0, std::nullopt, 0}; break;
    case Architecture::mcdcnn: c = {O::sgd, {}, 120, 16, 0.01, 0.0005, 0.33, std::nullopt, 0}; break;
    case Architecture::timecnn:
      c = {O::adam, layers::LossKind::mse, 2000, 16, 0.001, 0.0, 0.0, std::nullopt, 0};
      break;
  }
  return c;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  return {buf, std::to_chars(buf, buf + sizeof buf, v).ptr};
}

void check_geometry(const models::ModelSpec& spec, const data::Dataset& d, const char* role) {
  if (d.size() == 0) throw std::invalid_argument(std::string(role) + " set is empty");
  if (d.length() != spec.length || d.dims() != spec.dims || d.classes() != spec.classes) {
    throw ShapeError(std::string(role) + " set [" + std::to_string(d.length()) + "x" + std::to_string(d.dims()) +
                     ", " + std::to_string(d.classes()) + " classes] does not match the " +
                     models::to_string(spec.architecture) + " input geometry");
  }
}

// Rows of `x` listed in `rows`, in order.
Tensor gather(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t row = x.size() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(x.data() + rows[i] * row, x.data() + (rows[i] + 1) * row, out.data() + i * row);
  }
  return out;
}

}  // namespace

double evaluate_loss(const models::Network& net, const data::Dataset& d, layers::LossKind kind) {
  return layers::loss(net.infer_batched(d.x), d.targets(), kind).value;
}

TrainResult train(models::ModelSpec spec, const data::Dataset& fit, const data::Dataset& reference,
                  const TrainConfig& config, std::ostream* log) {
  config.validate();
  check_geometry(spec, fit, "training");
  check_geometry(spec, reference, "reference");

  const Rng root(config.seed);
  Rng init = root.fork(1), shuffle = root.fork(2), dropout = root.fork(3);
  models::Network net(std::move(spec), init);
  auto optimizer = make_optimizer(config.optimizer);
  LearningRate lr(config.learning_rate, config.decay, config.plateau);
  const auto params = net.params();

  const std::size_t n = fit.size(), batch = std::min(config.batch_size, n);
  const Tensor targets = fit.targets();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainHistory history;
  history.best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_state;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    double used = lr.current();
    for (std::size_t start = 0; start < n; start += batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(batch, n - start));
      net.zero_grad();
      const auto out = net.forward(gather(fit.x, rows), dropout);
      net.backward(layers::loss(out, gather(targets, rows), config.loss).grad);
      used = lr.current();
      optimizer->step(params, used);
      lr.on_update();
    }
    const double ref = evaluate_loss(net, reference, config.loss);
    if (!std::isfinite(ref)) {
      throw DivergenceError("reference loss became " + fmt(ref) + " at epoch " + std::to_string(epoch));
    }
    history.loss.push_back(ref);
    history.lr.push_back(used);
    if (ref < history.best_loss) {
      history.best_loss = ref;
      history.best_epoch = epoch;
      best_state = net.state();
    }
    lr.on_epoch_end(ref);
    if (log) *log << epoch << ',' << fmt(ref) << ',' << fmt(used) << '\n';
  }
  net.load_state(best_state);

  models::TrainedModel model{std::move(net), config.seed, config.epochs, history.best_epoch, fit.name,
                             fit.vocabulary, std::nullopt};
  return {std::move(model), std::move(history)};
}

TrainResult train(models::ModelSpec spec, const data::Dataset& d, const TrainConfig& config, std::ostream* log) {
  if (config.validation_fraction <= 0) return train(std::move(spec), d, d, config, log);
  auto [fit_part, reference] = data::split_train_val(d, config.validation_fraction, config.seed);
  if (reference.size() == 0) throw std::invalid_argument("validation split of " + d.name + " is empty");
  auto result = train(std::move(spec), fit_part, reference, config, log);
  result.model.dataset = d.name;
  return result;
}

TrainResult fit(Architecture a, const data::Dataset& train_data, const TrainConfig& config, std::ostream* log) {
  const std::size_t T = train_data.length(), M = train_data.dims(), K = train_data.classes();
  if (!models::requires_slicing(a)) return train(models::build(a, T, M, K), train_data, config, log);

  const auto slicing = models::default_slicing(a, T);
  const std::size_t slice = data::augmented_slice_length(T, slicing);

  // Split whole series before slicing so no series feeds both sides.
  data::Dataset fit_series = train_data, ref_series = train_data;
  if (config.validation_fraction > 0) {
    std::tie(fit_series, ref_series) = data::split_train_val(train_data, config.validation_fraction, config.seed);
    if (ref_series.size() == 0) throw std::invalid_argument("validation split of " + train_data.name + " is empty");
  }
  const auto fit_slices = data::augment(fit_series, slicing).slices;
  const auto ref_slices = config.validation_fraction > 0 ? data::augment(ref_series, slicing).slices : fit_slices;

  auto finish = [&](TrainResult r) {
    r.model.dataset = train_data.name;
    r.model.vocabulary = train_data.vocabulary;
    r.model.slicing = slicing;
    return r;
  };
  if (a == Architecture::tlenet) return finish(train(models::build_tlenet(slice, M, K), fit_slices, ref_slices, config, log));

  // mcnn: pick the grid point with the lowest checkpointed reference loss.
  std::optional<TrainResult> best;
  for (double fraction : models::kMcnnFilterFractions) {
    for (std::size_t pool : models::kMcnnPoolFactors) {
      const auto length = models::mcnn_filter_length(slice, fraction);
      if (log) *log << "# mcnn filter_length=" << length << " pool_factor=" << pool << '\n';
      auto r = train(models::build_mcnn(slice, M, K, length, pool), fit_slices, ref_slices, config, log);
      if (!best || r.history.best_loss < best->history.best_loss) best.emplace(std::move(r));
    }
  }
  return finish(std::move(*best));
}

}  // namespace tsc::optim
