#pragma once

// Declarative architecture specs, the module runtime that executes them, and
// prediction / persistence of trained models.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsc/data.hpp"
#include "tsc/layers.hpp"
#include "tsc/rng.hpp"
#include "tsc/tensor.hpp"

namespace tsc::models {

enum class Architecture { mlp, fcn, resnet, encoder, mcnn, tlenet, mcdcnn, timecnn };

std::string to_string(Architecture a);
/// Throws std::invalid_argument for unknown identifiers.
Architecture parse_architecture(const std::string& id);
const std::vector<Architecture>& all_architectures();

// ---- declarative layer graph ------------------------------------------------------

enum class LayerKind {
  conv,
  dense,
  batch_norm,
  instance_norm,
  activation,
  prelu,
  dropout,
  pool,
  gap,
  attention,
  flatten,
  sequential,
  residual,   // children: body, optional shortcut (identity when absent)
  branches,   // children run on the same input; outputs concatenated on channels
  select,     // keep input channel `units`
  downsample, // keep every `units`-th step
  smooth,     // centred moving average over `units` steps
};

struct LayerSpec {
  LayerKind kind = LayerKind::sequential;
  std::size_t units = 0;   // filters, neurons, channel index, factor or window
  std::size_t length = 0;  // filter length or pool window
  layers::Padding padding = layers::Padding::same;
  layers::Activation activation = layers::Activation::linear;
  layers::PoolKind pool = layers::PoolKind::max;
  double rate = 0.0;
  std::size_t max_windows = 0;
  std::vector<LayerSpec> children;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// One line per node, children indented by two spaces.
std::vector<std::string> layer_table(const LayerSpec& root);

struct ModelSpec {
  Architecture architecture = Architecture::fcn;
  std::size_t length = 0;  // input time extent (slice length for sliced models)
  std::size_t dims = 0;
  std::size_t classes = 0;
  std::size_t filter_length = 0;  // mcnn grid values, 0 elsewhere
  std::size_t pool_factor = 0;
  layers::LossKind loss = layers::LossKind::cross_entropy;
  LayerSpec root;
};

ModelSpec build_mlp(std::size_t T, std::size_t M, std::size_t K);
ModelSpec build_fcn(std::size_t T, std::size_t M, std::size_t K);
ModelSpec build_resnet(std::size_t T, std::size_t M, std::size_t K);
ModelSpec build_encoder(std::size_t T, std::size_t M, std::size_t K);
ModelSpec build_mcnn(std::size_t slice_T, std::size_t M, std::size_t K, std::size_t filter_length,
                     std::size_t pool_factor);
ModelSpec build_tlenet(std::size_t slice_T, std::size_t M, std::size_t K);
ModelSpec build_mcdcnn(std::size_t T, std::size_t M, std::size_t K);
ModelSpec build_timecnn(std::size_t T, std::size_t M, std::size_t K);

/// Dispatches to the builder; the mcnn grid values are ignored elsewhere.
ModelSpec build(Architecture a, std::size_t T, std::size_t M, std::size_t K, std::size_t filter_length = 0,
                std::size_t pool_factor = 0);

/// MCNN branch factors and smoothing windows.
inline constexpr std::size_t kMcnnDownsample[] = {2, 4, 8};
inline constexpr std::size_t kMcnnSmoothing[] = {5, 8, 11};
inline constexpr double kMcnnFilterFractions[] = {0.05, 0.1, 0.2};
inline constexpr std::size_t kMcnnPoolFactors[] = {2, 3, 5};
std::size_t mcnn_filter_length(std::size_t slice_T, double fraction);

/// Per-architecture summary in the shape of the usual comparison table.
struct ArchitectureSummary {
  std::size_t layers = 0;
  std::size_t conv = 0;
  std::size_t invariant = 0;
  std::string normalize, pooling, feature, activate, regularize;
  friend bool operator==(const ArchitectureSummary&, const ArchitectureSummary&) = default;
};
ArchitectureSummary summarize(const ModelSpec& spec);

// ---- module runtime ---------------------------------------------------------------

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Executable layer. `forward` runs in train mode and caches what `backward`
/// needs; `infer` is const and may be called concurrently.
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor infer(const Tensor& x) const = 0;
  virtual Tensor forward(const Tensor& x, Rng& rng) = 0;
  /// Returns the input gradient (empty when skipped) and accumulates
  /// parameter gradients.
  virtual Tensor backward(const Tensor& grad) = 0;
  virtual void collect_params(std::vector<Param*>&) {}
  virtual void collect_buffers(std::vector<Tensor*>&) {}
  /// The input gradient of this module is never needed.
  virtual void skip_input_grad() { need_input_grad_ = false; }

 protected:
  bool need_input_grad_ = true;
};

/// A built architecture with its parameters.
class Network {
 public:
  /// Builds the modules and draws Glorot-uniform weights from `init`.
  Network(ModelSpec spec, Rng& init);
  Network(ModelSpec spec, std::uint64_t seed);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  const ModelSpec& spec() const { return spec_; }

  /// [B, T, M] -> [B, K] in inference mode.
  Tensor infer(const Tensor& x) const;
  /// Inference in chunks of `chunk` rows to bound activation memory.
  Tensor infer_batched(const Tensor& x, std::size_t chunk = 64) const;
  /// Output after the first `count` top-level layers (inference mode).
  Tensor infer_prefix(const Tensor& x, std::size_t count) const;
  std::size_t top_level_size() const;

  /// Train-mode forward; dropout masks are drawn from `rng`.
  Tensor forward(const Tensor& x, Rng& rng);
  void backward(const Tensor& grad_output);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  std::vector<Tensor*> buffers();
  void zero_grad();
  std::size_t parameter_count() const;

  /// Parameters then buffers, flattened in spec order.
  std::vector<double> state() const;
  void load_state(std::span<const double> state);

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<Module>> top_;
};

// ---- prediction ------------------------------------------------------------------

bool requires_slicing(Architecture a);

/// Default slicing for the sliced architectures given the full series length.
data::SlicingConfig default_slicing(Architecture a, std::size_t length);

/// argmax per row.
std::vector<std::size_t> argmax_rows(const Tensor& scores);

/// Majority vote; ties go to the lowest class index.
std::size_t majority_vote(std::span<const std::size_t> votes, std::size_t classes);

/// Class index per series. `slicing` is mandatory for mcnn/tlenet and
/// rejected otherwise.
std::vector<std::size_t> predict(const Network& net, const data::Dataset& data,
                                 const std::optional<data::SlicingConfig>& slicing = std::nullopt);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

// ---- persistence ------------------------------------------------------------------

struct TrainedModel {
  Network network;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  std::string dataset;
  std::vector<std::string> vocabulary;
  std::optional<data::SlicingConfig> slicing;
};

/// Writes `<path>` (text manifest) and `<path>.bin` (little-endian f64 blob).
void save_model(const TrainedModel& model, const std::filesystem::path& manifest);
/// Rebuilds the architecture from the manifest, verifies the stored layer
/// table and loads the blob.
TrainedModel load_model(const std::filesystem::path& manifest);

}  // namespace tsc::models
