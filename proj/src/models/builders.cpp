#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "tsc/models.hpp"

namespace tsc::models {

using layers::Activation;
using layers::Padding;
using layers::PoolKind;

namespace {

LayerSpec conv(std::size_t filters, std::size_t length, Padding padding = Padding::same) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.units = filters;
  s.length = length;
  s.padding = padding;
  return s;
}

LayerSpec dense(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  return s;
}

LayerSpec leaf(LayerKind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}

LayerSpec act(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  return s;
}

LayerSpec dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.rate = rate;
  return s;
}

LayerSpec pool(std::size_t window, PoolKind kind = PoolKind::max, std::size_t max_windows = 0) {
  LayerSpec s;
  s.kind = LayerKind::pool;
  s.length = window;
  s.pool = kind;
  s.max_windows = max_windows;
  return s;
}

LayerSpec with_units(LayerKind kind, std::size_t units) {
  LayerSpec s;
  s.kind = kind;
  s.units = units;
  return s;
}

LayerSpec group(LayerKind kind, std::vector<LayerSpec> children) {
  LayerSpec s;
  s.kind = kind;
  s.children = std::move(children);
  return s;
}

ModelSpec make(Architecture a, std::size_t T, std::size_t M, std::size_t K, std::vector<LayerSpec> layers) {
  if (M == 0) throw std::invalid_argument(to_string(a) + ": series need at least one dimension");
  if (K == 0) throw std::invalid_argument(to_string(a) + ": at least one class is required");
  ModelSpec spec;
  spec.architecture = a;
  spec.length = T;
  spec.dims = M;
  spec.classes = K;
  spec.root = group(LayerKind::sequential, std::move(layers));
  return spec;
}

void require_length(Architecture a, std::size_t T, std::size_t minimum) {
  if (T < minimum) {
    throw std::invalid_argument(to_string(a) + " needs series of length >= " + std::to_string(minimum) + ", got " +
                                std::to_string(T));
  }
}

std::string format_rate(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

std::string describe(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::conv:
      return "conv filters=" + std::to_string(s.units) + " length=" + std::to_string(s.length) +
             (s.padding == Padding::same ? " same" : " valid");
    case LayerKind::dense: return "dense units=" + std::to_string(s.units);
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::instance_norm: return "instance_norm";
    case LayerKind::activation: return activation_name(s.activation);
    case LayerKind::prelu: return "prelu";
    case LayerKind::dropout: return "dropout rate=" + format_rate(s.rate);
    case LayerKind::pool:
      return std::string(s.pool == PoolKind::max ? "max_pool" : "avg_pool") + " window=" + std::to_string(s.length) +
             (s.max_windows ? " windows=" + std::to_string(s.max_windows) : "");
    case LayerKind::gap: return "gap";
    case LayerKind::attention: return "attention";
    case LayerKind::flatten: return "flatten";
    case LayerKind::sequential: return "sequential";
    case LayerKind::residual: return "residual";
    case LayerKind::branches: return "branches";
    case LayerKind::select: return "select channel=" + std::to_string(s.units);
    case LayerKind::downsample: return "downsample factor=" + std::to_string(s.units);
    case LayerKind::smooth: return "smooth window=" + std::to_string(s.units);
  }
  return "?";
}

void table_lines(const LayerSpec& s, std::size_t depth, std::vector<std::string>& out) {
  out.push_back(std::string(2 * depth, ' ') + describe(s));
  for (const auto& c : s.children) table_lines(c, depth + 1, out);
}

}  // namespace

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::mlp: return "mlp";
    case Architecture::fcn: return "fcn";
    case Architecture::resnet: return "resnet";
    case Architecture::encoder: return "encoder";
    case Architecture::mcnn: return "mcnn";
    case Architecture::tlenet: return "tlenet";
    case Architecture::mcdcnn: return "mcdcnn";
    case Architecture::timecnn: return "timecnn";
  }
  return "?";
}

const std::vector<Architecture>& all_architectures() {
  static const std::vector<Architecture> all = {Architecture::mlp,    Architecture::fcn,    Architecture::resnet,
                                                Architecture::encoder, Architecture::mcnn,   Architecture::tlenet,
                                                Architecture::mcdcnn, Architecture::timecnn};
  return all;
}

Architecture parse_architecture(const std::string& id) {
  for (auto a : all_architectures())
    if (to_string(a) == id) return a;
  throw std::invalid_argument("unknown architecture '" + id + "'");
}

std::vector<std::string> layer_table(const LayerSpec& root) {
  std::vector<std::string> out;
  table_lines(root, 0, out);
  return out;
}

// ---- builders -------------------------------------------------------------------------

ModelSpec build_mlp(std::size_t T, std::size_t M, std::size_t K) {
  require_length(Architecture::mlp, T, 1);
  return make(Architecture::mlp, T, M, K,
              {leaf(LayerKind::flatten), dropout(0.1), dense(500), act(Activation::relu), dropout(0.2), dense(500),
               act(Activation::relu), dropout(0.2), dense(500), act(Activation::relu), dropout(0.3), dense(K),
               act(Activation::softmax)});
}

ModelSpec build_fcn(std::size_t T, std::size_t M, std::size_t K) {
  require_length(Architecture::fcn, T, 8);
  std::vector<LayerSpec> l;
  for (auto [filters, length] : {std::pair<std::size_t, std::size_t>{128, 8}, {256, 5}, {128, 3}}) {
    l.push_back(conv(filters, length));
    l.push_back(leaf(LayerKind::batch_norm));
    l.push_back(act(Activation::relu));
  }
  l.push_back(leaf(LayerKind::gap));
  l.push_back(dense(K));
  l.push_back(act(Activation::softmax));
  return make(Architecture::fcn, T, M, K, std::move(l));
}

ModelSpec build_resnet(std::size_t T, std::size_t M, std::size_t K) {
  require_length(Architecture::resnet, T, 8);
  std::vector<LayerSpec> l;
  for (int block = 0; block < 3; ++block) {
    std::vector<LayerSpec> body;
    for (std::size_t length : {8, 5, 3}) {
      body.push_back(conv(64, length));
      body.push_back(leaf(LayerKind::batch_norm));
      body.push_back(act(Activation::relu));
    }
    std::vector<LayerSpec> parts{group(LayerKind::sequential, std::move(body))};
    // Only the first block changes the channel width (M -> 64).
    if (block == 0 && M != 64) {
      parts.push_back(group(LayerKind::sequential, {conv(64, 1), leaf(LayerKind::batch_norm)}));
    }
    l.push_back(group(LayerKind::residual, std::move(parts)));
  }
  l.push_back(leaf(LayerKind::gap));
  l.push_back(dense(K));
  l.push_back(act(Activation::softmax));
  return make(Architecture::resnet, T, M, K, std::move(l));
}

ModelSpec build_encoder(std::size_t T, std::size_t M, std::size_t K) {
  require_length(Architecture::encoder, T, 8);
  std::vector<LayerSpec> l;
  for (auto [filters, length] : {std::pair<std::size_t, std::size_t>{128, 5}, {256, 11}, {512, 21}}) {
    l.push_back(conv(filters, length));
    l.push_back(leaf(LayerKind::instance_norm));
    l.push_back(leaf(LayerKind::prelu));
    l.push_back(dropout(0.2));
    l.push_back(pool(2));
  }
  l.push_back(leaf(LayerKind::attention));
  l.push_back(dense(K));
  l.push_back(act(Activation::softmax));
  return make(Architecture::encoder, T, M, K, std::move(l));
}

std::size_t mcnn_filter_length(std::size_t slice_T, double fraction) {
  return std::max<std::size_t>(1, std::size_t(std::llround(fraction * double(slice_T))));
}

ModelSpec build_mcnn(std::size_t slice_T, std::size_t M, std::size_t K, std::size_t filter_length,
                     std::size_t pool_factor) {
  require_length(Architecture::mcnn, slice_T, 1);
  if (filter_length == 0) throw std::invalid_argument("mcnn: filter length must be >= 1");
  if (pool_factor == 0) throw std::invalid_argument("mcnn: pool factor must be >= 1");

  // Every branch is pooled down to exactly `pool_factor` steps so the branch
  // outputs can be concatenated on the channel axis.
  auto branch = [&](std::optional<LayerSpec> transform, std::size_t branch_length) {
    if (branch_length < pool_factor) {
      throw std::invalid_argument("mcnn: branch of length " + std::to_string(branch_length) +
                                  " cannot be pooled to " + std::to_string(pool_factor) +
                                  " steps; slice length " + std::to_string(slice_T) + " is too short");
    }
    std::vector<LayerSpec> b;
    if (transform) b.push_back(*transform);
    b.push_back(conv(256, filter_length));
    b.push_back(act(Activation::sigmoid));
    b.push_back(pool(branch_length / pool_factor, PoolKind::max, pool_factor));
    return group(LayerKind::sequential, std::move(b));
  };

  std::vector<LayerSpec> branches;
  branches.push_back(branch(std::nullopt, slice_T));
  for (auto k : kMcnnDownsample) branches.push_back(branch(with_units(LayerKind::downsample, k), (slice_T + k - 1) / k));
  for (auto w : kMcnnSmoothing) branches.push_back(branch(with_units(LayerKind::smooth, w), slice_T));

  std::vector<LayerSpec> l;
  l.push_back(group(LayerKind::branches, std::move(branches)));
  l.push_back(conv(256, filter_length));
  l.push_back(act(Activation::sigmoid));
  if (pool_factor >= 2) l.push_back(pool(2));
  l.push_back(leaf(LayerKind::flatten));
  l.push_back(dense(256));
  l.push_back(act(Activation::sigmoid));
  l.push_back(dense(K));
  l.push_back(act(Activation::softmax));
  auto spec = make(Architecture::mcnn, slice_T, M, K, std::move(l));
  spec.filter_length = filter_length;
  spec.pool_factor = pool_factor;
  return spec;
}

ModelSpec build_tlenet(std::size_t slice_T, std::size_t M, std::size_t K) {
  require_length(Architecture::tlenet, slice_T, 8);
  return make(Architecture::tlenet, slice_T, M, K,
              {conv(5, 5), act(Activation::relu), pool(2), conv(20, 5), act(Activation::relu), pool(4),
               leaf(LayerKind::flatten), dense(500), act(Activation::relu), dense(K), act(Activation::softmax)});
}

ModelSpec build_mcdcnn(std::size_t T, std::size_t M, std::size_t K) {
  require_length(Architecture::mcdcnn, T, 4);
  std::vector<LayerSpec> branches;
  for (std::size_t m = 0; m < M; ++m) {
    branches.push_back(group(LayerKind::sequential, {with_units(LayerKind::select, m), conv(8, 5), act(Activation::relu),
                                                     pool(2), conv(8, 5), act(Activation::relu), pool(2)}));
  }
  return make(Architecture::mcdcnn, T, M, K,
              {group(LayerKind::branches, std::move(branches)), leaf(LayerKind::flatten), dense(732),
               act(Activation::relu), dense(K), act(Activation::softmax)});
}

ModelSpec build_timecnn(std::size_t T, std::size_t M, std::size_t K) {
  require_length(Architecture::timecnn, T, 7);
  // valid conv 7 -> avg pool 3 -> valid conv 7 -> avg pool 3
  const std::size_t after_first = (T - 6) / 3;
  if (after_first < 7 || (after_first - 6) / 3 < 1) {
    throw std::invalid_argument("timecnn: series of length " + std::to_string(T) +
                                " leave no time steps after the second pooling");
  }
  auto spec = make(Architecture::timecnn, T, M, K,
                   {conv(6, 7, Padding::valid), act(Activation::sigmoid), pool(3, PoolKind::avg),
                    conv(12, 7, Padding::valid), act(Activation::sigmoid), pool(3, PoolKind::avg),
                    leaf(LayerKind::flatten), dense(K), act(Activation::sigmoid)});
  spec.loss = layers::LossKind::mse;
  return spec;
}

ModelSpec build(Architecture a, std::size_t T, std::size_t M, std::size_t K, std::size_t filter_length,
                std::size_t pool_factor) {
  switch (a) {
    case Architecture::mlp: return build_mlp(T, M, K);
    case Architecture::fcn: return build_fcn(T, M, K);
    case Architecture::resnet: return build_resnet(T, M, K);
    case Architecture::encoder: return build_encoder(T, M, K);
    case Architecture::mcnn: return build_mcnn(T, M, K, filter_length, pool_factor);
    case Architecture::tlenet: return build_tlenet(T, M, K);
    case Architecture::mcdcnn: return build_mcdcnn(T, M, K);
    case Architecture::timecnn: return build_timecnn(T, M, K);
  }
  throw std::logic_error("unknown architecture");
}

// ---- summary ------------------------------------------------------------------------------

namespace {

struct Walk {
  std::vector<LayerKind> counted;  // conv / dense / gap / attention, in order
  bool batch = false, instance = false, max_pool = false, avg_pool = false, dropout = false;
  std::vector<std::string> activations;
};

void walk(const LayerSpec& s, Walk& w) {
  switch (s.kind) {
    case LayerKind::conv:
    case LayerKind::dense:
    case LayerKind::gap:
    case LayerKind::attention: w.counted.push_back(s.kind); break;
    case LayerKind::batch_norm: w.batch = true; break;
    case LayerKind::instance_norm: w.instance = true; break;
    case LayerKind::pool: (s.pool == PoolKind::max ? w.max_pool : w.avg_pool) = true; break;
    case LayerKind::dropout: w.dropout = true; break;
    case LayerKind::prelu: w.activations.push_back("PReLU"); break;
    case LayerKind::activation:
      if (s.activation == Activation::relu) w.activations.push_back("ReLU");
      if (s.activation == Activation::sigmoid) w.activations.push_back("Sigmoid");
      if (s.activation == Activation::tanh) w.activations.push_back("Tanh");
      if (s.activation == Activation::softmax) w.activations.push_back("Softmax");
      break;
    case LayerKind::residual:
      // the shortcut projection is not a stage of its own
      walk(s.children.front(), w);
      break;
    case LayerKind::branches: {
      // parallel branches count once; auxiliary flags come from all of them
      Walk first;
      walk(s.children.front(), first);
      w.counted.insert(w.counted.end(), first.counted.begin(), first.counted.end());
      for (const auto& c : s.children) {
        Walk other;
        walk(c, other);
        w.batch |= other.batch;
        w.instance |= other.instance;
        w.max_pool |= other.max_pool;
        w.avg_pool |= other.avg_pool;
        w.dropout |= other.dropout;
      }
      w.activations.insert(w.activations.end(), first.activations.begin(), first.activations.end());
      break;
    }
    default:
      for (const auto& c : s.children) walk(c, w);
  }
}

std::string feature_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "Conv";
    case LayerKind::dense: return "FC";
    case LayerKind::gap: return "GAP";
    case LayerKind::attention: return "Att";
    default: return "?";
  }
}

}  // namespace

ArchitectureSummary summarize(const ModelSpec& spec) {
  Walk w;
  walk(spec.root, w);
  ArchitectureSummary s;
  s.layers = w.counted.size();
  for (auto k : w.counted) s.conv += k == LayerKind::conv;
  for (auto k : w.counted) {
    if (k == LayerKind::dense) break;
    ++s.invariant;
  }
  s.normalize = w.batch ? "Batch" : w.instance ? "Instance" : "None";
  s.pooling = w.max_pool ? "Max" : w.avg_pool ? "Avg" : "None";
  // The classifier is the last dense layer; the feature is whatever feeds it.
  s.feature = w.counted.size() >= 2 ? feature_name(w.counted[w.counted.size() - 2]) : "None";
  // Hidden activation: the one before the classifier's own activation.
  s.activate = w.activations.size() >= 2 ? w.activations.front() : "None";
  s.regularize = w.dropout ? "Dropout" : "None";
  return s;
}

}  // namespace tsc::models
