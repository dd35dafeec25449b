#include <algorithm>
#include <stdexcept>

#include "tsc/error.hpp"
#include "tsc/explain.hpp"

namespace tsc::explain {

namespace {

// Top-level index of the GAP layer; the dense head follows it.
std::size_t gap_index(const models::Network& net) {
  const auto& spec = net.spec();
  if (!gap_headed(spec.architecture)) {
    throw UnsupportedArchitecture(models::to_string(spec.architecture) +
                                  " has no GAP layer before its softmax; CAM and GAP features need fcn or resnet");
  }
  const auto& top = spec.root.children;
  for (std::size_t i = 0; i + 1 < top.size(); ++i)
    if (top[i].kind == models::LayerKind::gap && top[i + 1].kind == models::LayerKind::dense) return i;
  throw UnsupportedArchitecture("network has no GAP -> dense head");
}

const models::Param& head_param(const models::Network& net, std::size_t dense, const char* suffix) {
  const std::string name = std::to_string(dense) + suffix;
  for (const auto* p : net.params())
    if (p->name == name) return *p;
  throw std::logic_error("missing parameter " + name);
}

}  // namespace

bool gap_headed(models::Architecture a) {
  return a == models::Architecture::fcn || a == models::Architecture::resnet;
}

Tensor gap_features(const models::Network& net, const Tensor& x) {
  const std::size_t g = gap_index(net);
  const std::size_t n = x.dim(0), row = x.size() / std::max<std::size_t>(n, 1), chunk = 64;
  Tensor out;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    Tensor part(Shape{len, x.dim(1), x.dim(2)},
                std::vector<double>(x.data() + start * row, x.data() + (start + len) * row));
    const Tensor f = net.infer_prefix(part, g + 1);
    if (out.empty()) out = Tensor(Shape{n, f.dim(1)});
    std::copy(f.data(), f.data() + f.size(), out.data() + start * f.dim(1));
  }
  return out;
}

Tensor gap_features(const models::Network& net, const data::Dataset& data) { return gap_features(net, data.x); }

CamOutput compute_cam(const models::Network& net, const Tensor& series, std::size_t cls) {
  const std::size_t g = gap_index(net);
  const std::size_t K = net.spec().classes;
  if (cls >= K) throw std::invalid_argument("class index " + std::to_string(cls) + " out of range for " +
                                            std::to_string(K) + " classes");
  if (series.rank() != 2) throw ShapeError("compute_cam expects one series [T, M], got " + to_string(series.shape()));
  const std::size_t T = series.dim(0);
  const Tensor x = series.reshaped(Shape{1, T, series.dim(1)});

  const Tensor a = net.infer_prefix(x, g);         // [1, T, C]
  const Tensor z = net.infer_prefix(x, g + 2);     // [1, K]
  const models::Param& w = head_param(net, g + 1, ".w");  // [C, K]
  const models::Param& b = head_param(net, g + 1, ".b");
  const std::size_t C = a.dim(2);

  CamOutput out;
  out.cls = cls;
  out.activations = a.reshaped(Shape{T, C});
  out.logits.assign(z.data(), z.data() + K);
  out.bias = b.value[cls];
  out.weights.resize(C);
  for (std::size_t m = 0; m < C; ++m) out.weights[m] = w.value.at(m, cls);
  out.cam.assign(T, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t m = 0; m < C; ++m) out.cam[t] += out.weights[m] * out.activations.at(t, m);

  const auto [lo, hi] = std::minmax_element(out.cam.begin(), out.cam.end());
  const double span = *hi - *lo;
  out.normalized.resize(T, 0.0);
  if (span > 0)
    for (std::size_t t = 0; t < T; ++t) out.normalized[t] = (out.cam[t] - *lo) / span;
  return out;
}

}  // namespace tsc::explain
