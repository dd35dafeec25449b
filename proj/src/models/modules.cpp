#include <algorithm>
#include <stdexcept>

#include "runtime.hpp"
#include "tsc/error.hpp"

namespace tsc::models::detail {

using namespace tsc::layers;

namespace {

[[noreturn]] void geometry_error(const std::string& name, const std::string& what) {
  throw std::invalid_argument("layer " + name + ": " + what);
}

void require_sequence(const Geometry& g, const std::string& name) {
  if (!g.sequence) geometry_error(name, "expects a [time, channels] input");
}

// ---- leaf modules -------------------------------------------------------------------

class Conv final : public Module {
 public:
  Conv(std::size_t filters, std::size_t length, Padding padding, Geometry& g, Rng& init, const std::string& name)
      : padding_(padding) {
    require_sequence(g, name);
    const std::size_t out_t = conv1d_output_length(g.time, length, padding);
    w_ = {name + ".w", glorot_uniform(length * g.channels, length * filters, {filters, length, g.channels}, init), {}};
    b_ = {name + ".b", Tensor(Shape{filters}), {}};
    w_.grad = Tensor(w_.value.shape());
    b_.grad = Tensor(b_.value.shape());
    g.time = out_t;
    g.channels = filters;
  }
  Tensor infer(const Tensor& x) const override { return conv1d_forward(x, w_.value, b_.value, padding_); }
  Tensor forward(const Tensor& x, Rng&) override {
    x_ = x;
    return infer(x);
  }
  Tensor backward(const Tensor& grad) override {
    auto g = conv1d_backward(grad, x_, w_.value, padding_, need_input_grad_);
    add_inplace(w_.grad, g.w);
    add_inplace(b_.grad, g.b);
    return std::move(g.x);
  }
  void collect_params(std::vector<Param*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

 private:
  Padding padding_;
  Param w_, b_;
  Tensor x_;
};

class Dense final : public Module {
 public:
  Dense(std::size_t units, Geometry& g, Rng& init, const std::string& name) {
    if (g.sequence) geometry_error(name, "dense layers need a flattened input");
    w_ = {name + ".w", glorot_uniform(g.channels, units, {g.channels, units}, init), {}};
    b_ = {name + ".b", Tensor(Shape{units}), {}};
    w_.grad = Tensor(w_.value.shape());
    b_.grad = Tensor(b_.value.shape());
    g.channels = units;
  }
  Tensor infer(const Tensor& x) const override { return dense_forward(x, w_.value, b_.value); }
  Tensor forward(const Tensor& x, Rng&) override {
    x_ = x;
    return infer(x);
  }
  Tensor backward(const Tensor& grad) override {
    auto g = dense_backward(grad, x_, w_.value, need_input_grad_);
    add_inplace(w_.grad, g.w);
    add_inplace(b_.grad, g.b);
    return std::move(g.x);
  }
  void collect_params(std::vector<Param*>& out) override {
    out.push_back(&w_);
    out.push_back(&b_);
  }

 private:
  Param w_, b_;
  Tensor x_;
};

class Norm final : public Module {
 public:
  Norm(bool batch, Geometry& g, const std::string& name) : batch_(batch) {
    require_sequence(g, name);
    const std::string tag = batch ? ".bn" : ".in";
    gamma_ = {name + tag + ".gamma", Tensor(Shape{g.channels}, 1.0), Tensor(Shape{g.channels})};
    beta_ = {name + tag + ".beta", Tensor(Shape{g.channels}), Tensor(Shape{g.channels})};
    if (batch) running_ = {Tensor(Shape{g.channels}), Tensor(Shape{g.channels}, 1.0)};
  }
  Tensor infer(const Tensor& x) const override {
    return batch_ ? batch_norm_infer(x, gamma_.value, beta_.value, running_)
                  : instance_norm_forward(x, gamma_.value, beta_.value, nullptr);
  }
  Tensor forward(const Tensor& x, Rng&) override {
    return batch_ ? batch_norm_train(x, gamma_.value, beta_.value, &running_, &cache_)
                  : instance_norm_forward(x, gamma_.value, beta_.value, &cache_);
  }
  Tensor backward(const Tensor& grad) override {
    auto g = batch_ ? batch_norm_backward(grad, cache_, gamma_.value)
                    : instance_norm_backward(grad, cache_, gamma_.value);
    add_inplace(gamma_.grad, g.gamma);
    add_inplace(beta_.grad, g.beta);
    return std::move(g.x);
  }
  void collect_params(std::vector<Param*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void collect_buffers(std::vector<Tensor*>& out) override {
    if (!batch_) return;
    out.push_back(&running_.mean);
    out.push_back(&running_.var);
  }

 private:
  bool batch_;
  Param gamma_, beta_;
  RunningStats running_;
  NormCache cache_;
};

class Act final : public Module {
 public:
  explicit Act(Activation kind) : kind_(kind) {}
  Tensor infer(const Tensor& x) const override { return activation_forward(x, kind_); }
  Tensor forward(const Tensor& x, Rng&) override {
    y_ = infer(x);
    return y_;
  }
  Tensor backward(const Tensor& grad) override { return activation_backward(grad, y_, kind_); }

 private:
  Activation kind_;
  Tensor y_;
};

class Prelu final : public Module {
 public:
  Prelu(const Geometry& g, const std::string& name)
      : slopes_{name + ".prelu", Tensor(Shape{g.channels}, kPreluInitialSlope), Tensor(Shape{g.channels})} {}
  Tensor infer(const Tensor& x) const override { return prelu_forward(x, slopes_.value); }
  Tensor forward(const Tensor& x, Rng&) override {
    x_ = x;
    return infer(x);
  }
  Tensor backward(const Tensor& grad) override {
    auto g = prelu_backward(grad, x_, slopes_.value);
    add_inplace(slopes_.grad, g.slopes);
    return std::move(g.x);
  }
  void collect_params(std::vector<Param*>& out) override { out.push_back(&slopes_); }

 private:
  Param slopes_;
  Tensor x_;
};

class Dropout final : public Module {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  Tensor infer(const Tensor& x) const override { return x; }
  Tensor forward(const Tensor& x, Rng& rng) override {
    return dropout_forward(x, rate_, Mode::train, &rng, &mask_);
  }
  Tensor backward(const Tensor& grad) override { return dropout_backward(grad, mask_); }

 private:
  double rate_;
  Tensor mask_;
};

class Pool final : public Module {
 public:
  Pool(std::size_t window, PoolKind kind, std::size_t max_windows, Geometry& g, const std::string& name)
      : window_(window), kind_(kind), max_windows_(max_windows) {
    require_sequence(g, name);
    if (window == 0 || window > g.time) {
      geometry_error(name, "pool window " + std::to_string(window) + " does not fit length " + std::to_string(g.time));
    }
    g.time = g.time / window;
    if (max_windows) g.time = std::min(g.time, max_windows);
  }
  Tensor infer(const Tensor& x) const override { return pool1d_forward(x, window_, kind_, nullptr, max_windows_); }
  Tensor forward(const Tensor& x, Rng&) override {
    shape_ = x.shape();
    return pool1d_forward(x, window_, kind_, &argmax_, max_windows_);
  }
  Tensor backward(const Tensor& grad) override {
    return pool1d_backward(grad, shape_, window_, kind_, argmax_);
  }

 private:
  std::size_t window_;
  PoolKind kind_;
  std::size_t max_windows_;
  Shape shape_;
  std::vector<std::size_t> argmax_;
};

class Gap final : public Module {
 public:
  explicit Gap(Geometry& g, const std::string& name) {
    require_sequence(g, name);
    g.sequence = false;
  }
  Tensor infer(const Tensor& x) const override { return gap_forward(x); }
  Tensor forward(const Tensor& x, Rng&) override {
    length_ = x.dim(1);
    return gap_forward(x);
  }
  Tensor backward(const Tensor& grad) override { return gap_backward(grad, length_); }

 private:
  std::size_t length_ = 0;
};

class Attention final : public Module {
 public:
  explicit Attention(Geometry& g, const std::string& name) {
    require_sequence(g, name);
    if (g.channels % 2) geometry_error(name, "attention needs an even channel count");
    g.sequence = false;
    g.channels /= 2;
  }
  Tensor infer(const Tensor& x) const override { return attention_forward(x, nullptr); }
  Tensor forward(const Tensor& x, Rng&) override {
    x_ = x;
    return attention_forward(x, &weights_);
  }
  Tensor backward(const Tensor& grad) override { return attention_backward(grad, x_, weights_); }

 private:
  Tensor x_, weights_;
};

class Flatten final : public Module {
 public:
  explicit Flatten(Geometry& g) {
    if (g.sequence) g.channels *= g.time;
    g.sequence = false;
  }
  Tensor infer(const Tensor& x) const override {
    if (x.rank() == 2) return x;
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }
  Tensor forward(const Tensor& x, Rng&) override {
    shape_ = x.shape();
    return infer(x);
  }
  Tensor backward(const Tensor& grad) override { return grad.reshaped(shape_); }

 private:
  Shape shape_;
};

class Select final : public Module {
 public:
  Select(std::size_t channel, Geometry& g, const std::string& name) : channel_(channel) {
    require_sequence(g, name);
    if (channel >= g.channels) geometry_error(name, "channel index out of range");
    g.channels = 1;
  }
  Tensor infer(const Tensor& x) const override {
    const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
    Tensor y(Shape{b, t, 1});
    for (std::size_t i = 0; i < b * t; ++i) y[i] = x[i * c + channel_];
    return y;
  }
  Tensor forward(const Tensor& x, Rng&) override {
    shape_ = x.shape();
    return infer(x);
  }
  Tensor backward(const Tensor& grad) override {
    if (!need_input_grad_) return {};
    Tensor g(shape_);
    const std::size_t c = shape_[2];
    for (std::size_t i = 0; i < grad.size(); ++i) g[i * c + channel_] = grad[i];
    return g;
  }

 private:
  std::size_t channel_;
  Shape shape_;
};

// Keeps steps 0, k, 2k, ...: output length ceil(T / k).
class Downsample final : public Module {
 public:
  Downsample(std::size_t factor, Geometry& g, const std::string& name) : factor_(factor) {
    require_sequence(g, name);
    if (factor == 0) geometry_error(name, "down-sampling factor must be >= 1");
    g.time = (g.time + factor - 1) / factor;
  }
  Tensor infer(const Tensor& x) const override {
    const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2), out_t = (t + factor_ - 1) / factor_;
    Tensor y(Shape{b, out_t, c});
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t s = 0; s < out_t; ++s)
        for (std::size_t k = 0; k < c; ++k) y.at(i, s, k) = x.at(i, s * factor_, k);
    return y;
  }
  Tensor forward(const Tensor& x, Rng&) override {
    shape_ = x.shape();
    return infer(x);
  }
  Tensor backward(const Tensor& grad) override {
    if (!need_input_grad_) return {};
    Tensor g(shape_);
    for (std::size_t i = 0; i < grad.dim(0); ++i)
      for (std::size_t s = 0; s < grad.dim(1); ++s)
        for (std::size_t k = 0; k < grad.dim(2); ++k) g.at(i, s * factor_, k) = grad.at(i, s, k);
    return g;
  }

 private:
  std::size_t factor_;
  Shape shape_;
};

// Centred moving average over steps [t - (w-1)/2, t + w/2], truncated at the
// edges so the length is preserved.
class Smooth final : public Module {
 public:
  Smooth(std::size_t window, Geometry& g, const std::string& name) : window_(window) {
    require_sequence(g, name);
    if (window == 0) geometry_error(name, "smoothing window must be >= 1");
  }
  Tensor infer(const Tensor& x) const override {
    const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t s = 0; s < t; ++s) {
        const auto [lo, hi] = span(s, t);
        for (std::size_t k = 0; k < c; ++k) {
          double acc = 0.0;
          for (std::size_t u = lo; u < hi; ++u) acc += x.at(i, u, k);
          y.at(i, s, k) = acc / double(hi - lo);
        }
      }
    return y;
  }
  Tensor forward(const Tensor& x, Rng&) override {
    shape_ = x.shape();
    return infer(x);
  }
  Tensor backward(const Tensor& grad) override {
    if (!need_input_grad_) return {};
    Tensor g(shape_);
    const std::size_t b = shape_[0], t = shape_[1], c = shape_[2];
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t s = 0; s < t; ++s) {
        const auto [lo, hi] = span(s, t);
        for (std::size_t k = 0; k < c; ++k) {
          const double share = grad.at(i, s, k) / double(hi - lo);
          for (std::size_t u = lo; u < hi; ++u) g.at(i, u, k) += share;
        }
      }
    return g;
  }

 private:
  std::pair<std::size_t, std::size_t> span(std::size_t s, std::size_t t) const {
    const std::size_t back = (window_ - 1) / 2, ahead = window_ / 2;
    return {s >= back ? s - back : 0, std::min(t, s + ahead + 1)};
  }
  std::size_t window_;
  Shape shape_;
};

// ---- composites -----------------------------------------------------------------------

class Sequential final : public Module {
 public:
  Sequential(const std::vector<LayerSpec>& children, Geometry& g, Rng& init, const std::string& name) {
    for (std::size_t i = 0; i < children.size(); ++i) {
      layers_.push_back(instantiate(children[i], g, init, name + "." + std::to_string(i)));
    }
  }
  Tensor infer(const Tensor& x) const override {
    Tensor h = x;
    for (const auto& l : layers_) h = l->infer(h);
    return h;
  }
  Tensor forward(const Tensor& x, Rng& rng) override {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, rng);
    return h;
  }
  Tensor backward(const Tensor& grad) override {
    Tensor g = grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }
  void collect_params(std::vector<Param*>& out) override {
    for (auto& l : layers_) l->collect_params(out);
  }
  void collect_buffers(std::vector<Tensor*>& out) override {
    for (auto& l : layers_) l->collect_buffers(out);
  }
  void skip_input_grad() override {
    need_input_grad_ = false;
    if (!layers_.empty()) layers_.front()->skip_input_grad();
  }

 private:
  std::vector<std::unique_ptr<Module>> layers_;
};

class Residual final : public Module {
 public:
  Residual(const LayerSpec& spec, Geometry& g, Rng& init, const std::string& name) {
    if (spec.children.empty() || spec.children.size() > 2) geometry_error(name, "residual needs a body and an optional shortcut");
    Geometry body_g = g, short_g = g;
    body_ = instantiate(spec.children[0], body_g, init, name + ".body");
    if (spec.children.size() == 2) shortcut_ = instantiate(spec.children[1], short_g, init, name + ".shortcut");
    if (body_g.sequence != short_g.sequence || body_g.time != short_g.time || body_g.channels != short_g.channels) {
      geometry_error(name, "body and shortcut produce different shapes");
    }
    g = body_g;
  }
  Tensor infer(const Tensor& x) const override {
    return residual_add(body_->infer(x), shortcut_ ? shortcut_->infer(x) : x);
  }
  Tensor forward(const Tensor& x, Rng& rng) override {
    Tensor y = body_->forward(x, rng);
    return residual_add(y, shortcut_ ? shortcut_->forward(x, rng) : x);
  }
  Tensor backward(const Tensor& grad) override {
    const auto split = residual_add_backward(grad);
    Tensor gx = body_->backward(split.x);
    Tensor gs = shortcut_ ? shortcut_->backward(split.y) : split.y;
    if (!need_input_grad_) return {};
    add_inplace(gx, gs);
    return gx;
  }
  void collect_params(std::vector<Param*>& out) override {
    body_->collect_params(out);
    if (shortcut_) shortcut_->collect_params(out);
  }
  void collect_buffers(std::vector<Tensor*>& out) override {
    body_->collect_buffers(out);
    if (shortcut_) shortcut_->collect_buffers(out);
  }
  void skip_input_grad() override {
    need_input_grad_ = false;
    body_->skip_input_grad();
    if (shortcut_) shortcut_->skip_input_grad();
  }

 private:
  std::unique_ptr<Module> body_, shortcut_;
};

// Parallel branches over one input, concatenated along channels (or features).
class Branches final : public Module {
 public:
  Branches(const std::vector<LayerSpec>& children, Geometry& g, Rng& init, const std::string& name) {
    if (children.empty()) geometry_error(name, "branches need at least one child");
    Geometry out{};
    for (std::size_t i = 0; i < children.size(); ++i) {
      Geometry bg = g;
      branches_.push_back(instantiate(children[i], bg, init, name + "." + std::to_string(i)));
      if (i == 0) {
        out = bg;
        out.channels = 0;
      } else if (bg.sequence != out.sequence || (bg.sequence && bg.time != out.time)) {
        geometry_error(name, "branch " + std::to_string(i) + " emits a different time extent");
      }
      widths_.push_back(bg.channels);
      out.channels += bg.channels;
    }
    g = out;
  }
  Tensor infer(const Tensor& x) const override {
    std::vector<Tensor> outs;
    for (const auto& b : branches_) outs.push_back(b->infer(x));
    return concat(outs);
  }
  Tensor forward(const Tensor& x, Rng& rng) override {
    std::vector<Tensor> outs;
    for (auto& b : branches_) outs.push_back(b->forward(x, rng));
    return concat(outs);
  }
  Tensor backward(const Tensor& grad) override {
    const std::size_t total = grad.shape().back(), rows = grad.size() / total;
    Tensor gx;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      Shape s = grad.shape();
      s.back() = widths_[i];
      Tensor part(s);
      for (std::size_t r = 0; r < rows; ++r)
        std::copy(grad.data() + r * total + offset, grad.data() + r * total + offset + widths_[i],
                  part.data() + r * widths_[i]);
      offset += widths_[i];
      Tensor g = branches_[i]->backward(part);
      if (!need_input_grad_) continue;
      if (gx.empty()) {
        gx = std::move(g);
      } else {
        add_inplace(gx, g);
      }
    }
    return gx;
  }
  void collect_params(std::vector<Param*>& out) override {
    for (auto& b : branches_) b->collect_params(out);
  }
  void collect_buffers(std::vector<Tensor*>& out) override {
    for (auto& b : branches_) b->collect_buffers(out);
  }
  void skip_input_grad() override {
    need_input_grad_ = false;
    for (auto& b : branches_) b->skip_input_grad();
  }

 private:
  Tensor concat(const std::vector<Tensor>& outs) const {
    Shape s = outs.front().shape();
    std::size_t total = 0;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      Shape si = outs[i].shape();
      si.back() = s.back();
      if (si != s) throw ShapeError("branches: outputs " + tsc::to_string(outs[i].shape()) + " and " + tsc::to_string(s) + " differ");
      total += outs[i].shape().back();
    }
    const std::size_t rows = outs.front().size() / outs.front().shape().back();
    s.back() = total;
    Tensor y(s);
    std::size_t offset = 0;
    for (const auto& o : outs) {
      const std::size_t w = o.shape().back();
      for (std::size_t r = 0; r < rows; ++r) std::copy(o.data() + r * w, o.data() + (r + 1) * w, y.data() + r * total + offset);
      offset += w;
    }
    return y;
  }
  std::vector<std::unique_ptr<Module>> branches_;
  std::vector<std::size_t> widths_;
};

}  // namespace

std::unique_ptr<Module> instantiate(const LayerSpec& spec, Geometry& g, Rng& init, const std::string& name) {
  switch (spec.kind) {
    case LayerKind::conv:
      return std::make_unique<Conv>(spec.units, spec.length, spec.padding, g, init, name);
    case LayerKind::dense:
      return std::make_unique<Dense>(spec.units, g, init, name);
    case LayerKind::batch_norm:
      return std::make_unique<Norm>(true, g, name);
    case LayerKind::instance_norm:
      return std::make_unique<Norm>(false, g, name);
    case LayerKind::activation:
      return std::make_unique<Act>(spec.activation);
    case LayerKind::prelu:
      return std::make_unique<Prelu>(g, name);
    case LayerKind::dropout:
      return std::make_unique<Dropout>(spec.rate);
    case LayerKind::pool:
      return std::make_unique<Pool>(spec.length, spec.pool, spec.max_windows, g, name);
    case LayerKind::gap:
      return std::make_unique<Gap>(g, name);
    case LayerKind::attention:
      return std::make_unique<Attention>(g, name);
    case LayerKind::flatten:
      return std::make_unique<Flatten>(g);
    case LayerKind::sequential:
      return std::make_unique<Sequential>(spec.children, g, init, name);
    case LayerKind::residual:
      return std::make_unique<Residual>(spec, g, init, name);
    case LayerKind::branches:
      return std::make_unique<Branches>(spec.children, g, init, name);
    case LayerKind::select:
      return std::make_unique<Select>(spec.units, g, name);
    case LayerKind::downsample:
      return std::make_unique<Downsample>(spec.units, g, name);
    case LayerKind::smooth:
      return std::make_unique<Smooth>(spec.units, g, name);
  }
  throw std::logic_error("unknown layer kind");
}

}  // namespace tsc::models::detail
