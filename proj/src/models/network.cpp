#include <algorithm>
#include <stdexcept>

#include "runtime.hpp"
#include "tsc/error.hpp"

namespace tsc::models {

Network::Network(ModelSpec spec, Rng& init) : spec_(std::move(spec)) {
  if (spec_.root.kind != LayerKind::sequential) throw std::invalid_argument("model root must be sequential");
  detail::Geometry g{true, spec_.length, spec_.dims};
  for (std::size_t i = 0; i < spec_.root.children.size(); ++i) {
    top_.push_back(detail::instantiate(spec_.root.children[i], g, init, std::to_string(i)));
  }
  if (g.sequence || g.channels != spec_.classes) {
    throw std::invalid_argument("model " + to_string(spec_.architecture) + " does not end in " +
                                std::to_string(spec_.classes) + " class scores");
  }
  if (!top_.empty()) top_.front()->skip_input_grad();
}

namespace {
// The temporary outlives the delegated constructor call.
Rng& lvalue(Rng&& r) { return r; }
}  // namespace

Network::Network(ModelSpec spec, std::uint64_t seed) : Network(std::move(spec), lvalue(Rng(seed))) {}

Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

namespace {

void check_input(const ModelSpec& spec, const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) != spec.length || x.dim(2) != spec.dims) {
    throw ShapeError("model " + to_string(spec.architecture) + " expects [batch," + std::to_string(spec.length) + "," +
                     std::to_string(spec.dims) + "] inputs, got " + tsc::to_string(x.shape()));
  }
}

}  // namespace

Tensor Network::infer(const Tensor& x) const { return infer_prefix(x, top_.size()); }

Tensor Network::infer_prefix(const Tensor& x, std::size_t count) const {
  check_input(spec_, x);
  Tensor h = x;
  for (std::size_t i = 0; i < std::min(count, top_.size()); ++i) h = top_[i]->infer(h);
  return h;
}

std::size_t Network::top_level_size() const { return top_.size(); }

Tensor Network::infer_batched(const Tensor& x, std::size_t chunk) const {
  check_input(spec_, x);
  const std::size_t n = x.dim(0), row = x.size() / n;
  if (n <= chunk) return infer(x);
  Tensor out(Shape{n, spec_.classes});
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    Tensor part(Shape{len, x.dim(1), x.dim(2)},
                std::vector<double>(x.data() + start * row, x.data() + (start + len) * row));
    const Tensor y = infer(part);
    std::copy(y.data(), y.data() + y.size(), out.data() + start * spec_.classes);
  }
  return out;
}

Tensor Network::forward(const Tensor& x, Rng& rng) {
  check_input(spec_, x);
  Tensor h = x;
  for (auto& m : top_) h = m->forward(h, rng);
  return h;
}

void Network::backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (auto it = top_.rbegin(); it != top_.rend(); ++it) g = (*it)->backward(g);
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& m : top_) m->collect_params(out);
  return out;
}

std::vector<const Param*> Network::params() const {
  std::vector<Param*> tmp;
  for (auto& m : top_) m->collect_params(tmp);
  return {tmp.begin(), tmp.end()};
}

std::vector<Tensor*> Network::buffers() {
  std::vector<Tensor*> out;
  for (auto& m : top_) m->collect_buffers(out);
  return out;
}

void Network::zero_grad() {
  for (auto* p : params()) p->grad.fill(0.0);
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params()) n += p->value.size();
  return n;
}

std::vector<double> Network::state() const {
  std::vector<double> out;
  auto& self = const_cast<Network&>(*this);
  for (auto* p : self.params()) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  for (auto* b : self.buffers()) out.insert(out.end(), b->values().begin(), b->values().end());
  return out;
}

void Network::load_state(std::span<const double> state) {
  std::size_t offset = 0;
  auto take = [&](Tensor& t) {
    if (offset + t.size() > state.size()) throw IntegrityError("parameter blob is shorter than the model");
    std::copy(state.begin() + long(offset), state.begin() + long(offset + t.size()), t.data());
    offset += t.size();
  };
  for (auto* p : params()) take(p->value);
  for (auto* b : buffers()) take(*b);
  if (offset != state.size()) throw IntegrityError("parameter blob is longer than the model");
}

}  // namespace tsc::models
