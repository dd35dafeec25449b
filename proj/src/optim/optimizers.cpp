#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "tsc/error.hpp"
#include "tsc/optim.hpp"

namespace tsc::optim {

using models::Param;

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adadelta: return "adadelta";
  }
  return "?";
}

namespace {

void check_finite(const Param& p) {
  if (!p.grad.all_finite()) throw DivergenceError("non-finite gradient in parameter " + p.name);
  if (p.grad.shape() != p.value.shape()) throw ShapeError("gradient shape differs from parameter " + p.name);
}

class Sgd final : public Optimizer {
 public:
  void step(std::span<Param* const> params, double lr) override {
    for (auto* p : params) check_finite(*p);
    for (auto* p : params) axpy(-lr, p->grad, p->value);
  }
};

// Per-parameter auxiliary tensors, created on first use.
class Slots {
 public:
  Tensor& get(const Param* p, std::size_t slot) {
    auto& v = slots_[p];
    if (v.empty()) v.assign(2, Tensor(p->value.shape()));
    return v[slot];
  }

 private:
  std::unordered_map<const Param*, std::vector<Tensor>> slots_;
};

class Adam final : public Optimizer {
 public:
  void step(std::span<Param* const> params, double lr) override {
    for (auto* p : params) check_finite(*p);
    ++t_;
    const double c1 = 1.0 - std::pow(kAdamBeta1, double(t_)), c2 = 1.0 - std::pow(kAdamBeta2, double(t_));
    for (auto* p : params) {
      auto& m = slots_.get(p, 0);
      auto& v = slots_.get(p, 1);
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double g = p->grad[i];
        m[i] = kAdamBeta1 * m[i] + (1 - kAdamBeta1) * g;
        v[i] = kAdamBeta2 * v[i] + (1 - kAdamBeta2) * g * g;
        p->value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEpsilon);
      }
    }
  }

 private:
  Slots slots_;
  std::size_t t_ = 0;
};

class Adadelta final : public Optimizer {
 public:
  void step(std::span<Param* const> params, double lr) override {
    for (auto* p : params) check_finite(*p);
    for (auto* p : params) {
      auto& eg = slots_.get(p, 0);  // running E[g^2]
      auto& ed = slots_.get(p, 1);  // running E[dx^2]
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double g = p->grad[i];
        eg[i] = kAdadeltaRho * eg[i] + (1 - kAdadeltaRho) * g * g;
        const double dx = -std::sqrt(ed[i] + kAdadeltaEpsilon) / std::sqrt(eg[i] + kAdadeltaEpsilon) * g;
        ed[i] = kAdadeltaRho * ed[i] + (1 - kAdadeltaRho) * dx * dx;
        p->value[i] += lr * dx;
      }
    }
  }

 private:
  Slots slots_;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return std::make_unique<Sgd>();
    case OptimizerKind::adam: return std::make_unique<Adam>();
    case OptimizerKind::adadelta: return std::make_unique<Adadelta>();
  }
  throw std::logic_error("unknown optimizer");
}

LearningRate::LearningRate(double initial, double decay, std::optional<Plateau> plateau)
    : base_(initial), decay_(decay), plateau_(plateau) {
  if (!(initial > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(decay >= 0)) throw std::invalid_argument("decay must be non-negative");
}

double LearningRate::current() const { return base_ / (1.0 + decay_ * double(updates_)); }

void LearningRate::on_epoch_end(double reference_loss) {
  if (!plateau_) return;
  if (!seen_ || reference_loss < best_) {
    best_ = reference_loss;
    seen_ = true;
    wait_ = 0;
    return;
  }
  if (++wait_ >= plateau_->patience) {
    if (base_ > plateau_->min_lr) base_ = std::max(base_ * plateau_->factor, plateau_->min_lr);
    wait_ = 0;
  }
}

}  // namespace tsc::optim
