#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tsc/models.hpp"

namespace tsc::models {

bool requires_slicing(Architecture a) { return a == Architecture::mcnn || a == Architecture::tlenet; }

data::SlicingConfig default_slicing(Architecture a, std::size_t length) {
  const auto stride = std::max<std::size_t>(1, std::size_t(std::ceil(0.1 * double(length) - 1e-9)));
  switch (a) {
    case Architecture::mcnn: return {0.9, stride, {}};
    case Architecture::tlenet: return {0.9, stride, {1.0, 2.0, 0.5}};
    default: throw std::invalid_argument(to_string(a) + " does not use window slicing");
  }
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw std::invalid_argument("argmax_rows expects a [N, K] matrix");
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = scores.data() + i * k;
    out[i] = std::size_t(std::max_element(row, row + k) - row);
  }
  return out;
}

std::size_t majority_vote(std::span<const std::size_t> votes, std::size_t classes) {
  if (votes.empty()) throw std::invalid_argument("majority_vote: no votes");
  std::vector<std::size_t> count(classes, 0);
  for (auto v : votes) {
    if (v >= classes) throw std::invalid_argument("majority_vote: class index out of range");
    ++count[v];
  }
  return std::size_t(std::max_element(count.begin(), count.end()) - count.begin());
}

std::vector<std::size_t> predict(const Network& net, const data::Dataset& data,
                                 const std::optional<data::SlicingConfig>& slicing) {
  const auto arch = net.spec().architecture;
  if (requires_slicing(arch) && !slicing) throw std::invalid_argument(to_string(arch) + " predicts from slices");
  if (!requires_slicing(arch) && slicing) throw std::invalid_argument(to_string(arch) + " does not use slicing");
  if (!slicing) return argmax_rows(net.infer_batched(data.x));

  const auto sliced = data::augment(data, *slicing);
  const auto votes = argmax_rows(net.infer_batched(sliced.slices.x));
  std::vector<std::vector<std::size_t>> per(data.size());
  for (std::size_t i = 0; i < votes.size(); ++i) per[sliced.parent[i]].push_back(votes[i]);
  std::vector<std::size_t> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = majority_vote(per[i], net.spec().classes);
  return out;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw std::invalid_argument("accuracy: prediction and label counts differ");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return double(hit) / double(truth.size());
}

}  // namespace tsc::models
