#pragma once

#include <memory>
#include <string>

#include "tsc/models.hpp"

namespace tsc::models::detail {

/// Activation geometry flowing through the builder: [T, C] per sample, or a
/// flat feature vector once `sequence` is false.
struct Geometry {
  bool sequence = true;
  std::size_t time = 0;
  std::size_t channels = 0;  // features when !sequence
};

/// Creates the module for `spec`, advancing `g` to its output geometry and
/// drawing initial weights from `init`.
std::unique_ptr<Module> instantiate(const LayerSpec& spec, Geometry& g, Rng& init, const std::string& name);

}  // namespace tsc::models::detail
