#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hiertail/hierarchy.hpp"

namespace hiertail {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  /// Largest observed deviation, in the check's own unit.
  double worst = 0.0;
};

struct VerifyOptions {
  std::size_t instances = 200;
  std::uint64_t seed = 42;
  /// Central-difference step and tolerances for the gradient checks.
  double step = 1e-6;
  double rel_tol = 1e-5;
  double abs_tol = 1e-8;
};

/// Gradient, telescoping, normalization and equivalence checks on random
/// logits, noise, temperatures and weights. Uses `h` when given, otherwise a
/// fresh random tree (depth 2..4, at most 50 leaves) per instance.
std::vector<CheckResult> verify_loss(const LabelHierarchy* h, const VerifyOptions& options);

}  // namespace hiertail
