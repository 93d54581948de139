#include "hiertail/ahl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hiertail/error.hpp"

namespace hiertail {

double gumbel_from_uniform(double a) { return -std::log(-std::log(a)); }

std::vector<double> sample_gumbel(std::size_t count, Rng& rng) {
  std::vector<double> out(count);
  for (auto& g : out) g = gumbel_from_uniform(rng.uniform_open());
  return out;
}

LeafDistribution gumbel_softmax(std::span<const double> logits, double tau,
                                std::span<const double> noise) {
  if (!(tau > 0.0)) {
    throw Error(ErrorCode::NonPositiveTau, "temperature must be positive");
  }
  if (!noise.empty() && noise.size() != logits.size()) {
    throw Error(ErrorCode::HierarchyMismatch, "noise length " + std::to_string(noise.size()) +
                                                  " != logits length " +
                                                  std::to_string(logits.size()));
  }
  LeafDistribution dist;
  dist.tau = tau;
  dist.noise.assign(noise.begin(), noise.end());
  dist.probs.resize(logits.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = (logits[i] + (noise.empty() ? 0.0 : noise[i])) / tau;
    dist.probs[i] = x;
    peak = std::max(peak, x);
  }
  double total = 0.0;
  for (auto& p : dist.probs) {
    p = std::exp(p - peak);
    total += p;
  }
  for (auto& p : dist.probs) p /= total;
  return dist;
}

LeafDistribution& aggregate_levels(LeafDistribution& dist, const LabelHierarchy& h) {
  const int H = h.depth();
  if (dist.probs.size() != h.leaf_count()) {
    throw Error(ErrorCode::HierarchyMismatch,
                "distribution has " + std::to_string(dist.probs.size()) +
                    " leaves, hierarchy has " + std::to_string(h.leaf_count()));
  }
  dist.level_probs.assign(H + 1, {});
  dist.level_probs[H] = dist.probs;
  for (int level = H; level >= 1; --level) {
    auto& upper = dist.level_probs[level - 1];
    upper.assign(h.class_count(level - 1), 0.0);
    const auto& lower = dist.level_probs[level];
    if (level == 1) {
      for (double p : lower) upper[0] += p;
    } else {
      const auto& parent = h.transition(level).parent;
      for (std::size_t c = 0; c < lower.size(); ++c) upper[parent[c]] += lower[c];
    }
  }
  return dist;
}

PathProbs conditional_path_probs(const LeafDistribution& dist, const LabelHierarchy& h,
                                 int true_leaf) {
  const int H = h.depth();
  if (static_cast<int>(dist.level_probs.size()) != H + 1) {
    LeafDistribution copy = dist;
    aggregate_levels(copy, h);
    return conditional_path_probs(copy, h, true_leaf);
  }
  PathProbs out;
  out.path = h.path(true_leaf);
  out.s_sums.resize(H + 1);
  out.s_sums[0] = dist.level_probs[0][0];
  for (int level = 1; level <= H; ++level) {
    out.s_sums[level] = dist.level_probs[level][out.path[level - 1]];
  }
  out.conditionals.resize(H);
  for (int level = 1; level <= H; ++level) {
    const double parent = out.s_sums[level - 1];
    if (parent < kUnderflowFloor) {
      throw Error(ErrorCode::DegenerateParent,
                  "ancestor mass at level " + std::to_string(level - 1) + " underflowed");
    }
    out.conditionals[level - 1] = out.s_sums[level] / parent;
  }
  return out;
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double inverse_softplus(double y) { return std::log(std::expm1(y)); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

AdaptiveWeights::AdaptiveWeights(const LabelHierarchy& h) {
  const int H = h.depth();
  offset_.assign(H + 2, 0);
  for (int level = 1; level <= H; ++level) {
    offset_[level + 1] = offset_[level] + h.class_count(level);
  }
  theta_.resize(offset_[H + 1]);
  for (int level = 1; level <= H; ++level) {
    const double init = inverse_softplus(level_init(level, H));
    std::fill(theta_.begin() + static_cast<std::ptrdiff_t>(offset_[level]),
              theta_.begin() + static_cast<std::ptrdiff_t>(offset_[level + 1]), init);
  }
}

double AdaptiveWeights::level_init(int level, int depth) {
  return static_cast<double>(level) / static_cast<double>(depth);
}

std::size_t AdaptiveWeights::level_size(int level) const {
  return offset_.at(level + 1) - offset_.at(level);
}

std::size_t AdaptiveWeights::flat_index(NodeId node) const {
  if (node.level < 1 || node.level > depth() || node.index < 0 ||
      static_cast<std::size_t>(node.index) >= level_size(node.level)) {
    throw Error(ErrorCode::InvalidNode, "no adaptive weight for node (" +
                                            std::to_string(node.level) + ", " +
                                            std::to_string(node.index) + ")");
  }
  return offset_[node.level] + static_cast<std::size_t>(node.index);
}

double AdaptiveWeights::value(NodeId node) const { return softplus(theta(node)); }

namespace {

void check_weights(const AdaptiveWeights& weights, const LabelHierarchy& h) {
  if (weights.depth() != h.depth() || weights.size() != h.node_count()) {
    throw Error(ErrorCode::HierarchyMismatch, "adaptive weights do not match the hierarchy");
  }
}

}  // namespace

double ahl_forward(const LeafDistribution& dist, const AdaptiveWeights& weights,
                   const LabelHierarchy& h, int true_leaf) {
  check_weights(weights, h);
  const int H = h.depth();
  const auto path = conditional_path_probs(dist, h, true_leaf);
  double loss = 0.0;
  for (int level = 1; level <= H; ++level) {
    const double w = weights.value({level, path.path[level - 1]});
    loss -= w * std::log(std::max(path.conditionals[level - 1], kProbFloor));
  }
  return loss / H;
}

LossOutput ahl_backward(const LeafDistribution& dist, const AdaptiveWeights& weights,
                        const LabelHierarchy& h, int true_leaf) {
  check_weights(weights, h);
  const int H = h.depth();
  const auto path = conditional_path_probs(dist, h, true_leaf);
  const auto& S = path.s_sums;

  LossOutput out;
  // For a leaf j whose lowest common ancestor with the true leaf sits at
  // depth d, only levels h <= d+1 see j inside S^h or S^{h-1}:
  //   dl/dz_j = -p_j / (H tau) * (sum_{h<=d} w_h/S^h - sum_{h<=min(d+1,H)} w_h/S^{h-1}).
  // Levels whose ratio hit the floor are constant and contribute nothing.
  std::vector<double> on_path(H + 1, 0.0);   // w_h / S^h
  std::vector<double> parent(H + 1, 0.0);    // w_h / S^{h-1}
  for (int level = 1; level <= H; ++level) {
    const NodeId node{level, path.path[level - 1]};
    const double w = weights.value(node);
    const double ratio = path.conditionals[level - 1];
    const bool floored = ratio < kProbFloor;
    const double log_ratio = std::log(std::max(ratio, kProbFloor));
    out.value -= w * log_ratio;
    out.grad_theta.emplace_back(node, -log_ratio * logistic(weights.theta(node)) / H);
    if (!floored) {
      on_path[level] = w / S[level];
      parent[level] = w / S[level - 1];
    }
  }
  out.value /= H;

  std::vector<double> coef(H + 1, 0.0);
  double on_sum = 0.0;
  double parent_sum = parent[1];
  coef[0] = on_sum - parent_sum;
  for (int d = 1; d <= H; ++d) {
    on_sum += on_path[d];
    if (d + 1 <= H) parent_sum += parent[d + 1];
    coef[d] = on_sum - parent_sum;
  }

  const std::size_t leaves = h.leaf_count();
  std::vector<unsigned char> lca_depth(leaves, 0);
  for (int level = 1; level <= H; ++level) {
    for (int leaf : h.leaves_of({level, path.path[level - 1]})) {
      lca_depth[leaf] = static_cast<unsigned char>(level);
    }
  }
  const double scale = -1.0 / (H * dist.tau);
  out.grad_logits.resize(leaves);
  for (std::size_t j = 0; j < leaves; ++j) {
    out.grad_logits[j] = scale * dist.probs[j] * coef[lca_depth[j]];
  }
  return out;
}

double ahl_true_leaf_gradient(const LeafDistribution& dist, const AdaptiveWeights& weights,
                              const LabelHierarchy& h, int true_leaf) {
  check_weights(weights, h);
  const int H = h.depth();
  const auto path = conditional_path_probs(dist, h, true_leaf);
  std::vector<double> w(H + 1);
  for (int level = 1; level <= H; ++level) {
    w[level] = weights.value({level, path.path[level - 1]});
  }
  double A = w[1];
  for (int level = 1; level < H; ++level) {
    A += (w[level + 1] - w[level]) / path.s_sums[level];
  }
  const double p = dist.probs[true_leaf];
  return (p * A - w[H]) / (dist.tau * H);
}

LossOutput ce_forward_backward(const LeafDistribution& dist, int true_leaf) {
  if (true_leaf < 0 || static_cast<std::size_t>(true_leaf) >= dist.probs.size()) {
    throw Error(ErrorCode::InvalidLeaf, "leaf " + std::to_string(true_leaf) + " out of range");
  }
  LossOutput out;
  out.value = -std::log(std::max(dist.probs[true_leaf], kProbFloor));
  out.grad_logits.resize(dist.probs.size());
  for (std::size_t j = 0; j < dist.probs.size(); ++j) {
    out.grad_logits[j] = dist.probs[j] / dist.tau;
  }
  out.grad_logits[true_leaf] -= 1.0 / dist.tau;
  return out;
}

LossConfig ablation_config(AblationFlags flags, double tau) {
  const int set = flags.no_exploitation + flags.no_exploration + flags.no_gumbel +
                  flags.no_adaptive;
  if (set > 1) {
    throw Error(ErrorCode::ConflictingFlags, "at most one ablation flag may be set");
  }
  if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTau, "temperature must be positive");
  LossConfig c;
  c.tau = tau;
  if (flags.no_exploitation) {
    c.mode = LossMode::Ce;
    c.learn_weights = false;
    c.variant = "no_exploitation";
  } else if (flags.no_exploration) {
    c.gumbel_noise = false;
    c.learn_weights = false;
    c.variant = "no_exploration";
  } else if (flags.no_gumbel) {
    c.gumbel_noise = false;
    c.variant = "no_gumbel";
  } else if (flags.no_adaptive) {
    c.learn_weights = false;
    c.variant = "no_adaptive";
  }
  return c;
}

LossConfig ce_config(double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTau, "temperature must be positive");
  LossConfig c;
  c.mode = LossMode::Ce;
  c.gumbel_noise = false;
  c.learn_weights = false;
  c.tau = tau;
  c.variant = "ce";
  return c;
}

AblationFlags parse_ablation(std::string_view name) {
  AblationFlags f;
  if (name == "full" || name.empty() || name == "none") return f;
  if (name == "no_exploitation") {
    f.no_exploitation = true;
  } else if (name == "no_exploration") {
    f.no_exploration = true;
  } else if (name == "no_gumbel") {
    f.no_gumbel = true;
  } else if (name == "no_adaptive") {
    f.no_adaptive = true;
  } else {
    throw Error(ErrorCode::ConfigError, "unknown ablation '" + std::string(name) + "'");
  }
  return f;
}

LossOutput compute_loss(const LossConfig& config, std::span<const double> logits,
                        std::span<const double> noise, const AdaptiveWeights* weights,
                        const LabelHierarchy& h, int true_leaf) {
  auto dist = gumbel_softmax(logits, config.tau,
                             config.gumbel_noise ? noise : std::span<const double>{});
  if (config.mode == LossMode::Ce) return ce_forward_backward(dist, true_leaf);
  if (weights == nullptr) {
    throw Error(ErrorCode::HierarchyMismatch, "hierarchical loss requires adaptive weights");
  }
  aggregate_levels(dist, h);
  auto out = ahl_backward(dist, *weights, h, true_leaf);
  if (!config.learn_weights) out.grad_theta.clear();
  return out;
}

}  // namespace hiertail
