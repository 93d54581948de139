#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hiertail/hierarchy.hpp"
#include "hiertail/rng.hpp"

namespace hiertail {

/// Lower bound applied to probabilities and path ratios inside logarithms.
inline constexpr double kProbFloor = 1e-12;
/// A parent mass below this is treated as a numerical underflow.
inline constexpr double kUnderflowFloor = 1e-300;

/// Leaf probabilities of one prediction plus their per-level aggregates.
struct LeafDistribution {
  std::vector<double> probs;
  double tau = 1.0;
  /// Empty when no disturbance was applied.
  std::vector<double> noise;
  /// level_probs[h] has one entry per class of level h; level 0 is the root.
  /// Empty until aggregate_levels() runs.
  std::vector<std::vector<double>> level_probs;
};

/// Inverse-CDF transform of a Uniform(0, 1) draw into a standard Gumbel sample.
double gumbel_from_uniform(double a);
std::vector<double> sample_gumbel(std::size_t count, Rng& rng);

/// softmax((logits + noise) / tau). `noise` may be empty, meaning zero.
LeafDistribution gumbel_softmax(std::span<const double> logits, double tau,
                                std::span<const double> noise = {});

/// Fills level_probs bottom-up: each parent's mass is the sum of its children.
LeafDistribution& aggregate_levels(LeafDistribution& dist, const LabelHierarchy& h);

/// Masses along the root path of the true leaf.
struct PathProbs {
  /// path[h-1] is the level-h ancestor index, h = 1..H.
  std::vector<int> path;
  /// s_sums[h] = probability mass under the level-h ancestor, h = 0..H.
  std::vector<double> s_sums;
  /// conditionals[h-1] = s_sums[h] / s_sums[h-1], h = 1..H.
  std::vector<double> conditionals;
};

PathProbs conditional_path_probs(const LeafDistribution& dist, const LabelHierarchy& h,
                                 int true_leaf);

/// One learnable pre-activation parameter per hierarchy node; the weight
/// used by the loss is softplus(theta).
class AdaptiveWeights {
 public:
  AdaptiveWeights() = default;
  /// Initializes every node at level l to softplus^{-1}(level_init(l, H)).
  explicit AdaptiveWeights(const LabelHierarchy& h);

  /// Initial weight of a level: l / H, i.e. 0.25, 0.5, 0.75, 1 for H = 4.
  static double level_init(int level, int depth);

  int depth() const { return static_cast<int>(offset_.size()) - 2; }
  std::size_t size() const { return theta_.size(); }
  std::size_t flat_index(NodeId node) const;
  double theta(NodeId node) const { return theta_[flat_index(node)]; }
  void set_theta(NodeId node, double value) { theta_[flat_index(node)] = value; }
  double value(NodeId node) const;
  std::size_t level_size(int level) const;

  std::span<double> thetas() { return theta_; }
  std::span<const double> thetas() const { return theta_; }

  friend bool operator==(const AdaptiveWeights&, const AdaptiveWeights&) = default;

 private:
  // offset_[l] is the flat index of the first level-l node, l = 1..H+1.
  std::vector<std::size_t> offset_;
  std::vector<double> theta_;
};

double softplus(double x);
double inverse_softplus(double y);
double logistic(double x);

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_logits;
  /// d loss / d theta, only for nodes on the true root path.
  std::vector<std::pair<NodeId, double>> grad_theta;
};

/// -(1/H) * sum_h w(level-h ancestor) * log(S^h / S^{h-1}).
double ahl_forward(const LeafDistribution& dist, const AdaptiveWeights& weights,
                   const LabelHierarchy& h, int true_leaf);

LossOutput ahl_backward(const LeafDistribution& dist, const AdaptiveWeights& weights,
                        const LabelHierarchy& h, int true_leaf);

/// Closed-form logit gradient at the true leaf, (p0 * A - w^H) / (tau * H),
/// with A = sum_{h<H} (w^{h+1} - w^h) / S^h + w^1.
double ahl_true_leaf_gradient(const LeafDistribution& dist, const AdaptiveWeights& weights,
                              const LabelHierarchy& h, int true_leaf);

LossOutput ce_forward_backward(const LeafDistribution& dist, int true_leaf);

struct AblationFlags {
  bool no_exploitation = false;
  bool no_exploration = false;
  bool no_gumbel = false;
  bool no_adaptive = false;
};

enum class LossMode { Ahl, Ce };

struct LossConfig {
  LossMode mode = LossMode::Ahl;
  bool gumbel_noise = true;
  bool learn_weights = true;
  double tau = 1.0;
  std::string variant = "full";
};

/// Full AHL when no flag is set. At most one flag may be set.
LossConfig ablation_config(AblationFlags flags, double tau = 1.0);
/// Plain softmax cross-entropy without disturbance.
LossConfig ce_config(double tau = 1.0);
/// Accepts "full", "no_exploitation", "no_exploration", "no_gumbel",
/// "no_adaptive".
AblationFlags parse_ablation(std::string_view name);

/// Runs the configured loss on one prediction. `noise` is ignored when the
/// configuration disables disturbance; `weights` may be null for CE modes.
LossOutput compute_loss(const LossConfig& config, std::span<const double> logits,
                        std::span<const double> noise, const AdaptiveWeights* weights,
                        const LabelHierarchy& h, int true_leaf);

}  // namespace hiertail
