#include "hiertail/verify.hpp"

#include <algorithm>
#include <cmath>

#include "hiertail/ahl.hpp"
#include "hiertail/rng.hpp"

namespace hiertail {

namespace {

LabelHierarchy random_tree(Rng& rng) {
  const int depth = 2 + static_cast<int>(rng.below(3));
  std::vector<std::size_t> sizes(depth);
  sizes[depth - 1] = 1 + rng.below(50);
  for (int level = depth - 2; level >= 0; --level) sizes[level] = 1 + rng.below(sizes[level + 1]);
  std::vector<ParentMap> maps;
  for (int level = 1; level < depth; ++level) {
    ParentMap map;
    for (std::size_t i = 0; i < sizes[level]; ++i) {
      const std::size_t parent = i < sizes[level - 1] ? i : rng.below(sizes[level - 1]);
      map.add("n" + std::to_string(level + 1) + "_" + std::to_string(i),
              "n" + std::to_string(level) + "_" + std::to_string(parent));
    }
    maps.push_back(std::move(map));
  }
  return LabelHierarchy::from_maps(maps);
}

double grad_error(double analytic, double numeric, const VerifyOptions& o) {
  const double diff = std::fabs(analytic - numeric);
  if (diff <= o.abs_tol) return 0.0;
  return diff / std::max(std::fabs(analytic), std::fabs(numeric));
}

}  // namespace

std::vector<CheckResult> verify_loss(const LabelHierarchy* fixed, const VerifyOptions& o) {
  CheckResult grad_z{"grad_logits vs central differences"};
  CheckResult grad_t{"grad_theta vs central differences"};
  CheckResult closed{"true-leaf closed form"};
  CheckResult telescoping{"conditional product equals leaf probability"};
  CheckResult normalization{"level sums equal 1"};
  CheckResult monotone{"path masses non-increasing"};
  CheckResult equivalence{"unit-weight loss times H equals cross-entropy"};

  Rng rng(o.seed);
  const double taus[3] = {0.5, 1.0, 2.0};
  for (std::size_t n = 0; n < o.instances; ++n) {
    const LabelHierarchy h = fixed ? *fixed : random_tree(rng);
    const std::size_t leaves = h.leaf_count();
    std::vector<double> logits(leaves);
    for (auto& z : logits) z = rng.uniform(-5.0, 5.0);
    const auto noise = sample_gumbel(leaves, rng);
    const double tau = taus[rng.below(3)];
    AdaptiveWeights w(h);
    for (auto& t : w.thetas()) t = rng.uniform(-2.0, 2.0);
    const int truth = static_cast<int>(rng.below(leaves));

    auto loss_at = [&](const std::vector<double>& z, const AdaptiveWeights& weights) {
      auto d = gumbel_softmax(z, tau, noise);
      aggregate_levels(d, h);
      return ahl_forward(d, weights, h, truth);
    };

    auto dist = gumbel_softmax(logits, tau, noise);
    aggregate_levels(dist, h);
    const auto out = ahl_backward(dist, w, h, truth);

    for (std::size_t j = 0; j < leaves; ++j) {
      auto z = logits;
      z[j] += o.step;
      const double up = loss_at(z, w);
      z[j] = logits[j] - o.step;
      const double down = loss_at(z, w);
      grad_z.worst = std::max(grad_z.worst,
                              grad_error(out.grad_logits[j], (up - down) / (2 * o.step), o));
    }
    for (const auto& [node, g] : out.grad_theta) {
      AdaptiveWeights shifted = w;
      shifted.set_theta(node, w.theta(node) + o.step);
      const double up = loss_at(logits, shifted);
      shifted.set_theta(node, w.theta(node) - o.step);
      const double down = loss_at(logits, shifted);
      grad_t.worst = std::max(grad_t.worst, grad_error(g, (up - down) / (2 * o.step), o));
    }
    closed.worst = std::max(
        closed.worst, grad_error(ahl_true_leaf_gradient(dist, w, h, truth), out.grad_logits[truth], o));

    const auto path = conditional_path_probs(dist, h, truth);
    double product = 1.0;
    for (double r : path.conditionals) product *= r;
    telescoping.worst = std::max(telescoping.worst, std::fabs(product - dist.probs[truth]));
    for (const auto& level : dist.level_probs) {
      double sum = 0.0;
      for (double p : level) sum += p;
      normalization.worst = std::max(normalization.worst, std::fabs(sum - 1.0));
    }
    for (std::size_t l = 1; l < path.s_sums.size(); ++l) {
      if (path.s_sums[l] > path.s_sums[l - 1]) {
        monotone.worst = std::max(monotone.worst, path.s_sums[l] - path.s_sums[l - 1]);
        monotone.passed = false;
      }
    }

    AdaptiveWeights unit(h);
    for (auto& t : unit.thetas()) t = inverse_softplus(1.0);
    const double ahl = ahl_forward(dist, unit, h, truth) * h.depth();
    equivalence.worst =
        std::max(equivalence.worst, std::fabs(ahl - ce_forward_backward(dist, truth).value));
  }

  grad_z.passed = grad_z.worst < o.rel_tol;
  grad_t.passed = grad_t.worst < o.rel_tol;
  closed.passed = closed.worst < 1e-9;
  telescoping.passed = telescoping.worst <= 1e-12;
  normalization.passed = normalization.worst <= 1e-9;
  equivalence.passed = equivalence.worst <= 1e-10;
  std::vector<CheckResult> results = {grad_z,        grad_t,   closed,     telescoping,
                                      normalization, monotone, equivalence};
  for (auto& r : results) r.instances = o.instances;
  return results;
}

}  // namespace hiertail
