#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hiertail/ahl.hpp"
#include "hiertail/error.hpp"
#include "hiertail/verify.hpp"
#include "oracles.hpp"

using namespace hiertail;

namespace {

struct Instance {
  std::vector<ParentMap> maps;
  LabelHierarchy h;
  std::vector<double> logits;
  std::vector<double> noise;
  double tau = 1.0;
  AdaptiveWeights weights;
  int true_leaf = 0;
};

Instance random_instance(Rng& rng, bool with_noise = true) {
  Instance in;
  const int depth = 2 + static_cast<int>(rng.below(3));
  in.maps = oracle::random_maps(rng, depth, 50);
  in.h = LabelHierarchy::from_maps(in.maps);
  const std::size_t n = in.h.leaf_count();
  for (std::size_t i = 0; i < n; ++i) in.logits.push_back(rng.uniform(-5.0, 5.0));
  if (with_noise) in.noise = sample_gumbel(n, rng);
  const double taus[3] = {0.5, 1.0, 2.0};
  in.tau = taus[rng.below(3)];
  in.weights = AdaptiveWeights(in.h);
  for (auto& t : in.weights.thetas()) t = rng.uniform(-2.0, 2.0);
  in.true_leaf = static_cast<int>(rng.below(n));
  return in;
}

LeafDistribution distribution(const Instance& in) {
  auto dist = gumbel_softmax(in.logits, in.tau, in.noise);
  aggregate_levels(dist, in.h);
  return dist;
}

std::vector<long double> widen(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

// Loss as a function of logits, recomputed by the oracle.
long double oracle_loss(const Instance& in, const std::vector<long double>& logits,
                        const std::vector<long double>& thetas) {
  const oracle::NameTree tree(in.maps);
  auto weight = [&](int level, const std::string& name) {
    const NodeId node{level, *in.h.index_of(level, name)};
    return oracle::softplus_ld(thetas[in.weights.flat_index(node)]);
  };
  const auto& leaves = in.h.class_names(in.h.depth());
  return oracle::ahl_loss(tree, leaves, logits, widen(in.noise), in.tau, weight,
                          leaves[in.true_leaf]);
}

void set_all_weights(AdaptiveWeights& w, double value) {
  for (auto& t : w.thetas()) t = inverse_softplus(value);
}

LabelHierarchy two_level(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<ParentMap> maps(1);
  for (const auto& [c, p] : pairs) maps[0].add(c, p);
  return LabelHierarchy::from_maps(maps);
}

}  // namespace

TEST_CASE("gumbel transform at analytic points") {
  CHECK(gumbel_from_uniform(1.0 / std::numbers::e) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(gumbel_from_uniform(std::exp(-std::numbers::e)) == doctest::Approx(-1.0));
}

TEST_CASE("gumbel samples: mean, variance, determinism") {
  Rng rng(42);
  const auto g = sample_gumbel(1'000'000, rng);
  double mean = 0.0;
  for (double x : g) mean += x;
  mean /= static_cast<double>(g.size());
  double var = 0.0;
  for (double x : g) var += (x - mean) * (x - mean);
  var /= static_cast<double>(g.size() - 1);
  CHECK(std::fabs(mean - std::numbers::egamma) < 0.01);
  const double pi2_6 = std::numbers::pi * std::numbers::pi / 6.0;
  CHECK(std::fabs(var - pi2_6) / pi2_6 < 0.02);

  Rng a(9), b(9);
  CHECK(sample_gumbel(100, a) == sample_gumbel(100, b));
}

TEST_CASE("gumbel_softmax closed forms") {
  const std::vector<double> uniform(5, 0.3);
  for (double p : gumbel_softmax(uniform, 1.0).probs) CHECK(p == doctest::Approx(0.2));

  const std::vector<double> z = {std::log(2.0), 0.0};
  auto d1 = gumbel_softmax(z, 1.0);
  CHECK(d1.probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(d1.probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  auto d2 = gumbel_softmax(z, 0.5);
  CHECK(d2.probs[0] == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(d2.probs[1] == doctest::Approx(0.2).epsilon(1e-14));

  const std::vector<double> big = {1000.0, 999.0};
  auto d3 = gumbel_softmax(big, 1.0);
  CHECK(std::isfinite(d3.probs[0]));
  CHECK(d3.probs[0] + d3.probs[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(gumbel_softmax(z, 0.0), Error);
  const std::vector<double> short_noise = {0.0};
  CHECK_THROWS_AS(gumbel_softmax(z, 1.0, short_noise), Error);
}

TEST_CASE("aggregation sums children") {
  const auto one = two_level({{"l1", "p"}, {"l2", "p"}});
  LeafDistribution d;
  d.probs = {0.3, 0.7};
  aggregate_levels(d, one);
  CHECK(d.level_probs[1][0] == doctest::Approx(1.0));

  const auto two = two_level({{"l1", "a"}, {"l2", "a"}, {"l3", "b"}});
  d = {};
  d.probs = {0.2, 0.3, 0.5};
  aggregate_levels(d, two);
  CHECK(d.level_probs[1][0] == doctest::Approx(0.5));
  CHECK(d.level_probs[1][1] == doctest::Approx(0.5));
  CHECK(d.level_probs[0][0] == doctest::Approx(1.0));

  LeafDistribution wrong;
  wrong.probs = {0.5, 0.5};
  try {
    aggregate_levels(wrong, two);
    FAIL("expected HierarchyMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::HierarchyMismatch);
  }
}

TEST_CASE("random trees: level sums, path masses and normalization") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng);
    const auto dist = distribution(in);
    const oracle::NameTree tree(in.maps);
    const auto& leaves = in.h.class_names(in.h.depth());
    for (int level = 0; level <= in.h.depth(); ++level) {
      double total = 0.0;
      for (std::size_t i = 0; i < in.h.class_count(level); ++i) {
        long double brute = 0.0L;
        const auto under = tree.leaves_under(level, in.h.name_of({level, static_cast<int>(i)}));
        for (std::size_t leaf = 0; leaf < leaves.size(); ++leaf) {
          if (under.contains(leaves[leaf])) brute += dist.probs[leaf];
        }
        CHECK(dist.level_probs[level][i] == doctest::Approx(static_cast<double>(brute)).epsilon(1e-12));
        total += dist.level_probs[level][i];
      }
      CHECK(std::fabs(total - 1.0) < 1e-9);
    }
    const auto path = conditional_path_probs(dist, in.h, in.true_leaf);
    double product = 1.0;
    for (double r : path.conditionals) product *= r;
    CHECK(std::fabs(product - dist.probs[in.true_leaf]) < 1e-12);
    for (int level = 1; level <= in.h.depth(); ++level) {
      CHECK(path.s_sums[level - 1] >= path.s_sums[level]);
    }
    CHECK(path.s_sums.back() > 0.0);
  }
}

TEST_CASE("single-leaf paths give unit conditionals above the last level") {
  std::vector<ParentMap> maps(2);
  maps[0].add("a", "n");
  maps[1].add("l1", "a");
  maps[1].add("l2", "a");
  const auto h = LabelHierarchy::from_maps(maps);
  auto dist = gumbel_softmax(std::vector<double>{0.4, -0.2}, 1.0);
  aggregate_levels(dist, h);
  const auto path = conditional_path_probs(dist, h, 1);
  CHECK(path.conditionals[0] == doctest::Approx(1.0));
  CHECK(path.conditionals[1] == doctest::Approx(1.0));
  CHECK(path.conditionals[2] == doctest::Approx(dist.probs[1]));
}

TEST_CASE("hand-computed loss on a two-level tree") {
  const auto h = two_level({{"l1", "p"}, {"l2", "p"}});
  AdaptiveWeights w(h);
  w.set_theta({1, 0}, inverse_softplus(0.25));
  w.set_theta({2, 0}, inverse_softplus(1.0));
  w.set_theta({2, 1}, inverse_softplus(1.0));
  auto dist = gumbel_softmax(std::vector<double>{0.0, 0.0}, 1.0);
  CHECK(ahl_forward(dist, w, h, 0) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(ahl_forward(dist, w, h, 0) == doctest::Approx(0.3466).epsilon(1e-4));
}

TEST_CASE("weights initialise to level constants") {
  std::vector<ParentMap> maps(3);
  maps[0].add("a", "n");
  maps[1].add("c", "a");
  maps[2].add("l", "c");
  const auto h = LabelHierarchy::from_maps(maps);
  const AdaptiveWeights w(h);
  const double expected[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int level = 1; level <= 4; ++level) {
    CHECK(std::fabs(w.value({level, 0}) - expected[level]) < 1e-12);
  }
}

TEST_CASE("unit weights reduce to cross-entropy") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto in = random_instance(rng);
    set_all_weights(in.weights, 1.0);
    const auto dist = distribution(in);
    const double ahl = ahl_forward(dist, in.weights, in.h, in.true_leaf);
    const auto ce = ce_forward_backward(dist, in.true_leaf);
    CHECK(std::fabs(ahl * in.h.depth() - ce.value) < 1e-10);
    const auto out = ahl_backward(dist, in.weights, in.h, in.true_leaf);
    for (std::size_t j = 0; j < out.grad_logits.size(); ++j) {
      CHECK(std::fabs(out.grad_logits[j] * in.h.depth() - ce.grad_logits[j]) < 1e-10);
    }
  }
}

TEST_CASE("loss matches the leaf-set recomputation") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng);
    const double got = ahl_forward(distribution(in), in.weights, in.h, in.true_leaf);
    const auto expected =
        oracle_loss(in, widen(in.logits), widen(std::vector<double>(in.weights.thetas().begin(),
                                                                    in.weights.thetas().end())));
    CHECK(got == doctest::Approx(static_cast<double>(expected)).epsilon(1e-10));
  }
}

TEST_CASE("gradients match central differences of the oracle loss") {
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const auto in = random_instance(rng);
    const auto dist = distribution(in);
    const auto out = ahl_backward(dist, in.weights, in.h, in.true_leaf);
    const auto thetas = widen(std::vector<double>(in.weights.thetas().begin(),
                                                  in.weights.thetas().end()));
    const auto logits = widen(in.logits);
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const auto fd = oracle::central_difference(
          [&](std::vector<long double>& z) { return oracle_loss(in, z, thetas); }, logits, j);
      CHECK(oracle::grad_close(out.grad_logits[j], fd));
    }
    REQUIRE(out.grad_theta.size() == static_cast<std::size_t>(in.h.depth()));
    for (const auto& [node, g] : out.grad_theta) {
      CHECK(node.index == in.h.ancestor(in.true_leaf, node.level));
      const auto fd = oracle::central_difference(
          [&](std::vector<long double>& t) { return oracle_loss(in, logits, t); }, thetas,
          in.weights.flat_index(node));
      CHECK(oracle::grad_close(g, fd));
    }
    CHECK(ahl_true_leaf_gradient(dist, in.weights, in.h, in.true_leaf) ==
          doctest::Approx(out.grad_logits[in.true_leaf]).epsilon(1e-10));
  }
}

TEST_CASE("shift invariance") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto in = random_instance(rng);
    const auto base = ahl_backward(distribution(in), in.weights, in.h, in.true_leaf);
    for (auto& z : in.logits) z += 3.7;
    const auto shifted = ahl_backward(distribution(in), in.weights, in.h, in.true_leaf);
    CHECK(std::fabs(base.value - shifted.value) < 1e-9);
    for (std::size_t j = 0; j < base.grad_logits.size(); ++j) {
      CHECK(std::fabs(base.grad_logits[j] - shifted.grad_logits[j]) < 1e-9);
    }
  }
}

TEST_CASE("underflowing parent mass raises DegenerateParent") {
  const auto h = two_level({{"l1", "a"}, {"l2", "b"}, {"l3", "b"}});
  const AdaptiveWeights w(h);
  const auto dist = gumbel_softmax(std::vector<double>{0.0, -1000.0, -1000.0}, 1.0);
  try {
    ahl_backward(dist, w, h, 1);
    FAIL("expected DegenerateParent");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateParent);
  }
}

TEST_CASE("cross-entropy values and gradients") {
  const auto uniform = gumbel_softmax(std::vector<double>(7, 0.0), 1.0);
  CHECK(ce_forward_backward(uniform, 2).value == doctest::Approx(std::log(7.0)));
  const auto peaked = gumbel_softmax(std::vector<double>{2000.0, 0.0}, 1.0);
  const auto floor = ce_forward_backward(peaked, 1);
  CHECK(floor.value <= -std::log(kProbFloor) + 1e-9);
  CHECK(ce_forward_backward(peaked, 0).value == doctest::Approx(0.0));

  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng, false);
    const auto dist = gumbel_softmax(in.logits, 1.0);
    const auto out = ce_forward_backward(dist, in.true_leaf);
    CHECK(out.grad_theta.empty());
    CHECK(out.grad_logits[in.true_leaf] == dist.probs[in.true_leaf] - 1.0);
    const auto logits = widen(in.logits);
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const auto fd = oracle::central_difference(
          [&](std::vector<long double>& z) { return oracle::cross_entropy(z, {}, 1.0L, in.true_leaf); },
          logits, j);
      CHECK(oracle::grad_close(out.grad_logits[j], fd, 1e-6));
    }
  }
}

TEST_CASE("ablation configurations") {
  CHECK(ablation_config({}).variant == "full");
  const auto exploit = ablation_config(parse_ablation("no_exploitation"));
  CHECK(exploit.mode == LossMode::Ce);
  CHECK(exploit.gumbel_noise);
  const auto explore = ablation_config(parse_ablation("no_exploration"));
  CHECK(!explore.gumbel_noise);
  CHECK(!explore.learn_weights);
  const auto gumbel = ablation_config(parse_ablation("no_gumbel"));
  CHECK(!gumbel.gumbel_noise);
  CHECK(gumbel.learn_weights);
  const auto adaptive = ablation_config(parse_ablation("no_adaptive"));
  CHECK(adaptive.gumbel_noise);
  CHECK(!adaptive.learn_weights);

  AblationFlags two;
  two.no_gumbel = true;
  two.no_adaptive = true;
  try {
    ablation_config(two);
    FAIL("expected ConflictingFlags");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConflictingFlags);
  }
  CHECK_THROWS_AS(parse_ablation("no_such_variant"), Error);
}

TEST_CASE("ablation contracts on random instances") {
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng);
    Rng other(1000 + trial);
    const auto noise2 = sample_gumbel(in.logits.size(), other);

    const auto adaptive = compute_loss(ablation_config(parse_ablation("no_adaptive"), in.tau),
                                       in.logits, in.noise, &in.weights, in.h, in.true_leaf);
    CHECK(adaptive.grad_theta.empty());

    for (const char* name : {"no_gumbel", "no_exploration"}) {
      const auto cfg = ablation_config(parse_ablation(name), in.tau);
      const auto a = compute_loss(cfg, in.logits, in.noise, &in.weights, in.h, in.true_leaf);
      const auto b = compute_loss(cfg, in.logits, noise2, &in.weights, in.h, in.true_leaf);
      CHECK(a.value == b.value);
      CHECK(a.grad_logits == b.grad_logits);
    }

    const auto exploit = compute_loss(ablation_config(parse_ablation("no_exploitation"), in.tau),
                                      in.logits, in.noise, &in.weights, in.h, in.true_leaf);
    const auto direct = ce_forward_backward(gumbel_softmax(in.logits, in.tau, in.noise), in.true_leaf);
    CHECK(std::fabs(exploit.value - direct.value) < 1e-10);
  }
}

TEST_CASE("identical inputs give bit-identical outputs") {
  Rng a(77), b(77);
  const auto x = random_instance(a);
  const auto y = random_instance(b);
  const auto ox = ahl_backward(distribution(x), x.weights, x.h, x.true_leaf);
  const auto oy = ahl_backward(distribution(y), y.weights, y.h, y.true_leaf);
  CHECK(ox.value == oy.value);
  CHECK(ox.grad_logits == oy.grad_logits);
}

TEST_CASE("bundled verification passes on random and fixed trees") {
  VerifyOptions options;
  options.instances = 40;
  for (const auto& r : verify_loss(nullptr, options)) {
    INFO(r.name << " worst " << r.worst);
    CHECK(r.passed);
  }
  Rng rng(2);
  const auto h = LabelHierarchy::from_maps(oracle::random_maps(rng, 4, 30));
  for (const auto& r : verify_loss(&h, options)) CHECK(r.passed);
}
