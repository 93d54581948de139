#include "hiertail/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "hiertail/error.hpp"
#include "hiertail/metrics.hpp"

namespace hiertail {

BackboneParams BackboneParams::zeros(std::size_t n_locations, std::size_t n_users,
                                     std::size_t dim) {
  if (dim == 0) throw Error(ErrorCode::ConfigError, "embedding dimension must be >= 1");
  BackboneParams p;
  p.dim = dim;
  p.n_locations = n_locations;
  p.n_users = n_users;
  p.loc_embeddings.assign(n_locations * dim, 0.0);
  p.user_embeddings.assign(n_users * dim, 0.0);
  p.output_weights.assign(dim * n_locations, 0.0);
  p.output_bias.assign(n_locations, 0.0);
  return p;
}

BackboneParams BackboneParams::random(std::size_t n_locations, std::size_t n_users,
                                      std::size_t dim, Rng& rng, double scale) {
  auto p = zeros(n_locations, n_users, dim);
  for (auto* block : {&p.loc_embeddings, &p.user_embeddings, &p.output_weights}) {
    for (auto& x : *block) x = rng.uniform(-scale, scale);
  }
  return p;
}

std::vector<std::span<double>> BackboneParams::blocks() {
  return {loc_embeddings, user_embeddings, output_weights, output_bias};
}

std::vector<std::span<const double>> BackboneParams::blocks() const {
  return {loc_embeddings, user_embeddings, output_weights, output_bias};
}

void BackboneParams::set_zero() {
  for (auto block : blocks()) std::fill(block.begin(), block.end(), 0.0);
}

namespace {

void check_inputs(const BackboneParams& params, int user, std::span<const int> prefix) {
  if (prefix.empty()) throw Error(ErrorCode::IndexOutOfRange, "empty prefix");
  if (user < 0 || static_cast<std::size_t>(user) >= params.n_users) {
    throw Error(ErrorCode::IndexOutOfRange, "user index " + std::to_string(user));
  }
  for (int loc : prefix) {
    if (loc < 0 || static_cast<std::size_t>(loc) >= params.n_locations) {
      throw Error(ErrorCode::IndexOutOfRange, "location index " + std::to_string(loc));
    }
  }
}

void pool(const BackboneParams& params, int user, std::span<const int> prefix,
          std::vector<double>& hidden) {
  const std::size_t d = params.dim;
  hidden.assign(d, 0.0);
  for (int loc : prefix) {
    const double* row = &params.loc_embeddings[static_cast<std::size_t>(loc) * d];
    for (std::size_t k = 0; k < d; ++k) hidden[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(prefix.size());
  const double* urow = &params.user_embeddings[static_cast<std::size_t>(user) * d];
  for (std::size_t k = 0; k < d; ++k) hidden[k] = hidden[k] * inv + urow[k];
}

}  // namespace

void backbone_forward(const BackboneParams& params, int user, std::span<const int> prefix,
                      std::vector<double>& logits, std::vector<double>& hidden) {
  check_inputs(params, user, prefix);
  pool(params, user, prefix, hidden);
  const std::size_t P = params.n_locations;
  logits.assign(params.output_bias.begin(), params.output_bias.end());
  double* z = logits.data();
  for (std::size_t k = 0; k < params.dim; ++k) {
    const double hk = hidden[k];
    const double* w = &params.output_weights[k * P];
    for (std::size_t j = 0; j < P; ++j) z[j] += hk * w[j];
  }
}

std::vector<double> backbone_forward(const BackboneParams& params, int user,
                                     std::span<const int> prefix) {
  std::vector<double> logits, hidden;
  backbone_forward(params, user, prefix, logits, hidden);
  return logits;
}

void backbone_backward(const BackboneParams& params, int user, std::span<const int> prefix,
                       std::span<const double> grad_logits, BackboneParams& grads,
                       double scale) {
  check_inputs(params, user, prefix);
  const std::size_t d = params.dim;
  const std::size_t P = params.n_locations;
  if (grad_logits.size() != P) {
    throw Error(ErrorCode::HierarchyMismatch, "gradient length does not match |P|");
  }
  std::vector<double> hidden;
  pool(params, user, prefix, hidden);

  std::vector<double> grad_hidden(d, 0.0);
  const double* g = grad_logits.data();
  for (std::size_t j = 0; j < P; ++j) grads.output_bias[j] += scale * g[j];
  for (std::size_t k = 0; k < d; ++k) {
    const double* w = &params.output_weights[k * P];
    double* gw = &grads.output_weights[k * P];
    const double hk = scale * hidden[k];
    double acc = 0.0;
    for (std::size_t j = 0; j < P; ++j) {
      gw[j] += hk * g[j];
      acc += w[j] * g[j];
    }
    grad_hidden[k] = scale * acc;
  }
  double* gu = &grads.user_embeddings[static_cast<std::size_t>(user) * d];
  for (std::size_t k = 0; k < d; ++k) gu[k] += grad_hidden[k];
  const double inv = 1.0 / static_cast<double>(prefix.size());
  for (int loc : prefix) {
    double* gl = &grads.loc_embeddings[static_cast<std::size_t>(loc) * d];
    for (std::size_t k = 0; k < d; ++k) gl[k] += grad_hidden[k] * inv;
  }
}

BackboneParams backbone_backward(const BackboneParams& params, int user,
                                 std::span<const int> prefix,
                                 std::span<const double> grad_logits) {
  auto grads = BackboneParams::zeros(params.n_locations, params.n_users, params.dim);
  backbone_backward(params, user, prefix, grad_logits, grads);
  return grads;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (!(learning_rate >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "learning rate must be non-negative");
  }
}

std::size_t Adam::add(std::size_t size) {
  m_.emplace_back(size, 0.0);
  v_.emplace_back(size, 0.0);
  return m_.size() - 1;
}

void Adam::update(std::size_t slot, std::span<double> params, std::span<const double> grads) {
  auto& m = m_.at(slot);
  auto& v = v_.at(slot);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * grads[i];
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * grads[i] * grads[i];
    params[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
  }
}

void check_alignment(const CheckinDataset& dataset, const LabelHierarchy& h) {
  const auto& leaves = h.class_names(h.depth());
  if (leaves.size() != dataset.locations.size()) {
    throw Error(ErrorCode::HierarchyMismatch,
                "hierarchy has " + std::to_string(leaves.size()) + " leaves, dataset has " +
                    std::to_string(dataset.locations.size()) + " locations");
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i] != dataset.locations[i].id) {
      throw Error(ErrorCode::HierarchyMismatch,
                  "leaf '" + leaves[i] + "' does not match location '" +
                      dataset.locations[i].id + "'");
    }
  }
}

namespace {

double validation_mrr5(const BackboneParams& params,
                       const std::vector<PredictionSample>& samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> logits, hidden;
  double total = 0.0;
  for (const auto& s : samples) {
    backbone_forward(params, s.user, s.prefix, logits, hidden);
    total += mrr_at_k(rank_of_true(logits, s.target), 5);
  }
  return total / static_cast<double>(samples.size());
}

double min_weight(const AdaptiveWeights& weights) {
  double m = std::numeric_limits<double>::infinity();
  for (double t : weights.thetas()) m = std::min(m, softplus(t));
  return m;
}

}  // namespace

TrainResult train(const CheckinDataset& dataset, const LabelHierarchy& h,
                  const TrainConfig& config, const StepObserver& observer) {
  check_alignment(dataset, h);
  if (config.batch_size == 0) throw Error(ErrorCode::ConfigError, "batch size must be >= 1");
  const auto train_samples = expand_samples(dataset, Split::Train);
  if (train_samples.empty()) {
    throw Error(ErrorCode::EmptyTrainSplit, "train split yields no prediction samples");
  }
  const auto val_samples = expand_samples(dataset, Split::Val);

  Rng rng(config.seed);
  TrainResult result;
  result.params = BackboneParams::random(dataset.locations.size(), dataset.users.size(),
                                         config.dim, rng);
  result.weights = AdaptiveWeights(h);
  if (config.epochs == 0) return result;

  BackboneParams params = result.params;
  AdaptiveWeights weights = result.weights;
  auto grads = BackboneParams::zeros(params.n_locations, params.n_users, params.dim);
  std::vector<double> theta_grads(weights.size(), 0.0);

  Adam adam(config.learning_rate, config.beta1, config.beta2);
  std::vector<std::size_t> slots;
  for (auto block : params.blocks()) slots.push_back(adam.add(block.size()));
  const std::size_t theta_slot = adam.add(weights.size());

  const bool use_weights = config.loss.mode == LossMode::Ahl;
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> logits, hidden, noise;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      grads.set_zero();
      std::fill(theta_grads.begin(), theta_grads.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& s = train_samples[order[i]];
        backbone_forward(params, s.user, s.prefix, logits, hidden);
        if (config.loss.gumbel_noise) {
          noise = sample_gumbel(logits.size(), rng);
        } else {
          noise.clear();
        }
        const auto out = compute_loss(config.loss, logits, noise,
                                      use_weights ? &weights : nullptr, h, s.target);
        batch_loss += out.value;
        backbone_backward(params, s.user, s.prefix, out.grad_logits, grads, inv_batch);
        for (const auto& [node, g] : out.grad_theta) {
          theta_grads[weights.flat_index(node)] += g * inv_batch;
        }
      }
      adam.begin_step();
      auto param_blocks = params.blocks();
      auto grad_blocks = grads.blocks();
      for (std::size_t b = 0; b < param_blocks.size(); ++b) {
        adam.update(slots[b], param_blocks[b], grad_blocks[b]);
      }
      if (config.loss.learn_weights && use_weights) {
        adam.update(theta_slot, weights.thetas(), theta_grads);
      }
      epoch_loss += batch_loss;
      ++step;
      if (observer) observer(step, batch_loss * inv_batch);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = epoch_loss / static_cast<double>(order.size());
    entry.val_mrr5 = validation_mrr5(params, val_samples);
    entry.min_weight = min_weight(weights);
    if (!(entry.min_weight > 0.0)) {
      throw Error(ErrorCode::DegenerateParent, "adaptive weight collapsed to zero");
    }
    result.log.push_back(entry);

    const bool improved = std::isnan(entry.val_mrr5) || entry.val_mrr5 > best_val;
    if (improved) {
      if (!std::isnan(entry.val_mrr5)) best_val = entry.val_mrr5;
      result.params = params;
      result.weights = weights;
      result.best_epoch = epoch;
    }
  }
  return result;
}

std::string epoch_log_tsv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch\ttrain_loss\tval_mrr5\tmin_weight\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\t%.17g\n", e.epoch, e.train_loss,
                  e.val_mrr5, e.min_weight);
    out << buf;
  }
  return out.str();
}

namespace {

constexpr char kCheckpointMagic[4] = {'H', 'T', 'L', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_block(std::ostream& out, std::span<const double> block) {
  out.write(reinterpret_cast<const char*>(block.data()),
            static_cast<std::streamsize>(block.size() * sizeof(double)));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::CheckpointMismatch, "truncated checkpoint");
  return value;
}

void get_block(std::istream& in, std::vector<double>& block) {
  in.read(reinterpret_cast<char*>(block.data()),
          static_cast<std::streamsize>(block.size() * sizeof(double)));
  if (!in) throw Error(ErrorCode::CheckpointMismatch, "truncated checkpoint");
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const BackboneParams& params,
                      const AdaptiveWeights& weights, const LabelHierarchy& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 4);
  put<std::uint64_t>(out, params.dim);
  put<std::uint64_t>(out, params.n_locations);
  put<std::uint64_t>(out, params.n_users);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(h.depth()));
  for (int level = 1; level <= h.depth(); ++level) {
    put<std::uint64_t>(out, h.class_count(level));
  }
  for (auto block : params.blocks()) put_block(out, block);
  put_block(out, weights.thetas());
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw Error(ErrorCode::CheckpointMismatch, path.string() + " is not an HTL1 checkpoint");
  }
  const auto dim = get<std::uint64_t>(in);
  const auto n_loc = get<std::uint64_t>(in);
  const auto n_users = get<std::uint64_t>(in);
  const auto depth = get<std::uint32_t>(in);
  if (dim == 0 || depth == 0 || depth > 64) {
    throw Error(ErrorCode::CheckpointMismatch, "corrupt checkpoint header");
  }
  Checkpoint ckpt;
  std::size_t nodes = 0;
  for (std::uint32_t level = 0; level < depth; ++level) {
    ckpt.level_sizes.push_back(get<std::uint64_t>(in));
    nodes += ckpt.level_sizes.back();
  }
  ckpt.params = BackboneParams::zeros(n_loc, n_users, dim);
  get_block(in, ckpt.params.loc_embeddings);
  get_block(in, ckpt.params.user_embeddings);
  get_block(in, ckpt.params.output_weights);
  get_block(in, ckpt.params.output_bias);
  ckpt.thetas.resize(nodes);
  get_block(in, ckpt.thetas);
  return ckpt;
}

AdaptiveWeights weights_from_checkpoint(const Checkpoint& ckpt, const LabelHierarchy& h) {
  if (ckpt.level_sizes != h.class_counts()) {
    throw Error(ErrorCode::CheckpointMismatch,
                "checkpoint hierarchy shape differs from the configured hierarchy");
  }
  AdaptiveWeights weights(h);
  std::copy(ckpt.thetas.begin(), ckpt.thetas.end(), weights.thetas().begin());
  return weights;
}

}  // namespace hiertail
