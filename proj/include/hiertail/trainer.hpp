#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hiertail/ahl.hpp"
#include "hiertail/hierarchy.hpp"
#include "hiertail/ingest.hpp"
#include "hiertail/rng.hpp"

namespace hiertail {

/// Reference backbone: hidden = mean(location embeddings of the prefix) +
/// user embedding; logits = output_weights^T * hidden + output_bias.
struct BackboneParams {
  std::size_t dim = 0;
  std::size_t n_locations = 0;
  std::size_t n_users = 0;
  std::vector<double> loc_embeddings;   // n_locations x dim, row-major
  std::vector<double> user_embeddings;  // n_users x dim, row-major
  std::vector<double> output_weights;   // dim x n_locations, row-major
  std::vector<double> output_bias;      // n_locations

  static BackboneParams zeros(std::size_t n_locations, std::size_t n_users, std::size_t dim);
  /// Uniform(-scale, scale) entries, zero bias.
  static BackboneParams random(std::size_t n_locations, std::size_t n_users, std::size_t dim,
                               Rng& rng, double scale = 0.1);

  /// The four parameter blocks in declaration order.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  void set_zero();

  friend bool operator==(const BackboneParams&, const BackboneParams&) = default;
};

std::vector<double> backbone_forward(const BackboneParams& params, int user,
                                     std::span<const int> prefix);
/// Allocation-free variant; also returns the pooled hidden vector.
void backbone_forward(const BackboneParams& params, int user, std::span<const int> prefix,
                      std::vector<double>& logits, std::vector<double>& hidden);

/// Adds scale * d(logits . grad_logits)/d(params) into `grads`.
void backbone_backward(const BackboneParams& params, int user, std::span<const int> prefix,
                       std::span<const double> grad_logits, BackboneParams& grads,
                       double scale = 1.0);
BackboneParams backbone_backward(const BackboneParams& params, int user,
                                 std::span<const int> prefix,
                                 std::span<const double> grad_logits);

class Adam {
 public:
  Adam(double learning_rate, double beta1, double beta2, double epsilon = 1e-8);

  /// Registers a parameter block; returns its slot for step().
  std::size_t add(std::size_t size);
  /// Call once per optimizer step before updating the blocks.
  void begin_step() { ++t_; }
  void update(std::size_t slot, std::span<double> params, std::span<const double> grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 42;
  LossConfig loss;
  std::size_t dim = 32;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// NaN when the validation split is empty.
  double val_mrr5 = 0.0;
  double min_weight = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  BackboneParams params;
  AdaptiveWeights weights;
  std::vector<EpochLog> log;
  /// Epoch of the returned snapshot, 0 for the initialization.
  std::size_t best_epoch = 0;
};

/// Called after every optimizer step with the batch's mean loss.
using StepObserver = std::function<void(std::size_t step, double batch_loss)>;

/// The hierarchy's leaves must be exactly the dataset's locations.
void check_alignment(const CheckinDataset& dataset, const LabelHierarchy& h);

/// Minibatch Adam over (prefix, next) pairs of the train split. Returns the
/// snapshot with the best validation MRR@5 (the last epoch when there is no
/// validation split).
TrainResult train(const CheckinDataset& dataset, const LabelHierarchy& h,
                  const TrainConfig& config, const StepObserver& observer = {});

std::string epoch_log_tsv(const std::vector<EpochLog>& log);

struct Checkpoint {
  BackboneParams params;
  std::vector<std::size_t> level_sizes;  // class count per level 1..H
  std::vector<double> thetas;            // flat, level by level
};

/// Binary layout (little-endian): "HTL1", u64 dim, u64 |P|, u64 |U|, u32 H,
/// u64 class count per level 1..H, then f64 blocks: location embeddings,
/// user embeddings, output weights, output bias, adaptive thetas.
void write_checkpoint(const std::filesystem::path& path, const BackboneParams& params,
                      const AdaptiveWeights& weights, const LabelHierarchy& h);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Restores weights from a checkpoint, checking shape against the hierarchy.
AdaptiveWeights weights_from_checkpoint(const Checkpoint& ckpt, const LabelHierarchy& h);

}  // namespace hiertail
