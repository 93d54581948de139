#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hiertail/ingest.hpp"
#include "hiertail/synth.hpp"
#include "hiertail/trainer.hpp"

namespace hiertail {

/// Flat `key = value` text. '#' starts a comment; blank lines are ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
  std::filesystem::path data;
  InputFormat format = InputFormat::Csv;
  std::filesystem::path loc2cat;
  std::filesystem::path cat2act;
  std::filesystem::path act2need;
  std::filesystem::path out_dir = "out";
  std::filesystem::path checkpoint;

  PipelineConfig pipeline;
  TrainConfig train;
  /// "ahl" or "ce".
  std::string loss = "ahl";
  /// "full" or one ablation name.
  std::string ablate = "full";
  std::vector<int> ks = {1, 5, 10, 20};
  unsigned threads = 1;

  SynthConfig synth;
};

/// Applies every key of `kv` over the defaults. Unknown keys and
/// unparsable values raise ConfigError.
ExperimentConfig resolve_config(const KeyValueConfig& kv);

/// Fully resolved config in the same key = value format, keys sorted.
std::string to_text(const ExperimentConfig& config);

/// Loss configuration implied by the `loss`, `ablate` and `tau` settings.
LossConfig loss_config(const ExperimentConfig& config);

/// Documented keys and their meaning, one per line.
std::string config_reference();

}  // namespace hiertail
