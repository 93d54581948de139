#include "hiertail/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "hiertail/error.hpp"

namespace hiertail {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig kv;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError, "expected key = value", line_no);
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::ConfigError, "empty key", line_no);
    kv.set(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw Error(ErrorCode::ConfigError, "invalid value '" + value + "' for " + key);
  }
  return out;
}

template <typename T>
std::string show(T value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) out.emplace_back(trim(item));
  return out;
}

struct KeySpec {
  const char* name;
  const char* doc;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define HT_PATH(field, doc)                                                              \
  KeySpec {                                                                              \
    #field, doc,                                                                         \
        [](ExperimentConfig& c, const std::string&, const std::string& v) { c.field = v; }, \
        [](const ExperimentConfig& c) { return c.field.string(); }                       \
  }

#define HT_NUM(name, type, field, doc)                                                 \
  KeySpec {                                                                            \
    name, doc,                                                                         \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {          \
          c.field = parse_number<type>(k, v);                                          \
        },                                                                             \
        [](const ExperimentConfig& c) { return show(c.field); }                        \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      HT_PATH(data, "check-in file (csv or jsonl)"),
      KeySpec{"format", "input format of `data`: csv | jsonl",
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                c.format = parse_input_format(v);
              },
              [](const ExperimentConfig& c) {
                return std::string(c.format == InputFormat::Csv ? "csv" : "jsonl");
              }},
      HT_PATH(loc2cat, "location -> category mapping file"),
      HT_PATH(cat2act, "category -> activity mapping file"),
      HT_PATH(act2need, "activity -> need mapping file"),
      HT_PATH(out_dir, "output directory (created if absent)"),
      HT_PATH(checkpoint, "checkpoint file for evaluate/report"),
      HT_NUM("min_location_visits", std::size_t, pipeline.filter.min_location_visits,
             "drop locations with fewer visits"),
      HT_NUM("min_user_checkins", std::size_t, pipeline.filter.min_user_checkins,
             "drop users with fewer check-ins"),
      HT_NUM("window_seconds", std::int64_t, pipeline.window_seconds,
             "trajectory window length in seconds"),
      KeySpec{"split", "train,val,test ratios",
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                const auto parts = split_list(v);
                if (parts.size() != 3) {
                  throw Error(ErrorCode::ConfigError, k + " needs three ratios");
                }
                c.pipeline.ratios = {parse_number<double>(k, parts[0]),
                                     parse_number<double>(k, parts[1]),
                                     parse_number<double>(k, parts[2])};
              },
              [](const ExperimentConfig& c) {
                return show(c.pipeline.ratios.train) + "," + show(c.pipeline.ratios.val) +
                       "," + show(c.pipeline.ratios.test);
              }},
      HT_NUM("head_fraction", double, pipeline.head_fraction,
             "fraction of most visited locations in the head group"),
      HT_NUM("epochs", std::size_t, train.epochs, "training epochs"),
      HT_NUM("batch_size", std::size_t, train.batch_size, "minibatch size"),
      HT_NUM("lr", double, train.learning_rate, "Adam learning rate"),
      HT_NUM("beta1", double, train.beta1, "Adam beta1"),
      HT_NUM("beta2", double, train.beta2, "Adam beta2"),
      HT_NUM("seed", std::uint64_t, train.seed,
             "seed for training and synthesis (HIERTAIL_SEED overrides)"),
      HT_NUM("dim", std::size_t, train.dim, "embedding dimension of the reference backbone"),
      HT_NUM("tau", double, train.loss.tau, "Gumbel-softmax temperature"),
      KeySpec{"loss", "ahl | ce",
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                if (v != "ahl" && v != "ce") {
                  throw Error(ErrorCode::ConfigError, "invalid value '" + v + "' for " + k);
                }
                c.loss = v;
              },
              [](const ExperimentConfig& c) { return c.loss; }},
      KeySpec{"ablate",
              "full | no_exploitation | no_exploration | no_gumbel | no_adaptive",
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                parse_ablation(v);
                c.ablate = v;
              },
              [](const ExperimentConfig& c) { return c.ablate; }},
      KeySpec{"ks", "comma-separated metric cutoffs",
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.ks.clear();
                for (const auto& item : split_list(v)) {
                  const int kv = parse_number<int>(k, item);
                  if (kv < 1) throw Error(ErrorCode::ConfigError, "cutoffs must be >= 1");
                  c.ks.push_back(kv);
                }
                if (c.ks.empty()) throw Error(ErrorCode::ConfigError, "no cutoffs given");
              },
              [](const ExperimentConfig& c) {
                std::string out;
                for (std::size_t i = 0; i < c.ks.size(); ++i) {
                  out += (i ? "," : "") + std::to_string(c.ks[i]);
                }
                return out;
              }},
      HT_NUM("threads", unsigned, threads, "evaluation threads"),
      HT_NUM("synth.users", std::size_t, synth.n_users, "synthetic users"),
      HT_NUM("synth.locations", std::size_t, synth.n_locations, "synthetic locations"),
      HT_NUM("synth.categories", std::size_t, synth.n_categories, "synthetic categories"),
      HT_NUM("synth.activities", std::size_t, synth.n_activities, "synthetic activities"),
      HT_NUM("synth.needs", std::size_t, synth.n_needs, "synthetic need classes"),
      HT_NUM("synth.zipf", double, synth.zipf_exponent, "Zipf exponent s of location draws"),
      HT_NUM("synth.checkins_min", std::size_t, synth.checkins_min,
             "minimum check-ins per user"),
      HT_NUM("synth.checkins_max", std::size_t, synth.checkins_max,
             "maximum check-ins per user"),
      HT_NUM("synth.days", std::size_t, synth.days, "days spanned by the timestamps"),
      HT_NUM("synth.need_bias", double, synth.need_bias,
             "probability of drawing from the user's preferred need class"),
      HT_NUM("synth.start", std::int64_t, synth.start_timestamp,
             "first possible timestamp (UTC seconds)"),
  };
  return specs;
}

#undef HT_PATH
#undef HT_NUM

}  // namespace

ExperimentConfig resolve_config(const KeyValueConfig& kv) {
  ExperimentConfig config;
  const auto& specs = key_specs();
  for (const auto& [key, value] : kv.values()) {
    auto it = std::find_if(specs.begin(), specs.end(),
                           [&](const KeySpec& s) { return key == s.name; });
    if (it == specs.end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    it->set(config, key, value);
  }
  config.synth.seed = config.train.seed;
  if (!(config.train.loss.tau > 0.0)) {
    throw Error(ErrorCode::ConfigError, "tau must be positive");
  }
  if (!(config.train.learning_rate >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "lr must be non-negative");
  }
  if (config.train.batch_size == 0 || config.train.dim == 0) {
    throw Error(ErrorCode::ConfigError, "batch_size and dim must be >= 1");
  }
  if (config.loss == "ce" && config.ablate != "full") {
    throw Error(ErrorCode::ConflictingFlags, "ablations apply to the hierarchical loss only");
  }
  config.train.loss = loss_config(config);
  return config;
}

LossConfig loss_config(const ExperimentConfig& config) {
  const double tau = config.train.loss.tau;
  if (config.loss == "ce") return ce_config(tau);
  return ablation_config(parse_ablation(config.ablate), tau);
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& spec : key_specs()) {
    out += spec.name;
    out += " = ";
    out += spec.get(config);
    out += '\n';
  }
  return out;
}

std::string config_reference() {
  std::string out;
  ExperimentConfig defaults;
  for (const auto& spec : key_specs()) {
    out += spec.name;
    out += " (default: " + spec.get(defaults) + "): ";
    out += spec.doc;
    out += '\n';
  }
  return out;
}

}  // namespace hiertail
