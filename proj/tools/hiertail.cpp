// hiertail command-line driver.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hiertail/config.hpp"
#include "hiertail/error.hpp"
#include "hiertail/metrics.hpp"
#include "hiertail/synth.hpp"
#include "hiertail/trainer.hpp"
#include "hiertail/verify.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hiertail;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitData = 4;

const std::vector<std::string> kVariants = {"full", "no_exploitation", "no_exploration",
                                            "no_gumbel", "no_adaptive"};

struct Args {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
};

void add_key_flag(CLI::App* sub, Args& args, const std::string& flag, const std::string& key,
                  const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&args, key](const std::string& v) { args.flags[key] = v; }, help);
}

void add_common(CLI::App* sub, Args& args) {
  sub->add_option("-c,--config", args.config_path, "key = value config file");
  sub->add_option("--set", args.sets, "override a config key (KEY=VALUE), repeatable");
  add_key_flag(sub, args, "-o,--out", "out_dir", "output directory");
  add_key_flag(sub, args, "--seed", "seed", "random seed (overrides HIERTAIL_SEED)");
}

void add_data_flags(CLI::App* sub, Args& args) {
  add_key_flag(sub, args, "--data", "data", "check-in file");
  add_key_flag(sub, args, "--format", "format", "csv | jsonl");
}

void add_hierarchy_flags(CLI::App* sub, Args& args) {
  add_key_flag(sub, args, "--loc2cat", "loc2cat", "location -> category mapping");
  add_key_flag(sub, args, "--cat2act", "cat2act", "category -> activity mapping");
  add_key_flag(sub, args, "--act2need", "act2need", "activity -> need mapping");
}

void add_train_flags(CLI::App* sub, Args& args) {
  add_key_flag(sub, args, "--epochs", "epochs", "training epochs");
  add_key_flag(sub, args, "--batch-size", "batch_size", "minibatch size");
  add_key_flag(sub, args, "--lr", "lr", "Adam learning rate");
  add_key_flag(sub, args, "--dim", "dim", "embedding dimension");
  add_key_flag(sub, args, "--tau", "tau", "Gumbel-softmax temperature");
}

ExperimentConfig resolve(const Args& args) {
  KeyValueConfig kv;
  if (!args.config_path.empty()) kv = KeyValueConfig::load(args.config_path);
  if (const char* env = std::getenv("HIERTAIL_SEED"); env && *env) kv.set("seed", env);
  for (const auto& item : args.sets) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "--set expects KEY=VALUE, got '" + item + "'");
    }
    kv.set(item.substr(0, eq), item.substr(eq + 1));
  }
  for (const auto& [key, value] : args.flags) kv.set(key, value);
  return resolve_config(kv);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

// Creates the output directory and echoes the resolved config into it.
void prepare_out(const ExperimentConfig& config, const std::string& command) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create output directory " + config.out_dir.string() + ": " + ec.message());
  }
  write_text(config.out_dir / "config.resolved.txt",
             "# hiertail " + command + "\n" + to_text(config));
}

void require_file(const fs::path& path, const std::string& key) {
  if (path.empty()) throw Error(ErrorCode::ConfigError, "config key '" + key + "' is required");
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, key + ": no such file " + path.string());
}

void require_inputs(const ExperimentConfig& c, bool data, bool hierarchy) {
  if (data) require_file(c.data, "data");
  if (hierarchy) {
    require_file(c.loc2cat, "loc2cat");
    require_file(c.cat2act, "cat2act");
    require_file(c.act2need, "act2need");
  }
}

CheckinDataset load_dataset(const ExperimentConfig& c, bool lenient = false) {
  auto parsed = parse_checkins(c.data, c.format, ParseOptions{!lenient});
  if (!parsed.malformed.empty()) {
    std::cerr << "skipped " << parsed.malformed.size() << " malformed rows (first at line "
              << parsed.malformed.front().line << ": " << parsed.malformed.front().message << ")\n";
  }
  return prepare_dataset(parsed.records, c.pipeline);
}

LabelHierarchy load_hierarchy(const ExperimentConfig& c, const CheckinDataset& ds) {
  const auto full = build_hierarchy(c.loc2cat, c.cat2act, c.act2need);
  const auto ids = ds.location_ids();
  return full.restrict_to(ids);
}

json loss_json(const LossConfig& loss) {
  return {{"mode", loss.mode == LossMode::Ahl ? "ahl" : "ce"},
          {"variant", loss.variant},
          {"gumbel_noise", loss.gumbel_noise},
          {"learn_weights", loss.learn_weights},
          {"tau", loss.tau}};
}

json log_json(const std::vector<EpochLog>& log) {
  json out = json::array();
  for (const auto& e : log) {
    out.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_mrr5", std::isnan(e.val_mrr5) ? json(nullptr) : json(e.val_mrr5)},
                   {"min_weight", e.min_weight}});
  }
  return out;
}

struct TrainOutcome {
  TrainResult result;
  double seconds = 0.0;
};

TrainOutcome run_training(const ExperimentConfig& config, const CheckinDataset& ds,
                          const LabelHierarchy& h, const fs::path& dir, bool timing,
                          const std::string& command) {
  const auto start = std::chrono::steady_clock::now();
  TrainOutcome outcome;
  outcome.result = train(ds, h, config.train);
  outcome.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& r = outcome.result;
  write_checkpoint(dir / "model.ckpt", r.params, r.weights, h);
  write_text(dir / "epoch_log.tsv", epoch_log_tsv(r.log));
  json meta = {{"command", command},
               {"config", to_text(config)},
               {"loss", loss_json(config.train.loss)},
               {"dataset", json::parse(stats_json(ds))},
               {"hierarchy_class_counts", h.class_counts()},
               {"best_epoch", r.best_epoch},
               {"epochs", log_json(r.log)}};
  if (timing) meta["train_seconds"] = outcome.seconds;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  return outcome;
}

void print_log(const std::vector<EpochLog>& log) {
  for (const auto& e : log) {
    std::printf("epoch %3zu  loss %.6f  val_mrr@5 %.4f  min_w %.4g\n", e.epoch, e.train_loss,
                e.val_mrr5, e.min_weight);
  }
}

Scorer model_scorer(const BackboneParams& params) {
  return [&params](const PredictionSample& s, std::vector<double>& scores) {
    thread_local std::vector<double> hidden;
    backbone_forward(params, s.user, s.prefix, scores, hidden);
  };
}

EvalReport evaluate_split(const ExperimentConfig& c, const CheckinDataset& ds,
                          const LabelHierarchy& h, const Scorer& scorer, Split split) {
  const auto samples = expand_samples(ds, split);
  return evaluate(samples, scorer, ds.is_head, h, c.ks, c.threads);
}

void write_report(const fs::path& dir, const EvalReport& report) {
  write_text(dir / "report.json", report.to_json());
  write_text(dir / "report.tsv", report.to_tsv());
}

Split parse_split(const std::string& name) {
  if (name == "test") return Split::Test;
  if (name == "val") return Split::Val;
  if (name == "train") return Split::Train;
  throw Error(ErrorCode::ConfigError, "unknown split '" + name + "'");
}

// ---------------------------------------------------------------- commands

int cmd_synth(const ExperimentConfig& c) {
  prepare_out(c, "synth");
  const auto corpus = generate_corpus(c.synth);
  write_corpus(c.out_dir, corpus);
  std::map<std::string, std::size_t> counts;
  for (const auto& r : corpus.records) ++counts[r.loc_id];
  std::vector<std::size_t> per_location(c.synth.n_locations, 0);
  std::size_t i = 0;
  for (const auto& [id, n] : counts) per_location[i++] = n;
  std::printf("wrote %zu check-ins for %zu users to %s\n", corpus.records.size(),
              c.synth.n_users, c.out_dir.string().c_str());
  std::printf("hierarchy levels:");
  for (auto n : corpus.hierarchy.hierarchy.class_counts()) std::printf(" %zu", n);
  std::printf("\nlocation visit gini: %.4f\n", gini(per_location));
  return 0;
}

int cmd_ingest(const ExperimentConfig& c, bool lenient) {
  require_inputs(c, true, false);
  prepare_out(c, "ingest");
  const auto ds = load_dataset(c, lenient);
  write_snapshot(c.out_dir, ds);
  std::cout << stats_json(ds);
  return 0;
}

int cmd_build_hierarchy(const ExperimentConfig& c) {
  require_inputs(c, false, true);
  prepare_out(c, "build-hierarchy");
  auto h = build_hierarchy(c.loc2cat, c.cat2act, c.act2need);
  json summary = {{"depth", h.depth()}, {"class_counts", h.class_counts()}};
  if (!c.data.empty()) {
    require_inputs(c, true, false);
    const auto ds = load_dataset(c);
    h = load_hierarchy(c, ds);
    summary["restricted_class_counts"] = h.class_counts();
  }
  const auto maps = h.to_maps();
  const char* headers[3] = {"activity\tneed", "category\tactivity", "location\tcategory"};
  const char* names[3] = {"act2need.tsv", "cat2act.tsv", "loc2cat.tsv"};
  if (maps.size() == 3) {
    for (int i = 0; i < 3; ++i) write_mapping_file(c.out_dir / names[i], maps[i], headers[i]);
  }
  write_text(c.out_dir / "hierarchy.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& c, bool timing) {
  require_inputs(c, true, true);
  prepare_out(c, "train");
  const auto ds = load_dataset(c);
  const auto h = load_hierarchy(c, ds);
  const auto outcome = run_training(c, ds, h, c.out_dir, timing, "train");
  print_log(outcome.result.log);
  std::printf("best epoch %zu; checkpoint %s\n", outcome.result.best_epoch,
              (c.out_dir / "model.ckpt").string().c_str());
  if (timing) std::printf("train time %.2f s\n", outcome.seconds);
  return 0;
}

int cmd_evaluate(const ExperimentConfig& c, bool oracle, const std::string& split_name) {
  const auto split = parse_split(split_name);
  require_inputs(c, true, true);
  const fs::path ckpt_path = c.checkpoint.empty() ? c.out_dir / "model.ckpt" : c.checkpoint;
  if (!oracle) require_file(ckpt_path, "checkpoint");
  prepare_out(c, "evaluate");
  const auto ds = load_dataset(c);
  const auto h = load_hierarchy(c, ds);

  EvalReport report;
  if (oracle) {
    const Scorer perfect = [](const PredictionSample& s, std::vector<double>& scores) {
      std::fill(scores.begin(), scores.end(), 0.0);
      scores[s.target] = 1.0;
    };
    report = evaluate_split(c, ds, h, perfect, split);
  } else {
    const auto ckpt = read_checkpoint(ckpt_path);
    if (ckpt.params.n_locations != ds.locations.size() ||
        ckpt.params.n_users != ds.users.size()) {
      throw Error(ErrorCode::CheckpointMismatch,
                  "checkpoint has " + std::to_string(ckpt.params.n_locations) + " locations and " +
                      std::to_string(ckpt.params.n_users) + " users, dataset has " +
                      std::to_string(ds.locations.size()) + " and " +
                      std::to_string(ds.users.size()));
    }
    weights_from_checkpoint(ckpt, h);
    report = evaluate_split(c, ds, h, model_scorer(ckpt.params), split);
  }
  write_report(c.out_dir, report);
  std::cout << report.to_table();
  return 0;
}

int cmd_ablate(const ExperimentConfig& base, const std::vector<std::string>& variants,
               bool with_ce) {
  require_inputs(base, true, true);
  prepare_out(base, "ablate");
  const auto ds = load_dataset(base);
  const auto h = load_hierarchy(base, ds);
  std::vector<std::string> runs = variants.empty() ? kVariants : variants;
  if (with_ce) runs.push_back("ce");

  std::ostringstream tsv;
  tsv << "variant\tgroup\tk\tmrr\tndcg\tcount\n";
  for (const auto& name : runs) {
    ExperimentConfig c = base;
    if (name == "ce") {
      c.loss = "ce";
      c.ablate = "full";
    } else {
      parse_ablation(name);
      c.loss = "ahl";
      c.ablate = name;
    }
    c.train.loss = loss_config(c);
    const fs::path dir = base.out_dir / name;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    write_text(dir / "config.resolved.txt", "# hiertail ablate " + name + "\n" + to_text(c));
    const auto outcome = run_training(c, ds, h, dir, false, "ablate");
    const auto report =
        evaluate_split(c, ds, h, model_scorer(outcome.result.params), Split::Test);
    write_report(dir, report);
    for (auto g : kGroups) {
      for (std::size_t i = 0; i < report.ks.size(); ++i) {
        const int gi = static_cast<int>(g);
        tsv << name << '\t' << to_string(g) << '\t' << report.ks[i] << '\t' << report.mrr[i][gi]
            << '\t' << report.ndcg[i][gi] << '\t' << report.counts[gi] << '\n';
      }
    }
    std::printf("%-16s  MRR@5 total %.4f  head %.4f  tail %.4f\n", name.c_str(),
                report.mrr_at(5, Group::Total), report.mrr_at(5, Group::Head),
                report.mrr_at(5, Group::Tail));
  }
  write_text(base.out_dir / "ablation.tsv", tsv.str());
  return 0;
}

int cmd_verify(const ExperimentConfig& c, std::size_t instances) {
  prepare_out(c, "verify");
  VerifyOptions options;
  options.instances = instances;
  options.seed = c.train.seed;
  std::optional<LabelHierarchy> h;
  if (!c.loc2cat.empty() || !c.cat2act.empty() || !c.act2need.empty()) {
    require_inputs(c, false, true);
    h = build_hierarchy(c.loc2cat, c.cat2act, c.act2need);
  }
  const auto results = verify_loss(h ? &*h : nullptr, options);
  std::ostringstream tsv;
  tsv << "check\tpassed\tinstances\tworst\n";
  bool all = true;
  for (const auto& r : results) {
    std::printf("%s  %-46s worst %.3g over %zu instances\n", r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.worst, r.instances);
    tsv << r.name << '\t' << (r.passed ? "yes" : "no") << '\t' << r.instances << '\t' << r.worst
        << '\n';
    all = all && r.passed;
  }
  write_text(c.out_dir / "verify.tsv", tsv.str());
  return all ? 0 : kExitData;
}

struct Summary {
  std::size_t n = 0;
  double mean = 0, sd = 0, min = 0, median = 0, max = 0;
};

Summary summarize_values(std::vector<double> v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto sa = summarize_values(a);
  const auto sb = summarize_values(b);
  if (sa.sd == 0.0 || sb.sd == 0.0 || a.size() < 2) return std::nan("");
  double cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cov += (a[i] - sa.mean) * (b[i] - sb.mean);
  return cov / static_cast<double>(a.size() - 1) / (sa.sd * sb.sd);
}

void print_summary(const std::string& label, const Summary& s) {
  std::printf("  %-14s n=%-6zu mean %.4f  sd %.4f  min %.4f  median %.4f  max %.4f\n",
              label.c_str(), s.n, s.mean, s.sd, s.min, s.median, s.max);
}

int cmd_report(const ExperimentConfig& c, const std::vector<std::string>& reports) {
  prepare_out(c, "report");
  std::vector<std::string> paths = reports;
  if (paths.empty() && fs::exists(c.out_dir / "report.json")) {
    paths.push_back((c.out_dir / "report.json").string());
  }
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw Error(ErrorCode::IoError, "no such report " + p);
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    std::printf("== %s\n", p.c_str());
    std::cout << EvalReport::from_json(buf.str()).to_table();
  }

  const fs::path ckpt_path = c.checkpoint.empty() ? c.out_dir / "model.ckpt" : c.checkpoint;
  if (!fs::exists(ckpt_path)) {
    if (paths.empty()) throw Error(ErrorCode::IoError, "nothing to report: no report or checkpoint");
    return 0;
  }
  require_inputs(c, false, true);
  const auto ckpt = read_checkpoint(ckpt_path);
  LabelHierarchy h = build_hierarchy(c.loc2cat, c.cat2act, c.act2need);
  std::optional<CheckinDataset> ds;
  if (!c.data.empty()) {
    require_inputs(c, true, false);
    ds = load_dataset(c);
    h = load_hierarchy(c, *ds);
  }
  const auto weights = weights_from_checkpoint(ckpt, h);
  const int H = h.depth();

  // head/tail membership of a node: head if any leaf below it is a head location
  std::vector<std::vector<char>> node_head(H + 1);
  for (int level = 1; level <= H; ++level) {
    node_head[level].assign(h.class_count(level), 0);
    if (!ds) continue;
    for (std::size_t leaf = 0; leaf < h.leaf_count(); ++leaf) {
      if (ds->is_head[leaf]) node_head[level][h.ancestor(static_cast<int>(leaf), level)] = 1;
    }
  }

  std::ostringstream tsv;
  tsv << "level\tnode\tweight\tgroup\n";
  std::printf("== adaptive weights (%s)\n", ckpt_path.string().c_str());
  for (int level = 1; level <= H; ++level) {
    std::vector<double> all, head, tail;
    for (std::size_t i = 0; i < h.class_count(level); ++i) {
      const NodeId node{level, static_cast<int>(i)};
      const double w = weights.value(node);
      all.push_back(w);
      const char* group = !ds ? "-" : node_head[level][i] ? "head" : "tail";
      if (ds) (node_head[level][i] ? head : tail).push_back(w);
      tsv << level << '\t' << h.name_of(node) << '\t' << w << '\t' << group << '\n';
    }
    std::printf("level %d (init %.2f)\n", level, AdaptiveWeights::level_init(level, H));
    print_summary("all", summarize_values(all));
    if (ds) {
      print_summary("head", summarize_values(head));
      print_summary("tail", summarize_values(tail));
    }
  }
  // correlation of each leaf's weight path between adjacent levels
  for (int level = 2; level <= H; ++level) {
    std::vector<double> fine, coarse;
    for (std::size_t leaf = 0; leaf < h.leaf_count(); ++leaf) {
      const int l = static_cast<int>(leaf);
      fine.push_back(weights.value({level, h.ancestor(l, level)}));
      coarse.push_back(weights.value({level - 1, h.ancestor(l, level - 1)}));
    }
    std::printf("corr(level %d, level %d) over leaf paths: %.4f\n", level - 1, level,
                pearson(coarse, fine));
  }
  write_text(c.out_dir / "weights.tsv", tsv.str());
  return 0;
}

int exit_code_for(const Error& e) {
  switch (category_of(e.code())) {
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Io: return kExitIo;
    case ErrorCategory::Data: return kExitData;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hiertail: adaptive hierarchical loss for long-tailed next-location prediction"};
  app.require_subcommand(1);
  Args args;

  auto* synth = app.add_subcommand("synth", "generate a synthetic check-in corpus and hierarchy");
  add_common(synth, args);

  auto* ingest = app.add_subcommand("ingest", "filter, segment and split check-ins into a snapshot");
  add_common(ingest, args);
  add_data_flags(ingest, args);
  bool lenient = false;
  ingest->add_flag("--lenient", lenient, "skip malformed rows instead of failing");

  auto* build = app.add_subcommand("build-hierarchy", "validate and normalize the mapping files");
  add_common(build, args);
  add_hierarchy_flags(build, args);
  add_data_flags(build, args);

  auto* train_cmd = app.add_subcommand("train", "train the reference backbone");
  add_common(train_cmd, args);
  add_data_flags(train_cmd, args);
  add_hierarchy_flags(train_cmd, args);
  add_train_flags(train_cmd, args);
  add_key_flag(train_cmd, args, "--loss", "loss", "ahl | ce");
  add_key_flag(train_cmd, args, "--ablate", "ablate", "full or one ablation variant");
  bool timing = false;
  train_cmd->add_flag("--timing", timing, "report wall-clock training time");

  auto* eval = app.add_subcommand("evaluate", "rank a split with a checkpoint and write reports");
  add_common(eval, args);
  add_data_flags(eval, args);
  add_hierarchy_flags(eval, args);
  add_key_flag(eval, args, "--checkpoint", "checkpoint", "checkpoint file");
  add_key_flag(eval, args, "--threads", "threads", "evaluation threads");
  add_key_flag(eval, args, "--ks", "ks", "metric cutoffs, e.g. 1,5,10,20");
  bool oracle = false;
  eval->add_flag("--oracle", oracle, "debug: score the true location highest");
  std::string split_name = "test";
  eval->add_option("--split", split_name, "test | val | train");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate every ablation variant");
  add_common(ablate, args);
  add_data_flags(ablate, args);
  add_hierarchy_flags(ablate, args);
  add_train_flags(ablate, args);
  add_key_flag(ablate, args, "--threads", "threads", "evaluation threads");
  std::vector<std::string> variants;
  ablate->add_option("--variants", variants, "subset of variants to run")->delimiter(',');
  bool with_ce = false;
  ablate->add_flag("--with-ce", with_ce, "also train the cross-entropy baseline");

  auto* verify = app.add_subcommand("verify", "finite-difference and identity checks of the loss");
  add_common(verify, args);
  add_hierarchy_flags(verify, args);
  std::size_t instances = 200;
  verify->add_option("--instances", instances, "random instances per check");

  auto* report = app.add_subcommand("report", "print reports and the adaptive weight distribution");
  add_common(report, args);
  add_data_flags(report, args);
  add_hierarchy_flags(report, args);
  add_key_flag(report, args, "--checkpoint", "checkpoint", "checkpoint file");
  std::vector<std::string> reports;
  report->add_option("--report", reports, "report.json files to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const auto config = resolve(args);
    if (*synth) return cmd_synth(config);
    if (*ingest) return cmd_ingest(config, lenient);
    if (*build) return cmd_build_hierarchy(config);
    if (*train_cmd) return cmd_train(config, timing);
    if (*eval) return cmd_evaluate(config, oracle, split_name);
    if (*ablate) return cmd_ablate(config, variants, with_ce);
    if (*verify) return cmd_verify(config, instances);
    if (*report) return cmd_report(config, reports);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
