// lsdm: generate | train | evaluate | ablate, driven by a JSON config.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
// LSDM_OUTPUT_ROOT, when set, prefixes a relative output_dir.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lsdm/checkpoint.hpp"
#include "lsdm/config.hpp"
#include "lsdm/error.hpp"
#include "lsdm/experiment.hpp"
#include "lsdm/split.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lsdm;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string synthetic;
  std::string output;
  std::string checkpoint;
  bool resume = false;
  bool quiet = false;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ExperimentConfig resolve(const Options& o) {
  json j = o.config.empty() ? json::object() : read_json_file(o.config);
  if (!o.data.empty() && !o.synthetic.empty()) {
    throw ConfigError("--data and --synthetic are mutually exclusive");
  }
  if (!o.data.empty()) {
    if (j.contains("synthetic")) throw ConfigError("--data conflicts with synthetic in the config");
    j["data"]["path"] = o.data;
  }
  if (!o.synthetic.empty()) {
    if (j.contains("data")) throw ConfigError("--synthetic conflicts with data in the config");
    j["synthetic"] = read_json_file(o.synthetic);
  }
  if (!o.output.empty()) j["output_dir"] = o.output;
  for (const auto& s : o.overrides) apply_override(j, s);
  ExperimentConfig c = parse_config(j);
  if (const char* root = std::getenv("LSDM_OUTPUT_ROOT"); root && *root && c.output_dir.is_relative()) {
    c.output_dir = fs::path(root) / c.output_dir;
  }
  return c;
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  body(out);
  if (!out) throw Error("write failed: " + path.string());
}

void save_config(const ExperimentConfig& c) {
  write_text(c.output_dir / "config.json", [&](std::ostream& out) { out << to_json(c).dump(2) << '\n'; });
}

Dataset prepare(const ExperimentConfig& c) {
  fs::create_directories(c.output_dir);
  Dataset d = load_dataset(c);
  if (d.users) write_text(c.output_dir / "users.map", [&](std::ostream& out) { d.users->write(out); });
  if (d.items) write_text(c.output_dir / "items.map", [&](std::ostream& out) { d.items->write(out); });
  return d;
}

int cmd_generate(const Options& o) {
  const ExperimentConfig c = resolve(o);
  if (!c.synthetic) throw ConfigError("generate: config has no synthetic section");
  fs::create_directories(c.output_dir);
  const SyntheticLog s = generate_synthetic(*c.synthetic);
  write_text(c.output_dir / "log.csv", [&](std::ostream& out) { write_purchase_log(out, s.log); });
  write_text(c.output_dir / "annotations.csv",
             [&](std::ostream& out) { write_annotations(out, s.annotations); });
  write_text(c.output_dir / "spec.json",
             [&](std::ostream& out) { out << to_json(*c.synthetic).dump(2) << '\n'; });
  if (!o.quiet) {
    std::cout << "wrote " << s.log.events().size() << " events for " << s.log.num_users()
              << " users to " << (c.output_dir / "log.csv").string() << '\n';
  }
  return 0;
}

int cmd_train(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Dataset d = prepare(c);
  save_config(c);
  const Split split = split_leave_last(d.log);
  const fs::path ckpt_root = c.output_dir / "checkpoints";

  TrainState state;
  if (o.resume) {
    const auto latest = latest_checkpoint(ckpt_root);
    if (!latest) throw ConfigError("--resume: no checkpoint under " + ckpt_root.string());
    state = load_checkpoint(*latest);
    check_resumable(state, c.train);
    if (!o.quiet) std::cout << "resuming after epoch " << state.epochs_done << '\n';
  } else {
    state = init_training(split, c.train);
  }

  TrainHooks hooks;
  hooks.on_epoch = [&](const TrainState& s) {
    const auto& h = s.history.back();
    if (!o.quiet) std::cout << "epoch " << h.epoch << " loss " << h.loss.total << '\n';
    if (s.epochs_done % c.checkpoint_every == 0 || s.epochs_done == c.train.epochs) {
      save_checkpoint(ckpt_root, s, c.train);
    }
  };
  try {
    train(state, split, c.train, hooks);
  } catch (const TrainingDiverged& e) {
    const auto latest = latest_checkpoint(ckpt_root);
    std::cerr << "error: " << e.what() << " at epoch " << e.epoch();
    if (latest) std::cerr << "; last checkpoint " << latest->string();
    std::cerr << '\n';
    return 2;
  }
  write_text(c.output_dir / "loss_history.tsv",
             [&](std::ostream& out) { write_loss_history(out, state.history, c.train.scales); });

  const MetricReport val = evaluate(model_scorer(state.model), split,
                                    EvalOptions{c.eval.ks, EvalTarget::Validation, c.eval.parallel});
  if (!o.quiet) {
    std::cout << "validation";
    for (const auto& m : val.metrics) std::cout << ' ' << m.name << '=' << m.mean;
    std::cout << '\n';
  }
  return 0;
}

int cmd_evaluate(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Dataset d = prepare(c);
  const Split split = split_leave_last(d.log);
  fs::path dir = o.checkpoint;
  if (dir.empty()) {
    const auto latest = latest_checkpoint(c.output_dir / "checkpoints");
    if (!latest) throw ConfigError("evaluate: no checkpoint; run train first or pass --checkpoint");
    dir = *latest;
  }
  const TrainState state = load_checkpoint(dir);
  const MetricReport model = evaluate(model_scorer(state.model), split, c.eval);
  const MetricReport pop = evaluate(pop_scorer(split.train), split, c.eval);
  if (model.k_clamped) std::cerr << "warning: k larger than the item count was clamped\n";

  const std::string scales = scales_label(state.model.scales());
  const std::string join(join_name(state.model.params.join.strategy));
  write_text(c.output_dir / "metrics.tsv", [&](std::ostream& out) {
    write_metrics_tsv(out, {{"lsdm", scales, join, &model}, {"pop", "-", "-", &pop}});
  });
  write_text(c.output_dir / "per_user.tsv", [&](std::ostream& out) { write_per_user(out, model); });

  json res;
  res["checkpoint"] = dir.string();
  json methods = json::array();
  for (const auto& [name, report] : {std::pair{"lsdm", &model}, std::pair{"pop", &pop}}) {
    json m{{"method", name},
           {"scales", std::string(name) == "lsdm" ? scales : "-"},
           {"join", std::string(name) == "lsdm" ? join : "-"},
           {"users", report->users.size()},
           {"skipped", report->skipped}};
    for (const auto& metric : report->metrics) m["metrics"][metric.name] = metric.mean;
    methods.push_back(m);
  }
  res["methods"] = methods;
  for (std::size_t q = 0; q < model.metrics.size(); ++q) {
    if (model.users.size() < 2) break;
    const TTestResult t = paired_t_test(model.metrics[q].per_user, pop.metrics[q].per_user);
    res["lsdm_vs_pop"][model.metrics[q].name] = {{"t", std::isfinite(t.t) ? json(t.t) : json(nullptr)},
                                                 {"p_value", t.p_value}};
  }
  write_text(c.output_dir / "results.json", [&](std::ostream& out) { out << res.dump(2) << '\n'; });
  if (!o.quiet) {
    for (const auto* r : {&model, &pop}) {
      std::cout << (r == &model ? "lsdm" : "pop ");
      for (const auto& m : r->metrics) std::cout << ' ' << m.name << '=' << m.mean;
      std::cout << '\n';
    }
  }
  return 0;
}

int cmd_ablate(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Dataset d = prepare(c);
  save_config(c);
  const Split split = split_leave_last(d.log);
  Progress progress;
  if (!o.quiet) progress = [](const std::string& s) { std::cout << s << std::endl; };
  const AblationResult r = run_ablation(split, c, progress);
  write_text(c.output_dir / "ablation.tsv", [&](std::ostream& out) { write_ablation_tsv(out, r); });

  json res;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j{{"scales", scales_label(row.scales)}, {"join", std::string(join_name(row.join))}};
    for (std::size_t q = 0; q < row.metrics.size(); ++q) {
      j["metrics"][row.metrics[q].name] = row.metrics[q].mean;
      j["increase"][row.metrics[q].name] =
          std::isnan(row.improvement[q]) ? json(nullptr) : json(row.improvement[q]);
    }
    j["p_value_vs_item"] = row.vs_base ? json(row.vs_base->p_value) : json(nullptr);
    rows.push_back(j);
  }
  res["rows"] = rows;
  for (const auto& m : r.pop_metrics) res["pop"][m.name] = m.mean;
  res["seeds"] = c.ablation.seeds;
  write_text(c.output_dir / "results.json", [&](std::ostream& out) { out << res.dump(2) << '\n'; });
  if (!o.quiet) std::cout << "wrote " << (c.output_dir / "ablation.tsv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-time-scale next-item recommender"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "Override a config key: dotted.key=value");
    sub->add_option("-o,--output", o.output, "Output directory (overrides output_dir)");
    sub->add_flag("-q,--quiet", o.quiet, "Only print errors");
  };
  auto data_flags = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "Purchase log CSV (user,item,timestamp)");
    sub->add_option("--synthetic", o.synthetic, "Synthetic spec JSON file");
  };

  CLI::App* gen = app.add_subcommand("generate", "Write a synthetic log and its annotations");
  common(gen);
  CLI::App* tr = app.add_subcommand("train", "Train a model and write checkpoints");
  common(tr);
  data_flags(tr);
  tr->add_flag("--resume", o.resume, "Continue from the latest checkpoint");
  CLI::App* ev = app.add_subcommand("evaluate", "Score test targets with a checkpoint and Pop");
  common(ev);
  data_flags(ev);
  ev->add_option("--checkpoint", o.checkpoint, "Epoch directory (default: latest)");
  CLI::App* ab = app.add_subcommand("ablate", "Train and evaluate every scale set x join cell");
  common(ab);
  data_flags(ab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_evaluate(o);
    if (ab->parsed()) return cmd_ablate(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
