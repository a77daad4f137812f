// nrn: train, predict, explain and evaluate neural reasoning networks on CSV data.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nrn/nrn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string score_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nrn::ExplainOptions explain_options(const std::string& inclusion, double weight_quantile = 1.0) {
  nrn::ExplainOptions o;
  if (inclusion == "value")
    o.inclusion = nrn::InclusionTest::Value;
  else if (inclusion == "weighted")
    o.inclusion = nrn::InclusionTest::WeightedValue;
  else
    throw std::invalid_argument("--inclusion-test must be weighted or value");
  o.weight_quantile = weight_quantile;
  return o;
}

struct TrainArgs {
  std::string config;
  std::string out = ".";
  // Every configuration key doubles as a --key flag.
  std::map<std::string, std::string> flags;
};

int run_train(const TrainArgs& args) {
  nrn::RunConfig cfg;
  std::vector<nrn::ConfigWarning> warnings;
  if (!args.config.empty()) nrn::apply_config_file(cfg, args.config, &warnings);
  for (const auto& [k, v] : args.flags) nrn::apply_setting(cfg, k, v, &warnings);
  cfg.out = args.out;
  cfg.finalize();
  for (const auto& w : warnings) std::cerr << "warning: " << w.message << "\n";
  if (cfg.data.empty()) throw std::invalid_argument("--data is required (flag or config key 'data')");

  const auto table = nrn::read_csv(cfg.data);
  const nrn::Dataset data = nrn::to_dataset(table, cfg.label);
  const auto split = nrn::split_dataset(data.features.rows, cfg.seed);
  const auto train_set = data.subset(split.train);
  const auto val_set = data.subset(split.val);
  const auto test_set = data.subset(split.test);

  auto pipeline = nrn::PredicatePipeline::fit(train_set, cfg.binarize, cfg.fbft, cfg.seed);
  auto net = nrn::init_network(data.feature_names, pipeline.predicates, cfg.arch, cfg.seed);
  nrn::TrainData td{pipeline.transform(train_set.features), train_set.labels,
                    pipeline.transform(val_set.features), val_set.labels};
  const auto result = nrn::train(std::move(net), td, cfg.train);

  nrn::Model model{std::move(pipeline), result.network,
                   {cfg.label, cfg.seed, cfg.config_hash(), result.best_epoch, result.best_val_auc}};

  fs::create_directories(cfg.out);
  const fs::path out(cfg.out);
  nrn::save_model(model, (out / "model.json").string());

  std::string history;
  for (const auto& e : result.history) {
    json j{{"epoch", e.epoch},   {"train_loss", e.train_loss}, {"pc", e.pc},
           {"kappa", e.kappa},   {"pruned", e.pruned}};
    j["val_auc"] = std::isfinite(e.val_auc) ? json(e.val_auc) : json(nullptr);
    history += j.dump() + "\n";
  }
  write_file(out / "history.jsonl", history);

  std::cout << "trained " << result.history.size() << " epochs, best epoch " << result.best_epoch
            << ", validation auc " << nrn::format_sig(result.best_val_auc, 6) << ", "
            << nrn::parameter_count(model.network) << " parameters\n";

  bool both = false, seen[2] = {false, false};
  for (int y : test_set.labels) seen[y] = true;
  both = seen[0] && seen[1];
  if (both) {
    nrn::EvalOptions eo;
    eo.seed = cfg.seed;
    const auto report = nrn::evaluate_model(model, test_set.features, test_set.labels, eo);
    auto j = nrn::to_json(report);
    j["split"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
    j["best_epoch"] = result.best_epoch;
    j["config_hash"] = model.metadata.config_hash;
    write_file(out / "report.json", j.dump(2) + "\n");
    write_file(out / "report.txt", nrn::to_text(report));
    std::cout << "test auc " << nrn::format_sig(report.auc, 6) << "\n";
  } else {
    std::cerr << "warning: test split has a single class; report.json not written\n";
  }
  std::cout << "wrote " << (out / "model.json").string() << "\n";
  return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path) {
  const auto model = nrn::load_model(model_path);
  const auto table = nrn::read_csv(data_path);
  const auto raw = nrn::bind_columns(table, model.schema(), model.metadata.label);
  std::string text;
  for (double s : model.predict_raw(raw)) text += score_text(s) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_file(out_path, text);
  return 0;
}

int run_explain(const std::string& model_path, const std::string& data_path, std::optional<std::size_t> sample,
                bool global, double percentile, double weight_quantile, const std::string& inclusion,
                const std::string& json_path) {
  if (sample.has_value() == global) throw std::invalid_argument("give exactly one of --sample or --global");
  const auto model = nrn::load_model(model_path);
  const auto table = nrn::read_csv(data_path);
  const auto raw = nrn::bind_columns(table, model.schema(), model.metadata.label);
  const auto x = model.pipeline.transform(raw);
  json doc;
  if (sample) {
    if (*sample >= raw.rows)
      throw std::out_of_range("sample index " + std::to_string(*sample) + " out of range (" +
                              std::to_string(raw.rows) + " rows)");
    nrn::ExplainAudit audit;
    const auto e = nrn::explain_and_simplify(model.network, x.row(*sample), raw.row(*sample),
                                             explain_options(inclusion, weight_quantile), &audit);
    std::cout << e.to_text() << "\n" << "confidence: " << score_text(e.confidence) << "\n";
    doc = {{"sample", *sample},
           {"confidence", e.confidence},
           {"explanation", nrn::to_json(e.as_tree())},
           {"text", e.to_text()},
           {"inclusion_test", inclusion},
           {"inclusion_disagreements", audit.inclusion_disagreements}};
  } else {
    if (raw.rows == 0) throw std::invalid_argument("global explanation needs at least one data row");
    const auto preds = nrn::predict(model.network, x);
    const double neg_percentile = 100.0 - percentile;
    const auto pos = nrn::global_explanation(model.network, x, preds, percentile, weight_quantile,
                                             nrn::ClassView::Positive);
    const auto neg = nrn::global_explanation(model.network, x, preds, neg_percentile, weight_quantile,
                                             nrn::ClassView::Negative);
    std::cout << "positive (percentile " << nrn::format_sig(percentile, 6) << "): " << nrn::to_text(pos) << "\n";
    std::cout << "negative (percentile " << nrn::format_sig(neg_percentile, 6) << "): " << nrn::to_text(neg)
              << "\n";
    doc = {{"weight_quantile", weight_quantile},
           {"positive", {{"percentile", percentile}, {"explanation", nrn::to_json(pos)}, {"text", nrn::to_text(pos)}}},
           {"negative",
            {{"percentile", neg_percentile}, {"explanation", nrn::to_json(neg)}, {"text", nrn::to_text(neg)}}}};
  }
  if (!json_path.empty()) write_file(json_path, doc.dump(2) + "\n");
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path, std::string label,
                 std::uint64_t seed, std::size_t k, const std::string& inclusion, const std::string& out_path) {
  const auto model = nrn::load_model(model_path);
  if (label.empty()) label = model.metadata.label;
  const auto table = nrn::read_csv(data_path);
  const auto data = nrn::to_dataset(table, label);
  const auto raw = nrn::bind_columns(table, model.schema(), label);
  nrn::EvalOptions eo;
  eo.k = k;
  eo.seed = seed;
  eo.explain = explain_options(inclusion);
  const auto report = nrn::evaluate_model(model, raw, data.labels, eo);
  std::cout << nrn::to_text(report);
  if (!out_path.empty()) write_file(out_path, nrn::to_json(report).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural reasoning networks: train, predict, explain, evaluate"};
  app.require_subcommand(1);

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "train a model on a labeled CSV");
  train->add_option("--config", targs.config, "flat key = value configuration file");
  train->add_option("--out", targs.out, "output directory")->capture_default_str();
  std::map<std::string, std::string> flag_values;
  for (const auto& key : nrn::config_keys())
    train->add_option("--" + key, flag_values[key], "configuration key " + key);

  std::string model_path, data_path, out_path, inclusion = "weighted", label;
  auto* predict = app.add_subcommand("predict", "score rows of a CSV");
  predict->add_option("--model", model_path, "model document")->required();
  predict->add_option("--data", data_path, "input CSV")->required();
  predict->add_option("--out", out_path, "scores file (default: stdout)");

  std::size_t sample_index = 0;
  bool global = false;
  double percentile = 75.0, weight_quantile = 1.0;
  std::string json_path;
  auto* explain = app.add_subcommand("explain", "explain one sample or the whole model");
  explain->add_option("--model", model_path, "model document")->required();
  explain->add_option("--data", data_path, "input CSV")->required();
  auto* sample_opt = explain->add_option("--sample", sample_index, "row index (0-based) to explain");
  explain->add_flag("--global", global, "explain the model at prediction percentiles");
  explain->add_option("--confidence-percentile", percentile, "positive-class percentile; negative uses 100 - p")
      ->check(CLI::Range(0.0, 100.0))
      ->capture_default_str();
  explain->add_option("--weight-quantile", weight_quantile, "keep edges in this top fraction of path weight")
      ->capture_default_str();
  explain->add_option("--inclusion-test", inclusion, "weighted (as printed) or value")->capture_default_str();
  explain->add_option("--out", json_path, "write the structured explanation here");

  std::uint64_t seed = 0;
  std::size_t k = 100;
  auto* evaluate = app.add_subcommand("evaluate", "report AUC, explanation size and single deletion");
  evaluate->add_option("--model", model_path, "model document")->required();
  evaluate->add_option("--data", data_path, "labeled CSV")->required();
  evaluate->add_option("--label", label, "label column (default: the training label)");
  evaluate->add_option("--seed", seed, "seed for sampling and permutations")->capture_default_str();
  evaluate->add_option("--k", k, "samples behind the explanation size")->capture_default_str();
  evaluate->add_option("--inclusion-test", inclusion, "weighted (as printed) or value")->capture_default_str();
  evaluate->add_option("--out", out_path, "write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      for (const auto& key : nrn::config_keys())
        if (train->count("--" + key) > 0) targs.flags[key] = flag_values[key];
      return run_train(targs);
    }
    if (predict->parsed()) return run_predict(model_path, data_path, out_path);
    if (explain->parsed()) {
      std::optional<std::size_t> sample;
      if (sample_opt->count() > 0) sample = sample_index;
      return run_explain(model_path, data_path, sample, global, percentile, weight_quantile, inclusion, json_path);
    }
    if (evaluate->parsed()) return run_evaluate(model_path, data_path, label, seed, k, inclusion, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
