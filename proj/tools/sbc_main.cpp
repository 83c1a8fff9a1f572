#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sbc/commands.hpp"
#include "sbc/config.hpp"
#include "sbc/error.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  std::string unknown_action;
  std::string weights;
  std::string grid;
  std::string train;
  std::string test;
  std::string input;
  std::string method;
  std::string hpo;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "run config (json)");
  app->add_option("--seed", f.seed, "seed for split, model, cv, halving and sampling");
  app->add_option("--threads", f.threads, "worker threads for tuning");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--unknown-action", f.unknown_action, "emit_unknown | assign_last_class");
  app->add_option("--weights", f.weights, "none | stage_inverse_frequency | class_inverse_frequency");
  app->add_option("--grid", f.grid, "hyper-parameter grid (json)");
}

sbc::RunConfig resolve_config(const CommonFlags& f) {
  sbc::RunConfig c = f.config.empty() ? sbc::config_from_json(nlohmann::json::object()) : sbc::load_config(f.config);
  if (f.seed) sbc::apply_seed(c, *f.seed);
  if (f.threads) {
    c.threads = *f.threads;
    c.cv.threads = *f.threads;
  }
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.unknown_action.empty()) c.unknown_action = sbc::unknown_action_from_string(f.unknown_action);
  if (!f.weights.empty()) c.weights = sbc::weights_mode_from_string(f.weights);
  if (!f.grid.empty()) {
    std::ifstream in(f.grid);
    if (!in) throw sbc::Error(sbc::Errc::InvalidConfig, "cannot open grid file " + f.grid);
    try {
      sbc::HpGrid g = sbc::grid_from_json(nlohmann::json::parse(in));
      sbc::GbtParams base = g.base();
      base.seed = c.grid.base().seed;
      sbc::HpGrid seeded(base);
      for (const auto& a : g.axes()) seeded.set_axis(a);
      c.grid = std::move(seeded);
    } catch (const nlohmann::json::exception& e) {
      throw sbc::Error(sbc::Errc::InvalidConfig, f.grid + ": " + e.what());
    }
  }
  if (!f.train.empty()) c.train_path = f.train;
  if (!f.test.empty()) c.test_path = f.test;
  if (!f.input.empty()) c.input_path = f.input;
  if (!f.method.empty()) sbc::apply_method_spec(c, f.method);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential binary classification cascades and multi-class GBT baselines"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* prepare = app.add_subcommand("prepare", "clean and split a raw csv");
  add_common(prepare, flags);
  prepare->add_option("--input", flags.input, "raw csv");

  auto* train = app.add_subcommand("train", "train a model, optionally evaluating on a test csv");
  auto* tune = app.add_subcommand("tune", "tune hyper-parameters and train");
  for (auto* sub : {train, tune}) {
    add_common(sub, flags);
    sub->add_option("--train", flags.train, "training csv");
    sub->add_option("--test", flags.test, "test csv");
    sub->add_option("--method", flags.method, "method spec, e.g. sbc+hgs+sw");
  }

  std::string model_path;
  std::string label_column;
  auto* evaluate = app.add_subcommand("evaluate", "score a saved model on a labelled csv");
  add_common(evaluate, flags);
  evaluate->add_option("--model", model_path, "model.json")->required();
  evaluate->add_option("--test", flags.test, "test csv")->required();

  std::string predict_input;
  auto* predict = app.add_subcommand("predict", "predict rows of a csv");
  add_common(predict, flags);
  predict->add_option("--model", model_path, "model.json")->required();
  predict->add_option("--input", predict_input, "csv to predict")->required();

  std::vector<std::string> methods = {"mcc+gs", "mcc+hgs", "sbc+gs", "sbc+hgs", "sbc+phgs", "sbc+hgs+sw"};
  auto* benchmark = app.add_subcommand("benchmark", "run several methods on one train/test split");
  add_common(benchmark, flags);
  benchmark->add_option("--train", flags.train, "training csv");
  benchmark->add_option("--test", flags.test, "test csv");
  benchmark->add_option("--methods", methods, "method specs")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? sbc::kExitOk : sbc::kExitConfig;
  }

  try {
    sbc::RunConfig config;
    try {
      config = resolve_config(flags);
      if (tune->parsed() && config.hpo == sbc::HpoMode::fixed) config.hpo = sbc::HpoMode::hgs;
    } catch (const sbc::Error& e) {
      throw sbc::CommandError(sbc::kExitConfig, e.what());
    }

    if (prepare->parsed()) {
      const auto r = sbc::cmd_prepare(config);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << r.cleaning.to_text() << "train rows: " << r.train_rows << "\ntest rows: " << r.test_rows
                << "\nwritten to " << config.out_dir.string() << '\n';
    } else if (train->parsed() || tune->parsed()) {
      sbc::cmd_train(config, std::cout);
    } else if (evaluate->parsed()) {
      const auto e = sbc::cmd_evaluate(model_path, config.test_path, config.csv, config.unknown_action, config.out_dir);
      std::cout << sbc::format_summary(e.summary, e.class_names);
    } else if (predict->parsed()) {
      const auto lines = sbc::cmd_predict(model_path, predict_input, config.csv);
      if (flags.out.empty()) {
        for (const auto& l : lines) std::cout << l << '\n';
      } else {
        std::ofstream out(flags.out);
        if (!out) throw sbc::CommandError(sbc::kExitData, "cannot write " + flags.out);
        for (const auto& l : lines) out << l << '\n';
      }
    } else if (benchmark->parsed()) {
      sbc::cmd_benchmark(config, methods, std::cout);
    }
  } catch (const sbc::CommandError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const sbc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sbc::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sbc::kExitTraining;
  }
  return sbc::kExitOk;
}
