// blindlab: train, sweep and verify the CNN trainers from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blindlab/errors.hpp"
#include "blindlab/experiment.hpp"
#include "blindlab/gradcheck.hpp"

namespace {

using namespace blindlab;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> subset_train;
  std::optional<std::size_t> subset_test;
  std::optional<std::string> conv_mode;
  bool verbose_steps = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key=value experiment config")->required();
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--out", o.out, "override the output directory");
  cmd->add_option("--subset-train", o.subset_train, "stratified training subset size");
  cmd->add_option("--subset-test", o.subset_test, "stratified test subset size");
  cmd->add_option("--conv-mode", o.conv_mode, "channel-sum or standard")
      ->check(CLI::IsMember({"channel-sum", "standard"}));
  cmd->add_flag("--verbose-steps", o.verbose_steps, "write steps.csv");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.trainer.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.subset_train) c.subset_train = *o.subset_train;
  if (o.subset_test) c.subset_test = *o.subset_test;
  if (o.conv_mode) c.trainer.conv_mode = parse_conv_mode(*o.conv_mode);
  if (o.verbose_steps) c.verbose_steps = true;
  c.trainer.validate();
  return c;
}

void print_table(const SweepTable& table) { std::cout << table.to_csv(); }

int cmd_train(const Overrides& o) {
  const ExperimentConfig c = resolve(o);
  const ExperimentData data = load_data(c);
  const RunSummary s = run_experiment(c, data);
  std::cout << summary_csv(c, s);
  return 0;
}

int cmd_gradcheck(bool inject_fault) {
  GradientCheckOptions options;
  // Negative control: perturb one analytic derivative.
  if (inject_fault) options.corrupt = [](GradientSet& g) { g.banks[0][0] += 1e-3; };
  const GradientCheckReport report = run_gradient_check(options);
  for (const ModeReport& m : report.modes) {
    std::printf("%-12s max relative error %.3e over %zu weights\n",
                std::string(to_string(m.mode)).c_str(), m.max_relative_error,
                m.weights_checked);
  }
  std::printf("%s (tolerance %.0e)\n", report.passed ? "ok" : "FAILED", options.tolerance);
  return report.passed ? 0 : 1;
}

int cmd_eval(const Overrides& o, const std::string& model_path) {
  const ExperimentConfig c = resolve(o);
  const ExperimentData data = load_data(c);
  std::ifstream in(model_path);
  if (!in) throw ConfigError("cannot read model '" + model_path + "'");
  const NetworkModel model = load_model(in);
  std::cout << format_number(evaluate(model, data.test, c.trainer.eval_batch)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind Descent and Gradient Check CNN trainers"};
  app.require_subcommand(1);

  Overrides train_opts, batch_opts, dist_opts, eval_opts;
  std::vector<std::size_t> batch_sizes{16, 32, 64, 128, 256, 512};
  std::string sweep_mode = "grid";
  std::string model_path;
  bool inject_fault = false;

  auto* train = app.add_subcommand("train", "run one experiment");
  add_common(train, train_opts);

  auto* sweep_batch_cmd = app.add_subcommand("sweep-batch", "batch size x distribution table");
  add_common(sweep_batch_cmd, batch_opts);
  sweep_batch_cmd->add_option("--batch-sizes", batch_sizes, "batch sizes (rows)")
      ->delimiter(',');

  auto* sweep_dist_cmd = app.add_subcommand("sweep-dist", "distribution x freeze table");
  add_common(sweep_dist_cmd, dist_opts);
  sweep_dist_cmd->add_option("--mode", sweep_mode, "grid (3x3) or dist (3 rows)")
      ->check(CLI::IsMember({"grid", "dist"}));

  auto* gradcheck = app.add_subcommand("gradcheck", "backward pass vs central differences");
  gradcheck->add_flag("--inject-fault", inject_fault)->group("");

  auto* eval = app.add_subcommand("eval", "test accuracy of a saved model");
  add_common(eval, eval_opts);
  eval->add_option("--model", model_path, "model.txt written by train")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_opts);
    if (*sweep_batch_cmd) {
      const ExperimentConfig c = resolve(batch_opts);
      print_table(sweep_batch(c, load_data(c), batch_sizes));
      return 0;
    }
    if (*sweep_dist_cmd) {
      const ExperimentConfig c = resolve(dist_opts);
      print_table(sweep_dist(c, load_data(c), parse_sweep_mode(sweep_mode)));
      return 0;
    }
    if (*gradcheck) return cmd_gradcheck(inject_fault);
    if (*eval) return cmd_eval(eval_opts, model_path);
  } catch (const blindlab::Error& e) {
    std::cerr << "blindlab: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
