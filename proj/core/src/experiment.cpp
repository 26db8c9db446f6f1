#include "blindlab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "blindlab/errors.hpp"
#include "blindlab/network.hpp"
#include "blindlab/rng.hpp"

namespace blindlab {

namespace fs = std::filesystem;

std::string_view to_string(DatasetKind kind) {
  return kind == DatasetKind::Mnist ? "mnist" : "cifar10";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "mnist") return DatasetKind::Mnist;
  if (text == "cifar10") return DatasetKind::Cifar10;
  throw ConfigError(fmt::format("unknown dataset '{}' (expected mnist or cifar10)", text));
}

std::string format_number(double value) { return fmt::format("{:.17g}", value); }

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, text));
  }
  return value;
}

bool parse_bool(std::string_view text, std::string_view key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

fs::path resolve(std::string_view text, const fs::path& base_dir) {
  fs::path path{std::string(text)};
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  return path.lexically_normal();
}

std::vector<fs::path> parse_paths(std::string_view text, const fs::path& base_dir) {
  std::vector<fs::path> paths;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = trim(text.substr(0, comma));
    if (!item.empty()) paths.push_back(resolve(item, base_dir));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return paths;
}

std::string join_paths(const std::vector<fs::path>& paths) {
  std::string out;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i > 0) out += ',';
    out += paths[i].string();
  }
  return out;
}

using Setter = void (*)(ExperimentConfig&, std::string_view, const fs::path&);

struct Key {
  std::string_view name;
  Setter set;
};

constexpr Key kKeys[] = {
    {"trainer", [](auto& c, auto v, auto&) { c.trainer.trainer = parse_trainer_kind(v); }},
    {"proposal", [](auto& c, auto v, auto&) { c.trainer.proposal.kind = parse_proposal_kind(v); }},
    {"freeze", [](auto& c, auto v, auto&) { c.trainer.freeze.kind = parse_freeze_kind(v); }},
    {"eta", [](auto& c, auto v, auto&) { c.trainer.proposal.eta = parse_number<double>(v, "eta"); }},
    {"gamma", [](auto& c, auto v, auto&) { c.trainer.freeze.gamma = parse_number<double>(v, "gamma"); }},
    {"epochs", [](auto& c, auto v, auto&) { c.trainer.epochs = parse_number<std::size_t>(v, "epochs"); }},
    {"batch", [](auto& c, auto v, auto&) { c.trainer.batch_size = parse_number<std::size_t>(v, "batch"); }},
    {"seed", [](auto& c, auto v, auto&) { c.trainer.seed = parse_number<std::uint64_t>(v, "seed"); }},
    {"conv_mode", [](auto& c, auto v, auto&) { c.trainer.conv_mode = parse_conv_mode(v); }},
    {"eval_batch",
     [](auto& c, auto v, auto&) { c.trainer.eval_batch = parse_number<std::size_t>(v, "eval_batch"); }},
    {"dataset", [](auto& c, auto v, auto&) { c.dataset = parse_dataset_kind(v); }},
    {"train_images", [](auto& c, auto v, auto& base) { c.train_images = resolve(v, base); }},
    {"train_labels", [](auto& c, auto v, auto& base) { c.train_labels = resolve(v, base); }},
    {"test_images", [](auto& c, auto v, auto& base) { c.test_images = resolve(v, base); }},
    {"test_labels", [](auto& c, auto v, auto& base) { c.test_labels = resolve(v, base); }},
    {"train_files", [](auto& c, auto v, auto& base) { c.train_files = parse_paths(v, base); }},
    {"test_files", [](auto& c, auto v, auto& base) { c.test_files = parse_paths(v, base); }},
    {"subset_train",
     [](auto& c, auto v, auto&) { c.subset_train = parse_number<std::size_t>(v, "subset_train"); }},
    {"subset_test",
     [](auto& c, auto v, auto&) { c.subset_test = parse_number<std::size_t>(v, "subset_test"); }},
    {"out", [](auto& c, auto v, auto& base) { c.out = resolve(v, base); }},
    {"verbose_steps", [](auto& c, auto v, auto&) { c.verbose_steps = parse_bool(v, "verbose_steps"); }},
    {"wall_clock", [](auto& c, auto v, auto&) { c.wall_clock = parse_bool(v, "wall_clock"); }},
};

}  // namespace

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
  ExperimentConfig config;
  std::set<std::string, std::less<>> seen;

  std::size_t line_number = 0;
  while (!text.empty()) {
    ++line_number;
    const auto newline = text.find('\n');
    const std::string_view line = trim(text.substr(0, newline));
    text.remove_prefix(newline == std::string_view::npos ? text.size() : newline + 1);
    if (line.empty() || line.front() == '#') continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected key=value", line_number));
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto entry = std::find_if(std::begin(kKeys), std::end(kKeys),
                                    [&](const Key& k) { return k.name == key; });
    if (entry == std::end(kKeys)) {
      throw ConfigError(fmt::format("line {}: unknown key '{}'", line_number, key));
    }
    if (!seen.emplace(key).second) {
      throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_number, key));
    }
    try {
      entry->set(config, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", line_number, e.what()));
    }
  }

  const auto require = [&](std::string_view key) {
    if (!seen.contains(key)) throw ConfigError(fmt::format("missing required key '{}'", key));
  };
  require("dataset");
  if (config.dataset == DatasetKind::Mnist) {
    for (auto key : {"train_images", "train_labels", "test_images", "test_labels"}) require(key);
  } else {
    require("train_files");
    require("test_files");
  }
  config.trainer.validate();
  return config;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot read config '{}'", file.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), file.parent_path());
}

std::string echo_config(const ExperimentConfig& c) {
  std::string out;
  const auto line = [&](std::string_view key, const std::string& value) {
    out += fmt::format("{}={}\n", key, value);
  };
  line("trainer", std::string(to_string(c.trainer.trainer)));
  line("proposal", std::string(to_string(c.trainer.proposal.kind)));
  line("freeze", std::string(to_string(c.trainer.freeze.kind)));
  line("eta", format_number(c.trainer.proposal.eta));
  line("gamma", format_number(c.trainer.freeze.gamma));
  line("epochs", std::to_string(c.trainer.epochs));
  line("batch", std::to_string(c.trainer.batch_size));
  line("seed", std::to_string(c.trainer.seed));
  line("conv_mode", std::string(to_string(c.trainer.conv_mode)));
  line("eval_batch", std::to_string(c.trainer.eval_batch));
  line("dataset", std::string(to_string(c.dataset)));
  line("train_images", c.train_images.string());
  line("train_labels", c.train_labels.string());
  line("test_images", c.test_images.string());
  line("test_labels", c.test_labels.string());
  line("train_files", join_paths(c.train_files));
  line("test_files", join_paths(c.test_files));
  line("subset_train", std::to_string(c.subset_train));
  line("subset_test", std::to_string(c.subset_test));
  line("out", c.out.string());
  line("verbose_steps", c.verbose_steps ? "true" : "false");
  line("wall_clock", c.wall_clock ? "true" : "false");
  return out;
}

ExperimentData load_data(const ExperimentConfig& config) {
  ExperimentData data;
  if (config.dataset == DatasetKind::Mnist) {
    data.train = load_mnist_idx(config.train_images, config.train_labels);
    data.test = load_mnist_idx(config.test_images, config.test_labels);
  } else {
    data.train = load_cifar10_bin(config.train_files);
    data.test = load_cifar10_bin(config.test_files);
  }
  if (config.subset_train > 0) {
    data.train = subset(data.train, config.subset_train, derive_seed(config.trainer.seed, 4, 0));
  }
  if (config.subset_test > 0) {
    data.test = subset(data.test, config.subset_test, derive_seed(config.trainer.seed, 5, 0));
  }
  return data;
}

namespace {

constexpr std::string_view kStepsHeader =
    "batch_index,loss_before,loss_after,accepted,sampled_eta,non_finite_gradient";

std::string step_line(const StepOutcome& s) {
  return fmt::format("{},{},{},{},{},{}\n", s.batch_index, format_number(s.loss_before),
                     format_number(s.loss_after), s.accepted ? 1 : 0,
                     s.sampled_eta ? format_number(*s.sampled_eta) : std::string(),
                     s.non_finite_gradient ? 1 : 0);
}

std::string epochs_header(bool wall_clock) {
  return wall_clock ? "epoch,test_accuracy,acceptance_rate,mean_loss,steps,wall_seconds\n"
                    : "epoch,test_accuracy,acceptance_rate,mean_loss,steps\n";
}

std::string epoch_line(const EpochRecord& e, bool wall_clock) {
  std::string line = fmt::format("{},{},{},{},{}", e.epoch, format_number(e.test_accuracy),
                                 format_number(e.acceptance_rate), format_number(e.mean_loss),
                                 e.steps);
  if (wall_clock) line += "," + format_number(e.wall_seconds);
  return line + "\n";
}

// One write call per record so a partially written file never holds a
// partial line.
void append(std::ofstream& out, const std::string& record) {
  out.write(record.data(), static_cast<std::streamsize>(record.size()));
  out.flush();
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  for (;;) {
    const auto comma = line.find(',');
    fields.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return fields;
}

}  // namespace

void write_steps_csv(std::ostream& out, std::span<const StepOutcome> steps) {
  out << kStepsHeader << '\n';
  for (const StepOutcome& s : steps) out << step_line(s);
}

std::vector<StepOutcome> read_steps_csv(std::istream& in, TrainerKind trainer) {
  std::string line;
  if (!std::getline(in, line) || line != kStepsHeader) {
    throw FormatError("steps file: missing or unexpected header");
  }
  std::vector<StepOutcome> steps;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 6) {
      throw FormatError(fmt::format("steps file line {}: expected 6 fields", row));
    }
    try {
      StepOutcome s;
      s.trainer = trainer;
      s.batch_index = parse_number<std::size_t>(fields[0], "batch_index");
      s.loss_before = parse_number<double>(fields[1], "loss_before");
      s.loss_after = parse_number<double>(fields[2], "loss_after");
      s.accepted = parse_bool(fields[3], "accepted");
      if (!fields[4].empty()) s.sampled_eta = parse_number<double>(fields[4], "sampled_eta");
      s.non_finite_gradient = parse_bool(fields[5], "non_finite_gradient");
      steps.push_back(s);
    } catch (const ConfigError& e) {
      throw FormatError(fmt::format("steps file line {}: {}", row, e.what()));
    }
  }
  return steps;
}

void write_epochs_csv(std::ostream& out, std::span<const EpochRecord> epochs, bool wall_clock) {
  out << epochs_header(wall_clock);
  for (const EpochRecord& e : epochs) out << epoch_line(e, wall_clock);
}

std::string summary_csv(const ExperimentConfig& c, const RunSummary& s) {
  return fmt::format(
      "trainer,proposal,freeze,eta,gamma,conv_mode,dataset,batch,epochs,seed,steps,accepted,"
      "acceptance_rate,initial_accuracy,test_accuracy\n"
      "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
      to_string(c.trainer.trainer), to_string(c.trainer.proposal.kind),
      to_string(c.trainer.freeze.kind), format_number(c.trainer.proposal.eta),
      format_number(c.trainer.freeze.gamma), to_string(c.trainer.conv_mode),
      to_string(c.dataset), c.trainer.batch_size, c.trainer.epochs, s.seed, s.steps, s.accepted,
      s.acceptance_rate ? format_number(*s.acceptance_rate) : std::string(),
      format_number(s.initial_accuracy), format_number(s.test_accuracy));
}

RunSummary run_experiment(const ExperimentConfig& config, const ExperimentData& data) {
  fs::create_directories(config.out);
  {
    std::ofstream echo = open_text(config.out / "config.txt");
    append(echo, echo_config(config));
  }

  std::ofstream epochs = open_text(config.out / "epochs.csv");
  append(epochs, epochs_header(config.wall_clock));
  std::ofstream steps;
  if (config.verbose_steps) {
    steps = open_text(config.out / "steps.csv");
    append(steps, std::string(kStepsHeader) + "\n");
  }

  TrainObserver observer;
  observer.on_epoch = [&](const EpochRecord& e) { append(epochs, epoch_line(e, config.wall_clock)); };
  if (config.verbose_steps) {
    observer.on_step = [&](const StepOutcome& s) { append(steps, step_line(s)); };
  }
  const TrainResult result = train(config.trainer, data.train, data.test, observer);

  RunSummary summary;
  summary.seed = config.trainer.seed;
  summary.steps = result.steps.size();
  for (const StepOutcome& s : result.steps) summary.accepted += s.accepted ? 1 : 0;
  if (!result.steps.empty()) summary.acceptance_rate = acceptance_rate(result.steps);
  summary.initial_accuracy = result.epochs.front().test_accuracy;
  summary.test_accuracy = result.epochs.back().test_accuracy;

  {
    std::ofstream model = open_text(config.out / "model.txt");
    std::ostringstream text;
    save_model(result.model, text);
    append(model, text.str());
  }
  std::ofstream out = open_text(config.out / "summary.csv");
  append(out, summary_csv(config, summary));
  return summary;
}

std::string SweepTable::to_csv() const {
  const auto join = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) line += ',';
      line += cells[i];
    }
    return line + "\n";
  };
  std::string out = join(header);
  for (const auto& row : rows) out += join(row);
  return out;
}

std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t row, std::size_t column) {
  return derive_seed(base_seed, row, column);
}

SweepTable sweep_batch(const ExperimentConfig& base, const ExperimentData& data,
                       std::span<const std::size_t> batch_sizes) {
  constexpr ProposalKind kColumns[] = {ProposalKind::UniformAdditive,
                                       ProposalKind::NormalCentered};
  SweepTable table;
  table.header = {"batch_size", "uniform", "normal"};
  for (std::size_t i = 0; i < batch_sizes.size(); ++i) {
    std::vector<std::string> row{std::to_string(batch_sizes[i])};
    for (std::size_t j = 0; j < std::size(kColumns); ++j) {
      ExperimentConfig cell = base;
      cell.trainer.trainer = TrainerKind::BlindDescent;
      cell.trainer.proposal.kind = kColumns[j];
      cell.trainer.batch_size = batch_sizes[i];
      cell.trainer.seed = cell_seed(base.trainer.seed, i, j);
      cell.out = base.out / fmt::format("batch-{}-{}", batch_sizes[i], to_string(kColumns[j]));
      row.push_back(format_number(run_experiment(cell, data).test_accuracy));
    }
    table.rows.push_back(std::move(row));
  }
  std::ofstream out = open_text(base.out / "sweep-batch.csv");
  append(out, table.to_csv());
  return table;
}

SweepDistMode parse_sweep_mode(std::string_view text) {
  if (text == "grid") return SweepDistMode::Grid;
  if (text == "dist") return SweepDistMode::Dist;
  throw ConfigError(fmt::format("unknown sweep mode '{}' (expected grid or dist)", text));
}

SweepTable sweep_dist(const ExperimentConfig& base, const ExperimentData& data,
                      SweepDistMode mode) {
  constexpr ProposalKind kDistributions[] = {ProposalKind::ZeroMeanUnitUniform,
                                             ProposalKind::UniformAdditive,
                                             ProposalKind::NormalCentered};
  constexpr FreezeKind kFreezes[] = {FreezeKind::None, FreezeKind::LayerCyclic,
                                     FreezeKind::RandomFilter};
  constexpr std::string_view kNames[] = {"one", "two",   "three", "four", "five",
                                         "six", "seven", "eight", "nine"};

  const auto run_cell = [&](std::size_t d, std::size_t f) {
    ExperimentConfig cell = base;
    cell.trainer.trainer = TrainerKind::BlindDescent;
    cell.trainer.proposal.kind = kDistributions[d];
    cell.trainer.freeze.kind = kFreezes[f];
    cell.trainer.seed = cell_seed(base.trainer.seed, d, f);
    cell.out = base.out / fmt::format("grid-{}-{}", to_string(kDistributions[d]),
                                      to_string(kFreezes[f]));
    return format_number(run_experiment(cell, data).test_accuracy);
  };

  SweepTable table;
  if (mode == SweepDistMode::Grid) {
    table.header = {"experiment", "distribution", "freeze", "test_accuracy"};
    for (std::size_t d = 0; d < 3; ++d) {
      for (std::size_t f = 0; f < 3; ++f) {
        table.rows.push_back({std::string(kNames[3 * d + f]),
                              std::string(to_string(kDistributions[d])),
                              std::string(to_string(kFreezes[f])), run_cell(d, f)});
      }
    }
  } else {
    const auto f = static_cast<std::size_t>(
        std::find(std::begin(kFreezes), std::end(kFreezes), base.trainer.freeze.kind) -
        std::begin(kFreezes));
    table.header = {"distribution", "test_accuracy"};
    for (std::size_t d = 0; d < 3; ++d) {
      table.rows.push_back({std::string(to_string(kDistributions[d])), run_cell(d, f)});
    }
  }
  std::ofstream out = open_text(base.out / (mode == SweepDistMode::Grid ? "sweep-grid.csv"
                                                                          : "sweep-dist.csv"));
  append(out, table.to_csv());
  return table;
}

}  // namespace blindlab
