#pragma once

// Experiment configuration, metrics files and the sweep drivers behind the
// command-line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blindlab/dataset.hpp"
#include "blindlab/trainer.hpp"

namespace blindlab {

enum class DatasetKind { Mnist, Cifar10 };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text);

// Flat key=value document. Blank lines and lines starting with '#' are
// ignored. Keys and defaults:
//
//   trainer       blind-descent | gradient-check       blind-descent
//   proposal      normal | uniform | unit-uniform      normal
//   freeze        none | layer | random                none
//   eta           proposal width                       0.001
//   gamma         freeze probability                   0.75
//   epochs                                             40
//   batch                                              16
//   seed          64-bit unsigned                      1
//   conv_mode     channel-sum | standard               channel-sum
//   eval_batch                                         256
//   dataset       mnist | cifar10                      (required)
//   train_images, train_labels, test_images, test_labels
//                 IDX paths, required for mnist
//   train_files, test_files
//                 comma-separated CIFAR-10 batch files, required for cifar10
//   subset_train, subset_test   0 keeps the whole split   0
//   out           output directory                     results
//   verbose_steps write steps.csv                      false
//   wall_clock    add wall_seconds to epochs.csv       false
//
// Relative paths are resolved against the directory of the config file.
struct ExperimentConfig {
  TrainerConfig trainer{};
  DatasetKind dataset = DatasetKind::Mnist;
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::vector<std::filesystem::path> train_files;
  std::vector<std::filesystem::path> test_files;
  std::size_t subset_train = 0;
  std::size_t subset_test = 0;
  std::filesystem::path out = "results";
  bool verbose_steps = false;
  bool wall_clock = false;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

// Throws ConfigError (with the 1-based line number) on unknown keys,
// duplicate keys, unparsable values or missing required keys.
ExperimentConfig parse_config(std::string_view text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& file);

// Canonical key=value rendering of every key; parse_config() of the result
// yields an equal config.
std::string echo_config(const ExperimentConfig& config);

// Shortest-exact text for a double: 17 significant digits.
std::string format_number(double value);

struct ExperimentData {
  LabeledDataset train;
  LabeledDataset test;
};

// Loads both splits and applies the subset sizes, stratified with seeds
// derive_seed(seed, 4, 0) (train) and derive_seed(seed, 5, 0) (test).
ExperimentData load_data(const ExperimentConfig& config);

struct RunSummary {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t accepted = 0;
  // Empty when no step ran.
  std::optional<double> acceptance_rate;
  double initial_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Trains and writes into config.out:
//   summary.csv  header + one row (config fields, accuracy, acceptance rate)
//   config.txt   echo_config()
//   epochs.csv   one row per epoch record
//   steps.csv    one row per step (verbose_steps only)
//   model.txt    final weights (save_model format)
RunSummary run_experiment(const ExperimentConfig& config,
                          const ExperimentData& data);

void write_steps_csv(std::ostream& out, std::span<const StepOutcome> steps);
// Reads what write_steps_csv() wrote. Throws FormatError on malformed rows.
std::vector<StepOutcome> read_steps_csv(std::istream& in, TrainerKind trainer);

void write_epochs_csv(std::ostream& out, std::span<const EpochRecord> epochs,
                      bool wall_clock);

std::string summary_csv(const ExperimentConfig& config,
                        const RunSummary& summary);

struct SweepTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
};

// Seed for sweep cell (row, column): derive_seed(base_seed, row, column).
std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t row,
                        std::size_t column);

// One Blind Descent run per batch size (rows) and per distribution in
// {uniform, normal} (columns). Cell outputs go to <out>/batch-<size>-<dist>.
SweepTable sweep_batch(const ExperimentConfig& base, const ExperimentData& data,
                       std::span<const std::size_t> batch_sizes);

enum class SweepDistMode {
  // 3 distributions x 3 freeze policies, nine rows in the order
  // unit-uniform, uniform, normal x none, layer, random.
  Grid,
  // The three distributions with the base config's freeze policy.
  Dist,
};

SweepDistMode parse_sweep_mode(std::string_view text);

SweepTable sweep_dist(const ExperimentConfig& base, const ExperimentData& data,
                      SweepDistMode mode);

}  // namespace blindlab
