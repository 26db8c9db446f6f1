#pragma once

// Greedy accept/reject training: Blind Descent (whole network, layer-cyclic
// or random-filter freezing) and first-order Gradient Check.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "blindlab/network.hpp"
#include "blindlab/proposal.hpp"
#include "blindlab/rng.hpp"

namespace blindlab {

struct LabeledDataset;

enum class FreezeKind { None, LayerCyclic, RandomFilter };

std::string_view to_string(FreezeKind kind);
// Accepts "none", "layer" and "random".
FreezeKind parse_freeze_kind(std::string_view text);

struct FreezePolicy {
  FreezeKind kind = FreezeKind::None;
  // Per-filter freeze probability, RandomFilter only.
  double gamma = 0.75;

  void validate() const;

  friend bool operator==(const FreezePolicy&, const FreezePolicy&) = default;
};

enum class TrainerKind { BlindDescent, GradientCheck };

std::string_view to_string(TrainerKind kind);
// Accepts "blind-descent" and "gradient-check".
TrainerKind parse_trainer_kind(std::string_view text);

struct StepOutcome {
  std::size_t batch_index = 0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool accepted = false;
  TrainerKind trainer = TrainerKind::BlindDescent;
  // Gradient Check only.
  std::optional<double> sampled_eta;
  bool non_finite_gradient = false;

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

// The acceptance predicate: strictly lower loss on the same batch.
constexpr bool improves(double loss_before, double loss_after) {
  return loss_after < loss_before;
}

struct Proposal {
  NetworkModel candidate;
  // frozen[bank][filter]: filter copied verbatim from the current model.
  std::vector<std::vector<bool>> frozen;
};

// Builds the candidate model for one Blind Descent step.
//   None         every weight is proposed.
//   LayerCyclic  only bank (batch_index mod conv_layers) is proposed.
//   RandomFilter each filter of every bank is frozen with probability gamma,
//                drawn fresh on every call; the rest are proposed.
// Freeze indicators are drawn before the proposal variates.
Proposal make_proposal(const NetworkModel& model, const ProposalSpec& proposal,
                       const FreezePolicy& freeze, std::size_t batch_index,
                       RngStream& rng);

// One proposal, one decision. The model is replaced by the candidate iff
// the candidate's loss on this batch is strictly lower; otherwise it is left
// untouched.
StepOutcome blind_descent_step(NetworkModel& model, const Tensor4& batch,
                               std::span<const int> labels,
                               const ProposalSpec& proposal,
                               const FreezePolicy& freeze,
                               std::size_t batch_index, RngStream& rng);

// w' = w - eta * dL/dw with eta = sample_learning_rate(rng), shared by all
// weights. Accepted iff the batch loss strictly decreases. A non-finite
// gradient or candidate loss rejects the step.
StepOutcome gradient_check_step(NetworkModel& model, const Tensor4& batch,
                                std::span<const int> labels,
                                std::size_t batch_index, RngStream& rng);

struct TrainerConfig {
  TrainerKind trainer = TrainerKind::BlindDescent;
  ProposalSpec proposal{};
  FreezePolicy freeze{};
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  ConvMode conv_mode = ConvMode::ChannelSum;
  std::size_t eval_batch = 256;

  void validate() const;

  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

struct EpochRecord {
  // 0 is the initialized model before any step.
  std::size_t epoch = 0;
  double test_accuracy = 0.0;
  // Over the steps of this epoch; 0 for epoch 0.
  double acceptance_rate = 0.0;
  // Mean loss_before over the steps of this epoch; 0 for epoch 0.
  double mean_loss = 0.0;
  std::size_t steps = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  NetworkModel model;
  std::vector<StepOutcome> steps;
  std::vector<EpochRecord> epochs;
};

struct TrainObserver {
  std::function<void(const StepOutcome&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Seeds derive from config.seed: derive_seed(seed, 1, 0) initializes the
// weights, derive_seed(seed, 2, 0) shuffles batches and
// derive_seed(seed, 3, 0) drives proposals and learning rates. The batch
// index counts batches across epochs.
TrainResult train(const TrainerConfig& config, const LabeledDataset& train_set,
                  const LabeledDataset& test_set,
                  const TrainObserver& observer = {});

// Accepted steps / all steps. Throws UndefinedInputError when empty.
double acceptance_rate(std::span<const StepOutcome> steps);

}  // namespace blindlab
