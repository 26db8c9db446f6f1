#include "blindlab/trainer.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "blindlab/dataset.hpp"
#include "blindlab/errors.hpp"
#include "blindlab/gradient.hpp"

namespace blindlab {

std::string_view to_string(FreezeKind kind) {
  switch (kind) {
    case FreezeKind::None:
      return "none";
    case FreezeKind::LayerCyclic:
      return "layer";
    case FreezeKind::RandomFilter:
      return "random";
  }
  return "?";
}

FreezeKind parse_freeze_kind(std::string_view text) {
  if (text == "none") return FreezeKind::None;
  if (text == "layer") return FreezeKind::LayerCyclic;
  if (text == "random") return FreezeKind::RandomFilter;
  throw ConfigError(fmt::format("unknown freeze policy '{}' (expected none, layer or random)",
                                text));
}

void FreezePolicy::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError(fmt::format("gamma must lie in [0, 1], got {}", gamma));
  }
}

std::string_view to_string(TrainerKind kind) {
  return kind == TrainerKind::BlindDescent ? "blind-descent" : "gradient-check";
}

TrainerKind parse_trainer_kind(std::string_view text) {
  if (text == "blind-descent") return TrainerKind::BlindDescent;
  if (text == "gradient-check") return TrainerKind::GradientCheck;
  throw ConfigError(fmt::format(
      "unknown trainer '{}' (expected blind-descent or gradient-check)", text));
}

Proposal make_proposal(const NetworkModel& model, const ProposalSpec& proposal,
                       const FreezePolicy& freeze, std::size_t batch_index,
                       RngStream& rng) {
  Proposal result{model, {}};
  std::span<const KernelBank> current = model.banks();
  std::span<KernelBank> candidate = result.candidate.banks();
  for (const KernelBank& bank : current) result.frozen.emplace_back(bank.filters(), false);

  switch (freeze.kind) {
    case FreezeKind::None:
      break;
    case FreezeKind::LayerCyclic: {
      const std::size_t active = batch_index % model.conv_layers();
      for (std::size_t b = 0; b < current.size(); ++b) {
        if (b != active) result.frozen[b].assign(current[b].filters(), true);
      }
      break;
    }
    case FreezeKind::RandomFilter:
      for (auto& bank : result.frozen) {
        for (std::size_t f = 0; f < bank.size(); ++f) bank[f] = rng.bernoulli(freeze.gamma);
      }
      break;
  }

  for (std::size_t b = 0; b < current.size(); ++b) {
    for (std::size_t f = 0; f < current[b].filters(); ++f) {
      if (result.frozen[b][f]) continue;
      propose_into(current[b].filter(f), candidate[b].filter(f), proposal, rng);
    }
  }
  return result;
}

StepOutcome blind_descent_step(NetworkModel& model, const Tensor4& batch,
                               std::span<const int> labels, const ProposalSpec& proposal,
                               const FreezePolicy& freeze, std::size_t batch_index,
                               RngStream& rng) {
  StepOutcome outcome;
  outcome.batch_index = batch_index;
  outcome.trainer = TrainerKind::BlindDescent;
  outcome.loss_before = loss(model, batch, labels);

  Proposal candidate = make_proposal(model, proposal, freeze, batch_index, rng);
  outcome.loss_after = loss(candidate.candidate, batch, labels);
  outcome.accepted =
      std::isfinite(outcome.loss_after) && improves(outcome.loss_before, outcome.loss_after);
  if (outcome.accepted) model = std::move(candidate.candidate);
  return outcome;
}

StepOutcome gradient_check_step(NetworkModel& model, const Tensor4& batch,
                                std::span<const int> labels, std::size_t batch_index,
                                RngStream& rng) {
  StepOutcome outcome;
  outcome.batch_index = batch_index;
  outcome.trainer = TrainerKind::GradientCheck;

  const ForwardPass pass = forward_with_cache(model, batch, labels);
  outcome.loss_before = pass.loss;
  const GradientSet grads = backward(model, pass.cache, labels);
  const double eta = sample_learning_rate(rng);
  outcome.sampled_eta = eta;

  if (!grads.all_finite()) {
    outcome.non_finite_gradient = true;
    outcome.loss_after = outcome.loss_before;
    return outcome;
  }

  NetworkModel candidate = model;
  for (std::size_t b = 0; b < candidate.conv_layers(); ++b) {
    std::span<double> weights = candidate.banks()[b].weights();
    const std::vector<double>& g = grads.banks[b];
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] -= eta * g[i];
  }
  outcome.loss_after = loss(candidate, batch, labels);
  outcome.accepted =
      std::isfinite(outcome.loss_after) && improves(outcome.loss_before, outcome.loss_after);
  if (outcome.accepted) model = std::move(candidate);
  return outcome;
}

void TrainerConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (eval_batch == 0) throw ConfigError("evaluation batch size must be at least 1");
  if (trainer == TrainerKind::BlindDescent) {
    proposal.validate();
    freeze.validate();
  }
}

double acceptance_rate(std::span<const StepOutcome> steps) {
  if (steps.empty()) throw UndefinedInputError("acceptance rate of an empty step stream");
  std::size_t accepted = 0;
  for (const StepOutcome& step : steps) accepted += step.accepted ? 1 : 0;
  return static_cast<double>(accepted) / static_cast<double>(steps.size());
}

TrainResult train(const TrainerConfig& config, const LabeledDataset& train_set,
                  const LabeledDataset& test_set, const TrainObserver& observer) {
  config.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  if (test_set.size() == 0) throw ConfigError("test set is empty");

  const Shape& s = train_set.images.shape();
  const Geometry geometry{s.c, s.h, s.w};
  TrainResult result;
  result.model = init_weights(build_cnn(geometry, train_set.classes, config.conv_mode),
                              derive_seed(config.seed, 1, 0));
  const std::uint64_t shuffle_seed = derive_seed(config.seed, 2, 0);
  RngStream rng(derive_seed(config.seed, 3, 0));

  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  const auto record_epoch = [&](EpochRecord record) {
    record.test_accuracy = evaluate(result.model, test_set, config.eval_batch);
    record.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    result.epochs.push_back(record);
    if (observer.on_epoch) observer.on_epoch(record);
  };
  record_epoch(EpochRecord{});

  std::size_t batch_index = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::size_t first_step = result.steps.size();
    double loss_sum = 0.0;
    for (const auto& indices : batches(train_set.size(), config.batch_size, shuffle_seed, epoch)) {
      const Batch batch = gather(train_set, indices);
      StepOutcome outcome =
          config.trainer == TrainerKind::BlindDescent
              ? blind_descent_step(result.model, batch.images, batch.labels, config.proposal,
                                   config.freeze, batch_index, rng)
              : gradient_check_step(result.model, batch.images, batch.labels, batch_index, rng);
      ++batch_index;
      loss_sum += outcome.loss_before;
      result.steps.push_back(outcome);
      if (observer.on_step) observer.on_step(outcome);
    }
    const std::span<const StepOutcome> epoch_steps =
        std::span<const StepOutcome>(result.steps).subspan(first_step);
    EpochRecord record;
    record.epoch = epoch + 1;
    record.steps = epoch_steps.size();
    record.acceptance_rate = acceptance_rate(epoch_steps);
    record.mean_loss = loss_sum / static_cast<double>(epoch_steps.size());
    record_epoch(record);
  }
  return result;
}

}  // namespace blindlab
