#pragma once

#include <array>
#include <atomic>
#include <deque>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperfit/datagen.hpp"
#include "hyperfit/equilibrium.hpp"
#include "hyperfit/execution.hpp"
#include "hyperfit/icnn.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/material.hpp"

namespace hyperfit {

/// One specimen: its mesh and the load steps recorded on it.
struct Experiment {
  std::string name;
  Mesh mesh;
  Dataset data;
};

struct StepRef {
  std::size_t experiment = 0;
  std::size_t step = 0;

  auto operator<=>(const StepRef&) const = default;
};

struct SplitConfig {
  int n_train = 20;
  int n_val = 6;
  std::size_t source = 0;  ///< experiment providing the training and validation steps
};

struct Split {
  std::vector<StepRef> train;
  std::vector<StepRef> val;
  std::vector<StepRef> test;
};

/// Picks n_train + n_val steps spread uniformly over the source experiment's step indices
/// (validation steps interleaved among them); everything else is test.
Split split_dataset(std::span<const std::size_t> step_counts, const SplitConfig& cfg);

enum class Access { Gradient = 0, Validation = 1, Evaluation = 2 };

/// Experiments plus a per-step access audit, used to prove that test steps never reach a
/// gradient computation.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Experiment> experiments);

  std::size_t size() const { return experiments_.size(); }
  const Experiment& experiment(std::size_t i) const { return experiments_.at(i); }
  std::vector<std::size_t> step_counts() const;
  std::optional<std::size_t> find(const std::string& name) const;

  /// Returns the step and records the access.
  const LoadStep& fetch(StepRef ref, Access purpose) const;
  std::size_t access_count(StepRef ref, Access purpose) const;

 private:
  std::size_t slot(StepRef ref, Access purpose) const;

  std::vector<Experiment> experiments_;
  std::vector<std::size_t> first_step_;
  mutable std::deque<std::atomic<std::size_t>> audit_;
};

/// Boundary-condition roles and loss weighting shared by training and evaluation.
struct LossSetup {
  std::vector<std::string> reaction_sets{"top"};
  std::vector<std::string> fixed_sets{"bottom"};
  double lambda_r = kDefaultReactionWeight;
  Execution exec;
};

struct OptimConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 5000;
  int patience = 200;
  std::uint64_t seed = 0;
};

void validate(const OptimConfig& cfg);

class Adam {
 public:
  Adam(const OptimConfig& cfg, std::size_t n);
  void step(std::span<double> params, std::span<const double> grad);
  int steps() const { return t_; }

 private:
  OptimConfig cfg_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0.0;  ///< mean loss per training step
  double val_loss = 0.0;    ///< mean loss per validation step (train loss when no validation steps)
};

struct TrainResult {
  Model model;  ///< parameters with the best recorded validation loss
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double min_energy = 0.0;  ///< positivity diagnostic of the selected model
};

/// Full-batch Adam on the summed equilibrium-gap loss of the training steps, with
/// best-validation checkpointing and early stopping. Throws NumericalError on non-finite loss.
TrainResult train(const Model& init, const Corpus& corpus, const Split& split, const LossSetup& setup,
                  const OptimConfig& opt);

/// Mean loss per step over `refs` (validation-style access).
double mean_loss(const Model& model, const Corpus& corpus, std::span<const StepRef> refs, const LossSetup& setup,
                 Access purpose = Access::Validation);

std::vector<IcnnArch> default_sweep_architectures();

struct SweepEntry {
  IcnnArch arch;
  std::size_t parameters = 0;
  double train_loss = 0.0;  ///< last-epoch mean training loss
  double val_loss = 0.0;    ///< best validation loss
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  std::vector<TrainResult> runs;
  std::size_t selected = 0;  ///< argmin validation loss, ties to fewer parameters then list order
};

/// Trains every architecture from init_params(arch, opt.seed) and selects on validation loss.
SweepResult sweep(std::span<const IcnnArch> archs, KinematicMode mode, const Corpus& corpus, const Split& split,
                  const LossSetup& setup, const OptimConfig& opt);

struct StepEvaluation {
  StepRef ref;
  EquilibriumReport report;
  double applied_displacement = 0.0;  ///< mean load-direction displacement of the first reaction set (mm)
  Vec2 measured = Vec2::Zero();       ///< measured reaction of the first reaction set (N)
  Vec2 predicted = Vec2::Zero();      ///< summed internal force on the same set (N)
};

struct Aggregates {
  double mean_inner = 0.0, median_inner = 0.0;
  double mean_boundary = 0.0, median_boundary = 0.0;
  double mean_loss = 0.0, median_loss = 0.0;
};

struct Evaluation {
  std::vector<StepEvaluation> steps;
  Aggregates aggregates;
};

/// Pure evaluation of `model` on `refs`; never updates parameters.
Evaluation evaluate(const Model& model, const Corpus& corpus, std::span<const StepRef> refs,
                    const LossSetup& setup);

struct ContinuityScan {
  std::vector<double> stretches;
  std::vector<Vec2> reactions;            ///< summed "top" force per sample (N)
  std::optional<double> max_jump;         ///< largest |dR_y| between adjacent samples
  std::optional<double> mean_increment;   ///< mean |dR_y| between adjacent samples
  std::optional<double> jump_ratio() const;
};

/// Forward-solves the uniaxial program with `model` at n_substeps evenly spaced stretches in
/// (1, program.back()] and records the predicted reaction. Throws SolverError with the failing
/// increment when the solve diverges.
ContinuityScan continuity_scan(const Model& model, const Mesh& mesh, std::span<const double> program, int n_substeps,
                               const SolverOptions& options = {});

}  // namespace hyperfit
