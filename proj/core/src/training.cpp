#include "hyperfit/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "hyperfit/error.hpp"

namespace hyperfit {

// ---------------------------------------------------------------------------
// Splitting and the audited corpus

Split split_dataset(std::span<const std::size_t> step_counts, const SplitConfig& cfg) {
  if (cfg.n_train < 1) throw ConfigError("insufficient training steps: n_train must be >= 1");
  if (cfg.n_val < 0) throw ConfigError("n_val must be >= 0");
  if (cfg.source >= step_counts.size()) throw ConfigError("split source experiment out of range");
  const std::size_t available = step_counts[cfg.source];
  const auto picked = static_cast<std::size_t>(cfg.n_train + cfg.n_val);
  if (picked > available) {
    throw ConfigError("insufficient training steps: source has " + std::to_string(available) + " steps, " +
                      std::to_string(picked) + " requested");
  }

  std::vector<std::size_t> indices(picked);
  for (std::size_t k = 0; k < picked; ++k) {
    indices[k] = picked == 1 ? available - 1
                             : static_cast<std::size_t>(std::llround(static_cast<double>(k) *
                                                                     static_cast<double>(available - 1) /
                                                                     static_cast<double>(picked - 1)));
  }
  std::vector<bool> is_val(picked, false);
  for (int j = 0; j < cfg.n_val; ++j) {
    const auto pos = static_cast<std::size_t>((j + 0.5) * static_cast<double>(picked) / cfg.n_val);
    is_val[std::min(pos, picked - 1)] = true;
  }

  Split split;
  std::vector<bool> used(available, false);
  for (std::size_t k = 0; k < picked; ++k) {
    used[indices[k]] = true;
    (is_val[k] ? split.val : split.train).push_back({cfg.source, indices[k]});
  }
  for (std::size_t e = 0; e < step_counts.size(); ++e) {
    for (std::size_t s = 0; s < step_counts[e]; ++s) {
      if (e == cfg.source && used[s]) continue;
      split.test.push_back({e, s});
    }
  }
  return split;
}

Corpus::Corpus(std::vector<Experiment> experiments) : experiments_(std::move(experiments)) {
  std::size_t total = 0;
  for (const auto& e : experiments_) {
    for (const auto& step : e.data.steps) validate_step(e.mesh, step);
    first_step_.push_back(total);
    total += e.data.steps.size();
  }
  for (std::size_t i = 0; i < 3 * total; ++i) audit_.emplace_back(0);
}

std::size_t Corpus::slot(StepRef ref, Access purpose) const {
  if (ref.experiment >= experiments_.size() || ref.step >= experiments_[ref.experiment].data.steps.size()) {
    throw ConfigError("step reference out of range");
  }
  return 3 * (first_step_[ref.experiment] + ref.step) + static_cast<std::size_t>(purpose);
}

std::vector<std::size_t> Corpus::step_counts() const {
  std::vector<std::size_t> counts;
  for (const auto& e : experiments_) counts.push_back(e.data.steps.size());
  return counts;
}

std::optional<std::size_t> Corpus::find(const std::string& name) const {
  for (std::size_t i = 0; i < experiments_.size(); ++i) {
    if (experiments_[i].name == name) return i;
  }
  return std::nullopt;
}

const LoadStep& Corpus::fetch(StepRef ref, Access purpose) const {
  audit_[slot(ref, purpose)].fetch_add(1, std::memory_order_relaxed);
  return experiments_[ref.experiment].data.steps[ref.step];
}

std::size_t Corpus::access_count(StepRef ref, Access purpose) const {
  return audit_[slot(ref, purpose)].load(std::memory_order_relaxed);
}

// ---------------------------------------------------------------------------
// Optimizer

void validate(const OptimConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(cfg.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
}

Adam::Adam(const OptimConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ConfigError("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct ExperimentContext {
  std::vector<QuadPoint> quad;
  DofPartition part;
};

class ContextCache {
 public:
  ContextCache(const Corpus& corpus, const LossSetup& setup) : corpus_(corpus), setup_(setup) {}

  const ExperimentContext& get(std::size_t experiment) {
    auto it = cache_.find(experiment);
    if (it == cache_.end()) {
      const Mesh& mesh = corpus_.experiment(experiment).mesh;
      it = cache_
               .emplace(experiment, ExperimentContext{precompute_quadrature(mesh),
                                                      make_partition(mesh, setup_.reaction_sets, setup_.fixed_sets)})
               .first;
    }
    return it->second;
  }

 private:
  const Corpus& corpus_;
  const LossSetup& setup_;
  std::map<std::size_t, ExperimentContext> cache_;
};

// Steps grouped by experiment, in first-appearance order.
std::vector<std::pair<std::size_t, std::vector<const LoadStep*>>> group(const Corpus& corpus,
                                                                        std::span<const StepRef> refs,
                                                                        Access purpose) {
  std::vector<std::pair<std::size_t, std::vector<const LoadStep*>>> groups;
  for (const auto& ref : refs) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == ref.experiment; });
    if (it == groups.end()) {
      groups.emplace_back(ref.experiment, std::vector<const LoadStep*>{});
      it = std::prev(groups.end());
    }
    it->second.push_back(&corpus.fetch(ref, purpose));
  }
  return groups;
}

double mean_loss_cached(const Model& model, const Corpus& corpus, std::span<const StepRef> refs,
                        const LossSetup& setup, ContextCache& cache, Access purpose) {
  if (refs.empty()) throw ConfigError("mean_loss: no steps");
  const Law law = make_law(model);
  std::vector<const LoadStep*> steps;
  std::vector<const ExperimentContext*> contexts;
  for (const auto& ref : refs) {
    steps.push_back(&corpus.fetch(ref, purpose));
    contexts.push_back(&cache.get(ref.experiment));
  }
  std::vector<double> losses(refs.size());
  parallel_for(refs.size(), setup.exec, [&](std::size_t i) {
    const Mesh& mesh = corpus.experiment(refs[i].experiment).mesh;
    losses[i] = equilibrium_loss(mesh, contexts[i]->quad, law, *steps[i], contexts[i]->part, setup.lambda_r).loss;
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(refs.size());
}

}  // namespace

double mean_loss(const Model& model, const Corpus& corpus, std::span<const StepRef> refs, const LossSetup& setup,
                 Access purpose) {
  ContextCache cache(corpus, setup);
  return mean_loss_cached(model, corpus, refs, setup, cache, purpose);
}

TrainResult train(const Model& init, const Corpus& corpus, const Split& split, const LossSetup& setup,
                  const OptimConfig& opt) {
  validate(opt);
  if (split.train.empty()) throw ConfigError("insufficient training steps: empty training split");
  ContextCache cache(corpus, setup);
  const auto groups = group(corpus, split.train, Access::Gradient);
  for (const auto& [experiment, steps] : groups) cache.get(experiment);

  std::vector<double> theta = parameters(init);
  Adam adam(opt, theta.size());
  TrainResult result{init, {}, 0, std::numeric_limits<double>::infinity(), 0.0};
  int since_best = 0;
  const auto n_train = static_cast<double>(split.train.size());

  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    const Model current = with_parameters(init, theta);
    std::vector<double> grad(theta.size(), 0.0);
    double train_loss = 0.0;
    for (const auto& [experiment, steps] : groups) {
      const auto& ctx = cache.get(experiment);
      const auto lg = loss_gradient(corpus.experiment(experiment).mesh, ctx.quad, current, steps, ctx.part,
                                    setup.lambda_r, setup.exec);
      train_loss += lg.loss;
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += lg.gradient[k];
    }
    train_loss /= n_train;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      if (!std::isfinite(grad[k])) throw NumericalError(-1, -1, "non-finite loss gradient at epoch " + std::to_string(epoch));
    }
    const double val_loss = split.val.empty()
                                ? train_loss
                                : mean_loss_cached(current, corpus, split.val, setup, cache, Access::Validation);
    result.history.push_back({epoch, train_loss, val_loss});

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.model = current;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
    adam.step(theta, grad);
  }
  result.min_energy = min_energy_on_grid(result.model);
  return result;
}

// ---------------------------------------------------------------------------
// Architecture sweep

std::vector<IcnnArch> default_sweep_architectures() {
  const std::vector<std::vector<int>> widths{{8},      {16},     {24},         {8, 8},           {16, 16},
                                             {32, 32}, {64, 64}, {64, 64, 64}, {76, 76, 76, 76}, {96, 96, 96}};
  std::vector<IcnnArch> archs;
  for (const auto& w : widths) archs.push_back(IcnnArch{4, w, w.size() >= 2});
  return archs;
}

SweepResult sweep(std::span<const IcnnArch> archs, KinematicMode mode, const Corpus& corpus, const Split& split,
                  const LossSetup& setup, const OptimConfig& opt) {
  if (archs.empty()) throw ConfigError("sweep needs at least one architecture");
  SweepResult result;
  result.entries.resize(archs.size());
  result.runs.resize(archs.size());

  // Parallelism goes to the outer loop; each run then evaluates sequentially.
  const bool outer_parallel = setup.exec.threads > 1 && archs.size() > 1;
  LossSetup inner = setup;
  if (outer_parallel) inner.exec.threads = 1;
  parallel_for(archs.size(), outer_parallel ? setup.exec : Execution{1}, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    const PannModel init = PannModel::initialized(archs[i], opt.seed, mode);
    result.runs[i] = train(init, corpus, split, inner, opt);
    const auto stop = std::chrono::steady_clock::now();
    result.entries[i] = SweepEntry{archs[i], count_parameters(archs[i]), result.runs[i].history.back().train_loss,
                                   result.runs[i].best_val_loss,
                                   std::chrono::duration<double>(stop - start).count()};
  });

  for (std::size_t i = 1; i < archs.size(); ++i) {
    const auto& best = result.entries[result.selected];
    const auto& cand = result.entries[i];
    if (cand.val_loss < best.val_loss || (cand.val_loss == best.val_loss && cand.parameters < best.parameters)) {
      result.selected = i;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Evaluation evaluate(const Model& model, const Corpus& corpus, std::span<const StepRef> refs,
                    const LossSetup& setup) {
  if (refs.empty()) throw ConfigError("evaluate: empty test set");
  if (setup.reaction_sets.empty()) throw ConfigError("evaluate: no reaction set configured");
  ContextCache cache(corpus, setup);
  const Law law = make_law(model);
  std::vector<const LoadStep*> steps;
  std::vector<const ExperimentContext*> contexts;
  for (const auto& ref : refs) {
    steps.push_back(&corpus.fetch(ref, Access::Evaluation));
    contexts.push_back(&cache.get(ref.experiment));
  }

  Evaluation out;
  out.steps.resize(refs.size());
  parallel_for(refs.size(), setup.exec, [&](std::size_t i) {
    const Mesh& mesh = corpus.experiment(refs[i].experiment).mesh;
    const auto& ctx = *contexts[i];
    const LoadStep& step = *steps[i];
    StepEvaluation ev;
    ev.ref = refs[i];
    ev.report = equilibrium_loss(mesh, ctx.quad, law, step, ctx.part, setup.lambda_r);
    const auto& grip = ctx.part.reactions.front();
    for (int a : grip.nodes) {
      ev.applied_displacement += step.displacements[static_cast<std::size_t>(a)].y();
      ev.predicted += ev.report.forces[static_cast<std::size_t>(a)];
    }
    ev.applied_displacement /= static_cast<double>(grip.nodes.size());
    ev.measured = step.reactions.at(grip.name).force;
    out.steps[i] = std::move(ev);
  });

  std::vector<double> inner, boundary, loss;
  for (const auto& s : out.steps) {
    inner.push_back(s.report.inner_residual);
    boundary.push_back(s.report.boundary_residual);
    loss.push_back(s.report.loss);
  }
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  out.aggregates = {mean(inner), median(inner), mean(boundary), median(boundary), mean(loss), median(loss)};
  return out;
}

// ---------------------------------------------------------------------------
// Continuity scan

std::optional<double> ContinuityScan::jump_ratio() const {
  if (!max_jump || !mean_increment) return std::nullopt;
  if (*mean_increment == 0.0) return *max_jump == 0.0 ? std::optional<double>(0.0) : std::nullopt;
  return *max_jump / *mean_increment;
}

ContinuityScan continuity_scan(const Model& model, const Mesh& mesh, std::span<const double> program, int n_substeps,
                               const SolverOptions& options) {
  if (n_substeps < 1) throw ConfigError("continuity scan needs at least one substep");
  validate(LoadProgram{StripGeometry{}, {program.begin(), program.end()}});
  const double last = program.back();
  ContinuityScan scan;
  for (int i = 1; i <= n_substeps; ++i) {
    scan.stretches.push_back(n_substeps == 1 ? last : 1.0 + (last - 1.0) * i / n_substeps);
  }
  const Dataset data = forward_solve(mesh, make_law(model), scan.stretches, options);
  for (const auto& step : data.steps) scan.reactions.push_back(step.reactions.at("top").force);
  if (scan.reactions.size() >= 2) {
    double max_jump = 0.0;
    double total = 0.0;
    for (std::size_t i = 1; i < scan.reactions.size(); ++i) {
      const double jump = std::abs(scan.reactions[i].y() - scan.reactions[i - 1].y());
      max_jump = std::max(max_jump, jump);
      total += jump;
    }
    scan.max_jump = max_jump;
    scan.mean_increment = total / static_cast<double>(scan.reactions.size() - 1);
  }
  return scan;
}

}  // namespace hyperfit
