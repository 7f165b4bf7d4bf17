#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hyperfit/datagen.hpp"
#include "hyperfit/equilibrium.hpp"
#include "hyperfit/error.hpp"
#include "hyperfit/material.hpp"
#include "hyperfit/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace hyperfit;
using hyperfit::cli::RunConfig;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitNumerical = 4;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  return in;
}

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
  const auto p = cfg.output_dir / name;
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  return out;
}

void require_output_dir(const RunConfig& cfg) {
  if (!fs::is_directory(cfg.output_dir))
    throw ConfigError("output directory '" + cfg.output_dir.string() + "' does not exist");
}

Corpus load_corpus(const RunConfig& cfg) {
  std::vector<Experiment> ex;
  for (const auto& f : cli::experiment_files(cfg)) {
    auto mesh_in = open_in(f.mesh);
    auto data_in = open_in(f.dataset);
    Experiment e{f.name, load_mesh(mesh_in), load_dataset(data_in)};
    for (const auto& s : e.data.steps) validate_step(e.mesh, s);
    ex.push_back(std::move(e));
  }
  if (ex.empty()) throw ConfigError("no experiments configured");
  return Corpus(std::move(ex));
}

Split make_split(const RunConfig& cfg, const Corpus& corpus) {
  const auto source = corpus.find(cfg.split_source);
  if (!source) throw ConfigError("split source '" + cfg.split_source + "' is not a configured experiment");
  SplitConfig sc = cfg.split;
  sc.source = *source;
  const auto counts = corpus.step_counts();
  return split_dataset(counts, sc);
}

Model load_model_file(const RunConfig& cfg) {
  if (!cfg.model_in) throw ConfigError("this command needs a model (--model-in or \"model_in\")");
  auto in = open_in(*cfg.model_in);
  return load_model(in);
}

void write_model(const RunConfig& cfg, const Model& model) {
  auto out = open_out(cfg, cfg.model_out);
  save_model(model, out);
}

void write_history(const RunConfig& cfg, const std::vector<HistoryRow>& history) {
  auto out = open_out(cfg, "history.csv");
  out << "epoch,train_loss,val_loss\n";
  for (const auto& h : history) out << h.epoch << ',' << num(h.train_loss) << ',' << num(h.val_loss) << '\n';
}

/// metrics.csv (aggregates), curve.csv (force-displacement per step) and residuals.csv (per-node
/// forces of the last evaluated step).
void write_evaluation(const RunConfig& cfg, const Corpus& corpus, const Evaluation& ev) {
  {
    auto out = open_out(cfg, "metrics.csv");
    const auto& a = ev.aggregates;
    out << "statistic,inner_residual,boundary_residual,loss\n";
    out << "mean," << num(a.mean_inner) << ',' << num(a.mean_boundary) << ',' << num(a.mean_loss) << '\n';
    out << "median," << num(a.median_inner) << ',' << num(a.median_boundary) << ',' << num(a.median_loss) << '\n';
  }
  {
    auto out = open_out(cfg, "curve.csv");
    out << "experiment,step_id,displacement,measured_fx,measured_fy,predicted_fx,predicted_fy,inner_residual,"
           "boundary_residual,loss\n";
    for (const auto& s : ev.steps) {
      out << corpus.experiment(s.ref.experiment).name << ',' << s.report.step_id << ',' << num(s.applied_displacement)
          << ',' << num(s.measured.x()) << ',' << num(s.measured.y()) << ',' << num(s.predicted.x()) << ','
          << num(s.predicted.y()) << ',' << num(s.report.inner_residual) << ',' << num(s.report.boundary_residual)
          << ',' << num(s.report.loss) << '\n';
    }
  }
  const auto& last = ev.steps.back();
  auto out = open_out(cfg, "residuals.csv");
  write_force_csv(corpus.experiment(last.ref.experiment).mesh, last.report.forces, out);
}

Evaluation evaluate_held_out(const RunConfig& cfg, const Model& model, const Corpus& corpus, const Split& split) {
  const auto& refs = split.test.empty() ? split.val : split.test;
  if (refs.empty()) throw ConfigError("nothing to evaluate: the split has no test or validation steps");
  return evaluate(model, corpus, refs, cfg.loss);
}

void print_aggregates(const char* label, const Evaluation& ev) {
  std::cout << label << ": " << ev.steps.size() << " steps, mean loss " << num(ev.aggregates.mean_loss)
            << ", median inner residual " << num(ev.aggregates.median_inner) << '\n';
}

int cmd_generate(const RunConfig& cfg) {
  require_output_dir(cfg);
  const auto& g = cfg.generate;
  validate(g.material);
  for (const auto& p : g.programs) {
    validate(p.program);
    const Mesh mesh = generate_mesh(p.program.geometry);
    const Dataset clean = forward_solve(mesh, g.material, cfg.mode, p.program.stretches, g.solver);
    NoiseSpec noise = g.noise;
    const Dataset data = add_noise(clean, noise);
    {
      auto out = open_out(cfg, p.name + ".mesh.json");
      save_mesh(mesh, out);
    }
    {
      auto out = open_out(cfg, p.name + ".dataset.json");
      save_dataset(data, out);
    }
    {
      const nlohmann::json truth{{"material", cli::material_json(g.material)},
                                 {"geometry", cli::geometry_json(p.program.geometry)},
                                 {"stretches", p.program.stretches},
                                 {"mode", to_string(cfg.mode)},
                                 {"noise", {{"sigma_u", noise.sigma_u}, {"sigma_r", noise.sigma_r}, {"seed", noise.seed}}}};
      auto out = open_out(cfg, p.name + ".truth.json");
      out << truth.dump(2) << '\n';
    }
    std::cout << p.name << ": " << data.steps.size() << " steps, max local stretch "
              << num(max_principal_stretch(mesh, clean, cfg.mode)) << '\n';
  }
  return 0;
}

int cmd_split(const RunConfig& cfg) {
  require_output_dir(cfg);
  const Corpus corpus = load_corpus(cfg);
  const Split split = make_split(cfg, corpus);
  auto out = open_out(cfg, "split.csv");
  out << "experiment,step,step_id,role\n";
  std::vector<std::pair<StepRef, const char*>> rows;
  for (const auto& r : split.train) rows.emplace_back(r, "train");
  for (const auto& r : split.val) rows.emplace_back(r, "val");
  for (const auto& r : split.test) rows.emplace_back(r, "test");
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [r, role] : rows)
    out << corpus.experiment(r.experiment).name << ',' << r.step << ','
        << corpus.experiment(r.experiment).data.steps.at(r.step).step_id << ',' << role << '\n';
  std::cout << "train " << split.train.size() << ", val " << split.val.size() << ", test " << split.test.size() << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  require_output_dir(cfg);
  const Corpus corpus = load_corpus(cfg);
  const Split split = make_split(cfg, corpus);
  const Model init = cfg.init.kind == "neo_hookean"
                         ? Model{NeoHookeanModel::from_moduli(cfg.init.mu, cfg.init.lambda, cfg.mode)}
                         : Model{PannModel::initialized(cfg.init.arch, cfg.optim.seed, cfg.mode)};
  const TrainResult r = train(init, corpus, split, cfg.loss, cfg.optim);
  write_model(cfg, r.model);
  write_history(cfg, r.history);
  const Evaluation ev = evaluate_held_out(cfg, r.model, corpus, split);
  write_evaluation(cfg, corpus, ev);
  std::cout << "best epoch " << r.best_epoch << ", validation loss " << num(r.best_val_loss) << ", min energy "
            << num(r.min_energy) << '\n';
  print_aggregates("test", ev);
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  require_output_dir(cfg);
  const Corpus corpus = load_corpus(cfg);
  const Split split = make_split(cfg, corpus);
  const SweepResult r = sweep(cfg.sweep_archs, cfg.mode, corpus, split, cfg.loss, cfg.optim);
  {
    auto out = open_out(cfg, "sweep.csv");
    out << "arch_id,params,train_loss,val_loss,selected\n";
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      const auto& e = r.entries[i];
      out << i << ',' << e.parameters << ',' << num(e.train_loss) << ',' << num(e.val_loss) << ','
          << (i == r.selected ? 1 : 0) << '\n';
    }
  }
  const auto& best = r.runs[r.selected];
  write_model(cfg, best.model);
  write_history(cfg, best.history);
  const Evaluation ev = evaluate_held_out(cfg, best.model, corpus, split);
  write_evaluation(cfg, corpus, ev);
  std::cout << "selected architecture " << r.selected << " (" << r.entries[r.selected].parameters
            << " parameters), validation loss " << num(r.entries[r.selected].val_loss) << '\n';
  print_aggregates("test", ev);
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  require_output_dir(cfg);
  const Model model = load_model_file(cfg);
  const Corpus corpus = load_corpus(cfg);
  const Split split = make_split(cfg, corpus);
  const Evaluation ev = evaluate_held_out(cfg, model, corpus, split);
  write_evaluation(cfg, corpus, ev);
  print_aggregates("test", ev);
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

int cmd_predict(const RunConfig& cfg) {
  require_output_dir(cfg);
  const Model model = load_model_file(cfg);
  if (!cfg.predict_input) throw ConfigError("predict needs an input CSV (--input or \"predict\": {\"input\"})");
  auto in = open_in(*cfg.predict_input);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"F11", "F12", "F21", "F22"})
    throw ConfigError("predict input must start with the header F11,F12,F21,F22");
  const Law law = make_law(model);
  auto out = open_out(cfg, "predictions.csv");
  out << "F11,F12,F21,F22,W,P11,P12,P21,P22\n";
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw ConfigError("predict input row " + std::to_string(row) + ": expected 4 values");
    Mat2 f2;
    try {
      f2 << std::stod(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]);
    } catch (const std::exception&) {
      throw ConfigError("predict input row " + std::to_string(row) + ": not a number");
    }
    const Mat3 f = complete_out_of_plane(f2, law.mode);
    const double w = law.energy(f);
    const Mat3 p = law.stress(f);
    out << num(f2(0, 0)) << ',' << num(f2(0, 1)) << ',' << num(f2(1, 0)) << ',' << num(f2(1, 1)) << ',' << num(w) << ','
        << num(p(0, 0)) << ',' << num(p(0, 1)) << ',' << num(p(1, 0)) << ',' << num(p(1, 1)) << '\n';
  }
  return 0;
}

/// Stretch targets recovered from the mean axial displacement of the "top" grip.
std::vector<double> recorded_stretches(const Experiment& e) {
  const auto& top = e.mesh.node_set("top");
  double lo = e.mesh.nodes.front().y(), hi = lo;
  for (const auto& n : e.mesh.nodes) {
    lo = std::min(lo, n.y());
    hi = std::max(hi, n.y());
  }
  std::vector<double> out;
  for (const auto& s : e.data.steps) {
    double uy = 0.0;
    for (auto n : top) uy += s.displacements[static_cast<std::size_t>(n)].y();
    out.push_back(1.0 + uy / static_cast<double>(top.size()) / (hi - lo));
  }
  return out;
}

int cmd_continuity_scan(const RunConfig& cfg) {
  require_output_dir(cfg);
  const Model model = load_model_file(cfg);
  const Corpus corpus = load_corpus(cfg);
  const std::string name = cfg.scan.experiment.empty() ? cfg.split_source : cfg.scan.experiment;
  const auto idx = corpus.find(name);
  if (!idx) throw ConfigError("scan experiment '" + name + "' is not configured");
  const auto& e = corpus.experiment(*idx);
  const auto program = cfg.scan.stretches.empty() ? recorded_stretches(e) : cfg.scan.stretches;
  const ContinuityScan scan = continuity_scan(model, e.mesh, program, cfg.scan.substeps);
  {
    auto out = open_out(cfg, "continuity.csv");
    out << "stretch,reaction_x,reaction_y\n";
    for (std::size_t i = 0; i < scan.stretches.size(); ++i)
      out << num(scan.stretches[i]) << ',' << num(scan.reactions[i].x()) << ',' << num(scan.reactions[i].y()) << '\n';
  }
  std::cout << scan.stretches.size() << " samples";
  if (scan.max_jump)
    std::cout << ", max jump " << num(*scan.max_jump) << " N, mean increment " << num(*scan.mean_increment) << " N";
  if (const auto ratio = scan.jump_ratio()) std::cout << ", ratio " << num(*ratio);
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identify hyperelastic laws from full-field displacements and reaction forces"};
  app.require_subcommand(1);

  std::string config_path, output_dir, data_dir, mode, model_in, model_out, input;
  unsigned threads = 1;
  bool deterministic = false;
  std::optional<double> lambda_r, learning_rate;
  std::optional<int> max_epochs, substeps;
  std::optional<std::uint64_t> seed;

  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--output-dir", output_dir, "directory receiving all outputs (must exist)");
  app.add_option("--data-dir", data_dir, "directory holding <name>.mesh.json / <name>.dataset.json");
  app.add_option("--mode", mode, "plane_strain or incompressible_plane_stress");
  app.add_option("--threads", threads, "worker cap for assembly")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", deterministic, "sequential reduction (forces one worker)");
  app.add_option("--lambda-r", lambda_r, "reaction-term weight");
  app.add_option("--learning-rate", learning_rate, "Adam step size");
  app.add_option("--max-epochs", max_epochs, "epoch budget");
  app.add_option("--seed", seed, "initialization seed");
  app.add_option("--model-in", model_in, "model JSON to evaluate, predict or scan");
  app.add_option("--model-out", model_out, "file name of the written model inside the output directory");
  app.add_option("--input", input, "predict: CSV with header F11,F12,F21,F22");
  app.add_option("--substeps", substeps, "continuity-scan: number of samples");

  using Command = int (*)(const RunConfig&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands{
      {"generate", "synthesize experiments with a ground-truth material", cmd_generate},
      {"split", "write the train/val/test assignment", cmd_split},
      {"train", "fit one model", cmd_train},
      {"sweep", "fit every configured architecture and select on validation loss", cmd_sweep},
      {"evaluate", "equilibrium-gap metrics of a model on the held-out steps", cmd_evaluate},
      {"predict", "energy and stress for a list of in-plane F", cmd_predict},
      {"continuity-scan", "reaction curve of a model at many substeps", cmd_continuity_scan},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + std::string(e.what()));
      }
      cli::apply_json(cfg, doc);
    }
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!mode.empty()) cfg.mode = parse_kinematic_mode(mode);
    if (lambda_r) cfg.loss.lambda_r = *lambda_r;
    if (learning_rate) cfg.optim.learning_rate = *learning_rate;
    if (max_epochs) cfg.optim.max_epochs = *max_epochs;
    if (seed) cfg.optim.seed = *seed;
    if (!model_in.empty()) cfg.model_in = model_in;
    if (!model_out.empty()) cfg.model_out = model_out;
    if (!input.empty()) cfg.predict_input = input;
    if (substeps) cfg.scan.substeps = *substeps;
    cfg.loss.exec.threads = deterministic ? 1u : threads;

    for (const auto& [name, help, fn] : commands)
      if (app.got_subcommand(name)) return fn(cfg);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << " (last converged stretch " << num(e.last_converged_stretch())
              << ")\n";
    return kExitSolver;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << " (step " << e.step_id() << ", element " << e.element() << ")\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kExitConfig;
  }
}
